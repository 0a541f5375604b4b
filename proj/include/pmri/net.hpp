#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmri/fft.hpp"
#include "pmri/grid.hpp"
#include "pmri/pslr.hpp"
#include "pmri/rng.hpp"

namespace pmri {

/// Real activations: one row per channel, one column per pixel (row-major pixels).
using Activation = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Domain { KSpace, Image };

struct ConvLayerParams {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 3;
    /// out_channels x (in_channels * kernel * kernel); column (c * k + dy) * k + dx.
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;

    static ConvLayerParams zeros(std::size_t in, std::size_t out, std::size_t k) {
        if (k % 2 == 0) throw ValidationError("conv: kernel size must be odd");
        return {in, out, k, Eigen::MatrixXd::Zero(out, in * k * k), Eigen::VectorXd::Zero(out)};
    }
};

inline constexpr std::size_t kDenoiserLayers = 5;

/// Five conv layers, channel plan 2N -> w -> w -> w -> w -> 2N, ReLU between them.
struct DenoiserParams {
    std::array<ConvLayerParams, kDenoiserLayers> layers;

    std::size_t io_channels() const { return layers.front().in_channels; }
    std::size_t width() const { return layers.front().out_channels; }

    static DenoiserParams zeros(std::size_t coils, std::size_t width, std::size_t kernel = 3) {
        if (coils == 0 || width == 0) throw ValidationError("denoiser: coils and width must be >= 1");
        DenoiserParams p;
        const std::size_t io = 2 * coils;
        for (std::size_t l = 0; l < kDenoiserLayers; ++l) {
            const std::size_t in = l == 0 ? io : width;
            const std::size_t out = l + 1 == kDenoiserLayers ? io : width;
            p.layers[l] = ConvLayerParams::zeros(in, out, kernel);
        }
        return p;
    }

    void validate() const {
        for (std::size_t l = 0; l + 1 < kDenoiserLayers; ++l)
            if (layers[l].out_channels != layers[l + 1].in_channels)
                throw DimensionError("denoiser: adjacent layer channel counts differ");
        if (layers.front().in_channels != layers.back().out_channels || layers.front().in_channels % 2 != 0)
            throw DimensionError("denoiser: first/last channel counts must equal 2N");
    }
};

/// Learnable state of the unrolled k-space or hybrid network. The same parameters
/// are reused by every unroll.
struct NetParams {
    DenoiserParams kspace;
    std::optional<DenoiserParams> image;  ///< present only for the hybrid network
    double log_beta_k = 0.0;
    double log_beta_i = 0.0;
    bool train_beta = true;
    std::size_t unrolls = 5;

    bool hybrid() const { return image.has_value(); }
    double beta_k() const { return std::exp(log_beta_k); }
    double beta_i() const { return std::exp(log_beta_i); }
    std::size_t coils() const { return kspace.io_channels() / 2; }

    void validate() const {
        if (unrolls == 0) throw ValidationError("net: unroll count must be >= 1");
        kspace.validate();
        if (image) {
            image->validate();
            if (image->io_channels() != kspace.io_channels())
                throw DimensionError("net: image and k-space denoisers disagree on coil count");
        }
    }
};

/// Zero-initialized parameters; see init_params for the trainable starting point.
inline NetParams zero_params(std::size_t coils, std::size_t width, bool hybrid, std::size_t unrolls = 5,
                             std::size_t kernel = 3) {
    NetParams p;
    p.kspace = DenoiserParams::zeros(coils, width, kernel);
    if (hybrid) p.image = DenoiserParams::zeros(coils, width, kernel);
    p.unrolls = unrolls;
    return p;
}

/// He-uniform kernels drawn from the seed, zero biases, and a zero final layer so
/// every denoiser starts as the identity.
inline NetParams init_params(std::size_t coils, std::size_t width, bool hybrid, std::uint64_t seed,
                             std::size_t unrolls = 5, double beta_init = 1.0, std::size_t kernel = 3) {
    if (!(beta_init > 0.0)) throw ValidationError("net: initial beta must be > 0");
    NetParams p = zero_params(coils, width, hybrid, unrolls, kernel);
    Xoshiro256 rng(seed);
    auto fill = [&](DenoiserParams& d) {
        for (std::size_t l = 0; l + 1 < kDenoiserLayers; ++l) {
            auto& layer = d.layers[l];
            const double bound = std::sqrt(6.0 / static_cast<double>(layer.weight.cols()));
            for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
                for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
                    layer.weight(r, c) = rng.uniform(-bound, bound);
        }
    };
    fill(p.kspace);
    if (p.image) fill(*p.image);
    p.log_beta_k = std::log(beta_init);
    p.log_beta_i = std::log(beta_init);
    return p;
}

/// Visits every trainable tensor of `p` in a fixed order, paired with the matching
/// tensor of `g`.
template <class F>
void for_each_tensor(NetParams& p, NetParams& g, F&& f) {
    auto denoiser = [&](DenoiserParams& a, DenoiserParams& b) {
        for (std::size_t l = 0; l < kDenoiserLayers; ++l) {
            f(std::span<double>(a.layers[l].weight.data(), static_cast<std::size_t>(a.layers[l].weight.size())),
              std::span<double>(b.layers[l].weight.data(), static_cast<std::size_t>(b.layers[l].weight.size())));
            f(std::span<double>(a.layers[l].bias.data(), static_cast<std::size_t>(a.layers[l].bias.size())),
              std::span<double>(b.layers[l].bias.data(), static_cast<std::size_t>(b.layers[l].bias.size())));
        }
    };
    denoiser(p.kspace, g.kspace);
    if (p.image) denoiser(*p.image, *g.image);
    if (p.train_beta) {
        f(std::span<double>(&p.log_beta_k, 1), std::span<double>(&g.log_beta_k, 1));
        if (p.image) f(std::span<double>(&p.log_beta_i, 1), std::span<double>(&g.log_beta_i, 1));
    }
}

inline std::size_t parameter_count(const NetParams& p) {
    NetParams a = p, b = p;
    std::size_t n = 0;
    for_each_tensor(a, b, [&](std::span<double> t, std::span<double>) { n += t.size(); });
    return n;
}

/// Gradient container with the shapes of `p`, all zero.
inline NetParams zeros_like(const NetParams& p) {
    NetParams g = p;
    NetParams scratch = p;
    for_each_tensor(g, scratch, [](std::span<double> t, std::span<double>) {
        for (double& v : t) v = 0.0;
    });
    g.log_beta_k = 0.0;
    g.log_beta_i = 0.0;
    return g;
}

// ---------------------------------------------------------------------------
// Convolution layers
// ---------------------------------------------------------------------------

namespace detail {

// Zero-padded patches: row (c, dy, dx), column = pixel.
inline Activation im2col(const Activation& x, std::size_t h, std::size_t w, std::size_t k) {
    const std::size_t channels = static_cast<std::size_t>(x.rows());
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    Activation cols = Activation::Zero(static_cast<Eigen::Index>(channels * k * k), static_cast<Eigen::Index>(h * w));
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t dy = 0; dy < k; ++dy)
            for (std::size_t dx = 0; dx < k; ++dx) {
                double* dst = cols.row(static_cast<Eigen::Index>((c * k + dy) * k + dx)).data();
                const double* src = x.row(static_cast<Eigen::Index>(c)).data();
                const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(dy) - pad;
                const std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(dx) - pad;
                for (std::size_t r = 0; r < h; ++r) {
                    const std::ptrdiff_t sr = static_cast<std::ptrdiff_t>(r) + oy;
                    if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(h)) continue;
                    const std::size_t c_lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -ox));
                    const std::size_t c_hi = static_cast<std::size_t>(
                        std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(w), static_cast<std::ptrdiff_t>(w) - ox));
                    for (std::size_t cc = c_lo; cc < c_hi; ++cc)
                        dst[r * w + cc] = src[static_cast<std::size_t>(sr) * w + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(cc) + ox)];
                }
            }
    return cols;
}

inline Activation col2im(const Activation& cols, std::size_t channels, std::size_t h, std::size_t w, std::size_t k) {
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    Activation x = Activation::Zero(static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(h * w));
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t dy = 0; dy < k; ++dy)
            for (std::size_t dx = 0; dx < k; ++dx) {
                const double* src = cols.row(static_cast<Eigen::Index>((c * k + dy) * k + dx)).data();
                double* dst = x.row(static_cast<Eigen::Index>(c)).data();
                const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(dy) - pad;
                const std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(dx) - pad;
                for (std::size_t r = 0; r < h; ++r) {
                    const std::ptrdiff_t sr = static_cast<std::ptrdiff_t>(r) + oy;
                    if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(h)) continue;
                    const std::size_t c_lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -ox));
                    const std::size_t c_hi = static_cast<std::size_t>(
                        std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(w), static_cast<std::ptrdiff_t>(w) - ox));
                    for (std::size_t cc = c_lo; cc < c_hi; ++cc)
                        dst[static_cast<std::size_t>(sr) * w + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(cc) + ox)] +=
                            src[r * w + cc];
                }
            }
    return x;
}

inline Activation conv_forward(const ConvLayerParams& layer, const Activation& x, std::size_t h, std::size_t w) {
    if (static_cast<std::size_t>(x.rows()) != layer.in_channels)
        throw DimensionError("conv: input has " + std::to_string(x.rows()) + " channels, layer expects " +
                             std::to_string(layer.in_channels));
    Activation y = layer.weight * im2col(x, h, w, layer.kernel);
    y.colwise() += layer.bias;
    return y;
}

// Accumulates weight/bias gradients into `grad` and returns the input gradient.
inline Activation conv_backward(const ConvLayerParams& layer, const Activation& x, const Activation& dy,
                                std::size_t h, std::size_t w, ConvLayerParams& grad) {
    const Activation cols = im2col(x, h, w, layer.kernel);
    grad.weight.noalias() += dy * cols.transpose();
    grad.bias += dy.rowwise().sum();
    const Activation dcols = layer.weight.transpose() * dy;
    return col2im(dcols, layer.in_channels, h, w, layer.kernel);
}

}  // namespace detail

/// Complex N-channel grid as 2N real channels: (Re x_1, Im x_1, Re x_2, Im x_2, ...).
inline Activation to_real_channels(const MultiChannelGrid& x) {
    Activation a(static_cast<Eigen::Index>(2 * x.channels()), static_cast<Eigen::Index>(x.plane()));
    for (std::size_t i = 0; i < x.channels(); ++i) {
        auto c = x.channel(i);
        for (std::size_t k = 0; k < c.size(); ++k) {
            a(static_cast<Eigen::Index>(2 * i), static_cast<Eigen::Index>(k)) = c[k].real();
            a(static_cast<Eigen::Index>(2 * i + 1), static_cast<Eigen::Index>(k)) = c[k].imag();
        }
    }
    return a;
}

inline MultiChannelGrid from_real_channels(const Activation& a, std::size_t h, std::size_t w) {
    MultiChannelGrid x(static_cast<std::size_t>(a.rows()) / 2, h, w);
    for (std::size_t i = 0; i < x.channels(); ++i) {
        auto c = x.channel(i);
        for (std::size_t k = 0; k < c.size(); ++k)
            c[k] = {a(static_cast<Eigen::Index>(2 * i), static_cast<Eigen::Index>(k)),
                    a(static_cast<Eigen::Index>(2 * i + 1), static_cast<Eigen::Index>(k))};
    }
    return x;
}

/// Layer inputs of one denoiser evaluation; the ReLU masks are recovered from them.
struct DenoiserTape {
    std::array<Activation, kDenoiserLayers> inputs;
    std::size_t height = 0;
    std::size_t width = 0;
};

/// D(x) = x + CNN(x) on the 2N-real-channel view of x. Zero padding, stride 1.
/// `domain` only labels the data; both domains use the same architecture.
inline MultiChannelGrid denoiser_forward(const MultiChannelGrid& x, const DenoiserParams& p, Domain domain,
                                         DenoiserTape* tape = nullptr) {
    (void)domain;
    if (2 * x.channels() != p.io_channels())
        throw DimensionError("denoiser: grid has " + std::to_string(x.channels()) + " coils, denoiser expects " +
                             std::to_string(p.io_channels() / 2));
    const std::size_t h = x.height(), w = x.width();
    Activation a = to_real_channels(x);
    for (std::size_t l = 0; l < kDenoiserLayers; ++l) {
        if (tape) tape->inputs[l] = a;
        a = detail::conv_forward(p.layers[l], a, h, w);
        if (l + 1 < kDenoiserLayers) a = a.cwiseMax(0.0);
    }
    if (tape) {
        tape->height = h;
        tape->width = w;
    }
    MultiChannelGrid out = from_real_channels(a, h, w);
    for (std::size_t k = 0; k < out.size(); ++k) out.data()[k] += x.data()[k];
    return out;
}

/// Reverse pass of denoiser_forward. `g` is the complex gradient dL/dRe + i dL/dIm
/// of the output; returns the same for the input and accumulates into `grad`.
inline MultiChannelGrid denoiser_backward(const MultiChannelGrid& g, const DenoiserParams& p,
                                          const DenoiserTape& tape, DenoiserParams& grad) {
    const std::size_t h = tape.height, w = tape.width;
    Activation d = to_real_channels(g);
    for (std::size_t l = kDenoiserLayers; l-- > 0;) {
        d = detail::conv_backward(p.layers[l], tape.inputs[l], d, h, w, grad.layers[l]);
        if (l > 0) d = (tape.inputs[l].array() > 0.0).select(d, 0.0);
    }
    MultiChannelGrid gx = from_real_channels(d, h, w);
    for (std::size_t k = 0; k < gx.size(); ++k) gx.data()[k] += g.data()[k];
    return gx;
}

// ---------------------------------------------------------------------------
// Data-consistency blocks
// ---------------------------------------------------------------------------

/// K-space DC block; identical closed form to dc_solve.
inline MultiChannelGrid dc_block_k(const MultiChannelGrid& z, const MultiChannelGrid& b, const SamplingMask& mask,
                                   double beta_k) {
    return dc_solve(z, b, mask, beta_k);
}

/// Minimizer of ||A x - b||^2 + beta_k ||x - z_k||^2 + beta_i ||x - fft2c(z_img)||^2,
/// evaluated elementwise. beta_i = 0 reduces to dc_block_k.
inline MultiChannelGrid dc_block_hybrid_kspace(const MultiChannelGrid& z_k, const MultiChannelGrid& z_i_hat,
                                               const MultiChannelGrid& b, const SamplingMask& mask, double beta_k,
                                               double beta_i) {
    if (!(beta_k >= 0.0 && beta_i >= 0.0 && beta_k + beta_i > 0.0))
        throw ValidationError("dc_block_hybrid: weights must be nonnegative with a positive sum");
    if (!z_k.same_shape(b) || !z_i_hat.same_shape(b)) throw DimensionError("dc_block_hybrid: shapes differ");
    if (b.height() != mask.height() || b.width() != mask.width())
        throw DimensionError("dc_block_hybrid: mask shape differs from data");
    MultiChannelGrid x(b.channels(), b.height(), b.width());
    const double kept_scale = 1.0 / (1.0 + beta_k + beta_i);
    const double free_scale = beta_i / (beta_k + beta_i);
    const std::size_t plane = b.plane();
    for (std::size_t ch = 0; ch < b.channels(); ++ch) {
        auto xc = x.channel(ch);
        auto zk = z_k.channel(ch);
        auto zi = z_i_hat.channel(ch);
        auto bc = b.channel(ch);
        for (std::size_t k = 0; k < plane; ++k)
            xc[k] = mask.kept(k) ? bc[k] + (beta_k * (zk[k] - bc[k]) + beta_i * (zi[k] - bc[k])) * kept_scale
                                 : zk[k] + free_scale * (zi[k] - zk[k]);
    }
    return x;
}

/// Hybrid DC block taking the image-domain prior in the image domain.
inline MultiChannelGrid dc_block_hybrid(const MultiChannelGrid& z_k, const MultiChannelGrid& z_image,
                                        const MultiChannelGrid& b, const SamplingMask& mask, double beta_k,
                                        double beta_i) {
    if (!(beta_k > 0.0 && beta_i > 0.0) && !(beta_k > 0.0 && beta_i == 0.0))
        throw ValidationError("dc_block_hybrid: beta_k must be > 0 and beta_i >= 0");
    return dc_block_hybrid_kspace(z_k, fft2c(z_image), b, mask, beta_k, beta_i);
}

// ---------------------------------------------------------------------------
// Unrolled networks
// ---------------------------------------------------------------------------

/// Power of two nearest to the RMS of b (1 when b vanishes). Inputs are divided by
/// it before the first unroll and outputs multiplied back, which is exact in binary.
inline double input_scale(const MultiChannelGrid& b) {
    const double rms = std::sqrt(squared_norm(b.data()) / static_cast<double>(b.size()));
    if (!(rms > 0.0) || !std::isfinite(rms)) return 1.0;
    return std::exp2(std::round(std::log2(rms)));
}

struct UnrollTape {
    MultiChannelGrid input;  ///< iterate entering the unroll
    DenoiserTape kspace;
    DenoiserTape image;
    MultiChannelGrid z_k;
    MultiChannelGrid z_i_hat;
    MultiChannelGrid output;
};

/// Everything backward needs from one forward pass.
struct NetTape {
    double scale = 1.0;
    MultiChannelGrid b;  ///< scaled measurements
    SamplingMask mask;
    std::vector<UnrollTape> unrolls;
    bool valid = false;
};

namespace detail {

inline MultiChannelGrid scaled(const MultiChannelGrid& x, double s) {
    MultiChannelGrid y = x;
    for (auto& v : y.data()) v *= s;
    return y;
}

inline MultiChannelGrid run_network(const MultiChannelGrid& b, const SamplingMask& mask, const NetParams& p,
                                    NetTape* tape) {
    p.validate();
    if (2 * b.channels() != p.kspace.io_channels())
        throw DimensionError("net: measurement coil count does not match parameters");
    if (b.height() != mask.height() || b.width() != mask.width())
        throw DimensionError("net: mask shape differs from data");
    const double s = input_scale(b);
    const MultiChannelGrid bs = scaled(b, 1.0 / s);
    const double beta_k = p.beta_k(), beta_i = p.beta_i();
    if (tape) {
        tape->scale = s;
        tape->b = bs;
        tape->mask = mask;
        tape->unrolls.assign(p.unrolls, {});
    }
    MultiChannelGrid x = bs;
    for (std::size_t k = 0; k < p.unrolls; ++k) {
        UnrollTape* u = tape ? &tape->unrolls[k] : nullptr;
        if (u) u->input = x;
        MultiChannelGrid z_k = denoiser_forward(x, p.kspace, Domain::KSpace, u ? &u->kspace : nullptr);
        if (p.hybrid()) {
            MultiChannelGrid z_img = denoiser_forward(ifft2c(x), *p.image, Domain::Image, u ? &u->image : nullptr);
            MultiChannelGrid z_i_hat = fft2c(std::move(z_img));
            x = dc_block_hybrid_kspace(z_k, z_i_hat, bs, mask, beta_k, beta_i);
            if (u) u->z_i_hat = std::move(z_i_hat);
        } else {
            x = dc_block_k(z_k, bs, mask, beta_k);
        }
        if (u) {
            u->z_k = std::move(z_k);
            u->output = x;
        }
    }
    if (tape) tape->valid = true;
    return scaled(x, s);
}

}  // namespace detail

/// K-space network: K repetitions of (k-space denoiser, DC block) from zero-filled b.
inline MultiChannelGrid forward_kspace_net(const MultiChannelGrid& b, const SamplingMask& mask, const NetParams& p,
                                           NetTape* tape = nullptr) {
    if (p.hybrid()) throw ValidationError("forward_kspace_net: parameters carry an image denoiser");
    return detail::run_network(b, mask, p, tape);
}

/// Hybrid network: k-space and image-domain denoisers in parallel, merged by the hybrid DC block.
inline MultiChannelGrid forward_hybrid_net(const MultiChannelGrid& b, const SamplingMask& mask, const NetParams& p,
                                           NetTape* tape = nullptr) {
    if (!p.hybrid()) throw ValidationError("forward_hybrid_net: parameters lack an image denoiser");
    return detail::run_network(b, mask, p, tape);
}

/// Dispatches on the architecture stored in `p`.
inline MultiChannelGrid forward_net(const MultiChannelGrid& b, const SamplingMask& mask, const NetParams& p,
                                    NetTape* tape = nullptr) {
    return detail::run_network(b, mask, p, tape);
}

/// Reverse-mode gradient of a scalar loss through every unroll, DC block, FFT and
/// denoiser. `loss_grad` is dL/dRe + i dL/dIm of the network output (unscaled).
inline NetParams backward(const MultiChannelGrid& loss_grad, const NetTape& tape, const NetParams& p) {
    if (!tape.valid || tape.unrolls.size() != p.unrolls)
        throw ValidationError("backward: no cached forward pass for these parameters");
    if (!loss_grad.same_shape(tape.b)) throw DimensionError("backward: gradient shape differs from output");
    NetParams grad = zeros_like(p);
    const double beta_k = p.beta_k(), beta_i = p.beta_i();
    const SamplingMask& mask = tape.mask;
    const std::size_t plane = tape.b.plane();
    const std::size_t coils = tape.b.channels();

    MultiChannelGrid g = detail::scaled(loss_grad, tape.scale);
    double d_beta_k = 0.0, d_beta_i = 0.0;
    for (std::size_t k = p.unrolls; k-- > 0;) {
        const UnrollTape& u = tape.unrolls[k];
        MultiChannelGrid g_zk(coils, tape.b.height(), tape.b.width());
        MultiChannelGrid g_zi(coils, tape.b.height(), tape.b.width());
        for (std::size_t ch = 0; ch < coils; ++ch) {
            auto gc = g.channel(ch);
            auto zk = u.z_k.channel(ch);
            auto xo = u.output.channel(ch);
            auto gk = g_zk.channel(ch);
            auto gi = g_zi.channel(ch);
            for (std::size_t q = 0; q < plane; ++q) {
                const bool kept = mask.kept(q);
                if (!p.hybrid()) {
                    const double denom = 1.0 + beta_k;
                    if (kept) {
                        gk[q] = gc[q] * (beta_k / denom);
                        // dx/dbeta_k = (z_k - x) / (1 + beta_k)
                        d_beta_k += std::real(std::conj(gc[q]) * (zk[q] - xo[q])) / denom;
                    } else {
                        gk[q] = gc[q];
                    }
                } else {
                    auto zi = u.z_i_hat.channel(ch);
                    const double denom = kept ? 1.0 + beta_k + beta_i : beta_k + beta_i;
                    gk[q] = gc[q] * (beta_k / denom);
                    gi[q] = gc[q] * (beta_i / denom);
                    d_beta_k += std::real(std::conj(gc[q]) * (zk[q] - xo[q])) / denom;
                    d_beta_i += std::real(std::conj(gc[q]) * (zi[q] - xo[q])) / denom;
                }
            }
        }
        MultiChannelGrid g_x = denoiser_backward(g_zk, p.kspace, u.kspace, grad.kspace);
        if (p.hybrid()) {
            // z_i_hat = F D_I(F^-1 x); the adjoint of the unitary F is F^-1.
            MultiChannelGrid g_img = denoiser_backward(ifft2c(std::move(g_zi)), *p.image, u.image, *grad.image);
            MultiChannelGrid g_from_image = fft2c(std::move(g_img));
            for (std::size_t q = 0; q < g_x.size(); ++q) g_x.data()[q] += g_from_image.data()[q];
        }
        g = std::move(g_x);  // the gradient reaching b through the first input is discarded
    }
    grad.log_beta_k = p.train_beta ? d_beta_k * beta_k : 0.0;
    grad.log_beta_i = p.train_beta && p.hybrid() ? d_beta_i * beta_i : 0.0;
    return grad;
}

}  // namespace pmri
