#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "pmri/metrics.hpp"
#include "pmri/net.hpp"
#include "pmri/sim.hpp"

namespace pmri {

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

/// One training or evaluation item.
struct Sample {
    MultiChannelGrid target;  ///< fully sampled, noiseless multi-coil k-space
    MultiChannelGrid b;       ///< zero-filled noisy measurements
    SamplingMask mask;
};

/// Recipe for a family of samples sharing one coil array. Every random choice of
/// item i derives from (base seed, i), so items can be produced independently.
struct DatasetSpec {
    std::size_t height = 64;
    std::size_t width = 64;
    SensitivitySpec sensitivities;
    MaskSpec mask;            ///< mask.seed is the base seed of per-item masks
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;   ///< phantoms and noise
    std::size_t count = 1;

    void validate() const {
        sensitivities.validate();
        mask.validate();
        if (!(noise_sigma >= 0.0)) throw ValidationError("dataset: noise sigma must be >= 0");
        if (count == 0) throw ValidationError("dataset: count must be >= 1");
    }
};

struct GroundTruth {
    ComplexGrid image;
    MultiChannelGrid sensitivities;
    Sample sample;
    bool mask_fallback = false;
};

inline GroundTruth make_item(const DatasetSpec& spec, const MultiChannelGrid& sens, std::size_t index) {
    GroundTruth g;
    g.image = make_phantom(random_phantom_spec(derive_seed(spec.seed, 2 * index), spec.height, spec.width));
    g.sensitivities = sens;
    MaskSpec ms = spec.mask;
    ms.seed = derive_seed(spec.mask.seed, index);
    auto mr = make_mask(ms, spec.height, spec.width);
    g.mask_fallback = mr.fallback;
    g.sample.mask = std::move(mr.mask);
    g.sample.target = fft2c(coil_images(g.image, sens));
    g.sample.b = acquire(g.image, sens, g.sample.mask, {spec.noise_sigma, derive_seed(spec.seed, 2 * index + 1)});
    return g;
}

inline std::vector<Sample> make_dataset(const DatasetSpec& spec) {
    spec.validate();
    const MultiChannelGrid sens = make_sensitivities(spec.sensitivities, spec.height, spec.width);
    std::vector<Sample> out;
    out.reserve(spec.count);
    for (std::size_t i = 0; i < spec.count; ++i) out.push_back(make_item(spec, sens, i).sample);
    return out;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

enum class LossDomain { KSpace, SosImage };

struct LossValue {
    double value = 0.0;
    MultiChannelGrid grad;  ///< dL/dRe + i dL/dIm of the prediction
};

/// Mean over all coils and locations of |pred - target|^2.
inline LossValue kspace_mse(const MultiChannelGrid& pred, const MultiChannelGrid& target) {
    if (!pred.same_shape(target)) throw DimensionError("loss: prediction and target shapes differ");
    LossValue l{0.0, MultiChannelGrid(pred.channels(), pred.height(), pred.width())};
    const double n = static_cast<double>(pred.size());
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const cplx d = pred.data()[k] - target.data()[k];
        l.value += std::norm(d);
        l.grad.data()[k] = (2.0 / n) * d;
    }
    l.value /= n;
    return l;
}

/// Mean over pixels of (SOS(F^-1 pred) - SOS(F^-1 target))^2.
inline LossValue sos_image_mse(const MultiChannelGrid& pred, const MultiChannelGrid& target) {
    if (!pred.same_shape(target)) throw DimensionError("loss: prediction and target shapes differ");
    const MultiChannelGrid img = ifft2c(pred);
    const ComplexGrid sp = sos_combine(img);
    const ComplexGrid st = sos_image(target);
    const double n = static_cast<double>(sp.size());
    LossValue l{0.0, MultiChannelGrid(pred.channels(), pred.height(), pred.width())};
    MultiChannelGrid g_img(pred.channels(), pred.height(), pred.width());
    for (std::size_t k = 0; k < sp.size(); ++k) {
        const double mag = sp.data()[k].real();
        const double d = mag - st.data()[k].real();
        l.value += d * d;
        if (mag > 0.0)
            for (std::size_t i = 0; i < pred.channels(); ++i)
                g_img.channel(i)[k] = (2.0 * d / n) * img.channel(i)[k] / mag;
    }
    l.value /= n;
    l.grad = fft2c(std::move(g_img));  // adjoint of the unitary inverse transform
    return l;
}

inline LossValue evaluate_loss(LossDomain domain, const MultiChannelGrid& pred, const MultiChannelGrid& target) {
    return domain == LossDomain::KSpace ? kspace_mse(pred, target) : sos_image_mse(pred, target);
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct AdamSettings {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam update over every trainable tensor of NetParams.
class Adam {
public:
    Adam(const NetParams& p, AdamSettings s) : settings_(s) {
        const std::size_t n = parameter_count(p);
        m_.assign(n, 0.0);
        v_.assign(n, 0.0);
    }

    void step(NetParams& p, NetParams& g) {
        ++t_;
        const double c1 = 1.0 - std::pow(settings_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(settings_.beta2, static_cast<double>(t_));
        std::size_t offset = 0;
        for_each_tensor(p, g, [&](std::span<double> w, std::span<double> dw) {
            for (std::size_t k = 0; k < w.size(); ++k, ++offset) {
                m_[offset] = settings_.beta1 * m_[offset] + (1.0 - settings_.beta1) * dw[k];
                v_[offset] = settings_.beta2 * v_[offset] + (1.0 - settings_.beta2) * dw[k] * dw[k];
                const double mhat = m_[offset] / c1;
                const double vhat = v_[offset] / c2;
                w[k] -= settings_.learning_rate * mhat / (std::sqrt(vhat) + settings_.epsilon);
            }
        });
    }

private:
    AdamSettings settings_;
    std::vector<double> m_, v_;
    std::uint64_t t_ = 0;
};

inline void accumulate(NetParams& into, NetParams& g, double scale) {
    std::vector<std::span<double>> dst;
    for_each_tensor(into, into, [&](std::span<double> t, std::span<double>) { dst.push_back(t); });
    std::size_t i = 0;
    NetParams scratch = g;
    for_each_tensor(g, scratch, [&](std::span<double> t, std::span<double>) {
        auto d = dst[i++];
        for (std::size_t k = 0; k < t.size(); ++k) d[k] += scale * t[k];
    });
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

enum class Architecture { KSpace, Hybrid };

struct TrainConfig {
    std::size_t epochs = 12;
    std::size_t batch_size = 2;
    AdamSettings adam;
    std::uint64_t seed = 0;
    LossDomain loss = LossDomain::KSpace;
    double validation_fraction = 0.1;
    std::size_t unrolls = 5;
    std::size_t width = 8;
    std::size_t kernel = 3;
    double beta_init = 1.0;
    bool train_beta = true;

    void validate() const {
        if (epochs == 0) throw ValidationError("train: epochs must be >= 1");
        if (batch_size == 0) throw ValidationError("train: batch_size must be >= 1");
        if (!(adam.learning_rate >= 0.0)) throw ValidationError("train: learning_rate must be >= 0");
        if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ValidationError("train: beta1 must be in [0, 1)");
        if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ValidationError("train: beta2 must be in [0, 1)");
        if (!(adam.epsilon > 0.0)) throw ValidationError("train: adam epsilon must be > 0");
        if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
            throw ValidationError("train: validation_fraction must be in [0, 1)");
        if (unrolls == 0) throw ValidationError("train: unrolls must be >= 1");
        if (width == 0) throw ValidationError("train: width must be >= 1");
        if (kernel % 2 == 0) throw ValidationError("train: kernel must be odd");
        if (!(beta_init > 0.0)) throw ValidationError("train: beta_init must be > 0");
    }
};

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double validation_loss = 0.0;  ///< NaN when no validation split
    double beta_k = 0.0;
    double beta_i = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    NetParams params;
    std::vector<EpochLog> log;
};

/// Loss and parameter gradient of one sample.
inline std::pair<double, NetParams> sample_gradient(const Sample& s, const NetParams& p, LossDomain domain) {
    NetTape tape;
    const MultiChannelGrid out = forward_net(s.b, s.mask, p, &tape);
    LossValue l = evaluate_loss(domain, out, s.target);
    return {l.value, backward(l.grad, tape, p)};
}

inline double mean_loss(const std::vector<Sample>& data, std::span<const std::size_t> indices, const NetParams& p,
                        LossDomain domain) {
    if (indices.empty()) return std::nan("");
    double total = 0.0;
    for (std::size_t i : indices) total += evaluate_loss(domain, forward_net(data[i].b, data[i].mask, p), data[i].target).value;
    return total / static_cast<double>(indices.size());
}

/// End-to-end training with parameters shared across unrolls. The last
/// floor(fraction * n) items form the validation split; the rest are visited in
/// a seeded order that is reshuffled every epoch.
inline TrainResult train(const std::vector<Sample>& data, const TrainConfig& cfg, Architecture arch,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
    using clock = std::chrono::steady_clock;
    cfg.validate();
    if (data.empty()) throw ValidationError("train: dataset is empty");
    const std::size_t coils = data.front().b.channels();
    const std::size_t n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(data.size())));
    const std::size_t n_train = data.size() - n_val;
    if (n_train == 0) throw ValidationError("train: validation split leaves no training data");

    TrainResult res;
    res.params = init_params(coils, cfg.width, arch == Architecture::Hybrid, cfg.seed, cfg.unrolls, cfg.beta_init,
                             cfg.kernel);
    res.params.train_beta = cfg.train_beta;
    NetParams& p = res.params;
    Adam opt(p, cfg.adam);

    std::vector<std::size_t> order(n_train);
    std::vector<std::size_t> val(n_val);
    std::iota(val.begin(), val.end(), n_train);
    Xoshiro256 shuffle_rng(derive_seed(cfg.seed, 0x5eed));

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = clock::now();
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = n_train; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        double epoch_loss = 0.0;
        for (std::size_t start = 0, batch = 0; start < n_train; start += cfg.batch_size, ++batch) {
            const std::size_t stop = std::min(n_train, start + cfg.batch_size);
            const double inv = 1.0 / static_cast<double>(stop - start);
            NetParams grad = zeros_like(p);
            for (std::size_t j = start; j < stop; ++j) {
                auto [loss, g] = sample_gradient(data[order[j]], p, cfg.loss);
                if (!std::isfinite(loss))
                    throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                         std::to_string(batch));
                epoch_loss += loss;
                accumulate(grad, g, inv);
            }
            opt.step(p, grad);
        }
        EpochLog e;
        e.epoch = epoch;
        e.train_loss = epoch_loss / static_cast<double>(n_train);
        e.validation_loss = mean_loss(data, val, p, cfg.loss);
        e.beta_k = p.beta_k();
        e.beta_i = p.hybrid() ? p.beta_i() : 0.0;
        e.seconds = std::chrono::duration<double>(clock::now() - t0).count();
        res.log.push_back(e);
        if (on_epoch) on_epoch(e);
    }
    return res;
}

}  // namespace pmri
