#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "pmri/fft.hpp"
#include "pmri/grid.hpp"
#include "pmri/rng.hpp"

namespace pmri {

// ---------------------------------------------------------------------------
// Phantoms
//
// Spatial coordinates are normalized to [-1, 1] along each axis; pixel (r, c) is
// evaluated at its center, u = 2(c + 0.5)/W - 1 horizontally and v = 2(r + 0.5)/H - 1
// vertically. No anti-aliasing.
// ---------------------------------------------------------------------------

struct Ellipse {
    double center_x = 0.0;
    double center_y = 0.0;
    double semi_x = 1.0;
    double semi_y = 1.0;
    double rotation = 0.0;  ///< radians, counter-clockwise
    cplx amplitude{1.0, 0.0};

    bool contains(double u, double v) const {
        const double dx = u - center_x, dy = v - center_y;
        const double c = std::cos(rotation), s = std::sin(rotation);
        const double p = (c * dx + s * dy) / semi_x;
        const double q = (-s * dx + c * dy) / semi_y;
        return p * p + q * q <= 1.0;
    }
};

/// Global phase exp(i (offset + slope_x u + slope_y v)).
struct PhaseRamp {
    double offset = 0.0;
    double slope_x = 0.0;
    double slope_y = 0.0;
};

struct PhantomSpec {
    std::size_t height = 64;
    std::size_t width = 64;
    std::vector<Ellipse> ellipses;
    PhaseRamp ramp;

    void validate() const {
        if (height == 0 || width == 0) throw ValidationError("phantom: grid size must be positive");
        if (ellipses.empty()) throw ValidationError("phantom: at least one ellipse is required");
        for (const auto& e : ellipses)
            if (!(e.semi_x > 0.0) || !(e.semi_y > 0.0))
                throw ValidationError("phantom: ellipse semi-axes must be positive");
    }
};

inline double pixel_coord(std::size_t index, std::size_t extent) {
    return 2.0 * (static_cast<double>(index) + 0.5) / static_cast<double>(extent) - 1.0;
}

inline ComplexGrid make_phantom(const PhantomSpec& spec) {
    spec.validate();
    ComplexGrid img(spec.height, spec.width);
    for (std::size_t r = 0; r < spec.height; ++r) {
        const double v = pixel_coord(r, spec.height);
        for (std::size_t c = 0; c < spec.width; ++c) {
            const double u = pixel_coord(c, spec.width);
            cplx value{0.0, 0.0};
            for (const auto& e : spec.ellipses)
                if (e.contains(u, v)) value += e.amplitude;
            if (value != cplx{0.0, 0.0}) {
                const double phase = spec.ramp.offset + spec.ramp.slope_x * u + spec.ramp.slope_y * v;
                value *= std::polar(1.0, phase);
            }
            img(r, c) = value;
        }
    }
    return img;
}

/// Head-like random phantom: one large outer ellipse, several interior structures of
/// positive or negative contrast, and a mild random phase ramp.
inline PhantomSpec random_phantom_spec(std::uint64_t seed, std::size_t height, std::size_t width) {
    Xoshiro256 rng(seed);
    PhantomSpec spec;
    spec.height = height;
    spec.width = width;
    Ellipse outer;
    outer.center_x = rng.uniform(-0.05, 0.05);
    outer.center_y = rng.uniform(-0.05, 0.05);
    outer.semi_x = rng.uniform(0.70, 0.85);
    outer.semi_y = rng.uniform(0.80, 0.95);
    outer.rotation = rng.uniform(-0.2, 0.2);
    outer.amplitude = {1.0, 0.0};
    spec.ellipses.push_back(outer);
    const auto inner_count = 3 + rng.below(4);
    for (std::uint64_t i = 0; i < inner_count; ++i) {
        Ellipse e;
        e.center_x = rng.uniform(-0.4, 0.4);
        e.center_y = rng.uniform(-0.4, 0.4);
        e.semi_x = rng.uniform(0.05, 0.30);
        e.semi_y = rng.uniform(0.05, 0.30);
        e.rotation = rng.uniform(0.0, std::numbers::pi);
        e.amplitude = {rng.uniform(-0.5, 0.5), 0.0};
        spec.ellipses.push_back(e);
    }
    spec.ramp.slope_x = rng.uniform(-1.0, 1.0);
    spec.ramp.slope_y = rng.uniform(-1.0, 1.0);
    spec.ramp.offset = rng.uniform(-std::numbers::pi, std::numbers::pi);
    return spec;
}

// ---------------------------------------------------------------------------
// Coil sensitivities
// ---------------------------------------------------------------------------

struct SensitivitySpec {
    std::size_t coils = 4;
    std::size_t support_h = 5;  ///< Fourier support, odd
    std::size_t support_w = 5;
    std::uint64_t seed = 0;
    bool normalize = false;  ///< divide by the root sum of squares

    void validate() const {
        if (coils == 0) throw ValidationError("sensitivities: coils must be >= 1");
        if (support_h == 0 || support_w == 0 || support_h % 2 == 0 || support_w % 2 == 0)
            throw ValidationError("sensitivities: Fourier support must be odd and >= 1");
    }
};

/// Returns spatial-domain sensitivities. Coefficients inside the centered support
/// window are i.i.d. complex Gaussian, drawn coil by coil in row-major window order
/// (real part then imaginary part), scaled so each coil has unit expected RMS.
/// Without normalization fft2c(s_i) vanishes exactly outside the window.
inline MultiChannelGrid make_sensitivities(const SensitivitySpec& spec, std::size_t height,
                                           std::size_t width) {
    spec.validate();
    if (spec.support_h > height || spec.support_w > width)
        throw DimensionError("sensitivities: Fourier support larger than grid");
    Xoshiro256 rng(spec.seed);
    const double sd = std::sqrt(static_cast<double>(height * width) /
                                static_cast<double>(spec.support_h * spec.support_w) / 2.0);
    const std::size_t r0 = height / 2 - spec.support_h / 2;
    const std::size_t c0 = width / 2 - spec.support_w / 2;
    MultiChannelGrid coeffs(spec.coils, height, width);
    for (std::size_t i = 0; i < spec.coils; ++i)
        for (std::size_t p = 0; p < spec.support_h; ++p)
            for (std::size_t q = 0; q < spec.support_w; ++q) {
                const double re = rng.normal();
                const double im = rng.normal();
                coeffs(i, r0 + p, c0 + q) = sd * cplx{re, im};
            }
    MultiChannelGrid sens = ifft2c(std::move(coeffs));
    if (spec.normalize) {
        const std::size_t plane = sens.plane();
        for (std::size_t k = 0; k < plane; ++k) {
            double sos = 0.0;
            for (std::size_t i = 0; i < spec.coils; ++i) sos += std::norm(sens.channel(i)[k]);
            if (!(sos > 0.0)) throw NumericalError("sensitivities: zero root-sum-of-squares at a pixel");
            const double inv = 1.0 / std::sqrt(sos);
            for (std::size_t i = 0; i < spec.coils; ++i) sens.channel(i)[k] *= inv;
        }
    }
    return sens;
}

// ---------------------------------------------------------------------------
// Variable-density Cartesian masks
// ---------------------------------------------------------------------------

enum class SamplingPattern { Points, Lines };

struct MaskSpec {
    double acceleration = 4.0;
    double sigma = 0.25;  ///< Gaussian density width as a fraction of the largest k-space radius
    std::uint64_t seed = 0;
    SamplingPattern pattern = SamplingPattern::Points;

    void validate() const {
        if (!(acceleration >= 1.0)) throw ValidationError("mask: acceleration must be >= 1");
        if (!(sigma > 0.0)) throw ValidationError("mask: sigma must be positive");
    }
};

struct MaskResult {
    SamplingMask mask;
    bool fallback = false;  ///< density infeasible, kept the most probable locations instead
};

namespace detail {

// Per-unit keep probabilities min(1, c * w) with sum(p) = target; nullopt when
// the weights cannot reach the target.
inline std::optional<std::vector<double>> scale_probabilities(const std::vector<double>& weights,
                                                              double target) {
    auto total = [&](double c) {
        double s = 0.0;
        for (double w : weights) s += std::min(1.0, c * w);
        return s;
    };
    const std::size_t positive =
        static_cast<std::size_t>(std::count_if(weights.begin(), weights.end(), [](double w) { return w > 0.0; }));
    if (static_cast<double>(positive) < target) return std::nullopt;
    double lo = 0.0, hi = 1.0;
    while (total(hi) < target) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (total(mid) < target ? lo : hi) = mid;
    }
    std::vector<double> p(weights.size());
    for (std::size_t k = 0; k < weights.size(); ++k) p[k] = std::min(1.0, hi * weights[k]);
    return p;
}

inline std::vector<bool> keep_most_probable(const std::vector<double>& weights, std::size_t count) {
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
    std::vector<bool> keep(weights.size(), false);
    for (std::size_t k = 0; k < count && k < order.size(); ++k) keep[order[k]] = true;
    return keep;
}

// Draws units (pixels or lines) with the given weights so that both the kept count
// and the realized acceleration lie within 10% of their targets.
inline std::pair<std::vector<bool>, bool> draw_units(const std::vector<double>& weights, double accel,
                                                     Xoshiro256& rng) {
    const double units = static_cast<double>(weights.size());
    const double target = units / accel;
    const auto lo = static_cast<std::size_t>(std::ceil(units / (1.1 * accel)));
    const auto hi = static_cast<std::size_t>(std::floor(1.1 * target));
    const auto fallback_count = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(target)));
    auto probs = scale_probabilities(weights, target);
    if (!probs) return {keep_most_probable(weights, fallback_count), true};
    for (int attempt = 0; attempt < 64; ++attempt) {
        std::vector<bool> keep(weights.size());
        std::size_t count = 0;
        for (std::size_t k = 0; k < weights.size(); ++k) {
            keep[k] = rng.uniform() < (*probs)[k];
            count += keep[k];
        }
        if (count >= std::max<std::size_t>(lo, 1) && count <= hi) return {keep, false};
    }
    return {keep_most_probable(*probs, fallback_count), true};
}

}  // namespace detail

/// Variable-density Cartesian mask with keep-probability proportional to
/// exp(-r^2 / (2 (sigma r_max)^2)) around the DC location. No calibration region
/// is forced. Pixels are drawn in row-major order (points) or rows top to bottom
/// (lines, full readouts along the width).
inline MaskResult make_mask(const MaskSpec& spec, std::size_t height, std::size_t width) {
    spec.validate();
    detail::require_positive_shape(height, width);
    if (spec.acceleration > static_cast<double>(height * width))
        throw ValidationError("mask: acceleration exceeds number of grid locations");
    if (spec.acceleration == 1.0) return {SamplingMask::full(height, width), false};

    Xoshiro256 rng(spec.seed);
    const double cy = static_cast<double>(height / 2), cx = static_cast<double>(width / 2);
    auto gaussian = [&](double r, double rmax) {
        const double s = spec.sigma * rmax;
        return rmax > 0.0 ? std::exp(-r * r / (2.0 * s * s)) : 1.0;
    };

    if (spec.pattern == SamplingPattern::Lines) {
        if (spec.acceleration > static_cast<double>(height))
            throw ValidationError("mask: line pattern acceleration exceeds number of lines");
        const double rmax = std::max(cy, static_cast<double>(height - 1) - cy);
        std::vector<double> w(height);
        for (std::size_t r = 0; r < height; ++r) w[r] = gaussian(std::abs(static_cast<double>(r) - cy), rmax);
        auto [rows, fb] = detail::draw_units(w, spec.acceleration, rng);
        std::vector<bool> keep(height * width);
        for (std::size_t r = 0; r < height; ++r)
            for (std::size_t c = 0; c < width; ++c) keep[r * width + c] = rows[r];
        return {SamplingMask(height, width, std::move(keep)), fb};
    }

    double rmax = 0.0;
    std::vector<double> radius(height * width);
    for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = 0; c < width; ++c) {
            const double d = std::hypot(static_cast<double>(r) - cy, static_cast<double>(c) - cx);
            radius[r * width + c] = d;
            rmax = std::max(rmax, d);
        }
    std::vector<double> w(radius.size());
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = gaussian(radius[k], rmax);
    auto [keep, fb] = detail::draw_units(w, spec.acceleration, rng);
    return {SamplingMask(height, width, std::move(keep)), fb};
}

// ---------------------------------------------------------------------------
// Acquisition
// ---------------------------------------------------------------------------

struct NoiseSpec {
    double sigma = 0.0;  ///< per real/imaginary component
    std::uint64_t seed = 0;

    void validate() const {
        if (!(sigma >= 0.0)) throw ValidationError("noise: sigma must be >= 0");
    }
};

/// Coil images rho * s_i.
inline MultiChannelGrid coil_images(const ComplexGrid& image, const MultiChannelGrid& sens) {
    if (image.height() != sens.height() || image.width() != sens.width())
        throw DimensionError("image and sensitivity shapes differ");
    MultiChannelGrid out = sens;
    for (std::size_t i = 0; i < out.channels(); ++i) {
        auto c = out.channel(i);
        for (std::size_t k = 0; k < c.size(); ++k) c[k] *= image.data()[k];
    }
    return out;
}

/// b_i = A(fft2c(rho s_i)) + n_i. Noise is drawn coil by coil over kept locations in
/// row-major order, real then imaginary; non-kept locations stay exactly zero.
inline MultiChannelGrid acquire(const ComplexGrid& image, const MultiChannelGrid& sens,
                                const SamplingMask& mask, const NoiseSpec& noise) {
    noise.validate();
    MultiChannelGrid b = apply_mask(fft2c(coil_images(image, sens)), mask);
    if (noise.sigma > 0.0) {
        Xoshiro256 rng(noise.seed);
        for (std::size_t i = 0; i < b.channels(); ++i) {
            auto c = b.channel(i);
            for (std::size_t k = 0; k < c.size(); ++k)
                if (mask.kept(k)) {
                    const double re = rng.normal();
                    const double im = rng.normal();
                    c[k] += noise.sigma * cplx{re, im};
                }
        }
    }
    return b;
}

}  // namespace pmri
