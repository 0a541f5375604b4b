#pragma once

#include <cmath>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "pmri/grid.hpp"

namespace pmri {

namespace detail {

inline Eigen::FFT<double>& fft_engine() {
    thread_local Eigen::FFT<double> engine;
    return engine;
}

// Centered orthonormal 1D transform of `n` samples spaced `stride` apart.
// DC sits at index n/2 (floor) on both sides: ifftshift, transform, fftshift.
inline void centered_transform_1d(cplx* base, std::size_t n, std::size_t stride, bool inverse,
                                  std::vector<cplx>& in, std::vector<cplx>& out) {
    const std::size_t half = n / 2;
    in.resize(n);
    for (std::size_t j = 0; j < n; ++j) in[j] = base[((j + half) % n) * stride];
    auto& engine = fft_engine();
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    if (inverse) {
        engine.SetFlag(Eigen::FFT<double>::Unscaled);
        engine.inv(out, in);
    } else {
        engine.fwd(out, in);
    }
    for (std::size_t k = 0; k < n; ++k) base[((k + half) % n) * stride] = out[k] * scale;
}

inline void centered_transform_2d(std::span<cplx> plane, std::size_t h, std::size_t w,
                                  bool inverse) {
    std::vector<cplx> in, out;
    if (w > 1)
        for (std::size_t r = 0; r < h; ++r)
            centered_transform_1d(plane.data() + r * w, w, 1, inverse, in, out);
    if (h > 1)
        for (std::size_t c = 0; c < w; ++c)
            centered_transform_1d(plane.data() + c, h, w, inverse, in, out);
}

}  // namespace detail

/// Centered, orthonormal 2D DFT. DC lands at (H/2, W/2), integer division.
inline ComplexGrid fft2c(ComplexGrid x) {
    detail::centered_transform_2d(x.data(), x.height(), x.width(), false);
    return x;
}

/// Exact inverse of fft2c.
inline ComplexGrid ifft2c(ComplexGrid x) {
    detail::centered_transform_2d(x.data(), x.height(), x.width(), true);
    return x;
}

/// Per-channel fft2c.
inline MultiChannelGrid fft2c(MultiChannelGrid x) {
    for (std::size_t ch = 0; ch < x.channels(); ++ch)
        detail::centered_transform_2d(x.channel(ch), x.height(), x.width(), false);
    return x;
}

/// Per-channel ifft2c.
inline MultiChannelGrid ifft2c(MultiChannelGrid x) {
    for (std::size_t ch = 0; ch < x.channels(); ++ch)
        detail::centered_transform_2d(x.channel(ch), x.height(), x.width(), true);
    return x;
}

/// The undersampling operator A as mask-and-zero-fill. Under this representation
/// A is an orthogonal projection, so the same call also serves as A^H.
inline MultiChannelGrid apply_mask(MultiChannelGrid x, const SamplingMask& m) {
    if (x.height() != m.height() || x.width() != m.width())
        throw DimensionError("mask shape does not match grid shape");
    const std::size_t plane = x.plane();
    for (std::size_t ch = 0; ch < x.channels(); ++ch) {
        auto c = x.channel(ch);
        for (std::size_t k = 0; k < plane; ++k)
            if (!m.kept(k)) c[k] = cplx{0.0, 0.0};
    }
    return x;
}

}  // namespace pmri
