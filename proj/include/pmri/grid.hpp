#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmri {

using cplx = std::complex<double>;

/// Shape or size disagreement between operands.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Eigensolver breakdown, divergence or any non-finite intermediate.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Config or argument outside its documented domain.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Missing, truncated or malformed file.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {
inline void require_positive_shape(std::size_t h, std::size_t w) {
    if (h == 0 || w == 0)
        throw DimensionError("grid dimensions must be positive, got " + std::to_string(h) + "x" +
                             std::to_string(w));
}
}  // namespace detail

/// A single 2D complex raster, row-major.
class ComplexGrid {
public:
    ComplexGrid() = default;
    ComplexGrid(std::size_t height, std::size_t width)
        : height_(height), width_(width), data_(height * width) {
        detail::require_positive_shape(height, width);
    }
    ComplexGrid(std::size_t height, std::size_t width, std::vector<cplx> data)
        : height_(height), width_(width), data_(std::move(data)) {
        detail::require_positive_shape(height, width);
        if (data_.size() != height * width)
            throw DimensionError("ComplexGrid data length does not match height*width");
    }

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return data_.size(); }

    cplx& operator()(std::size_t r, std::size_t c) { return data_[r * width_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * width_ + c]; }

    std::span<cplx> data() { return data_; }
    std::span<const cplx> data() const { return data_; }
    std::vector<cplx>& storage() { return data_; }
    const std::vector<cplx>& storage() const { return data_; }

    bool same_shape(const ComplexGrid& o) const {
        return height_ == o.height_ && width_ == o.width_;
    }
    friend bool operator==(const ComplexGrid&, const ComplexGrid&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<cplx> data_;
};

/// N channels of identical shape, stored contiguously channel by channel.
class MultiChannelGrid {
public:
    MultiChannelGrid() = default;
    MultiChannelGrid(std::size_t channels, std::size_t height, std::size_t width)
        : channels_(channels), height_(height), width_(width), data_(channels * height * width) {
        if (channels == 0) throw DimensionError("MultiChannelGrid needs at least one channel");
        detail::require_positive_shape(height, width);
    }
    explicit MultiChannelGrid(const std::vector<ComplexGrid>& grids) {
        if (grids.empty()) throw DimensionError("MultiChannelGrid needs at least one channel");
        *this = MultiChannelGrid(grids.size(), grids[0].height(), grids[0].width());
        for (std::size_t i = 0; i < grids.size(); ++i) set_channel(i, grids[i]);
    }

    std::size_t channels() const { return channels_; }
    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t plane() const { return height_ * width_; }
    std::size_t size() const { return data_.size(); }

    cplx& operator()(std::size_t ch, std::size_t r, std::size_t c) {
        return data_[(ch * height_ + r) * width_ + c];
    }
    const cplx& operator()(std::size_t ch, std::size_t r, std::size_t c) const {
        return data_[(ch * height_ + r) * width_ + c];
    }

    std::span<cplx> channel(std::size_t ch) { return {data_.data() + ch * plane(), plane()}; }
    std::span<const cplx> channel(std::size_t ch) const {
        return {data_.data() + ch * plane(), plane()};
    }

    ComplexGrid grid(std::size_t ch) const {
        auto c = channel(ch);
        return ComplexGrid(height_, width_, std::vector<cplx>(c.begin(), c.end()));
    }
    void set_channel(std::size_t ch, const ComplexGrid& g) {
        if (g.height() != height_ || g.width() != width_)
            throw DimensionError("channel grid shape differs from MultiChannelGrid shape");
        std::copy(g.data().begin(), g.data().end(), channel(ch).begin());
    }

    std::span<cplx> data() { return data_; }
    std::span<const cplx> data() const { return data_; }
    std::vector<cplx>& storage() { return data_; }
    const std::vector<cplx>& storage() const { return data_; }

    bool same_shape(const MultiChannelGrid& o) const {
        return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
    }
    friend bool operator==(const MultiChannelGrid&, const MultiChannelGrid&) = default;

private:
    std::size_t channels_ = 0;
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<cplx> data_;
};

/// Sampling pattern of the undersampling operator: one flag per k-space location.
class SamplingMask {
public:
    SamplingMask() = default;
    SamplingMask(std::size_t height, std::size_t width, std::vector<bool> kept)
        : height_(height), width_(width), kept_(std::move(kept)) {
        detail::require_positive_shape(height, width);
        if (kept_.size() != height * width)
            throw DimensionError("SamplingMask length does not match height*width");
        if (kept_count() == 0) throw ValidationError("SamplingMask must keep at least one location");
    }
    static SamplingMask full(std::size_t height, std::size_t width) {
        return SamplingMask(height, width, std::vector<bool>(height * width, true));
    }

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return kept_.size(); }
    bool kept(std::size_t r, std::size_t c) const { return kept_[r * width_ + c]; }
    bool kept(std::size_t flat) const { return kept_[flat]; }
    const std::vector<bool>& flags() const { return kept_; }

    std::size_t kept_count() const {
        return static_cast<std::size_t>(std::count(kept_.begin(), kept_.end(), true));
    }
    double acceleration() const {
        return static_cast<double>(size()) / static_cast<double>(kept_count());
    }
    friend bool operator==(const SamplingMask&, const SamplingMask&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<bool> kept_;
};

// Elementwise helpers on flat complex storage.

inline double squared_norm(std::span<const cplx> x) {
    double s = 0.0;
    for (const auto& v : x) s += std::norm(v);
    return s;
}
inline double norm2(std::span<const cplx> x) { return std::sqrt(squared_norm(x)); }

/// Standard complex inner product, conjugate-linear in the first argument.
inline cplx inner(std::span<const cplx> a, std::span<const cplx> b) {
    if (a.size() != b.size()) throw DimensionError("inner product of different lengths");
    cplx s{0.0, 0.0};
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

inline bool all_finite(std::span<const cplx> x) {
    return std::all_of(x.begin(), x.end(),
                       [](const cplx& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); });
}

inline MultiChannelGrid operator-(const MultiChannelGrid& a, const MultiChannelGrid& b) {
    if (!a.same_shape(b)) throw DimensionError("subtracting grids of different shape");
    MultiChannelGrid out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
    return out;
}

inline MultiChannelGrid operator*(double s, const MultiChannelGrid& a) {
    MultiChannelGrid out = a;
    for (auto& v : out.data()) v *= s;
    return out;
}

}  // namespace pmri
