#pragma once

#include <string>

#include <Eigen/Dense>

#include "pmri/grid.hpp"

namespace pmri {

using MatrixXcd = Eigen::MatrixXcd;

/// Geometry of the block Hankel lifting.
///
/// Each coil contributes a block with one row per valid output position (a, b),
/// a in [0, H - fh], b in [0, W - fw], and one column per filter tap (p, q).
/// Blocks are concatenated horizontally in coil order, so the lifted matrix is
/// rows() x cols() with cols() = coils * fh * fw.
struct LiftConfig {
    std::size_t filter_h = 7;
    std::size_t filter_w = 7;
    std::size_t coils = 1;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t out_h() const { return height - filter_h + 1; }
    std::size_t out_w() const { return width - filter_w + 1; }
    std::size_t rows() const { return out_h() * out_w(); }
    std::size_t taps() const { return filter_h * filter_w; }
    std::size_t cols() const { return coils * taps(); }

    /// Column of tap (p, q) of coil i: coil-major, then row-major taps.
    std::size_t column(std::size_t coil, std::size_t p, std::size_t q) const {
        return coil * taps() + p * filter_w + q;
    }

    void validate() const {
        if (filter_h == 0 || filter_w == 0) throw ValidationError("lift: filter size must be >= 1");
        if (coils == 0) throw ValidationError("lift: coil count must be >= 1");
        if (filter_h > height || filter_w > width)
            throw DimensionError("lift: filter " + std::to_string(filter_h) + "x" +
                                 std::to_string(filter_w) + " larger than grid " +
                                 std::to_string(height) + "x" + std::to_string(width));
    }

    void check(const MultiChannelGrid& x) const {
        validate();
        if (x.channels() != coils || x.height() != height || x.width() != width)
            throw DimensionError("lift: grid shape does not match lift config");
    }

    static LiftConfig for_grid(const MultiChannelGrid& x, std::size_t fh, std::size_t fw) {
        return {fh, fw, x.channels(), x.height(), x.width()};
    }
};

/// Columns are multichannel k-space filters of length coils * fh * fw.
struct FilterBank {
    LiftConfig config;
    MatrixXcd columns;

    std::size_t count() const { return static_cast<std::size_t>(columns.cols()); }

    void validate() const {
        config.validate();
        if (static_cast<std::size_t>(columns.rows()) != config.cols())
            throw DimensionError("filter bank: column length " + std::to_string(columns.rows()) +
                                 " does not match coils*fh*fw = " + std::to_string(config.cols()));
    }
};

/// T(x) = [H(x_1) ... H(x_N)]. Rows hold flipped patches, so T(x) * vec(s)
/// is the valid linear convolution x * s, stacked row-major.
inline MatrixXcd lift(const MultiChannelGrid& x, const LiftConfig& cfg) {
    cfg.check(x);
    MatrixXcd t(cfg.rows(), cfg.cols());
    const std::size_t oh = cfg.out_h(), ow = cfg.out_w();
    for (std::size_t i = 0; i < cfg.coils; ++i)
        for (std::size_t p = 0; p < cfg.filter_h; ++p)
            for (std::size_t q = 0; q < cfg.filter_w; ++q) {
                const auto col = static_cast<Eigen::Index>(cfg.column(i, p, q));
                for (std::size_t a = 0; a < oh; ++a)
                    for (std::size_t b = 0; b < ow; ++b)
                        t(static_cast<Eigen::Index>(a * ow + b), col) =
                            x(i, a + cfg.filter_h - 1 - p, b + cfg.filter_w - 1 - q);
            }
    return t;
}

/// Adjoint of lift: scatters every entry back to the grid location it was read from.
inline MultiChannelGrid lift_adjoint(const MatrixXcd& y, const LiftConfig& cfg) {
    cfg.validate();
    if (static_cast<std::size_t>(y.rows()) != cfg.rows() ||
        static_cast<std::size_t>(y.cols()) != cfg.cols())
        throw DimensionError("lift_adjoint: matrix shape does not match lift config");
    MultiChannelGrid x(cfg.coils, cfg.height, cfg.width);
    const std::size_t oh = cfg.out_h(), ow = cfg.out_w();
    for (std::size_t i = 0; i < cfg.coils; ++i)
        for (std::size_t p = 0; p < cfg.filter_h; ++p)
            for (std::size_t q = 0; q < cfg.filter_w; ++q) {
                const auto col = static_cast<Eigen::Index>(cfg.column(i, p, q));
                for (std::size_t a = 0; a < oh; ++a)
                    for (std::size_t b = 0; b < ow; ++b)
                        x(i, a + cfg.filter_h - 1 - p, b + cfg.filter_w - 1 - q) +=
                            y(static_cast<Eigen::Index>(a * ow + b), col);
            }
    return x;
}

/// Gram matrix T(x)^H T(x), Hermitian positive semidefinite.
inline MatrixXcd gram(const MultiChannelGrid& x, const LiftConfig& cfg) {
    const MatrixXcd t = lift(x, cfg);
    MatrixXcd g = MatrixXcd::Zero(t.cols(), t.cols());
    g.selfadjointView<Eigen::Lower>().rankUpdate(t.adjoint());
    g.triangularView<Eigen::StrictlyUpper>() = g.adjoint();
    return g;
}

/// Reshapes an M x R matrix into R channels of out_h x out_w.
inline MultiChannelGrid from_columns(const MatrixXcd& m, const LiftConfig& cfg) {
    MultiChannelGrid y(static_cast<std::size_t>(m.cols()), cfg.out_h(), cfg.out_w());
    for (std::size_t r = 0; r < y.channels(); ++r)
        for (std::size_t k = 0; k < y.plane(); ++k)
            y.channel(r)[k] = m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(r));
    return y;
}

/// Stacks the R output channels of filterbank_apply as the columns of an M x R matrix.
inline MatrixXcd as_columns(const MultiChannelGrid& y) {
    MatrixXcd m(y.plane(), y.channels());
    for (std::size_t r = 0; r < y.channels(); ++r)
        for (std::size_t k = 0; k < y.plane(); ++k)
            m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(r)) = y.channel(r)[k];
    return m;
}

/// G(S) x: output channel r is sum_i validconv(x_i, s_i^(r)). Convolution commutes,
/// so the bank is evaluated as the product T(x) S.
inline MultiChannelGrid filterbank_apply(const FilterBank& s, const MultiChannelGrid& x) {
    s.validate();
    if (s.count() == 0) throw DimensionError("filter bank has no columns");
    return from_columns(lift(x, s.config) * s.columns, s.config);
}

/// G(S)^H y: correlation with the conjugated filters, accumulated back onto the
/// full H x W grid of every coil.
inline MultiChannelGrid filterbank_adjoint(const FilterBank& s, const MultiChannelGrid& y) {
    s.validate();
    const LiftConfig& cfg = s.config;
    if (y.channels() != s.count() || y.height() != cfg.out_h() || y.width() != cfg.out_w())
        throw DimensionError("filterbank_adjoint: input does not match filter bank output shape");
    return lift_adjoint(as_columns(y) * s.columns.adjoint(), cfg);
}

}  // namespace pmri
