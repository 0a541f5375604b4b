#include <gtest/gtest.h>

#include <Eigen/SVD>

#include "oracles.hpp"
#include "pmri/lifting.hpp"
#include "pmri/sim.hpp"

using namespace pmri;

namespace {

cplx frob_inner(const MatrixXcd& a, const MatrixXcd& b) { return (a.adjoint() * b).trace(); }

FilterBank random_bank(const LiftConfig& cfg, std::size_t r) {
    MatrixXcd s(cfg.cols(), r);
    for (Eigen::Index i = 0; i < s.rows(); ++i)
        for (Eigen::Index j = 0; j < s.cols(); ++j) s(i, j) = oracle::cgauss();
    return {cfg, s};
}

std::vector<cplx> window(const ComplexGrid& k, std::size_t f) {
    std::vector<cplx> s;
    for (std::size_t p = 0; p < f; ++p)
        for (std::size_t q = 0; q < f; ++q) s.push_back(k(k.height() / 2 - f / 2 + p, k.width() / 2 - f / 2 + q));
    return s;
}

}  // namespace

TEST(Lift, OneByOneFilterIsVectorization) {
    oracle::reseed(1);
    const MultiChannelGrid x = oracle::random_multi(1, 4, 5);
    const MatrixXcd t = lift(x, {1, 1, 1, 4, 5});
    ASSERT_EQ(t.rows(), 20);
    ASSERT_EQ(t.cols(), 1);
    for (std::size_t k = 0; k < 20; ++k) EXPECT_EQ(t(Eigen::Index(k), 0), x.data()[k]);
}

TEST(Lift, ThreeByThreeExample) {
    MultiChannelGrid x(1, 3, 3);
    for (std::size_t k = 0; k < 9; ++k) x.data()[k] = double(k + 1);
    const MatrixXcd t = lift(x, {2, 2, 1, 3, 3});
    ASSERT_EQ(t.rows(), 4);
    ASSERT_EQ(t.cols(), 4);
    const double row0[] = {5, 4, 2, 1};
    for (int j = 0; j < 4; ++j) EXPECT_EQ(t(0, j), cplx(row0[j], 0.0));
    // Every row against the convolution-sum enumeration.
    EXPECT_LT((t - oracle::lift_by_responses(x, 2, 2)).norm(), 1e-15);
}

TEST(Lift, MatchesNaiveConvolution) {
    oracle::reseed(2);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = oracle::pick(1, 3), h = oracle::pick(4, 12), w = oracle::pick(4, 12);
        const std::size_t fh = oracle::pick(1, std::min<std::size_t>(h, 5)), fw = oracle::pick(1, std::min<std::size_t>(w, 5));
        const MultiChannelGrid x = oracle::random_multi(n, h, w);
        const LiftConfig cfg{fh, fw, n, h, w};
        Eigen::VectorXcd s(Eigen::Index(cfg.cols()));
        for (auto& v : s) v = oracle::cgauss();
        const Eigen::VectorXcd got = lift(x, cfg) * s;
        const auto ref = oracle::filter_response(x, s, fh, fw);
        for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(std::abs(got[Eigen::Index(k)] - ref[k]), 0.0, 1e-12);
    }
}

TEST(Lift, ShapeErrors) {
    EXPECT_THROW(lift(MultiChannelGrid(1, 4, 4), {5, 1, 1, 4, 4}), DimensionError);
    EXPECT_THROW(lift(MultiChannelGrid(2, 4, 4), {2, 2, 1, 4, 4}), DimensionError);
    EXPECT_THROW(lift_adjoint(MatrixXcd::Zero(3, 3), {2, 2, 1, 4, 4}), DimensionError);
}

TEST(LiftAdjoint, DeltaGivesPatchMultiplicity) {
    const std::size_t h = 6, w = 7, fh = 3, fw = 2;
    const LiftConfig cfg{fh, fw, 1, h, w};
    for (std::size_t r0 = 0; r0 < h; ++r0)
        for (std::size_t c0 = 0; c0 < w; ++c0) {
            MultiChannelGrid x(1, h, w);
            x(0, r0, c0) = cplx{2.0, -1.0};
            const MultiChannelGrid back = lift_adjoint(lift(x, cfg), cfg);
            std::size_t count = 0;
            for (std::size_t a = 0; a + fh <= h; ++a)
                for (std::size_t b = 0; b + fw <= w; ++b)
                    for (std::size_t p = 0; p < fh; ++p)
                        for (std::size_t q = 0; q < fw; ++q) count += (a + p == r0 && b + q == c0);
            for (std::size_t r = 0; r < h; ++r)
                for (std::size_t c = 0; c < w; ++c) {
                    const cplx expect = (r == r0 && c == c0) ? double(count) * cplx{2.0, -1.0} : cplx{};
                    EXPECT_EQ(back(0, r, c), expect);
                }
        }
}

TEST(LiftAdjoint, ZeroMatrixGivesZeroGrid) {
    const LiftConfig cfg{3, 3, 2, 6, 6};
    const MultiChannelGrid x = lift_adjoint(MatrixXcd::Zero(cfg.rows(), cfg.cols()), cfg);
    for (auto v : x.data()) EXPECT_EQ(v, cplx{});
}

TEST(LiftAdjoint, InnerProductIdentity) {
    oracle::reseed(3);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = oracle::pick(1, 4), h = oracle::pick(7, 32), w = oracle::pick(7, 32);
        const LiftConfig cfg{oracle::pick(1, 7), oracle::pick(1, 7), n, h, w};
        const MultiChannelGrid x = oracle::random_multi(n, h, w);
        MatrixXcd y(cfg.rows(), cfg.cols());
        for (Eigen::Index k = 0; k < y.size(); ++k) y.data()[k] = oracle::cgauss();
        const cplx lhs = frob_inner(lift(x, cfg), y);
        const cplx rhs = inner(x.data(), lift_adjoint(y, cfg).data());
        EXPECT_LT(std::abs(lhs - rhs), 1e-10 * norm2(x.data()) * y.norm());
    }
}

TEST(Gram, MatchesDenseProductAndIsPsd) {
    oracle::reseed(4);
    const MultiChannelGrid x = oracle::random_multi(3, 12, 10);
    const LiftConfig cfg{3, 4, 3, 12, 10};
    const MatrixXcd g = gram(x, cfg);
    const MatrixXcd t = oracle::lift_by_responses(x, 3, 4);
    const MatrixXcd ref = t.adjoint() * t;
    EXPECT_LT((g - ref).norm(), 1e-10 * ref.norm());
    EXPECT_LT((g - g.adjoint()).norm(), 1e-10 * g.norm());
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(g);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10 * eig.eigenvalues().maxCoeff());
}

TEST(Gram, ZeroInputGivesZero) {
    const LiftConfig cfg{3, 3, 2, 8, 8};
    EXPECT_EQ(gram(MultiChannelGrid(2, 8, 8), cfg).norm(), 0.0);
}

TEST(FilterBank, OneHotCentreTapIsCentralCrop) {
    oracle::reseed(5);
    const std::size_t h = 9, w = 8, f = 3;
    const MultiChannelGrid x = oracle::random_multi(2, h, w);
    const LiftConfig cfg{f, f, 2, h, w};
    MatrixXcd s = MatrixXcd::Zero(cfg.cols(), 1);
    s(Eigen::Index(cfg.column(0, 1, 1)), 0) = 1.0;
    const MultiChannelGrid y = filterbank_apply({cfg, s}, x);
    ASSERT_EQ(y.height(), h - 2);
    ASSERT_EQ(y.width(), w - 2);
    for (std::size_t a = 0; a < h - 2; ++a)
        for (std::size_t b = 0; b < w - 2; ++b) EXPECT_EQ(y(0, a, b), x(0, a + 1, b + 1));
}

TEST(FilterBank, MatchesLiftProductAndNaiveConvolution) {
    oracle::reseed(6);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = oracle::pick(1, 4), h = oracle::pick(6, 16), w = oracle::pick(6, 16);
        const LiftConfig cfg{oracle::pick(1, 5), oracle::pick(1, 5), n, h, w};
        const MultiChannelGrid x = oracle::random_multi(n, h, w);
        const FilterBank s = random_bank(cfg, oracle::pick(1, 6));
        const MultiChannelGrid y = filterbank_apply(s, x);
        const MatrixXcd dense = oracle::lift_by_responses(x, cfg.filter_h, cfg.filter_w) * s.columns;
        EXPECT_LT((as_columns(y) - dense).norm(), 1e-12 * dense.norm());
        for (std::size_t r = 0; r < s.count(); ++r) {
            const auto ref = oracle::filter_response(x, s.columns.col(Eigen::Index(r)), cfg.filter_h, cfg.filter_w);
            EXPECT_LT(oracle::rel_diff(y.channel(r), ref), 1e-12);
        }
        EXPECT_NEAR(lift(x, cfg).operator*(s.columns).norm(), norm2(y.data()), 1e-12 * norm2(y.data()));
    }
}

TEST(FilterBank, ZeroBankAndZeroInput) {
    oracle::reseed(7);
    const LiftConfig cfg{3, 3, 2, 8, 8};
    const MultiChannelGrid x = oracle::random_multi(2, 8, 8);
    const FilterBank zero{cfg, MatrixXcd::Zero(cfg.cols(), 3)};
    for (auto v : filterbank_apply(zero, x).data()) EXPECT_EQ(v, cplx{});
    const FilterBank s = random_bank(cfg, 3);
    for (auto v : filterbank_adjoint(s, MultiChannelGrid(3, 6, 6)).data()) EXPECT_EQ(v, cplx{});
}

TEST(FilterBank, Linearity) {
    oracle::reseed(8);
    const LiftConfig cfg{4, 3, 3, 10, 11};
    const FilterBank s = random_bank(cfg, 4);
    const MultiChannelGrid x = oracle::random_multi(3, 10, 11), y = oracle::random_multi(3, 10, 11);
    const double a = 0.7, b = -1.3;
    MultiChannelGrid combo = x;
    for (std::size_t k = 0; k < combo.size(); ++k) combo.data()[k] = a * x.data()[k] + b * y.data()[k];
    const MultiChannelGrid lhs = filterbank_apply(s, combo);
    const MultiChannelGrid fx = filterbank_apply(s, x), fy = filterbank_apply(s, y);
    for (std::size_t k = 0; k < lhs.size(); ++k)
        EXPECT_NEAR(std::abs(lhs.data()[k] - (a * fx.data()[k] + b * fy.data()[k])), 0.0, 1e-12 * (1 + std::abs(lhs.data()[k])));
}

TEST(FilterBank, AdjointInnerProduct) {
    oracle::reseed(9);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = oracle::pick(1, 4), h = oracle::pick(7, 32), w = oracle::pick(7, 32);
        const LiftConfig cfg{oracle::pick(1, 7), oracle::pick(1, 7), n, h, w};
        const FilterBank s = random_bank(cfg, oracle::pick(1, 5));
        const MultiChannelGrid x = oracle::random_multi(n, h, w);
        const MultiChannelGrid y = oracle::random_multi(s.count(), cfg.out_h(), cfg.out_w());
        const cplx lhs = inner(filterbank_apply(s, x).data(), y.data());
        const cplx rhs = inner(x.data(), filterbank_adjoint(s, y).data());
        EXPECT_LT(std::abs(lhs - rhs), 1e-10 * norm2(x.data()) * norm2(y.data()) * s.columns.norm());
    }
}

TEST(FilterBank, AdjointOfOneHotFilterByEnumeration) {
    oracle::reseed(10);
    const std::size_t h = 7, w = 6, fh = 3, fw = 2;
    const LiftConfig cfg{fh, fw, 2, h, w};
    const std::size_t coil = 1, p = 2, q = 0;
    const cplx weight{0.5, 2.0};
    MatrixXcd s = MatrixXcd::Zero(cfg.cols(), 1);
    s(Eigen::Index(cfg.column(coil, p, q)), 0) = weight;
    const MultiChannelGrid y = oracle::random_multi(1, cfg.out_h(), cfg.out_w());
    const MultiChannelGrid back = filterbank_adjoint({cfg, s}, y);
    MultiChannelGrid ref(2, h, w);
    for (std::size_t a = 0; a < cfg.out_h(); ++a)
        for (std::size_t b = 0; b < cfg.out_w(); ++b) ref(coil, a + fh - 1 - p, b + fw - 1 - q) += std::conj(weight) * y(0, a, b);
    EXPECT_LT(oracle::max_abs_diff(back.data(), ref.data()), 1e-14);
}

TEST(FilterBank, ShapeErrors) {
    const LiftConfig cfg{3, 3, 2, 8, 8};
    const FilterBank bad{cfg, MatrixXcd::Zero(cfg.cols() + 1, 2)};
    EXPECT_THROW(filterbank_apply(bad, MultiChannelGrid(2, 8, 8)), DimensionError);
    const FilterBank s{cfg, MatrixXcd::Zero(cfg.cols(), 2)};
    EXPECT_THROW(filterbank_adjoint(s, MultiChannelGrid(3, 6, 6)), DimensionError);
    EXPECT_THROW(filterbank_apply(s, MultiChannelGrid(2, 8, 9)), DimensionError);
}

TEST(Annihilation, TwoCoilNullspaceWitness) {
    const std::size_t h = 32, w = 32, f = 7;
    const ComplexGrid rho = make_phantom(random_phantom_spec(1, h, w));
    const MultiChannelGrid sens = make_sensitivities({2, 5, 5, 3, false}, h, w);
    const MultiChannelGrid xk = fft2c(coil_images(rho, sens));
    // Sensitivity spectra zero-padded to the 7x7 filter window.
    const auto s1 = window(fft2c(sens.grid(0)), f), s2 = window(fft2c(sens.grid(1)), f);
    const LiftConfig cfg{f, f, 2, h, w};
    Eigen::VectorXcd v(Eigen::Index(cfg.cols()));
    for (std::size_t k = 0; k < f * f; ++k) {
        v[Eigen::Index(k)] = s2[k];
        v[Eigen::Index(f * f + k)] = -s1[k];
    }
    const MatrixXcd t = lift(xk, cfg);
    EXPECT_LT((t * v).norm(), 1e-8 * t.norm() * v.norm());
}

TEST(Annihilation, RankDeficiency) {
    const std::size_t h = 32, w = 32, f = 7, n = 3;
    const ComplexGrid rho = make_phantom(random_phantom_spec(2, h, w));
    const MultiChannelGrid xk = fft2c(coil_images(rho, make_sensitivities({n, 5, 5, 4, false}, h, w)));
    Eigen::JacobiSVD<MatrixXcd> svd(lift(xk, {f, f, n, h, w}));
    const auto& sv = svd.singularValues();
    std::size_t small = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k) small += sv[k] < 1e-8 * sv[0];
    EXPECT_GE(small, n * (n - 1) / 2);
}
