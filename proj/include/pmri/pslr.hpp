#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "pmri/fft.hpp"
#include "pmri/grid.hpp"
#include "pmri/lifting.hpp"

namespace pmri {

/// Settings of the self-learned structured low-rank (IRLS) reconstruction.
struct PslrConfig {
    std::size_t filter_h = 7;
    std::size_t filter_w = 7;
    double lambda = 1e-2;  ///< weight of the low-rank penalty
    double beta = 1e-2;    ///< penalty tying the data-consistent iterate to the denoised one
    /// Initial smoothing epsilon; <= 0 selects 0.01 * largest eigenvalue of the initial Gram matrix.
    double eps0 = 0.0;
    double eps_decay = 0.5;        ///< eps_{t+1} = max(decay * eps_t, eps_min)
    double eps_min_ratio = 1e-9;   ///< eps_min = eps_min_ratio * eps0
    std::size_t outer_iterations = 30;
    double tolerance = 1e-6;       ///< stop when ||x_t - x_{t-1}|| / ||x_{t-1}|| falls below
    /// The residual denoiser linearizes (I + (lambda/beta) G^H G)^{-1}; the ratio used at
    /// iteration t is capped at step_safety / bound(||G^H G||) so the linearization stays a contraction.
    double step_safety = 1.9;
    bool record_cost = true;

    void validate() const {
        if (filter_h == 0 || filter_w == 0) throw ValidationError("pslr: filter size must be >= 1");
        if (!(lambda > 0.0)) throw ValidationError("pslr: lambda must be > 0");
        if (!(beta > 0.0)) throw ValidationError("pslr: beta must be > 0");
        if (!(eps_decay > 0.0 && eps_decay <= 1.0)) throw ValidationError("pslr: eps_decay must be in (0, 1]");
        if (!(eps_min_ratio > 0.0 && eps_min_ratio <= 1.0))
            throw ValidationError("pslr: eps_min_ratio must be in (0, 1]");
        if (outer_iterations == 0) throw ValidationError("pslr: outer_iterations must be >= 1");
        if (!(tolerance >= 0.0)) throw ValidationError("pslr: tolerance must be >= 0");
        if (!(step_safety > 0.0 && step_safety < 2.0)) throw ValidationError("pslr: step_safety must be in (0, 2)");
    }
};

struct IrlsCost {
    double total = 0.0;
    double data = 0.0;
    double nuclear = 0.0;
};

/// Nullspace filter bank with its spectrum, kept for step-size control and diagnostics.
struct NullspaceUpdate {
    FilterBank filters;
    Eigen::VectorXd eigenvalues;  ///< ascending eigenvalues of the Gram matrix
};

/// S = (G + eps I)^{-1/4} for a Hermitian PSD Gram matrix G, via G = V diag(l) V^H.
inline NullspaceUpdate weight_from_gram(const MatrixXcd& g, double eps, const LiftConfig& cfg) {
    if (!(eps > 0.0)) throw ValidationError("nullspace_update: epsilon must be > 0");
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(g);
    if (eig.info() != Eigen::Success) {
        std::ostringstream msg;
        msg << "nullspace_update: eigensolver failed on " << g.rows() << "x" << g.cols()
            << " Gram matrix (trace " << g.trace().real() << ")";
        throw NumericalError(msg.str());
    }
    const Eigen::VectorXd& l = eig.eigenvalues();
    Eigen::VectorXd w(l.size());
    for (Eigen::Index k = 0; k < l.size(); ++k) {
        const double shifted = l[k] + eps;
        if (!(shifted > 0.0)) {
            std::ostringstream msg;
            msg << "nullspace_update: eigenvalue " << l[k] << " + eps " << eps
                << " is not positive (condition " << l.maxCoeff() / std::max(std::abs(l[k]), 1e-300) << ")";
            throw NumericalError(msg.str());
        }
        w[k] = std::pow(shifted, -0.25);
    }
    const MatrixXcd& v = eig.eigenvectors();
    MatrixXcd s = v * w.asDiagonal() * v.adjoint();
    return {{cfg, std::move(s)}, l};
}

/// Filter bank S = (T(x)^H T(x) + eps I)^{-1/4}, all columns retained.
inline FilterBank nullspace_update(const MultiChannelGrid& x, double eps, const LiftConfig& cfg) {
    return weight_from_gram(gram(x, cfg), eps, cfg).filters;
}

/// (||A x - b||^2, sum of singular values of T(x), data + lambda * nuclear).
inline IrlsCost irls_cost(const MultiChannelGrid& x, const MultiChannelGrid& b, const SamplingMask& mask,
                          double lambda, const LiftConfig& cfg) {
    if (!x.same_shape(b)) throw DimensionError("irls_cost: x and b shapes differ");
    const MultiChannelGrid ax = apply_mask(x, mask);
    IrlsCost c;
    for (std::size_t k = 0; k < ax.size(); ++k) c.data += std::norm(ax.data()[k] - b.data()[k]);
    Eigen::BDCSVD<MatrixXcd> svd(lift(x, cfg));
    c.nuclear = svd.singularValues().sum();
    c.total = c.data + lambda * c.nuclear;
    return c;
}

/// Closed-form minimizer of ||A x - b||^2 + beta ||x - z||^2 with A = mask-and-zero-fill:
/// (b + beta z) / (1 + beta) on kept locations, z elsewhere.
inline MultiChannelGrid dc_solve(const MultiChannelGrid& z, const MultiChannelGrid& b, const SamplingMask& mask,
                                 double beta) {
    if (!(beta > 0.0)) throw ValidationError("dc_solve: beta must be > 0");
    if (!z.same_shape(b)) throw DimensionError("dc_solve: z and b shapes differ");
    if (z.height() != mask.height() || z.width() != mask.width())
        throw DimensionError("dc_solve: mask shape differs from data");
    // Kept entries are written as b + w (z - b), which returns b exactly when z == b.
    MultiChannelGrid x = z;
    const double w = beta / (1.0 + beta);
    const std::size_t plane = x.plane();
    for (std::size_t ch = 0; ch < x.channels(); ++ch) {
        auto xc = x.channel(ch);
        auto bc = b.channel(ch);
        for (std::size_t k = 0; k < plane; ++k)
            if (mask.kept(k)) xc[k] = bc[k] + w * (xc[k] - bc[k]);
    }
    return x;
}

/// Residual linear denoiser z = x - ratio * G(S)^H G(S) x: a convolution filter bank
/// followed by the matching deconvolution bank, subtracted from the input.
inline MultiChannelGrid linear_denoise(const MultiChannelGrid& x, const FilterBank& s, double lambda_over_beta) {
    if (!(lambda_over_beta >= 0.0)) throw ValidationError("linear_denoise: ratio must be >= 0");
    if (lambda_over_beta == 0.0) return x;
    const MultiChannelGrid back = filterbank_adjoint(s, filterbank_apply(s, x));
    MultiChannelGrid z = x;
    for (std::size_t k = 0; k < z.size(); ++k) z.data()[k] -= lambda_over_beta * back.data()[k];
    return z;
}

struct PslrIteration {
    std::size_t iteration = 0;
    double epsilon = 0.0;
    double step = 0.0;  ///< lambda/beta ratio actually used by the denoiser
    double relative_change = 0.0;
    IrlsCost cost;
    double seconds = 0.0;
};

struct PslrTrace {
    IrlsCost initial_cost;
    std::vector<PslrIteration> iterations;
    bool converged = false;
    double seconds = 0.0;
};

struct PslrResult {
    MultiChannelGrid x;
    PslrTrace trace;
};

/// IRLS reconstruction from zero-filled k-space b.
///
/// Each outer iteration re-estimates the filter bank from the current iterate,
/// applies the residual linear denoiser, and restores data consistency.
inline PslrResult pslr_reconstruct(const MultiChannelGrid& b, const SamplingMask& mask, const PslrConfig& cfg) {
    using clock = std::chrono::steady_clock;
    cfg.validate();
    const LiftConfig lc = LiftConfig::for_grid(b, cfg.filter_h, cfg.filter_w);
    lc.validate();
    if (b.height() != mask.height() || b.width() != mask.width())
        throw DimensionError("pslr: mask shape differs from data");

    const auto start = clock::now();
    PslrResult res{b, {}};
    MultiChannelGrid& x = res.x;
    if (cfg.record_cost) res.trace.initial_cost = irls_cost(x, b, mask, cfg.lambda, lc);

    const double ratio = cfg.lambda / cfg.beta;
    const double operator_gain = static_cast<double>(lc.taps());
    double eps = cfg.eps0;
    double eps_min = 0.0;
    for (std::size_t t = 1; t <= cfg.outer_iterations; ++t) {
        const auto t0 = clock::now();
        const MatrixXcd g = gram(x, lc);
        if (t == 1) {
            if (!(eps > 0.0)) {
                Eigen::SelfAdjointEigenSolver<MatrixXcd> top(g, Eigen::EigenvaluesOnly);
                eps = 0.01 * top.eigenvalues().maxCoeff();
                if (!(eps > 0.0)) eps = 1.0;
            }
            eps_min = cfg.eps_min_ratio * eps;
        }
        const NullspaceUpdate nu = weight_from_gram(g, eps, lc);
        // ||G(S)^H G(S)|| <= fh*fw * ||S||^2 = fh*fw / sqrt(l_min + eps).
        const double lmin = std::max(nu.eigenvalues.minCoeff(), 0.0);
        const double step = std::min(ratio, cfg.step_safety * std::sqrt(lmin + eps) / operator_gain);

        const MultiChannelGrid z = linear_denoise(x, nu.filters, step);
        MultiChannelGrid next = dc_solve(z, b, mask, cfg.beta);
        if (!all_finite(next.data()))
            throw NumericalError("pslr: non-finite iterate at iteration " + std::to_string(t));

        double diff = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) diff += std::norm(next.data()[k] - x.data()[k]);
        const double base = norm2(x.data());
        PslrIteration it;
        it.iteration = t;
        it.epsilon = eps;
        it.step = step;
        it.relative_change = base > 0.0 ? std::sqrt(diff) / base : std::sqrt(diff);
        x = std::move(next);
        if (cfg.record_cost) it.cost = irls_cost(x, b, mask, cfg.lambda, lc);
        it.seconds = std::chrono::duration<double>(clock::now() - t0).count();
        res.trace.iterations.push_back(it);

        eps = std::max(cfg.eps_decay * eps, eps_min);
        if (it.relative_change < cfg.tolerance) {
            res.trace.converged = true;
            break;
        }
    }
    res.trace.seconds = std::chrono::duration<double>(clock::now() - start).count();
    return res;
}

}  // namespace pmri
