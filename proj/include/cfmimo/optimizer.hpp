#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "cfmimo/combining.hpp"

namespace cfmimo {

/// One unit-norm, phase-fixed CPU weighting vector (length L) per UE.
using WeightMatrix = std::vector<CVector>;

/// Best weighting per UE at fixed powers: the direction B_k^{-1} g_mean[k]
/// with B_k = sum_i p_i G_ki - p_k g g^H + sigma^2 diag(D_k), which attains
/// the maximum of the SINR Rayleigh quotient. A failed factorization is
/// retried once with ridge 1e-12 tr(B_k)/L; ridge_uses (if given) counts
/// those retries.
WeightMatrix solve_weight_subproblem(const EffectiveStats& stats, std::span<const double> p,
                                     double noise_w, std::size_t* ridge_uses = nullptr);

/// Posynomial coefficients of the power subproblem. For each UE k,
///   a_ki = a_k^H G_ki a_k / |a_k^H g_mean[k]|^2   (i != k, zero diagonal),
///   c_k  = sigma^2 a_k^H diag(D_k) a_k / |a_k^H g_mean[k]|^2,
/// so the approximated SINR is p_k / (sum_{i != k} a_ki p_i + c_k).
struct GpCoefficients {
    std::size_t K = 0;
    std::vector<double> A;  // K*K row-major, zero diagonal, >= 0
    std::vector<double> c;  // length K, > 0

    double a(std::size_t k, std::size_t i) const { return A[k * K + i]; }
};

GpCoefficients gp_coefficients(const EffectiveStats& stats, const WeightMatrix& weights,
                               double noise_w);

/// Approximated SINR of UE k (self-interference term dropped); increasing in
/// p_k, non-increasing in every other power.
double approx_sinr(std::size_t k, const GpCoefficients& coeffs, std::span<const double> p);

/// min over UEs of approx_sinr.
double min_approx_sinr(const GpCoefficients& coeffs, std::span<const double> p);

struct PowerSolution {
    std::vector<double> p;           // in [0, pmax] per UE
    double t = 0.0;                  // attained min approximated SINR
    std::size_t bisection_steps = 0;
};

/// Maximizes min_k approx_sinr over the power box [0, pmax] by bisection on
/// the target t. Feasibility of a target is decided by the monotone fixed
/// point of p -> min(pmax, t (A p + c)) started from zero: the target is
/// feasible exactly when the fixed point meets every constraint. Returns the
/// power vector of the last feasible target.
PowerSolution solve_power_subproblem(const GpCoefficients& coeffs,
                                     std::span<const double> pmax_w,
                                     std::size_t bisection_steps = 60);

/// Recomputes effective statistics for a given data power vector (same
/// channel set each call, so the alternating loop sees a consistent sample).
using StatsProvider = std::function<EffectiveStats(std::span<const double>)>;

struct AlternatingOptions {
    std::size_t max_iters = 10;
    double tol = 1e-3;          // relative change of t between iterations
    bool freeze_stats = false;  // reuse iteration-1 statistics for all iterations
    std::size_t bisection_steps = 60;
};

struct IterationRecord {
    std::size_t iteration = 0;  // 1-based
    std::vector<double> p;      // powers after this iteration's power step
    double t_approx = 0.0;      // power-subproblem objective
    double min_sinr_exact = 0.0;
    std::size_t ridge_uses = 0;
    std::size_t bisection_steps = 0;
};

struct AlternatingResult {
    std::vector<double> p;
    WeightMatrix weights;
    std::vector<IterationRecord> trace;
    std::vector<double> final_sinr;  // exact per-UE SINR at the final state
    bool converged = false;
};

/// Alternating max-min optimization: per iteration, (a) refresh statistics at
/// the current powers (first iteration only when freeze_stats), (b) weight
/// subproblem, (c) posynomial coefficients, (d) power subproblem. Stops when
/// the relative change of the objective t drops to tol, or after max_iters.
/// Subproblem errors are rethrown with the iteration number attached.
AlternatingResult alternating_maxmin(const StatsProvider& stats_provider,
                                     std::span<const double> pmax_w,
                                     std::span<const double> p0, double noise_w,
                                     const AlternatingOptions& opts = {});

} // namespace cfmimo
