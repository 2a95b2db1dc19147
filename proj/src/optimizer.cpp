#include "cfmimo/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <string>
#include <utility>

#include "cfmimo/errors.hpp"
#include "cfmimo/linalg.hpp"

namespace cfmimo {

namespace {

void check_nonneg_powers(std::span<const double> p, std::size_t K, const char* where) {
    if (p.size() != K)
        throw DimensionMismatch(std::string(where) + ": power vector length " +
                                std::to_string(p.size()) + ", expected " + std::to_string(K));
    for (double pi : p)
        if (!(pi >= 0.0) || !std::isfinite(pi))
            throw InvalidParameter(std::string(where) + ": powers must be finite and >= 0");
}

template <class E>
[[noreturn]] void tag_iteration(const E& e, std::size_t it) {
    throw E("iteration " + std::to_string(it) + ": " + e.what());
}

} // namespace

WeightMatrix solve_weight_subproblem(const EffectiveStats& stats, std::span<const double> p,
                                     double noise_w, std::size_t* ridge_uses) {
    const std::size_t K = stats.K, L = stats.L;
    check_nonneg_powers(p, K, "solve_weight_subproblem");
    if (!(noise_w > 0.0))
        throw InvalidParameter("solve_weight_subproblem: noise power must be positive");

    WeightMatrix a(K);
    std::size_t ridge_count = 0;
    CMatrix B(L, L);
    for (std::size_t k = 0; k < K; ++k) {
        const CVector& g = stats.g_mean[k];
        B.set_zero();
        for (std::size_t i = 0; i < K; ++i)
            if (p[i] != 0.0) B.add_scaled(stats.cross(k, i), p[i]);
        if (p[k] != 0.0) B.add_outer(g, -p[k]);
        B.add_diag(stats.d_row(k), noise_w);
        try {
            a[k] = rank1_rayleigh_maximizer(g, B);
        } catch (const NotPositiveDefinite&) {
            const double ridge = 1e-12 * std::max(std::real(B.trace()), 0.0) /
                                 static_cast<double>(L);
            if (!(ridge > 0.0))
                throw NotPositiveDefinite("solve_weight_subproblem: UE " + std::to_string(k) +
                                          ": interference matrix not positive definite");
            for (std::size_t n = 0; n < L; ++n) B(n, n) += ridge;
            try {
                a[k] = rank1_rayleigh_maximizer(g, B);
            } catch (const NotPositiveDefinite& e) {
                throw NotPositiveDefinite("solve_weight_subproblem: UE " + std::to_string(k) +
                                          " (after ridge): " + e.what());
            }
            ++ridge_count;
            std::cerr << "solve_weight_subproblem: ridge " << ridge << " applied for UE " << k
                      << "\n";
        } catch (const ZeroVector&) {
            throw ZeroVector("solve_weight_subproblem: UE " + std::to_string(k) +
                             ": mean effective channel is zero");
        }
    }
    if (ridge_uses) *ridge_uses = ridge_count;
    return a;
}

GpCoefficients gp_coefficients(const EffectiveStats& stats, const WeightMatrix& weights,
                               double noise_w) {
    const std::size_t K = stats.K, L = stats.L;
    if (weights.size() != K)
        throw DimensionMismatch("gp_coefficients: expected one weight vector per UE");
    if (!(noise_w > 0.0))
        throw InvalidParameter("gp_coefficients: noise power must be positive");

    GpCoefficients co;
    co.K = K;
    co.A.assign(K * K, 0.0);
    co.c.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        const CVector& ak = weights[k];
        if (ak.size() != L)
            throw DimensionMismatch("gp_coefficients: weight vector length != L");
        if (std::abs(ak.norm() - 1.0) > 1e-9)
            throw InvalidParameter("gp_coefficients: weight vector must have unit norm");

        const double s2 = std::norm(dot(ak, stats.g_mean[k]));
        if (s2 <= 1e-300)
            throw ZeroSignalDirection("gp_coefficients: weights orthogonal to the mean "
                                      "effective channel for UE " + std::to_string(k));
        for (std::size_t i = 0; i < K; ++i) {
            if (i == k) continue;
            const double num = quadratic_form_real(ak, stats.cross(k, i));
            co.A[k * K + i] = std::max(num, 0.0) / s2;
        }
        double d_quad = 0.0;
        for (std::size_t l = 0; l < L; ++l) d_quad += stats.Dk[k * L + l] * std::norm(ak[l]);
        const double ck = noise_w * d_quad / s2;
        if (!(ck > 0.0))
            throw DegenerateDenominator("gp_coefficients: zero noise coefficient for UE " +
                                        std::to_string(k));
        co.c[k] = ck;
    }
    return co;
}

double approx_sinr(std::size_t k, const GpCoefficients& coeffs, std::span<const double> p) {
    const std::size_t K = coeffs.K;
    if (k >= K) throw InvalidParameter("approx_sinr: UE index out of range");
    check_nonneg_powers(p, K, "approx_sinr");
    double den = coeffs.c[k];
    for (std::size_t i = 0; i < K; ++i)
        if (i != k) den += coeffs.a(k, i) * p[i];
    return p[k] / den;
}

double min_approx_sinr(const GpCoefficients& coeffs, std::span<const double> p) {
    double t = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < coeffs.K; ++k) t = std::min(t, approx_sinr(k, coeffs, p));
    return t;
}

PowerSolution solve_power_subproblem(const GpCoefficients& coeffs,
                                     std::span<const double> pmax_w,
                                     std::size_t bisection_steps) {
    const std::size_t K = coeffs.K;
    if (K == 0 || coeffs.A.size() != K * K || coeffs.c.size() != K)
        throw InvalidParameter("solve_power_subproblem: malformed coefficient set");
    for (std::size_t k = 0; k < K; ++k) {
        if (!(coeffs.c[k] > 0.0) || !std::isfinite(coeffs.c[k]))
            throw InvalidParameter("solve_power_subproblem: noise coefficients must be > 0");
        for (std::size_t i = 0; i < K; ++i) {
            const double aki = coeffs.a(k, i);
            if (!(aki >= 0.0) || !std::isfinite(aki) || (i == k && aki != 0.0))
                throw InvalidParameter(
                    "solve_power_subproblem: interference matrix must be >= 0 with zero "
                    "diagonal");
        }
    }
    if (pmax_w.size() != K)
        throw DimensionMismatch("solve_power_subproblem: pmax length != K");
    for (double pm : pmax_w)
        if (!(pm > 0.0) || !std::isfinite(pm))
            throw InvalidParameter("solve_power_subproblem: pmax must be finite and > 0");
    if (bisection_steps == 0 || bisection_steps > 10000)
        throw InvalidParameter("solve_power_subproblem: bisection step count out of range");

    double t_hi = std::numeric_limits<double>::infinity();
    double pmax_scale = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        t_hi = std::min(t_hi, pmax_w[k] / coeffs.c[k]);
        pmax_scale = std::max(pmax_scale, pmax_w[k]);
    }

    const auto interference = [&](const std::vector<double>& p, std::size_t k) {
        double s = coeffs.c[k];
        for (std::size_t i = 0; i < K; ++i)
            if (i != k) s += coeffs.a(k, i) * p[i];
        return s;
    };

    // Least fixed point of p -> min(pmax, t (A p + c)) from zero; the target
    // t is feasible exactly when the fixed point meets every constraint.
    std::vector<double> next(K);
    const auto feasible = [&](double t, std::vector<double>& p) {
        std::fill(p.begin(), p.end(), 0.0);
        constexpr std::size_t kFixedPointCap = 5000;
        for (std::size_t n = 0; n < kFixedPointCap; ++n) {
            double delta = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                double v = t * interference(p, k);
                if (v > pmax_w[k]) v = pmax_w[k];
                next[k] = v;
                delta = std::max(delta, std::abs(v - p[k]));
            }
            p.swap(next);
            if (delta <= 1e-13 * pmax_scale) break;
        }
        for (std::size_t k = 0; k < K; ++k)
            if (t * interference(p, k) > pmax_w[k] * (1.0 + 1e-12)) return false;
        return true;
    };

    PowerSolution sol;
    sol.p.assign(K, 0.0);
    std::vector<double> p_test(K);

    if (feasible(t_hi, p_test)) {
        sol.p = p_test;
        sol.t = min_approx_sinr(coeffs, sol.p);
        return sol;
    }
    double lo = 0.0, hi = t_hi;
    for (std::size_t s = 0; s < bisection_steps; ++s) {
        const double mid = 0.5 * (lo + hi);
        if (feasible(mid, p_test)) {
            lo = mid;
            sol.p = p_test;
        } else {
            hi = mid;
        }
    }
    sol.bisection_steps = bisection_steps;
    sol.t = min_approx_sinr(coeffs, sol.p);
    return sol;
}

AlternatingResult alternating_maxmin(const StatsProvider& stats_provider,
                                     std::span<const double> pmax_w,
                                     std::span<const double> p0, double noise_w,
                                     const AlternatingOptions& opts) {
    const std::size_t K = pmax_w.size();
    if (K == 0) throw InvalidParameter("alternating_maxmin: no UEs");
    if (!stats_provider) throw InvalidParameter("alternating_maxmin: null statistics provider");
    if (p0.size() != K) throw DimensionMismatch("alternating_maxmin: p0 length != K");
    for (std::size_t k = 0; k < K; ++k)
        if (!(p0[k] >= 0.0) || p0[k] > pmax_w[k] * (1.0 + 1e-12))
            throw InvalidParameter("alternating_maxmin: p0 outside the power box");
    if (opts.max_iters == 0) throw InvalidParameter("alternating_maxmin: max_iters must be >= 1");
    if (!(opts.tol > 0.0)) throw InvalidParameter("alternating_maxmin: tol must be > 0");

    AlternatingResult res;
    res.p.assign(p0.begin(), p0.end());
    EffectiveStats stats;
    bool have_stats = false;
    double prev_t = 0.0;

    for (std::size_t it = 1; it <= opts.max_iters; ++it) {
        double t = 0.0;
        try {
            if (!have_stats || !opts.freeze_stats) {
                stats = stats_provider(res.p);
                if (stats.K != K)
                    throw DimensionMismatch(
                        "alternating_maxmin: statistics provider returned wrong UE count");
                have_stats = true;
            }
            std::size_t ridge = 0;
            res.weights = solve_weight_subproblem(stats, res.p, noise_w, &ridge);
            const GpCoefficients co = gp_coefficients(stats, res.weights, noise_w);
            PowerSolution ps = solve_power_subproblem(co, pmax_w, opts.bisection_steps);
            res.p = std::move(ps.p);
            t = ps.t;

            res.final_sinr.resize(K);
            double min_exact = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < K; ++k) {
                res.final_sinr[k] = effective_sinr(k, stats, res.p, res.weights[k], noise_w);
                min_exact = std::min(min_exact, res.final_sinr[k]);
            }
            res.trace.push_back(
                {it, res.p, t, min_exact, ridge, ps.bisection_steps});
        } catch (const NotPositiveDefinite& e) {
            tag_iteration(e, it);
        } catch (const ZeroSignalDirection& e) {
            tag_iteration(e, it);
        } catch (const DegenerateDenominator& e) {
            tag_iteration(e, it);
        } catch (const NonConvergence& e) {
            tag_iteration(e, it);
        } catch (const ZeroVector& e) {
            tag_iteration(e, it);
        }

        if (it > 1 && std::abs(t - prev_t) <= opts.tol * std::max(t, 1e-300)) {
            res.converged = true;
            break;
        }
        prev_t = t;
    }
    return res;
}

} // namespace cfmimo
