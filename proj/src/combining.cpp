#include "cfmimo/combining.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <iostream>
#include <limits>
#include <string>

#include "cfmimo/errors.hpp"

namespace cfmimo {

namespace {

// Realizations per parallel batch. Each batch is synthesized in parallel,
// then accumulated slot-by-slot in realization order, so results do not
// depend on the thread count.
constexpr std::size_t kBlock = 32;

EffectiveStats zero_stats(std::size_t K, std::size_t L) {
    EffectiveStats s;
    s.K = K;
    s.L = L;
    s.g_mean.assign(K, CVector(L));
    s.G.assign(K * K, CMatrix(L, L));
    s.Dk.assign(K * L, 0.0);
    return s;
}

void scale_stats(EffectiveStats& s, std::size_t n) {
    const double inv = 1.0 / static_cast<double>(n);
    for (CVector& m : s.g_mean) m *= inv;
    for (CMatrix& c : s.G) c *= inv;
    for (double& d : s.Dk) d *= inv;
    s.n_mc = n;
}

/// Adds one realization's contribution to the (k, i) statistics slot. Both
/// the serial and the parallel kernel funnel through here, so per-slot
/// floating-point sequences are identical.
void accumulate_one(EffectiveStats& sums, std::size_t k, std::size_t i,
                    std::span<const CVector> v, std::span<const CVector> h, CVector& g) {
    const std::size_t K = sums.K, L = sums.L;
    for (std::size_t l = 0; l < L; ++l) g[l] = dot(v[k * L + l], h[i * L + l]);
    sums.G[k * K + i].add_outer(g, 1.0);
    if (i == k) {
        sums.g_mean[k] += g;
        for (std::size_t l = 0; l < L; ++l) sums.Dk[k * L + l] += v[k * L + l].norm2();
    }
}

struct CombinerWorkspace {
    CMatrix gram;
    CVector x;
};

/// Power-independent part of the per-AP Gram matrix:
/// M0_l = sum_i p_i C_il + sigma^2 I.
std::vector<CMatrix> gram_base(const ChannelModel& model, std::span<const double> p) {
    const std::size_t K = model.num_ues(), L = model.num_aps(), N = model.num_antennas();
    std::vector<CMatrix> M0(L);
    for (std::size_t l = 0; l < L; ++l) {
        M0[l].resize(N, N);
        for (std::size_t n = 0; n < N; ++n) M0[l](n, n) = model.noise_w();
        for (std::size_t i = 0; i < K; ++i)
            if (p[i] != 0.0) M0[l].add_scaled(model.error_cov(i, l), p[i]);
    }
    return M0;
}

void make_combiners(const ChannelModel& model, std::span<const double> p, CombinerKind kind,
                    const std::vector<CMatrix>& M0, const Realization& buf,
                    std::vector<CVector>& v, CombinerWorkspace& ws) {
    const std::size_t K = model.num_ues(), L = model.num_aps();
    if (kind == CombinerKind::mr) {
        for (std::size_t kl = 0; kl < K * L; ++kl) v[kl] = buf.hhat[kl];
        return;
    }
    for (std::size_t l = 0; l < L; ++l) {
        ws.gram = M0[l];
        for (std::size_t i = 0; i < K; ++i)
            if (p[i] != 0.0) ws.gram.add_outer(buf.hhat[i * L + l], p[i]);
        const CholeskyFactor F = CholeskyFactor::compute(ws.gram);
        for (std::size_t k = 0; k < K; ++k) {
            F.solve(buf.hhat[k * L + l], ws.x);
            CVector& out = v[k * L + l];
            for (std::size_t n = 0; n < ws.x.size(); ++n) out[n] = p[k] * ws.x[n];
        }
    }
}

void check_powers(std::span<const double> p, std::size_t K, const char* where) {
    if (p.size() != K)
        throw DimensionMismatch(std::string(where) + ": power vector length " +
                                std::to_string(p.size()) + ", expected " + std::to_string(K));
    for (double pi : p)
        if (!(pi >= 0.0) || !std::isfinite(pi))
            throw InvalidParameter(std::string(where) + ": powers must be finite and >= 0");
}

} // namespace

CVector lmmse_combiner(std::span<const CVector> hhat_at_ap, std::span<const CMatrix> C_at_ap,
                       std::span<const double> data_powers_w, double noise_w, std::size_t k) {
    const std::size_t K = data_powers_w.size();
    if (hhat_at_ap.size() != K || C_at_ap.size() != K)
        throw DimensionMismatch("lmmse_combiner: per-UE spans must match the power vector");
    if (k >= K) throw InvalidParameter("lmmse_combiner: UE index out of range");
    if (!(noise_w > 0.0)) throw InvalidParameter("lmmse_combiner: noise power must be positive");

    const std::size_t N = hhat_at_ap[0].size();
    CMatrix gram(N, N);
    for (std::size_t n = 0; n < N; ++n) gram(n, n) = noise_w;
    for (std::size_t i = 0; i < K; ++i) {
        if (data_powers_w[i] == 0.0) continue;
        gram.add_scaled(C_at_ap[i], data_powers_w[i]);
        gram.add_outer(hhat_at_ap[i], data_powers_w[i]);
    }
    CVector v = cholesky_solve(gram, hhat_at_ap[k]);
    v *= data_powers_w[k];
    return v;
}

CVector mr_combiner(const CVector& hhat_kl) { return hhat_kl; }

StatsAccumulator::StatsAccumulator(std::size_t K, std::size_t L)
    : K_(K), L_(L), sums_(zero_stats(K, L)) {}

void StatsAccumulator::add(std::span<const CVector> v, std::span<const CVector> h) {
    if (v.size() != K_ * L_ || h.size() != K_ * L_)
        throw DimensionMismatch("StatsAccumulator: expected K*L combiners and channels");
    CVector g(L_);
    for (std::size_t k = 0; k < K_; ++k)
        for (std::size_t i = 0; i < K_; ++i) accumulate_one(sums_, k, i, v, h, g);
    ++count_;
}

EffectiveStats StatsAccumulator::finalize() const {
    if (count_ == 0)
        throw InsufficientRealizations("StatsAccumulator: no realizations accumulated");
    EffectiveStats out = sums_;
    scale_stats(out, count_);
    return out;
}

EffectiveStats estimate_effective_stats(const ChannelModel& model,
                                        std::span<const double> data_powers_w,
                                        CombinerKind kind, std::size_t n_mc,
                                        ExecPolicy policy) {
    const std::size_t K = model.num_ues(), L = model.num_aps(), N = model.num_antennas();
    if (n_mc == 0)
        throw InsufficientRealizations("estimate_effective_stats: n_mc must be >= 1");
    check_powers(data_powers_w, K, "estimate_effective_stats");

    std::vector<CMatrix> M0;
    if (kind == CombinerKind::lmmse) M0 = gram_base(model, data_powers_w);

    if (policy == ExecPolicy::serial) {
        StatsAccumulator acc(K, L);
        Realization buf;
        buf.resize(K, L, N);
        std::vector<CVector> v(K * L, CVector(N));
        CombinerWorkspace ws;
        for (std::size_t r = 0; r < n_mc; ++r) {
            model.realization(r, buf);
            make_combiners(model, data_powers_w, kind, M0, buf, v, ws);
            acc.add(v, buf.h);
        }
        return acc.finalize();
    }

    EffectiveStats sums = zero_stats(K, L);
    const std::size_t n_slots = std::min(kBlock, n_mc);
    std::vector<Realization> bufs(n_slots);
    std::vector<std::vector<CVector>> vs(n_slots);
    std::vector<CombinerWorkspace> wss(n_slots);
    for (std::size_t s = 0; s < n_slots; ++s) {
        bufs[s].resize(K, L, N);
        vs[s].assign(K * L, CVector(N));
    }

    std::exception_ptr eptr = nullptr;
    for (std::size_t r0 = 0; r0 < n_mc; r0 += kBlock) {
        const std::int64_t nb = static_cast<std::int64_t>(std::min(kBlock, n_mc - r0));
#pragma omp parallel for schedule(static)
        for (std::int64_t j = 0; j < nb; ++j) {
            try {
                const std::size_t s = static_cast<std::size_t>(j);
                model.realization(r0 + s, bufs[s]);
                make_combiners(model, data_powers_w, kind, M0, bufs[s], vs[s], wss[s]);
            } catch (...) {
#pragma omp critical(cfmimo_stats_err)
                if (!eptr) eptr = std::current_exception();
            }
        }
        if (eptr) std::rethrow_exception(eptr);

        const std::int64_t n_tasks = static_cast<std::int64_t>(K * K);
#pragma omp parallel for schedule(static)
        for (std::int64_t t = 0; t < n_tasks; ++t) {
            try {
                const std::size_t k = static_cast<std::size_t>(t) / K;
                const std::size_t i = static_cast<std::size_t>(t) % K;
                CVector g(L);
                for (std::int64_t j = 0; j < nb; ++j)
                    accumulate_one(sums, k, i, vs[static_cast<std::size_t>(j)],
                                   bufs[static_cast<std::size_t>(j)].h, g);
            } catch (...) {
#pragma omp critical(cfmimo_stats_err)
                if (!eptr) eptr = std::current_exception();
            }
        }
        if (eptr) std::rethrow_exception(eptr);
    }
    scale_stats(sums, n_mc);
    return sums;
}

double effective_sinr(std::size_t k, const EffectiveStats& stats,
                      std::span<const double> data_powers_w, const CVector& a_k,
                      double noise_w) {
    const std::size_t K = stats.K, L = stats.L;
    if (k >= K) throw InvalidParameter("effective_sinr: UE index out of range");
    check_powers(data_powers_w, K, "effective_sinr");
    if (a_k.size() != L) throw DimensionMismatch("effective_sinr: weight vector length != L");
    if (std::abs(a_k.norm() - 1.0) > 1e-9)
        throw InvalidParameter("effective_sinr: weight vector must have unit norm");

    const cxd s = dot(a_k, stats.g_mean[k]);
    const double signal = data_powers_w[k] * std::norm(s);
    if (signal <= 0.0) return 0.0;

    double den = 0.0;
    for (std::size_t i = 0; i < K; ++i)
        if (data_powers_w[i] != 0.0)
            den += data_powers_w[i] * quadratic_form_real(a_k, stats.cross(k, i));
    den -= signal;
    double d_quad = 0.0;
    for (std::size_t l = 0; l < L; ++l) d_quad += stats.Dk[k * L + l] * std::norm(a_k[l]);
    den += noise_w * d_quad;

    if (den <= 0.0) {
        const double d_min = *std::min_element(stats.Dk.begin() + k * L,
                                               stats.Dk.begin() + (k + 1) * L);
        const double clamp = noise_w * d_min * 1e-6;
        if (clamp <= 1e-300)
            throw DegenerateDenominator("effective_sinr: interference-plus-noise power "
                                        "vanished for UE " + std::to_string(k));
        std::cerr << "effective_sinr: non-positive denominator " << den << " for UE " << k
                  << ", clamped to " << clamp << "\n";
        den = clamp;
    } else if (den <= 1e-300) {
        throw DegenerateDenominator("effective_sinr: denominator underflow for UE " +
                                    std::to_string(k));
    }
    return signal / den;
}

FixedPowerWeights optimal_weights_fixed_power(std::size_t k, const EffectiveStats& stats,
                                              std::span<const double> data_powers_w,
                                              double noise_w) {
    const std::size_t K = stats.K, L = stats.L;
    if (k >= K) throw InvalidParameter("optimal_weights_fixed_power: UE index out of range");
    check_powers(data_powers_w, K, "optimal_weights_fixed_power");

    const CVector& g = stats.g_mean[k];
    if (g.norm() <= 1e-300)
        throw ZeroVector("optimal_weights_fixed_power: mean effective channel is zero for UE " +
                         std::to_string(k));

    CMatrix M(L, L);
    for (std::size_t i = 0; i < K; ++i)
        if (data_powers_w[i] != 0.0) M.add_scaled(stats.cross(k, i), data_powers_w[i]);
    M.add_diag(stats.d_row(k), noise_w);

    CVector x = equilibrated_cholesky_solve(M, g);
    const double q = std::real(dot(g, x));
    const double pk_q = data_powers_w[k] * q;
    const double rest = 1.0 - pk_q;
    if (rest <= 1e-300)
        throw DegenerateDenominator(
            "optimal_weights_fixed_power: interference matrix is singular for UE " +
            std::to_string(k));

    normalize_phase(x);
    return {std::move(x), pk_q / rest};
}

SinrReport se_from_sinr(std::span<const double> sinr, std::size_t tau_p, std::size_t tau_c) {
    if (tau_p == 0 || tau_p >= tau_c)
        throw InvalidFraction("se_from_sinr: need 0 < tau_p < tau_c, got tau_p=" +
                              std::to_string(tau_p) + ", tau_c=" + std::to_string(tau_c));
    if (sinr.empty()) throw InvalidParameter("se_from_sinr: empty SINR vector");

    const double prelog =
        1.0 - static_cast<double>(tau_p) / static_cast<double>(tau_c);
    SinrReport rep;
    rep.sinr.assign(sinr.begin(), sinr.end());
    rep.se.resize(sinr.size());
    rep.min_se = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sinr.size(); ++i) {
        if (!(sinr[i] >= 0.0) || !std::isfinite(sinr[i]))
            throw InvalidParameter("se_from_sinr: SINR values must be finite and >= 0");
        rep.se[i] = prelog * std::log2(1.0 + sinr[i]);
        rep.min_se = std::min(rep.min_se, rep.se[i]);
    }
    return rep;
}

} // namespace cfmimo
