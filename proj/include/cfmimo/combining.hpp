#pragma once

#include <span>
#include <vector>

#include "cfmimo/channel.hpp"

namespace cfmimo {

enum class CombinerKind { lmmse, mr };

/// Kernel execution policy. `serial` is the plain streaming reference;
/// `parallel` is the OpenMP block-structured kernel, deterministic for any
/// thread count (per-slot accumulation in fixed realization order).
enum class ExecPolicy { serial, parallel };

/// Local MMSE combining vector at one AP:
/// v = p_k (sum_i p_i (hhat_i hhat_i^H + C_i) + sigma^2 I)^{-1} hhat_k,
/// with the current data powers. Spans are UE-indexed at a fixed AP.
CVector lmmse_combiner(std::span<const CVector> hhat_at_ap, std::span<const CMatrix> C_at_ap,
                       std::span<const double> data_powers_w, double noise_w, std::size_t k);

/// Maximum-ratio combining: v = hhat.
CVector mr_combiner(const CVector& hhat_kl);

/// Monte Carlo estimates of the CPU-side statistics: mean effective channel
/// E{g_kk}, cross-correlations E{g_ki g_ki^H}, and per-AP combiner energies
/// D_k = diag(E||v_kl||^2).
struct EffectiveStats {
    std::size_t K = 0, L = 0;
    std::vector<CVector> g_mean;  // per UE, length L
    std::vector<CMatrix> G;       // (k, i) -> k * K + i, each L x L
    std::vector<double> Dk;       // (k, l) -> k * L + l
    std::size_t n_mc = 0;

    const CMatrix& cross(std::size_t k, std::size_t i) const { return G[k * K + i]; }
    std::span<const double> d_row(std::size_t k) const { return {Dk.data() + k * L, L}; }
};

/// Streaming accumulator over realizations; lets tests feed explicit
/// combiner/channel sets. g_ki pairs the estimate-based combiner with the
/// true channel.
class StatsAccumulator {
public:
    StatsAccumulator(std::size_t K, std::size_t L);

    /// v and h are (k, l) -> k * L + l indexed.
    void add(std::span<const CVector> v, std::span<const CVector> h);

    EffectiveStats finalize() const;

private:
    std::size_t K_, L_;
    std::size_t count_ = 0;
    EffectiveStats sums_;
};

/// Runs n_mc seeded realizations of the model, forms combiners at the given
/// data powers, and accumulates the effective-channel statistics.
EffectiveStats estimate_effective_stats(const ChannelModel& model,
                                        std::span<const double> data_powers_w,
                                        CombinerKind kind, std::size_t n_mc,
                                        ExecPolicy policy = ExecPolicy::parallel);

/// Effective uplink SINR of UE k for weighting vector a_k (unit norm):
///   p_k |a^H E{g_kk}|^2 /
///   a^H (sum_i p_i E{g_ki g_ki^H} - p_k E{g_kk} E{g_kk}^H + sigma^2 D_k) a.
/// A non-positive denominator (finite-sample artifact) is clamped to
/// sigma^2 min_l D_k[l] 1e-6 with a diagnostic on stderr.
double effective_sinr(std::size_t k, const EffectiveStats& stats,
                      std::span<const double> data_powers_w, const CVector& a_k,
                      double noise_w);

struct FixedPowerWeights {
    CVector a;    // unit norm, phase-fixed
    double sinr;  // closed-form maximum at fixed powers
};

/// Optimal CPU weighting for fixed transmit powers:
/// a_k = (sum_i p_i E{g_ki g_ki^H} + sigma^2 D_k)^{-1} E{g_kk}, and the
/// attained maximum SINR.
FixedPowerWeights optimal_weights_fixed_power(std::size_t k, const EffectiveStats& stats,
                                              std::span<const double> data_powers_w,
                                              double noise_w);

struct SinrReport {
    std::vector<double> sinr;  // linear
    std::vector<double> se;    // bits/s/Hz
    double min_se = 0.0;
};

/// SE_k = (1 - tau_p / tau_c) log2(1 + SINR_k); min over UEs.
SinrReport se_from_sinr(std::span<const double> sinr, std::size_t tau_p, std::size_t tau_c);

} // namespace cfmimo
