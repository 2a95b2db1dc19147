#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cfmimo/geometry.hpp"
#include "cfmimo/linalg.hpp"
#include "cfmimo/rng.hpp"

namespace cfmimo {

/// Pilot indices per UE plus the inverse map (which UEs share each pilot).
struct PilotAssignment {
    std::size_t tau_p = 0;
    std::vector<std::uint32_t> pilot_of;              // per UE, in [0, tau_p)
    std::vector<std::vector<std::uint32_t>> sharers;  // per pilot, ascending UE ids

    /// UEs sharing UE k's pilot (always contains k).
    const std::vector<std::uint32_t>& co_pilot(std::size_t k) const {
        return sharers[pilot_of[k]];
    }
};

/// f = 1 gives the identity assignment (mutually orthogonal pilots).
/// Otherwise pilots are drawn uniformly at random, re-drawing the whole
/// assignment until every pilot index is in use.
PilotAssignment assign_pilots(const NetworkConfig& cfg, Rng& rng);

/// Received pilot statistic at one AP: sum over sharers of
/// sqrt(p_i tau_p) h_il plus the supplied noise vector.
CVector pilot_observation(std::span<const CVector> h_at_ap, const PilotAssignment& pa,
                          std::uint32_t pilot, std::span<const double> pilot_powers_w,
                          std::size_t tau_p, const CVector& noise);

/// Correlation matrix of the pilot observation:
/// Psi = sum_{i in sharers} tau_p p_i R_il + sigma^2 I.
CMatrix psi_matrix(const CorrelationField& R, const PilotAssignment& pa, std::uint32_t pilot,
                   std::size_t ap, std::span<const double> pilot_powers_w, double noise_w);

/// MMSE channel estimate sqrt(p_k tau_p) R_kl Psi^{-1} z.
CVector mmse_estimate(const CVector& z, const CMatrix& R_kl, const CholeskyFactor& psi_chol,
                      double pilot_power_w, std::size_t tau_p);

/// Estimation error covariance C_kl = R_kl - p_k tau_p R_kl Psi^{-1} R_kl.
CMatrix error_covariance(const CMatrix& R_kl, const CholeskyFactor& psi_chol,
                         double pilot_power_w, std::size_t tau_p);

/// True channels and MMSE estimates for one Monte Carlo realization,
/// indexed (k, l) -> k * L + l.
struct Realization {
    std::vector<CVector> h;
    std::vector<CVector> hhat;

    void resize(std::size_t K, std::size_t L, std::size_t N) {
        h.assign(K * L, CVector(N));
        hhat.assign(K * L, CVector(N));
    }
};

/// Per-drop channel state: spatial correlations, pilot-phase statistics
/// (computed once at the pilot powers), and deterministic realization
/// synthesis. Realization r is a pure function of (drop_seed, r, k, l), so
/// regenerating a realization is exact regardless of iteration order and
/// the full set never needs to be cached.
class ChannelModel {
public:
    ChannelModel(const NetworkConfig& cfg, const Layout& layout, CorrelationField corr,
                 PilotAssignment pilots, std::vector<double> pilot_powers_w,
                 std::uint64_t drop_seed);

    std::size_t num_ues() const { return K_; }
    std::size_t num_aps() const { return L_; }
    std::size_t num_antennas() const { return N_; }
    std::size_t tau_p() const { return pilots_.tau_p; }
    double noise_w() const { return noise_w_; }
    std::span<const double> pilot_powers_w() const { return pilot_powers_; }
    const PilotAssignment& pilots() const { return pilots_; }
    const CorrelationField& correlations() const { return corr_; }

    const CMatrix& error_cov(std::size_t k, std::size_t l) const { return C_[k * L_ + l]; }
    const CholeskyFactor& psi_factor(std::uint32_t pilot, std::size_t l) const {
        return psi_chol_[pilot * L_ + l];
    }

    /// Fills out with the true channels and MMSE estimates of realization r.
    void realization(std::size_t r, Realization& out) const;

private:
    std::size_t K_, L_, N_;
    double noise_w_;
    std::uint64_t drop_seed_;
    CorrelationField corr_;
    PilotAssignment pilots_;
    std::vector<double> pilot_powers_;
    std::vector<CholeskyFactor> corr_chol_;  // (k, l); PSD-tolerant factors of R
    std::vector<CholeskyFactor> psi_chol_;   // (pilot, l)
    std::vector<CMatrix> est_map_;           // (k, l): sqrt(p_k tau_p) R Psi^{-1}
    std::vector<CMatrix> C_;                 // (k, l) error covariances
};

} // namespace cfmimo
