#include "cfmimo/channel.hpp"

#include <cmath>
#include <string>

namespace cfmimo {

namespace {

constexpr std::uint64_t kStreamChannel = 0x201;
constexpr std::uint64_t kStreamPilotNoise = 0x202;

constexpr std::size_t kMaxAssignmentDraws = 100000;

} // namespace

PilotAssignment assign_pilots(const NetworkConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t K = cfg.num_ues;
    const std::size_t tau_p = cfg.pilot_len();

    PilotAssignment pa;
    pa.tau_p = tau_p;
    pa.pilot_of.resize(K);

    if (cfg.reuse_factor == 1) {
        for (std::size_t k = 0; k < K; ++k) pa.pilot_of[k] = static_cast<std::uint32_t>(k);
    } else {
        std::vector<std::size_t> use_count(tau_p);
        bool covered = false;
        for (std::size_t attempt = 0; attempt < kMaxAssignmentDraws && !covered; ++attempt) {
            std::fill(use_count.begin(), use_count.end(), 0);
            for (std::size_t k = 0; k < K; ++k) {
                const auto t = static_cast<std::uint32_t>(rng.uniform_index(tau_p));
                pa.pilot_of[k] = t;
                ++use_count[t];
            }
            covered = true;
            if (K >= tau_p)
                for (std::size_t t = 0; t < tau_p; ++t)
                    if (use_count[t] == 0) covered = false;
        }
        if (!covered)
            throw NonConvergence("assign_pilots: could not cover all pilots");
    }

    pa.sharers.assign(tau_p, {});
    for (std::size_t k = 0; k < K; ++k)
        pa.sharers[pa.pilot_of[k]].push_back(static_cast<std::uint32_t>(k));
    return pa;
}

CVector pilot_observation(std::span<const CVector> h_at_ap, const PilotAssignment& pa,
                          std::uint32_t pilot, std::span<const double> pilot_powers_w,
                          std::size_t tau_p, const CVector& noise) {
    CVector z = noise;
    for (std::uint32_t i : pa.sharers[pilot]) {
        const double amp = std::sqrt(pilot_powers_w[i] * static_cast<double>(tau_p));
        const CVector& h = h_at_ap[i];
        for (std::size_t m = 0; m < z.size(); ++m) z[m] += amp * h[m];
    }
    return z;
}

CMatrix psi_matrix(const CorrelationField& R, const PilotAssignment& pa, std::uint32_t pilot,
                   std::size_t ap, std::span<const double> pilot_powers_w, double noise_w) {
    const std::size_t N = R.at(0, 0).rows();
    CMatrix psi(N, N);
    for (std::size_t m = 0; m < N; ++m) psi(m, m) = noise_w;
    for (std::uint32_t i : pa.sharers[pilot])
        psi.add_scaled(R.at(i, ap), static_cast<double>(pa.tau_p) * pilot_powers_w[i]);
    return psi;
}

CVector mmse_estimate(const CVector& z, const CMatrix& R_kl, const CholeskyFactor& psi_chol,
                      double pilot_power_w, std::size_t tau_p) {
    CVector x = psi_chol.solve(z);
    CVector hhat = R_kl.matvec(x);
    hhat *= std::sqrt(pilot_power_w * static_cast<double>(tau_p));
    return hhat;
}

CMatrix error_covariance(const CMatrix& R_kl, const CholeskyFactor& psi_chol,
                         double pilot_power_w, std::size_t tau_p) {
    const std::size_t N = R_kl.rows();
    // Z = Psi^{-1} R, column by column.
    CMatrix Z(N, N);
    CVector col(N), sol(N);
    for (std::size_t j = 0; j < N; ++j) {
        for (std::size_t i = 0; i < N; ++i) col[i] = R_kl(i, j);
        psi_chol.solve(col, sol);
        for (std::size_t i = 0; i < N; ++i) Z(i, j) = sol[i];
    }
    CMatrix C = matmul(R_kl, Z);
    C *= -(pilot_power_w * static_cast<double>(tau_p));
    C += R_kl;
    C.hermitize();
    return C;
}

ChannelModel::ChannelModel(const NetworkConfig& cfg, const Layout& layout, CorrelationField corr,
                           PilotAssignment pilots, std::vector<double> pilot_powers_w,
                           std::uint64_t drop_seed)
    : K_(cfg.num_ues),
      L_(cfg.num_aps),
      N_(cfg.ant_per_ap),
      noise_w_(cfg.noise_w()),
      drop_seed_(drop_seed),
      corr_(std::move(corr)),
      pilots_(std::move(pilots)),
      pilot_powers_(std::move(pilot_powers_w)) {
    (void)layout;
    if (pilot_powers_.size() != K_)
        throw DimensionMismatch("ChannelModel: pilot power vector length != K");

    corr_chol_.reserve(K_ * L_);
    for (std::size_t k = 0; k < K_; ++k)
        for (std::size_t l = 0; l < L_; ++l)
            corr_chol_.push_back(CholeskyFactor::compute_psd(corr_.at(k, l)));

    psi_chol_.reserve(pilots_.tau_p * L_);
    for (std::uint32_t t = 0; t < pilots_.tau_p; ++t)
        for (std::size_t l = 0; l < L_; ++l)
            psi_chol_.push_back(CholeskyFactor::compute(
                psi_matrix(corr_, pilots_, t, l, pilot_powers_, noise_w_)));

    est_map_.resize(K_ * L_);
    C_.resize(K_ * L_);
    CMatrix Z(N_, N_);
    CVector col(N_), sol(N_);
    for (std::size_t k = 0; k < K_; ++k) {
        const double ptau = pilot_powers_[k] * static_cast<double>(pilots_.tau_p);
        for (std::size_t l = 0; l < L_; ++l) {
            const CMatrix& R = corr_.at(k, l);
            const CholeskyFactor& F = psi_chol_[pilots_.pilot_of[k] * L_ + l];
            for (std::size_t j = 0; j < N_; ++j) {
                for (std::size_t i = 0; i < N_; ++i) col[i] = R(i, j);
                F.solve(col, sol);
                for (std::size_t i = 0; i < N_; ++i) Z(i, j) = sol[i];
            }
            // R Psi^{-1} = (Psi^{-1} R)^H for Hermitian R, Psi.
            CMatrix W = herm_transpose(Z);
            W *= std::sqrt(ptau);
            est_map_[k * L_ + l] = std::move(W);

            CMatrix C = matmul(R, Z);
            C *= -ptau;
            C += R;
            C.hermitize();
            C_[k * L_ + l] = std::move(C);
        }
    }
}

void ChannelModel::realization(std::size_t r, Realization& out) const {
    if (out.h.size() != K_ * L_ || out.h[0].size() != N_) out.resize(K_, L_, N_);

    CVector w(N_);
    for (std::size_t k = 0; k < K_; ++k) {
        for (std::size_t l = 0; l < L_; ++l) {
            Rng rng(mix_seed({drop_seed_, kStreamChannel, r, k, l}));
            rng.fill_cgaussian(w);
            corr_chol_[k * L_ + l].apply_factor(w, out.h[k * L_ + l]);
        }
    }

    const double sigma = std::sqrt(noise_w_);
    CVector noise(N_), z(N_);
    for (std::size_t l = 0; l < L_; ++l) {
        for (std::uint32_t t = 0; t < pilots_.tau_p; ++t) {
            Rng rng(mix_seed({drop_seed_, kStreamPilotNoise, r, t, l}));
            rng.fill_cgaussian(noise);
            noise *= sigma;
            z.set_zero();
            for (std::uint32_t i : pilots_.sharers[t]) {
                const double amp =
                    std::sqrt(pilot_powers_[i] * static_cast<double>(pilots_.tau_p));
                const CVector& h = out.h[i * L_ + l];
                for (std::size_t m = 0; m < N_; ++m) z[m] += amp * h[m];
            }
            z += noise;
            for (std::uint32_t k : pilots_.sharers[t])
                est_map_[k * L_ + l].matvec(z, out.hhat[k * L_ + l]);
        }
    }
}

} // namespace cfmimo
