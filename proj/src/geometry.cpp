#include "cfmimo/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cfmimo/rng.hpp"

namespace cfmimo {

namespace {

// Substream tags under one drop seed.
constexpr std::uint64_t kStreamApPos = 0x101;
constexpr std::uint64_t kStreamUePos = 0x102;
constexpr std::uint64_t kStreamPmax = 0x103;
constexpr std::uint64_t kStreamShadow = 0x104;

constexpr double kShadowSigmaDb = 4.0;

} // namespace

double NetworkConfig::noise_w() const { return std::pow(10.0, (noise_dbm - 30.0) / 10.0); }

void NetworkConfig::validate() const {
    auto fail = [](const std::string& msg) { throw InvalidConfig(msg); };
    if (num_aps < 1 || num_ues < 1 || ant_per_ap < 1)
        fail("L, K and N must all be at least 1");
    if (reuse_factor < 1) fail("pilot reuse factor f must be at least 1");
    const std::size_t tau_p = pilot_len();
    if (tau_c <= tau_p) fail("tau_c must exceed tau_p = ceil(K/f)");
    if (num_ues > tau_c - tau_p) fail("K must not exceed tau_c - tau_p");
    if (bandwidth_hz <= 0.0) fail("bandwidth_hz must be positive");
    if (area_m <= 0.0) fail("area_m must be positive");
    if (pmax_mw_min <= 0.0 || pmax_mw_max <= 0.0 || pmax_mw_min > pmax_mw_max)
        fail("pmax range must satisfy 0 < pmax_mw_min <= pmax_mw_max");
    if (asd_deg <= 0.0) fail("asd_deg must be positive");
    if (mc_realizations < 1) fail("mc_realizations must be at least 1");
    if (ant_spacing <= 0.0) fail("antenna spacing must be positive");
}

Layout generate_layout(const NetworkConfig& cfg) {
    cfg.validate();
    const std::size_t L = cfg.num_aps;
    const std::size_t K = cfg.num_ues;
    const double D = cfg.area_m;

    Layout layout;
    layout.ap_pos.resize(L);
    {
        Rng rng(mix_seed({cfg.seed, kStreamApPos}));
        for (std::size_t l = 0; l < L; ++l) {
            layout.ap_pos[l].x = rng.uniform(0.0, D);
            layout.ap_pos[l].y = rng.uniform(0.0, D);
        }
    }

    // 2x2 virtual cells; the first K mod 4 cells take the extra UE.
    layout.ue_pos.resize(K);
    {
        Rng rng(mix_seed({cfg.seed, kStreamUePos}));
        const std::size_t base = K / 4, extra = K % 4;
        std::size_t k = 0;
        for (std::size_t c = 0; c < 4; ++c) {
            const std::size_t count = base + (c < extra ? 1 : 0);
            const double x0 = (c % 2) * D / 2.0;
            const double y0 = (c / 2) * D / 2.0;
            for (std::size_t j = 0; j < count; ++j, ++k) {
                layout.ue_pos[k].x = x0 + rng.uniform(0.0, D / 2.0);
                layout.ue_pos[k].y = y0 + rng.uniform(0.0, D / 2.0);
            }
        }
    }

    layout.pmax_w.resize(K);
    {
        Rng rng(mix_seed({cfg.seed, kStreamPmax}));
        for (std::size_t k = 0; k < K; ++k)
            layout.pmax_w[k] = rng.uniform(cfg.pmax_mw_min, cfg.pmax_mw_max) * 1e-3;
    }

    layout.dist_m.resize(K * L);
    layout.angle_rad.resize(K * L);
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t l = 0; l < L; ++l) {
            const double dx = layout.ue_pos[k].x - layout.ap_pos[l].x;
            const double dy = layout.ue_pos[k].y - layout.ap_pos[l].y;
            layout.dist_m[k * L + l] = std::max(kDistanceFloorM, std::hypot(dx, dy));
            layout.angle_rad[k * L + l] = std::atan2(dy, dx);
        }
    }
    return layout;
}

double large_scale_fading(double d_m, double shadow_db) {
    if (d_m <= 0.0)
        throw NonPositiveDistance("large_scale_fading: distance must be positive");
    const double gain_db = -30.5 - 36.7 * std::log10(d_m) + shadow_db;
    return std::pow(10.0, gain_db / 10.0);
}

CMatrix local_scattering_correlation(double beta, double phi_rad, double asd_rad,
                                     std::size_t n_ant, double spacing) {
    if (n_ant < 1 || beta <= 0.0 || asd_rad <= 0.0 || spacing <= 0.0)
        throw InvalidParameter("local_scattering_correlation: need N >= 1, beta > 0, asd > 0");
    CMatrix R(n_ant, n_ant);
    const double two_pi_d = 2.0 * std::numbers::pi * spacing;
    const double s = std::sin(phi_rad), c = std::cos(phi_rad);
    for (std::size_t m = 0; m < n_ant; ++m) {
        for (std::size_t n = 0; n < n_ant; ++n) {
            const double gap = static_cast<double>(n) - static_cast<double>(m);
            const double phase = two_pi_d * gap * s;
            const double spread = two_pi_d * gap * c;
            const double mag = beta * std::exp(-0.5 * asd_rad * asd_rad * spread * spread);
            R(m, n) = mag * cxd{std::cos(phase), std::sin(phase)};
        }
    }
    return R;
}

CorrelationField::CorrelationField(const NetworkConfig& cfg, const Layout& layout,
                                   std::uint64_t drop_seed)
    : K_(cfg.num_ues), L_(cfg.num_aps) {
    const double asd_rad = cfg.asd_deg * std::numbers::pi / 180.0;
    R_.resize(K_ * L_);
    beta_.resize(K_ * L_);
    Rng rng(mix_seed({drop_seed, kStreamShadow}));
    for (std::size_t k = 0; k < K_; ++k) {
        for (std::size_t l = 0; l < L_; ++l) {
            double z0, z1;
            rng.gaussian_pair(z0, z1);
            (void)z1;
            const double shadow_db = kShadowSigmaDb * z0;
            const double beta = large_scale_fading(layout.dist(k, l, L_), shadow_db);
            beta_[k * L_ + l] = beta;
            R_[k * L_ + l] = local_scattering_correlation(beta, layout.angle(k, l, L_),
                                                          asd_rad, cfg.ant_per_ap,
                                                          cfg.ant_spacing);
        }
    }
}

} // namespace cfmimo
