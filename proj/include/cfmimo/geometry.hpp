#pragma once

#include <cstdint>
#include <vector>

#include "cfmimo/complexmat.hpp"

namespace cfmimo {

/// Simulation-wide network parameters. Powers cross the boundary in
/// dBm/mW; everything past validation runs in Watts and linear gains.
struct NetworkConfig {
    std::size_t num_aps = 16;        // L
    std::size_t num_ues = 8;         // K
    std::size_t ant_per_ap = 2;      // N
    std::size_t reuse_factor = 2;    // f
    std::size_t tau_c = 200;         // samples per coherence block
    double bandwidth_hz = 20e6;
    double noise_dbm = -96.0;
    double area_m = 1000.0;          // square side D
    double pmax_mw_min = 90.0;
    double pmax_mw_max = 110.0;
    double asd_deg = 15.0;           // angular standard deviation
    std::size_t mc_realizations = 1000;
    std::uint64_t seed = 1;
    double ant_spacing = 0.5;        // in wavelengths; not a config-file key

    /// Pilot length tau_p = ceil(K / f).
    std::size_t pilot_len() const { return (num_ues + reuse_factor - 1) / reuse_factor; }

    /// Receiver noise power in Watts.
    double noise_w() const;

    /// Throws InvalidConfig on any violated invariant.
    void validate() const;
};

struct Point {
    double x = 0.0, y = 0.0;
};

/// One UE drop: positions, AP-UE distances, nominal azimuths, power caps.
struct Layout {
    std::vector<Point> ap_pos;          // L entries
    std::vector<Point> ue_pos;          // K entries
    std::vector<double> dist_m;         // (k, l) -> k * L + l
    std::vector<double> angle_rad;      // azimuth from AP l to UE k, same indexing
    std::vector<double> pmax_w;         // per-UE cap, Watts

    double dist(std::size_t k, std::size_t l, std::size_t L) const { return dist_m[k * L + l]; }
    double angle(std::size_t k, std::size_t l, std::size_t L) const { return angle_rad[k * L + l]; }
};

/// Minimum AP-UE distance; keeps the pathloss model finite.
inline constexpr double kDistanceFloorM = 1.0;

/// APs uniform over the square; UEs dropped per 2x2 virtual cell,
/// ceil(K/4) in the first K mod 4 cells and floor(K/4) in the rest.
/// Fully determined by cfg.seed.
Layout generate_layout(const NetworkConfig& cfg);

/// Linear large-scale gain: -30.5 - 36.7 log10(d / 1 m) dB plus shadowing.
double large_scale_fading(double d_m, double shadow_db);

/// N x N spatial correlation for the Gaussian local scattering model
/// (small-angle closed form): entry (m, n) =
///   beta * exp(j 2 pi delta (n-m) sin phi) * exp(-(asd^2/2) (2 pi delta (n-m) cos phi)^2).
/// Hermitian PSD with every diagonal entry equal to beta.
CMatrix local_scattering_correlation(double beta, double phi_rad, double asd_rad,
                                     std::size_t n_ant, double spacing = 0.5);

/// All K x L spatial correlation matrices for one drop. Shadow fading is
/// drawn i.i.d. N(0, 4^2) dB per (UE, AP) pair from its own substream of
/// drop_seed.
class CorrelationField {
public:
    CorrelationField(const NetworkConfig& cfg, const Layout& layout, std::uint64_t drop_seed);

    std::size_t num_ues() const { return K_; }
    std::size_t num_aps() const { return L_; }
    const CMatrix& at(std::size_t k, std::size_t l) const { return R_[k * L_ + l]; }
    double beta(std::size_t k, std::size_t l) const { return beta_[k * L_ + l]; }

private:
    std::size_t K_ = 0, L_ = 0;
    std::vector<CMatrix> R_;
    std::vector<double> beta_;
};

} // namespace cfmimo
