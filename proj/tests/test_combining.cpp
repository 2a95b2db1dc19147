#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <random>
#include <vector>

#include "cfmimo/combining.hpp"
#include "cfmimo/errors.hpp"
#include "oracles.hpp"

using namespace cfmimo;

namespace {

NetworkConfig tiny_cfg(std::size_t K = 2, std::size_t L = 2, std::size_t N = 2,
                       std::size_t f = 2) {
    NetworkConfig cfg;
    cfg.num_aps = L;
    cfg.num_ues = K;
    cfg.ant_per_ap = N;
    cfg.reuse_factor = f;
    cfg.area_m = 250.0;
    cfg.seed = 17;
    return cfg;
}

struct ModelBundle {
    Layout lay;
    ChannelModel model;
};

ModelBundle make_model(const NetworkConfig& cfg, std::uint64_t drop_seed) {
    Layout lay = generate_layout(cfg);
    CorrelationField corr(cfg, lay, drop_seed);
    Rng rng(mix_seed({drop_seed, 0x999}));
    PilotAssignment pa = assign_pilots(cfg, rng);
    ChannelModel model(cfg, lay, std::move(corr), std::move(pa), lay.pmax_w, drop_seed);
    return {std::move(lay), std::move(model)};
}

// Per-realization effective channels g_ki[l] = v_kl^H h_il, built through the
// standalone combiner entry point rather than the fused stats kernel.
std::vector<CVector> effective_rows(const ChannelModel& model, const Realization& rz,
                                    std::span<const double> p, CombinerKind kind) {
    const std::size_t K = model.num_ues(), L = model.num_aps();
    std::vector<CVector> g(K * K, CVector(L));
    for (std::size_t l = 0; l < L; ++l) {
        std::vector<CVector> hh(K);
        std::vector<CMatrix> CC(K);
        for (std::size_t i = 0; i < K; ++i) {
            hh[i] = rz.hhat[i * L + l];
            CC[i] = model.error_cov(i, l);
        }
        for (std::size_t k = 0; k < K; ++k) {
            const CVector v = kind == CombinerKind::mr
                                  ? mr_combiner(hh[k])
                                  : lmmse_combiner(hh, CC, p, model.noise_w(), k);
            for (std::size_t i = 0; i < K; ++i)
                g[k * K + i][l] = dot(v, rz.h[i * L + l]);
        }
    }
    return g;
}

double frob_diff(const CMatrix& A, const CMatrix& B) {
    double s = 0.0;
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < A.cols(); ++j) s += std::norm(A(i, j) - B(i, j));
    return std::sqrt(s);
}

} // namespace

TEST_CASE("lmmse combiner closed forms") {
    // Single UE, perfect estimate e1, p = sigma^2 = 1: v = (1/2) e1.
    std::vector<CVector> hh(1, CVector(2));
    hh[0][0] = 1.0;
    std::vector<CMatrix> CC(1, CMatrix(2, 2));
    std::vector<double> p = {1.0};
    CVector v = lmmse_combiner(hh, CC, p, 1.0, 0);
    CHECK(std::abs(v[0] - 0.5) < 1e-14);
    CHECK(std::abs(v[1]) < 1e-14);

    // Zero data power: zero combiner.
    p[0] = 0.0;
    v = lmmse_combiner(hh, CC, p, 1.0, 0);
    CHECK(v.norm() == 0.0);

    // Small noise, single UE, zero error covariance: collinear with MR.
    // (Noise sets the solve's conditioning, so the angle error grows like
    // eps / noise; 1e-6 keeps it orders below the tolerance.)
    CVector h(2);
    h[0] = cxd{0.6, -0.3};
    h[1] = cxd{-0.2, 0.8};
    hh[0] = h;
    p[0] = 0.7;
    v = lmmse_combiner(hh, CC, p, 1e-6, 0);
    const cxd corr = dot(v, h);
    const double cosang = std::abs(corr) / (v.norm() * h.norm());
    CHECK(std::acos(std::min(1.0, cosang)) < 1e-6);
}

TEST_CASE("lmmse combiner matches a direct-inverse oracle") {
    std::mt19937_64 gen(88);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t K = 2, N = 2;
        std::vector<CVector> hh(K, CVector(N));
        std::vector<CMatrix> CC;
        for (std::size_t i = 0; i < K; ++i) {
            for (std::size_t m = 0; m < N; ++m) hh[i][m] = cxd{nd(gen), nd(gen)};
            CC.push_back(oracle::random_hpd(gen, N, 0.1));
        }
        const std::vector<double> p = {0.4, 1.3};
        const double noise = 0.25;

        CMatrix gram(N, N);
        for (std::size_t m = 0; m < N; ++m) gram(m, m) = noise;
        for (std::size_t i = 0; i < K; ++i) {
            gram.add_scaled(CC[i], p[i]);
            gram.add_outer(hh[i], p[i]);
        }
        for (std::size_t k = 0; k < K; ++k) {
            const CVector v = lmmse_combiner(hh, CC, p, noise, k);
            CVector rhs = hh[k];
            rhs *= p[k];
            const CVector ref = oracle::lu_solve(gram, rhs);
            for (std::size_t m = 0; m < N; ++m) CHECK(std::abs(v[m] - ref[m]) < 1e-10);
            // Normal equations of the MSE-minimizing receiver.
            const CVector gv = gram.matvec(v);
            double resid = 0.0, scale = 0.0;
            for (std::size_t m = 0; m < N; ++m) {
                resid += std::norm(gv[m] - rhs[m]);
                scale += std::norm(rhs[m]);
            }
            CHECK(std::sqrt(resid) <= 1e-9 * std::sqrt(scale));
        }
    }
}

TEST_CASE("mr combiner is the estimate itself") {
    CVector hh(2);
    hh[0] = cxd{1.0, 0.0};
    hh[1] = cxd{0.0, 1.0};
    const CVector v = mr_combiner(hh);
    CHECK(v == hh);
}

TEST_CASE("stats accumulator: explicit sets and degenerate counts") {
    StatsAccumulator acc(1, 1);
    std::vector<CVector> v(1, CVector(1)), h(1, CVector(1));
    v[0][0] = cxd{0.0, 1.0};
    h[0][0] = cxd{2.0, 0.0};
    acc.add(v, h);
    v[0][0] = cxd{1.0, 0.0};
    h[0][0] = cxd{0.0, 4.0};
    acc.add(v, h);
    const EffectiveStats st = acc.finalize();
    // g values: conj(i) 2 = -2i, then 4i; mean = i.
    CHECK(std::abs(st.g_mean[0][0] - cxd{0.0, 1.0}) < 1e-14);
    // |g|^2 values 4 and 16; mean 10.
    CHECK(std::abs(st.G[0](0, 0) - 10.0) < 1e-13);
    // ||v||^2 values 1 and 1.
    CHECK(st.Dk[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(st.n_mc == 2);
}

TEST_CASE("effective stats: zero powers give zero statistics") {
    const NetworkConfig cfg = tiny_cfg();
    const ModelBundle mb = make_model(cfg, 71);
    const std::vector<double> p(cfg.num_ues, 0.0);
    const EffectiveStats st =
        estimate_effective_stats(mb.model, p, CombinerKind::lmmse, 8);
    for (std::size_t k = 0; k < cfg.num_ues; ++k) {
        CHECK(st.g_mean[k].norm() == 0.0);
        for (std::size_t i = 0; i < cfg.num_ues; ++i) CHECK(st.cross(k, i).frobenius() == 0.0);
        for (double d : st.d_row(k)) CHECK(d == 0.0);
    }
    CHECK_THROWS_AS(estimate_effective_stats(mb.model, p, CombinerKind::mr, 0),
                    InsufficientRealizations);
}

TEST_CASE("effective stats: single realization is the degenerate mean") {
    const NetworkConfig cfg = tiny_cfg();
    const ModelBundle mb = make_model(cfg, 72);
    const std::size_t K = cfg.num_ues, L = cfg.num_aps;
    std::vector<double> p(mb.lay.pmax_w);
    const EffectiveStats st = estimate_effective_stats(mb.model, p, CombinerKind::mr, 1);

    Realization rz;
    mb.model.realization(0, rz);
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t i = 0; i < K; ++i) {
            CVector g(L);
            for (std::size_t l = 0; l < L; ++l)
                g[l] = dot(rz.hhat[k * L + l], rz.h[i * L + l]);
            if (i == k)
                for (std::size_t l = 0; l < L; ++l)
                    CHECK(std::abs(st.g_mean[k][l] - g[l]) < 1e-18);
            CMatrix outer(L, L);
            outer.add_outer(g, 1.0);
            CHECK(frob_diff(st.cross(k, i), outer) <= 1e-12 * outer.frobenius());
        }
        for (std::size_t l = 0; l < L; ++l)
            CHECK(st.Dk[k * L + l] == doctest::Approx(rz.hhat[k * L + l].norm2()).epsilon(1e-14));
    }
}

TEST_CASE("effective stats: serial and parallel kernels agree bitwise") {
    const NetworkConfig cfg = tiny_cfg(3, 4, 2, 3);
    const ModelBundle mb = make_model(cfg, 73);
    std::vector<double> p(mb.lay.pmax_w);
    for (CombinerKind kind : {CombinerKind::lmmse, CombinerKind::mr}) {
        const EffectiveStats ser =
            estimate_effective_stats(mb.model, p, kind, 70, ExecPolicy::serial);
        const EffectiveStats par =
            estimate_effective_stats(mb.model, p, kind, 70, ExecPolicy::parallel);
        const int saved = omp_get_max_threads();
        omp_set_num_threads(3);
        const EffectiveStats par3 =
            estimate_effective_stats(mb.model, p, kind, 70, ExecPolicy::parallel);
        omp_set_num_threads(saved);
        for (std::size_t k = 0; k < ser.K; ++k) {
            CHECK(ser.g_mean[k] == par.g_mean[k]);
            CHECK(ser.g_mean[k] == par3.g_mean[k]);
            for (std::size_t i = 0; i < ser.K; ++i) {
                CHECK(ser.cross(k, i) == par.cross(k, i));
                CHECK(ser.cross(k, i) == par3.cross(k, i));
            }
        }
        CHECK(ser.Dk == par.Dk);
        CHECK(ser.Dk == par3.Dk);
    }
}

TEST_CASE("effective stats: sample covariance structure is PSD") {
    const NetworkConfig cfg = tiny_cfg();
    const ModelBundle mb = make_model(cfg, 74);
    std::vector<double> p(mb.lay.pmax_w);
    const EffectiveStats st =
        estimate_effective_stats(mb.model, p, CombinerKind::lmmse, 200);
    for (std::size_t k = 0; k < st.K; ++k) {
        for (std::size_t i = 0; i < st.K; ++i) {
            const CMatrix& G = st.cross(k, i);
            CHECK(is_hermitian(G, 1e-10));
            CHECK(oracle::min_eigenvalue(G) >= -1e-10 * std::max(G.trace().real(), 1e-300));
        }
        // Second moment minus squared mean: a covariance, PSD to rounding.
        CMatrix cov = st.cross(k, k);
        cov.add_outer(st.g_mean[k], -1.0);
        CHECK(oracle::min_eigenvalue(cov) >= -1e-10 * std::max(cov.trace().real(), 1e-300));
        for (double d : st.d_row(k)) CHECK(d >= 0.0);
    }
}

TEST_CASE("effective sinr: scalar case, phase invariance, zero power") {
    EffectiveStats st;
    st.K = 1;
    st.L = 1;
    st.g_mean.assign(1, CVector(1));
    st.g_mean[0][0] = cxd{3e-9, 4e-9};
    st.G.assign(1, CMatrix(1, 1));
    st.G[0](0, 0) = 6e-17;  // E|g|^2 >= |E g|^2 = 2.5e-17
    st.Dk = {2e-9};
    st.n_mc = 100;
    CVector a(1);
    a[0] = 1.0;
    const double p = 0.1, noise = 2.5e-13;
    std::vector<double> pv = {p};
    const double sinr = effective_sinr(0, st, pv, a, noise);
    const double expect = p * 2.5e-17 / (p * (6e-17 - 2.5e-17) + noise * 2e-9);
    CHECK(sinr == doctest::Approx(expect).epsilon(1e-12));

    CVector rot(1);
    rot[0] = std::polar(1.0, 1.234);
    CHECK(effective_sinr(0, st, pv, rot, noise) == doctest::Approx(sinr).epsilon(1e-12));

    pv[0] = 0.0;
    CHECK(effective_sinr(0, st, pv, a, noise) == 0.0);

    CVector toolong(2);
    CHECK_THROWS_AS(effective_sinr(0, st, std::vector<double>{p}, toolong, noise),
                    DimensionMismatch);
    CVector notunit(1);
    notunit[0] = 0.5;
    CHECK_THROWS_AS(effective_sinr(0, st, std::vector<double>{p}, notunit, noise),
                    InvalidParameter);
}

TEST_CASE("effective sinr: moment form equals explicit realization average") {
    const NetworkConfig cfg = tiny_cfg();
    const ModelBundle mb = make_model(cfg, 75);
    const std::size_t K = cfg.num_ues, L = cfg.num_aps, n_mc = 200;
    std::vector<double> p(mb.lay.pmax_w);

    const EffectiveStats st =
        estimate_effective_stats(mb.model, p, CombinerKind::lmmse, n_mc);

    // Rebuild the per-realization effective channels independently.
    std::vector<CMatrix> G(K * K, CMatrix(L, L));
    Realization rz;
    for (std::size_t r = 0; r < n_mc; ++r) {
        mb.model.realization(r, rz);
        const auto g = effective_rows(mb.model, rz, p, CombinerKind::lmmse);
        for (std::size_t ki = 0; ki < K * K; ++ki) G[ki].add_outer(g[ki], 1.0);
    }
    for (auto& M : G) M *= 1.0 / static_cast<double>(n_mc);

    // The fused kernel and the standalone path compute the same statistics.
    for (std::size_t ki = 0; ki < K * K; ++ki)
        CHECK(frob_diff(G[ki], st.G[ki]) <= 1e-9 * st.G[ki].frobenius());

    // Expectation-of-square form vs quadratic-form-of-moment form: the
    // interference power a^H E{g g^H} a must equal E{|a^H g|^2}.
    std::mt19937_64 gen(5005);
    for (std::size_t k = 0; k < K; ++k) {
        const CVector a = oracle::random_unit_vector(gen, L);
        for (std::size_t i = 0; i < K; ++i) {
            double avg = 0.0;
            for (std::size_t r = 0; r < n_mc; ++r) {
                mb.model.realization(r, rz);
                const auto g = effective_rows(mb.model, rz, p, CombinerKind::lmmse);
                avg += std::norm(dot(a, g[k * K + i]));
            }
            avg /= static_cast<double>(n_mc);
            const double quad = quadratic_form_real(a, st.cross(k, i));
            CHECK(std::abs(avg - quad) <= 1e-10 * std::max(avg, 1e-300));
        }
    }
}

TEST_CASE("fixed-power weights: scalar and interference-free closed forms") {
    // L = 1: the only unit weight is trivial and the SINR is the scalar ratio.
    EffectiveStats st;
    st.K = 1;
    st.L = 1;
    st.g_mean.assign(1, CVector(1));
    st.g_mean[0][0] = cxd{2e-9, 0.0};
    st.G.assign(1, CMatrix(1, 1));
    st.G[0](0, 0) = 5e-18;
    st.Dk = {1.5e-9};
    st.n_mc = 10;
    const double noise = 2.5e-13, p = 0.1;
    const std::vector<double> pv = {p};
    const FixedPowerWeights fw = optimal_weights_fixed_power(0, st, pv, noise);
    CHECK(std::abs(fw.a[0] - 1.0) < 1e-12);
    CHECK(effective_sinr(0, st, pv, fw.a, noise) == doctest::Approx(fw.sinr).epsilon(1e-9));

    // Interference-free rank-1 case: weights align with g / D and the SINR
    // collapses to p sum |g_l|^2 / (sigma^2 d_l).
    const std::size_t L = 3;
    EffectiveStats st3;
    st3.K = 1;
    st3.L = L;
    st3.g_mean.assign(1, CVector(L));
    st3.g_mean[0][0] = cxd{1e-9, 2e-9};
    st3.g_mean[0][1] = cxd{-3e-9, 0.5e-9};
    st3.g_mean[0][2] = cxd{0.2e-9, -0.8e-9};
    st3.G.assign(1, CMatrix(L, L));
    st3.G[0].add_outer(st3.g_mean[0], 1.0);
    st3.Dk = {1e-9, 3e-9, 0.5e-9};
    st3.n_mc = 10;
    const FixedPowerWeights fw3 = optimal_weights_fixed_power(0, st3, pv, noise);
    double s = 0.0;
    for (std::size_t l = 0; l < L; ++l) s += std::norm(st3.g_mean[0][l]) / (noise * st3.Dk[l]);
    CHECK(fw3.sinr == doctest::Approx(p * s).epsilon(1e-9));
    // Direction g_l / d_l up to the global phase fix.
    CVector dir(L);
    for (std::size_t l = 0; l < L; ++l) dir[l] = st3.g_mean[0][l] / st3.Dk[l];
    normalize_phase(dir);
    for (std::size_t l = 0; l < L; ++l) CHECK(std::abs(fw3.a[l] - dir[l]) < 1e-9);
}

TEST_CASE("fixed-power weights: optimality on model statistics") {
    const NetworkConfig cfg = tiny_cfg();
    const ModelBundle mb = make_model(cfg, 76);
    const std::size_t K = cfg.num_ues, L = cfg.num_aps;
    std::vector<double> p(mb.lay.pmax_w);
    const EffectiveStats st =
        estimate_effective_stats(mb.model, p, CombinerKind::lmmse, 300);
    std::mt19937_64 gen(42);
    CVector uniform(L);
    for (std::size_t l = 0; l < L; ++l) uniform[l] = 1.0 / std::sqrt(static_cast<double>(L));
    for (std::size_t k = 0; k < K; ++k) {
        const FixedPowerWeights fw = optimal_weights_fixed_power(k, st, p, mb.model.noise_w());
        CHECK(std::abs(fw.a.norm() - 1.0) < 1e-12);
        const double at_opt = effective_sinr(k, st, p, fw.a, mb.model.noise_w());
        CHECK(at_opt == doctest::Approx(fw.sinr).epsilon(1e-9));
        CHECK(fw.sinr >= effective_sinr(k, st, p, uniform, mb.model.noise_w()) * (1.0 - 1e-12));
        for (int trial = 0; trial < 1000; ++trial) {
            const CVector v = oracle::random_unit_vector(gen, L);
            CHECK(fw.sinr >= effective_sinr(k, st, p, v, mb.model.noise_w()) * (1.0 - 1e-12));
        }
    }
}

TEST_CASE("se from sinr") {
    std::vector<double> sinr = {0.0, 0.0};
    SinrReport rep = se_from_sinr(sinr, 10, 200);
    CHECK(rep.se[0] == 0.0);
    CHECK(rep.min_se == 0.0);

    sinr = {1.0};
    rep = se_from_sinr(sinr, 10, 200);
    CHECK(rep.se[0] == doctest::Approx(0.95).epsilon(1e-12));

    sinr = {3.0, 1.0};
    rep = se_from_sinr(sinr, 4, 200);
    CHECK(rep.se[0] == doctest::Approx(1.96).epsilon(1e-12));
    CHECK(rep.min_se == doctest::Approx(0.98).epsilon(1e-12));

    CHECK_THROWS_AS(se_from_sinr(sinr, 0, 200), InvalidFraction);
    CHECK_THROWS_AS(se_from_sinr(sinr, 200, 200), InvalidFraction);
    std::vector<double> bad = {-1.0};
    CHECK_THROWS_AS(se_from_sinr(bad, 10, 200), InvalidParameter);
}

TEST_CASE("lmmse dominates mr at fixed power on most setups") {
    NetworkConfig cfg = tiny_cfg(4, 8, 2, 2);
    std::size_t wins = 0;
    const std::size_t setups = 100;
    for (std::size_t s = 0; s < setups; ++s) {
        cfg.seed = 1000 + s;
        const ModelBundle mb = make_model(cfg, cfg.seed);
        std::vector<double> p(mb.lay.pmax_w);
        double min_se[2];
        int idx = 0;
        for (CombinerKind kind : {CombinerKind::lmmse, CombinerKind::mr}) {
            const EffectiveStats st = estimate_effective_stats(mb.model, p, kind, 300);
            std::vector<double> sinr(cfg.num_ues);
            for (std::size_t k = 0; k < cfg.num_ues; ++k)
                sinr[k] = optimal_weights_fixed_power(k, st, p, mb.model.noise_w()).sinr;
            min_se[idx++] = se_from_sinr(sinr, cfg.pilot_len(), cfg.tau_c).min_se;
        }
        if (min_se[0] >= min_se[1] - 1e-12) ++wins;
    }
    CHECK(wins >= 95);
}
