// Benchmark: serial reference vs OpenMP block kernel for the effective-
// channel statistics accumulation, the hot loop of every experiment.
// Also asserts the two produce bitwise-identical results.

#include <chrono>
#include <cstdio>
#include <omp.h>

#include "cfmimo/combining.hpp"

using namespace cfmimo;

namespace {

ChannelModel make_model(const NetworkConfig& cfg, std::uint64_t drop_seed) {
    const Layout lay = generate_layout(cfg);
    CorrelationField corr(cfg, lay, drop_seed);
    Rng rng(mix_seed({drop_seed, 0x999}));
    PilotAssignment pa = assign_pilots(cfg, rng);
    return ChannelModel(cfg, lay, std::move(corr), std::move(pa), lay.pmax_w, drop_seed);
}

double time_stats(const ChannelModel& model, std::span<const double> p, CombinerKind kind,
                  std::size_t n_mc, ExecPolicy policy, EffectiveStats& out) {
    const auto t0 = std::chrono::steady_clock::now();
    out = estimate_effective_stats(model, p, kind, n_mc, policy);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool identical(const EffectiveStats& a, const EffectiveStats& b) {
    if (a.g_mean.size() != b.g_mean.size() || a.Dk != b.Dk) return false;
    for (std::size_t k = 0; k < a.g_mean.size(); ++k)
        if (!(a.g_mean[k] == b.g_mean[k])) return false;
    for (std::size_t i = 0; i < a.G.size(); ++i)
        if (!(a.G[i] == b.G[i])) return false;
    return true;
}

} // namespace

int main() {
    NetworkConfig cfg;
    cfg.num_aps = 16;
    cfg.num_ues = 8;
    cfg.ant_per_ap = 2;
    cfg.reuse_factor = 2;
    cfg.seed = 1;
    const ChannelModel model = make_model(cfg, 1234);
    const Layout lay = generate_layout(cfg);

    std::printf("threads available: %d\n", omp_get_max_threads());
    std::printf("%-8s %10s %12s %12s %8s %9s\n", "kind", "n_mc", "serial (s)", "parallel (s)",
                "speedup", "identical");

    bool all_same = true;
    for (const CombinerKind kind : {CombinerKind::lmmse, CombinerKind::mr}) {
        for (const std::size_t n_mc : {200, 1000}) {
            EffectiveStats s, p;
            const double ts = time_stats(model, lay.pmax_w, kind, n_mc, ExecPolicy::serial, s);
            const double tp = time_stats(model, lay.pmax_w, kind, n_mc, ExecPolicy::parallel, p);
            const bool same = identical(s, p);
            all_same = all_same && same;
            std::printf("%-8s %10zu %12.4f %12.4f %7.2fx %9s\n",
                        kind == CombinerKind::lmmse ? "lmmse" : "mr", n_mc, ts, tp, ts / tp,
                        same ? "yes" : "NO");
        }
    }
    if (!all_same) {
        std::fprintf(stderr, "serial and parallel kernels disagree\n");
        return 1;
    }
    return 0;
}
