#include "cfmimo/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <utility>

#include "cfmimo/errors.hpp"
#include "cfmimo/rng.hpp"

namespace cfmimo {

namespace {

constexpr std::uint64_t kStreamDrop = 0x301;
constexpr std::uint64_t kStreamPilotAssign = 0x302;

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_config(const std::string& ctx, const std::string& msg) {
    throw InvalidConfig(ctx + ": " + msg);
}

std::uint64_t parse_u64(std::string_view v, const std::string& ctx) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
        bad_config(ctx, "expected a nonnegative integer, got '" + std::string(v) + "'");
    return out;
}

double parse_f64(std::string_view v, const std::string& ctx) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
        bad_config(ctx, "expected a number, got '" + std::string(v) + "'");
    return out;
}

bool parse_bool(std::string_view v, const std::string& ctx) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad_config(ctx, "expected true/false, got '" + std::string(v) + "'");
}

Scheme parse_scheme(std::string_view v, const std::string& ctx) {
    if (v == "proposed") return Scheme::proposed;
    if (v == "fixed_power") return Scheme::fixed_power;
    bad_config(ctx, "unknown scheme '" + std::string(v) + "'");
}

CombinerKind parse_combiner(std::string_view v, const std::string& ctx) {
    if (v == "lmmse") return CombinerKind::lmmse;
    if (v == "mr") return CombinerKind::mr;
    bad_config(ctx, "unknown combiner '" + std::string(v) + "'");
}

template <class T, class Parse>
std::vector<T> parse_list(std::string_view v, const std::string& ctx, Parse parse) {
    std::vector<T> out;
    while (true) {
        const auto comma = v.find(',');
        const std::string_view item = trim(v.substr(0, comma));
        if (item.empty()) bad_config(ctx, "empty list element");
        out.push_back(parse(item, ctx));
        if (comma == std::string_view::npos) break;
        v = v.substr(comma + 1);
    }
    return out;
}

/// Per-combiner statistics memo: the fixed-power baseline and the first
/// iteration of the proposed scheme evaluate at the same powers, so one
/// estimate serves both.
struct StatsCache {
    std::vector<double> p;
    EffectiveStats stats;
    bool have = false;
};

const EffectiveStats& stats_at(const ChannelModel& model, CombinerKind comb,
                               std::size_t n_mc, StatsCache& cache,
                               std::span<const double> p) {
    if (!cache.have || !std::equal(p.begin(), p.end(), cache.p.begin(), cache.p.end())) {
        cache.stats = estimate_effective_stats(model, p, comb, n_mc, ExecPolicy::parallel);
        cache.p.assign(p.begin(), p.end());
        cache.have = true;
    }
    return cache.stats;
}

} // namespace

std::string_view to_string(Scheme s) {
    return s == Scheme::proposed ? "proposed" : "fixed_power";
}

std::string_view to_string(CombinerKind c) {
    return c == CombinerKind::lmmse ? "lmmse" : "mr";
}

void ExperimentSpec::validate() const {
    cfg.validate();
    if (n_drops == 0) throw InvalidConfig("n_drops must be >= 1");
    if (schemes.empty()) throw InvalidConfig("at least one scheme must be selected");
    if (combiners.empty()) throw InvalidConfig("at least one combiner must be selected");
    for (std::size_t i = 0; i < schemes.size(); ++i)
        for (std::size_t j = i + 1; j < schemes.size(); ++j)
            if (schemes[i] == schemes[j])
                throw InvalidConfig("duplicate scheme '" + std::string(to_string(schemes[i])) +
                                    "'");
    for (std::size_t i = 0; i < combiners.size(); ++i)
        for (std::size_t j = i + 1; j < combiners.size(); ++j)
            if (combiners[i] == combiners[j])
                throw InvalidConfig("duplicate combiner '" +
                                    std::string(to_string(combiners[i])) + "'");
    if (alt.max_iters == 0) throw InvalidConfig("max_iters must be >= 1");
    if (!(alt.tol > 0.0)) throw InvalidConfig("tol must be > 0");
    if (output_dir.empty()) throw InvalidConfig("output_dir must not be empty");
}

ExperimentSpec load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);

    ExperimentSpec spec;
    std::set<std::string, std::less<>> seen;
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        std::string_view sv = line;
        if (const auto hash = sv.find('#'); hash != std::string_view::npos)
            sv = sv.substr(0, hash);
        sv = trim(sv);
        if (sv.empty()) continue;

        const std::string ctx = path + ":" + std::to_string(ln);
        const auto eq = sv.find('=');
        if (eq == std::string_view::npos) bad_config(ctx, "expected key = value");
        const std::string_view key = trim(sv.substr(0, eq));
        const std::string_view val = trim(sv.substr(eq + 1));
        if (key.empty()) bad_config(ctx, "missing key");
        if (val.empty()) bad_config(ctx, "empty value for key '" + std::string(key) + "'");
        if (!seen.insert(std::string(key)).second)
            bad_config(ctx, "duplicate key '" + std::string(key) + "'");

        if (key == "L") spec.cfg.num_aps = parse_u64(val, ctx);
        else if (key == "K") spec.cfg.num_ues = parse_u64(val, ctx);
        else if (key == "N") spec.cfg.ant_per_ap = parse_u64(val, ctx);
        else if (key == "f") spec.cfg.reuse_factor = parse_u64(val, ctx);
        else if (key == "tau_c") spec.cfg.tau_c = parse_u64(val, ctx);
        else if (key == "bandwidth_hz") spec.cfg.bandwidth_hz = parse_f64(val, ctx);
        else if (key == "noise_dbm") spec.cfg.noise_dbm = parse_f64(val, ctx);
        else if (key == "area_m") spec.cfg.area_m = parse_f64(val, ctx);
        else if (key == "pmax_mw_min") spec.cfg.pmax_mw_min = parse_f64(val, ctx);
        else if (key == "pmax_mw_max") spec.cfg.pmax_mw_max = parse_f64(val, ctx);
        else if (key == "asd_deg") spec.cfg.asd_deg = parse_f64(val, ctx);
        else if (key == "mc_realizations") spec.cfg.mc_realizations = parse_u64(val, ctx);
        else if (key == "n_drops") spec.n_drops = parse_u64(val, ctx);
        else if (key == "seed") spec.cfg.seed = parse_u64(val, ctx);
        else if (key == "schemes") spec.schemes = parse_list<Scheme>(val, ctx, parse_scheme);
        else if (key == "combiners")
            spec.combiners = parse_list<CombinerKind>(val, ctx, parse_combiner);
        else if (key == "max_iters") spec.alt.max_iters = parse_u64(val, ctx);
        else if (key == "tol") spec.alt.tol = parse_f64(val, ctx);
        else if (key == "freeze_stats") spec.alt.freeze_stats = parse_bool(val, ctx);
        else if (key == "output_dir") spec.output_dir = std::string(val);
        else bad_config(ctx, "unknown key '" + std::string(key) + "'");
    }
    return spec;
}

std::vector<DropResult> run_drop(const ExperimentSpec& spec, std::size_t drop_index) {
    spec.validate();
    NetworkConfig cfg = spec.cfg;
    const std::uint64_t dseed = mix_seed({spec.cfg.seed, kStreamDrop, drop_index});
    cfg.seed = dseed;

    const Layout layout = generate_layout(cfg);
    CorrelationField corr(cfg, layout, dseed);
    Rng pilot_rng(mix_seed({dseed, kStreamPilotAssign}));
    PilotAssignment pilots = assign_pilots(cfg, pilot_rng);
    const ChannelModel model(cfg, layout, std::move(corr), std::move(pilots), layout.pmax_w,
                             dseed);

    const std::vector<double>& pmax = layout.pmax_w;
    const double noise = cfg.noise_w();
    const std::size_t K = cfg.num_ues;
    const std::size_t tau_p = cfg.pilot_len();

    StatsCache caches[2];
    std::vector<DropResult> out;
    out.reserve(spec.schemes.size() * spec.combiners.size());

    for (const Scheme scheme : spec.schemes) {
        for (const CombinerKind comb : spec.combiners) {
            StatsCache& cache = caches[comb == CombinerKind::lmmse ? 0 : 1];
            DropResult res;
            res.drop_index = drop_index;
            res.scheme = scheme;
            res.combiner = comb;

            if (scheme == Scheme::fixed_power) {
                const EffectiveStats& stats =
                    stats_at(model, comb, cfg.mc_realizations, cache, pmax);
                std::vector<double> sinr(K);
                for (std::size_t k = 0; k < K; ++k)
                    sinr[k] = optimal_weights_fixed_power(k, stats, pmax, noise).sinr;
                const SinrReport rep = se_from_sinr(sinr, tau_p, cfg.tau_c);
                res.min_se = rep.min_se;
                res.per_ue_se = rep.se;
            } else {
                const StatsProvider provider = [&](std::span<const double> p) {
                    return stats_at(model, comb, cfg.mc_realizations, cache, p);
                };
                AlternatingResult ares =
                    alternating_maxmin(provider, pmax, pmax, noise, spec.alt);
                const SinrReport rep = se_from_sinr(ares.final_sinr, tau_p, cfg.tau_c);
                res.min_se = rep.min_se;
                res.per_ue_se = rep.se;
                res.iterations_used = ares.trace.size();
                res.trace = std::move(ares.trace);
            }
            out.push_back(std::move(res));
        }
    }
    return out;
}

std::vector<DropResult> run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    const std::size_t n = spec.n_drops;
    std::vector<std::vector<DropResult>> by_drop(n);

    std::exception_ptr eptr = nullptr;
    std::size_t err_drop = std::numeric_limits<std::size_t>::max();
    std::atomic<std::size_t> done{0};

#pragma omp parallel for schedule(dynamic)
    for (std::int64_t d = 0; d < static_cast<std::int64_t>(n); ++d) {
        try {
            by_drop[static_cast<std::size_t>(d)] = run_drop(spec, static_cast<std::size_t>(d));
            if (!spec.quiet) {
                const std::size_t c = ++done;
                const std::string msg = "drop " + std::to_string(d) + " done (" +
                                        std::to_string(c) + "/" + std::to_string(n) + ")\n";
                std::cerr << msg;
            }
        } catch (...) {
#pragma omp critical(cfmimo_drop_err)
            if (static_cast<std::size_t>(d) < err_drop) {
                err_drop = static_cast<std::size_t>(d);
                eptr = std::current_exception();
            }
        }
    }
    if (eptr) {
        const std::string ctx = "drop " + std::to_string(err_drop) + ": ";
        try {
            std::rethrow_exception(eptr);
        } catch (const NumericalError& e) {
            throw NumericalError(ctx + e.what());
        } catch (const ConfigError& e) {
            throw ConfigError(ctx + e.what());
        } catch (const Error& e) {
            throw Error(ctx + e.what());
        } catch (const std::exception& e) {
            throw Error(ctx + e.what());
        }
    }

    std::vector<DropResult> out;
    out.reserve(n * spec.schemes.size() * spec.combiners.size());
    for (std::vector<DropResult>& drop : by_drop)
        for (DropResult& r : drop) out.push_back(std::move(r));
    return out;
}

std::string format_sig9(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
    return std::string(buf, res.ptr);
}

void emit_cdf(std::span<const DropResult> results, const std::string& path) {
    std::vector<std::pair<Scheme, CombinerKind>> order;
    std::vector<std::vector<double>> groups;
    for (const DropResult& r : results) {
        const std::pair<Scheme, CombinerKind> key{r.scheme, r.combiner};
        std::size_t idx = 0;
        while (idx < order.size() && order[idx] != key) ++idx;
        if (idx == order.size()) {
            order.push_back(key);
            groups.emplace_back();
        }
        groups[idx].push_back(r.min_se);
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open output file: " + path);
    f << "scheme,combiner,min_se_sorted,cdf\n";
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        std::vector<double>& vals = groups[gi];
        std::sort(vals.begin(), vals.end());
        const double n = static_cast<double>(vals.size());
        for (std::size_t i = 0; i < vals.size(); ++i) {
            f << to_string(order[gi].first) << ',' << to_string(order[gi].second) << ','
              << format_sig9(vals[i]) << ','
              << format_sig9(static_cast<double>(i + 1) / n) << '\n';
        }
    }
    f.flush();
    if (!f) throw IoError("write failed: " + path);
}

void emit_convergence(std::span<const DropResult> results, CombinerKind which,
                      std::size_t tau_p, std::size_t tau_c, const std::string& path) {
    if (tau_p == 0 || tau_p >= tau_c)
        throw InvalidFraction("emit_convergence: need 0 < tau_p < tau_c");
    const double prelog = 1.0 - static_cast<double>(tau_p) / static_cast<double>(tau_c);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open output file: " + path);
    f << "drop_index,iteration,min_se_exact,t_approx\n";
    for (const DropResult& r : results) {
        if (r.scheme != Scheme::proposed || r.combiner != which) continue;
        for (const IterationRecord& rec : r.trace) {
            const double se = prelog * std::log2(1.0 + rec.min_sinr_exact);
            f << r.drop_index << ',' << rec.iteration << ',' << format_sig9(se) << ','
              << format_sig9(rec.t_approx) << '\n';
        }
    }
    f.flush();
    if (!f) throw IoError("write failed: " + path);
}

void write_outputs(const ExperimentSpec& spec, std::span<const DropResult> results) {
    std::error_code ec;
    std::filesystem::create_directories(spec.output_dir, ec);
    if (ec)
        throw IoError("cannot create output directory " + spec.output_dir + ": " +
                      ec.message());

    emit_cdf(results, spec.output_dir + "/cdf.csv");
    const bool has_proposed =
        std::find(spec.schemes.begin(), spec.schemes.end(), Scheme::proposed) !=
        spec.schemes.end();
    if (has_proposed)
        for (const CombinerKind comb : spec.combiners)
            emit_convergence(results, comb, spec.cfg.pilot_len(), spec.cfg.tau_c,
                             spec.output_dir + "/convergence_" +
                                 std::string(to_string(comb)) + ".csv");
}

} // namespace cfmimo
