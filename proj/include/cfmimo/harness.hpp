#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfmimo/optimizer.hpp"

namespace cfmimo {

enum class Scheme { proposed, fixed_power };

std::string_view to_string(Scheme s);
std::string_view to_string(CombinerKind c);

/// One full experiment: network parameters plus what to run and where to
/// write. Schemes/combiners keep config order; output groups follow it.
struct ExperimentSpec {
    NetworkConfig cfg;
    std::size_t n_drops = 20;
    std::vector<Scheme> schemes{Scheme::proposed, Scheme::fixed_power};
    std::vector<CombinerKind> combiners{CombinerKind::lmmse, CombinerKind::mr};
    std::string output_dir = "out";
    AlternatingOptions alt;
    bool quiet = false;

    /// Throws InvalidConfig on any violated invariant.
    void validate() const;
};

/// Per-(drop, scheme, combiner) outcome. trace is nonempty only for the
/// proposed scheme.
struct DropResult {
    std::size_t drop_index = 0;
    Scheme scheme = Scheme::fixed_power;
    CombinerKind combiner = CombinerKind::lmmse;
    double min_se = 0.0;                 // bits/s/Hz
    std::vector<double> per_ue_se;
    std::size_t iterations_used = 0;
    std::vector<IterationRecord> trace;
};

/// Parses a flat `key = value` config file (`#` starts a comment). Unknown
/// or duplicate keys fail; missing keys keep their defaults. Semantic
/// validation is separate (ExperimentSpec::validate).
ExperimentSpec load_config(const std::string& path);

/// Runs every (scheme, combiner) pair for one drop. Deterministic in
/// (spec.cfg.seed, drop_index); all pairs share the same layout, pilot
/// assignment, and channel realizations.
std::vector<DropResult> run_drop(const ExperimentSpec& spec, std::size_t drop_index);

/// All drops, parallel across drop indices, results ordered by drop_index
/// regardless of completion order. Progress goes to stderr unless quiet.
std::vector<DropResult> run_experiment(const ExperimentSpec& spec);

/// CSV `scheme,combiner,min_se_sorted,cdf`: per (scheme, combiner) group in
/// first-appearance order, min-SE ascending, cdf = rank / group size.
void emit_cdf(std::span<const DropResult> results, const std::string& path);

/// CSV `drop_index,iteration,min_se_exact,t_approx` for proposed-scheme
/// results with the given combiner, in drop order.
void emit_convergence(std::span<const DropResult> results, CombinerKind which,
                      std::size_t tau_p, std::size_t tau_c, const std::string& path);

/// Creates output_dir and writes cdf.csv plus per-combiner convergence
/// files (convergence_lmmse.csv / convergence_mr.csv) when the proposed
/// scheme was run.
void write_outputs(const ExperimentSpec& spec, std::span<const DropResult> results);

/// Locale-free number formatting, 9 significant digits (shortest form).
std::string format_sig9(double v);

} // namespace cfmimo
