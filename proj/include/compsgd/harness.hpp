// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "compsgd/compressors.hpp"
#include "compsgd/optimizer.hpp"
#include "compsgd/problems.hpp"
#include "compsgd/sampling.hpp"

#include "json.hpp"

namespace compsgd {

/// One trainable configuration inside an experiment: a name (used for file
/// naming), an algorithm mode, a compressor, an optional sampling scheme
/// (partial participation only) and a schedule recipe.
struct MethodConfig {
  std::string name;
  Mode mode = Mode::Plain;
  CompressorSpec compressor;
  std::optional<SamplingScheme> sampling;
  Schedule::Kind schedule_kind = Schedule::Kind::Constant;
  double eta = 0.0;                  // Constant schedules
  std::optional<double> override_a;  // TwoPhase overrides (defaults derive from
  std::optional<double> override_d;  // problem constants and the compressor)
  bool expect_divergence = false;
};

struct ExperimentConfig {
  nlohmann::json problem_spec;  // echoed into the resolved config
  ProblemInstance problem;
  int iterations = 0;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "results";
  double target_f_gap = 1e-6;
  std::vector<MethodConfig> methods;
};

/// Parse and validate a config document. Validation is exhaustive: every
/// problem found is collected and reported in one ParameterError (one issue
/// per line), so a bad config never fails mid-run.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

nlohmann::json compressor_spec_to_json(const CompressorSpec& spec);
CompressorSpec compressor_spec_from_json(const nlohmann::json& j);
nlohmann::json sampling_to_json(const SamplingScheme& s);

/// Effective variance factor the schedule and rate bound use for a method:
/// the n-averaged factor for full participation, the participation-adjusted
/// one (via the default certificate) for sampling runs.
double method_delta_eff(const MethodConfig& m, const ProblemInstance& p);
Schedule make_method_schedule(const MethodConfig& m, const ProblemInstance& p, int iterations);

/// Rate ceiling for a method at horizon T, when one is available (two-phase
/// schedule and a mode the theory covers — constant schedules and
/// error-feedback runs yield nothing).
std::optional<double> method_rate_bound(const MethodConfig& m, const ProblemInstance& p, int T);

struct RunSummary {
  std::string method;
  std::uint64_t seed = 0;
  bool diverged = false;
  bool expect_divergence = false;
  long iters_to_target = -1;  // first k with f_gap <= target, -1 if never
  std::uint64_t total_bits = 0;
  double final_f_gap = 0.0;
  double output_f_gap = 0.0;  // f_gap at the sampled output point
};

struct ExperimentResult {
  std::vector<RunSummary> runs;
  bool unexpected_divergence = false;
  std::vector<std::string> files_written;
};

/// Execute all (method, seed) pairs (seeds in parallel), writing one CSV per
/// run ("<name>__seed<seed>.csv", header k,f_gap,dist2,bits_up), a
/// checkpoint summary CSV and the fully-resolved config JSON into
/// config.out_dir. Identical configs and seeds produce byte-identical files.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct CertificationRow {
  std::string kind;
  double max_bias_z = 0.0;     // worst componentwise bias z-score on the panel
  double delta_hat = 0.0;      // max over panel of mean ||C(x)||^2 / ||x||^2
  double delta_se = 0.0;       // standard error at that max
  double contraction_hat = 0.0;  // max over panel of mean ||C(x)-x||^2 / ||x||^2
  double nominal_delta = 0.0;
  bool unbiased = false;  // max_bias_z <= 4
  long samples = 0;
};

/// Monte-Carlo certification of one operator over a fixed panel (first basis
/// vector, all-ones, heavy-tailed random, near-sparse random). trials >= 1e4.
CertificationRow certify_compressor(const CompressorSpec& spec, int d, long trials, std::uint64_t seed);

/// The standard roster at dimension d and budget k: identity, top_k, rand_k,
/// nu_rand1, wangni_k, ternary_dither, and a split-budget induced operator.
std::vector<CertificationRow> certify_roster(int d, int k, long trials, std::uint64_t seed);
void write_certification_csv(std::ostream& out, const std::vector<CertificationRow>& rows);

struct BoundsRow {
  int n = 0;
  double delta_n = 0.0;
  double bound_full = 0.0;
  double a_s = 0.0;
  double delta_s = 0.0;
  double bound_pp = 0.0;
};

/// Rate-bound table across a grid of node counts, full participation next to
/// a sampling column. Config keys: delta, n_grid, L, mu, sigma2, D, r0, T,
/// and optional sampling {family: full | b_nice, b_fraction}; alternatively
/// a "problem" spec from which L, mu, sigma2, D, r0 are derived.
std::vector<BoundsRow> compare_bounds(const nlohmann::json& config);
void write_bounds_csv(std::ostream& out, const std::vector<BoundsRow>& rows);

/// The stock divergence-vs-correction comparison: greedy Top-1 (expected to
/// diverge), Top-1 with error feedback, and importance-sampled one-coordinate
/// compression, all at 34-bit messages and a shared constant stepsize.
ExperimentConfig make_counterexample_experiment(double t, double eta, int iterations,
                                                std::vector<std::uint64_t> seeds, std::string out_dir);

/// Format a double for CSV output: shortest representation that survives a
/// round-trip ("%.17g"), identical across runs.
std::string csv_double(double v);

}  // namespace compsgd
