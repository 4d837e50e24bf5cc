// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "compsgd/compressors.hpp"
#include "compsgd/problems.hpp"
#include "compsgd/rng.hpp"
#include "compsgd/sampling.hpp"
#include "compsgd/vec.hpp"

namespace compsgd {

enum class Mode { Plain, ErrorFeedback, PartialParticipation };

const char* mode_name(Mode mode);
Mode mode_from_name(const std::string& name);

/// Per-worker persistent state. The residual vector exists only in
/// error-feedback mode; plain and partial-participation workers are
/// stateless apart from their index (half the storage — a property tests
/// assert structurally via persistent_vector_count).
struct WorkerState {
  int node_index = 0;
  std::optional<DenseVector> error;  // residual memory, EF mode only
};

std::vector<WorkerState> make_worker_states(Mode mode, const ProblemInstance& p);
int persistent_vector_count(const WorkerState& w);

/// Stepsize/weight pair per iteration. Two flavors:
///   constant:  eta^k = eta, w^k = 1
///   two_phase: given decrease constants a (curvature toward the optimum)
///              and d (inverse of the largest safe stepsize), with horizon T:
///              if T <= d/a, eta^k = 1/d and w^k = (1 - a/d)^-(k+1);
///              otherwise the first half uses eta^k = 1/d with zero weight
///              and from t0 = ceil(T/2) on, with kappa = 2d/a,
///              eta^k = 2 / (a (kappa + k - t0)), w^k = (kappa + k - t0)^2.
/// Always eta^k <= 1/d. Requires 0 < a < d.
class Schedule {
 public:
  enum class Kind { Constant, TwoPhase };

  static Schedule constant(double eta);
  static Schedule two_phase(double a, double d, int T);

  double eta(int k) const;
  double weight(int k) const;
  Kind kind() const { return kind_; }
  double stepsize_constant() const { return eta_; }  // Constant only
  double a() const { return a_; }
  double d() const { return d_; }
  int horizon() const { return horizon_; }
  int t0() const { return t0_; }
  double kappa() const { return kappa_; }

 private:
  Schedule() = default;
  Kind kind_ = Kind::Constant;
  double eta_ = 0.0;
  double a_ = 0.0;
  double d_ = 0.0;
  int horizon_ = 0;
  int t0_ = 0;
  double kappa_ = 0.0;
  bool single_phase_ = true;
};

/// Per-iteration randomness, derived from (seed, iteration, lane) counters.
/// Worker lanes are disjoint from the subset-draw and output-sampling lanes,
/// so adding or removing draws in one lane never shifts another — this is
/// what makes full-scheme partial participation bit-identical to plain runs.
struct StepStreams {
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;

  Rng worker(int i) const { return Rng(derive_stream(seed, iteration, static_cast<std::uint64_t>(i))); }
  Rng subset() const { return Rng(derive_stream(seed, iteration, 0xfffffffffffffff1ULL)); }
  Rng output() const { return Rng(derive_stream(seed, iteration, 0xfffffffffffffff2ULL)); }
};

struct StepResult {
  DenseVector x_next;
  DenseVector aggregate;  // the averaged decoded update direction
  std::uint64_t bits = 0;
};

/// One round of compressed distributed SGD: every worker compresses its
/// stochastic gradient, the master averages the decoded messages and takes
/// x - eta * aggregate.
StepResult dcsgd_step(const DenseVector& x, std::vector<WorkerState>& workers, const ProblemInstance& p,
                      const CompressorSpec& compressor, double eta, const StepStreams& streams);

/// Error-feedback round: workers compress eta * g_i + e_i (stepsize applied
/// before compression), keep the residual e_i <- eta * g_i + e_i - Delta_i,
/// and the master takes x - aggregate (no further stepsize).
StepResult ef_step(const DenseVector& x, std::vector<WorkerState>& workers, const ProblemInstance& p,
                   const CompressorSpec& compressor, double eta, const StepStreams& streams);

/// Partial-participation round: draws S from the scheme; only sampled
/// workers compute, compress and transmit; the master reweights each decoded
/// message by 1/(n p_i). Bits are counted for sampled workers only.
StepResult pp_step(const DenseVector& x, std::vector<WorkerState>& workers, const ProblemInstance& p,
                   const CompressorSpec& compressor, const SamplingScheme& scheme, double eta,
                   const StepStreams& streams);

struct RunRow {
  int k = 0;
  double f_gap = 0.0;
  double dist2 = 0.0;
  std::uint64_t bits_up = 0;  // uplink bits spent by the step taken at k
};

struct RunRecord {
  std::vector<RunRow> rows;  // k = 0..T (shorter if the run diverged)
  DenseVector output_point;  // weighted sample over the iterates
  bool diverged = false;
  std::uint64_t total_bits = 0;
};

struct RunConfig {
  Mode mode = Mode::Plain;
  CompressorSpec compressor;
  std::optional<SamplingScheme> sampling;  // required iff mode is PartialParticipation
  Schedule schedule = Schedule::constant(0.1);
  int iterations = 0;
  std::uint64_t seed = 0;
};

/// Norm threshold past which a run is declared divergent and halted.
inline constexpr double kDivergenceThreshold = 1e12;

/// Execute `iterations` steps from p.x0. Row k holds the metrics of iterate
/// x^k and the bits spent by step k (0 for the final row). The output point
/// is drawn with probability proportional to the schedule weights via
/// reservoir sampling, so no iterate history is stored.
RunRecord run(const ProblemInstance& p, const RunConfig& config);

/// Variance factor after averaging n independent unbiased compressions:
/// 1 + (delta - 1)/n.
double averaged_delta(double delta, int n);

/// Convergence-rate ceiling for compressed SGD under the two-phase schedule,
/// full participation:
///   64 delta_n L r0 exp(-mu T / (4 delta_n L))
///     + 36 ((delta_n - 1) D + delta sigma2 / n) / (mu T)
/// with delta recovered from delta_n = 1 + (delta - 1)/n.
double dcsgd_rate_bound(double delta_n, int n, double L, double mu, double sigma2, double D, double r0, int T);

/// Same ceiling under partial participation: delta_s replaces delta_n and
/// the noise term picks up the factor (1 + a_s).
double dcsgd_pp_rate_bound(double delta, double a_s, double delta_s, int n, double L, double mu, double sigma2,
                           double D, double r0, int T);

}  // namespace compsgd
