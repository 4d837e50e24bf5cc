// SPDX-License-Identifier: Apache-2.0
#include "compsgd/optimizer.hpp"

#include <cmath>

#include "compsgd/errors.hpp"

namespace compsgd {

namespace {

struct WorkerMessage {
  CompressedMessage msg;
  double weight = 0.0;
};

/// Decode-and-average in ascending node order with explicit per-worker
/// weights. Both full and partial paths funnel through this one loop so the
/// floating-point operation sequence is identical whenever the participant
/// sets and weights coincide.
DenseVector weighted_decode_sum(std::size_t dim, const std::vector<std::pair<int, WorkerMessage>>& messages) {
  DenseVector acc(dim, 0.0);
  for (const auto& [node, wm] : messages) {
    (void)node;
    const DenseVector part = decompress(wm.msg);
    for (std::size_t j = 0; j < dim; ++j) acc[j] += wm.weight * part[j];
  }
  return acc;
}

void check_eta(double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ParameterError("step: eta must be positive and finite");
}

}  // namespace

const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::Plain: return "plain";
    case Mode::ErrorFeedback: return "ef";
    case Mode::PartialParticipation: return "pp";
  }
  throw ParameterError("mode_name: unknown mode");
}

Mode mode_from_name(const std::string& name) {
  if (name == "plain") return Mode::Plain;
  if (name == "ef") return Mode::ErrorFeedback;
  if (name == "pp") return Mode::PartialParticipation;
  throw ParameterError("unknown mode: " + name);
}

std::vector<WorkerState> make_worker_states(Mode mode, const ProblemInstance& p) {
  std::vector<WorkerState> workers(node_count(p));
  for (int i = 0; i < node_count(p); ++i) {
    workers[i].node_index = i;
    if (mode == Mode::ErrorFeedback) workers[i].error = DenseVector(dimension(p), 0.0);
  }
  return workers;
}

int persistent_vector_count(const WorkerState& w) { return w.error.has_value() ? 1 : 0; }

Schedule Schedule::constant(double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ParameterError("Schedule::constant: eta must be positive");
  Schedule s;
  s.kind_ = Kind::Constant;
  s.eta_ = eta;
  return s;
}

Schedule Schedule::two_phase(double a, double d, int T) {
  if (!(a > 0.0)) throw ParameterError("Schedule::two_phase: a must be positive");
  if (!(d > 0.0) || !std::isfinite(d)) throw ParameterError("Schedule::two_phase: d must be positive and finite");
  if (!(a < d)) throw ParameterError("Schedule::two_phase: requires a < d");
  if (T < 0) throw ParameterError("Schedule::two_phase: horizon must be >= 0");
  Schedule s;
  s.kind_ = Kind::TwoPhase;
  s.a_ = a;
  s.d_ = d;
  s.horizon_ = T;
  s.single_phase_ = static_cast<double>(T) <= d / a;
  s.t0_ = (T + 1) / 2;  // ceil(T/2)
  s.kappa_ = 2.0 * d / a;
  return s;
}

double Schedule::eta(int k) const {
  if (k < 0) throw ParameterError("Schedule::eta: negative iteration");
  if (kind_ == Kind::Constant) return eta_;
  if (single_phase_ || k < t0_) return 1.0 / d_;
  return 2.0 / (a_ * (kappa_ + (k - t0_)));
}

double Schedule::weight(int k) const {
  if (k < 0) throw ParameterError("Schedule::weight: negative iteration");
  if (kind_ == Kind::Constant) return 1.0;
  if (single_phase_) return std::pow(1.0 - a_ / d_, -(k + 1.0));
  if (k < t0_) return 0.0;
  const double m = kappa_ + (k - t0_);
  return m * m;
}

StepResult dcsgd_step(const DenseVector& x, std::vector<WorkerState>& workers, const ProblemInstance& p,
                      const CompressorSpec& compressor, double eta, const StepStreams& streams) {
  check_eta(eta);
  const int n = static_cast<int>(workers.size());
  if (n != node_count(p)) throw ParameterError("dcsgd_step: worker/node count mismatch");
  std::vector<std::pair<int, WorkerMessage>> messages;
  messages.reserve(n);
  std::uint64_t bits = 0;
  for (int i = 0; i < n; ++i) {
    if (workers[i].error.has_value()) throw ParameterError("dcsgd_step: workers carry residual state");
    Rng rng = streams.worker(i);
    const DenseVector g = gradient_oracle(p, workers[i].node_index, x, rng);
    CompressedMessage msg = compress(compressor, g, rng);
    bits += msg.bit_cost;
    messages.emplace_back(i, WorkerMessage{std::move(msg), 1.0 / n});
  }
  StepResult r;
  r.aggregate = weighted_decode_sum(x.size(), messages);
  r.x_next = x;
  axpy(r.x_next, -eta, r.aggregate);
  r.bits = bits;
  return r;
}

StepResult ef_step(const DenseVector& x, std::vector<WorkerState>& workers, const ProblemInstance& p,
                   const CompressorSpec& compressor, double eta, const StepStreams& streams) {
  check_eta(eta);
  const int n = static_cast<int>(workers.size());
  if (n != node_count(p)) throw ParameterError("ef_step: worker/node count mismatch");
  std::vector<std::pair<int, WorkerMessage>> messages;
  messages.reserve(n);
  std::uint64_t bits = 0;
  for (int i = 0; i < n; ++i) {
    if (!workers[i].error.has_value()) throw ParameterError("ef_step: workers lack residual state");
    Rng rng = streams.worker(i);
    const DenseVector g = gradient_oracle(p, workers[i].node_index, x, rng);
    // compress the residual-corrected scaled gradient eta*g + e
    DenseVector target = *workers[i].error;
    axpy(target, eta, g);
    CompressedMessage msg = compress(compressor, target, rng);
    DenseVector sent = decompress(msg);
    for (std::size_t j = 0; j < target.size(); ++j) target[j] -= sent[j];
    *workers[i].error = std::move(target);
    bits += msg.bit_cost;
    messages.emplace_back(i, WorkerMessage{std::move(msg), 1.0 / n});
  }
  StepResult r;
  r.aggregate = weighted_decode_sum(x.size(), messages);
  r.x_next = x;
  axpy(r.x_next, -1.0, r.aggregate);  // stepsize already inside the messages
  r.bits = bits;
  return r;
}

StepResult pp_step(const DenseVector& x, std::vector<WorkerState>& workers, const ProblemInstance& p,
                   const CompressorSpec& compressor, const SamplingScheme& scheme, double eta,
                   const StepStreams& streams) {
  check_eta(eta);
  const int n = static_cast<int>(workers.size());
  if (n != node_count(p)) throw ParameterError("pp_step: worker/node count mismatch");
  if (scheme.n() != n) throw ParameterError("pp_step: scheme node count mismatch");
  const std::vector<double> prob = probability_vector(scheme);
  Rng subset_rng = streams.subset();
  const std::vector<int> subset = draw_subset(scheme, subset_rng);

  std::vector<std::pair<int, WorkerMessage>> messages;
  messages.reserve(subset.size());
  std::uint64_t bits = 0;
  for (int i : subset) {
    if (workers[i].error.has_value()) throw ParameterError("pp_step: workers carry residual state");
    Rng rng = streams.worker(i);
    const DenseVector g = gradient_oracle(p, workers[i].node_index, x, rng);
    CompressedMessage msg = compress(compressor, g, rng);
    bits += msg.bit_cost;
    messages.emplace_back(i, WorkerMessage{std::move(msg), 1.0 / (n * prob[i])});
  }
  StepResult r;
  r.aggregate = weighted_decode_sum(x.size(), messages);
  r.x_next = x;
  axpy(r.x_next, -eta, r.aggregate);
  r.bits = bits;
  return r;
}

RunRecord run(const ProblemInstance& p, const RunConfig& config) {
  if (config.iterations < 0) throw ParameterError("run: iterations must be >= 0");
  if (config.mode == Mode::PartialParticipation) {
    if (!config.sampling.has_value()) throw ParameterError("run: partial participation requires a sampling scheme");
    if (!is_proper(*config.sampling)) throw ParameterError("run: sampling scheme is improper");
    if (config.sampling->n() != node_count(p)) throw ParameterError("run: sampling scheme node count mismatch");
  } else if (config.sampling.has_value()) {
    throw ParameterError("run: sampling scheme given but mode does not use one");
  }
  validate_spec(config.compressor, static_cast<std::uint32_t>(dimension(p)));

  std::vector<WorkerState> workers = make_worker_states(config.mode, p);
  DenseVector x = p.x0;
  RunRecord record;
  record.rows.reserve(config.iterations + 1);
  record.output_point = p.x0;
  double weight_total = 0.0;

  for (int k = 0;; ++k) {
    RunRow row;
    row.k = k;
    row.f_gap = problem_value(p, x) - p.constants.f_star;
    row.dist2 = squared_distance(x, p.constants.x_star);
    record.rows.push_back(row);

    const double w = config.schedule.weight(k);
    if (w > 0.0 && all_finite(x)) {
      weight_total += w;
      Rng out = StepStreams{config.seed, static_cast<std::uint64_t>(k)}.output();
      if (out.uniform() < w / weight_total) record.output_point = x;
    }

    if (k == config.iterations || record.diverged) break;

    const StepStreams streams{config.seed, static_cast<std::uint64_t>(k)};
    const double eta = config.schedule.eta(k);
    StepResult result;
    switch (config.mode) {
      case Mode::Plain:
        result = dcsgd_step(x, workers, p, config.compressor, eta, streams);
        break;
      case Mode::ErrorFeedback:
        result = ef_step(x, workers, p, config.compressor, eta, streams);
        break;
      case Mode::PartialParticipation:
        result = pp_step(x, workers, p, config.compressor, *config.sampling, eta, streams);
        break;
    }
    record.rows.back().bits_up = result.bits;
    record.total_bits += result.bits;
    x = std::move(result.x_next);
    if (!all_finite(x) || norm(x) > kDivergenceThreshold) record.diverged = true;
  }
  return record;
}

double averaged_delta(double delta, int n) {
  if (delta < 1.0) throw ParameterError("averaged_delta: delta must be >= 1");
  if (n < 1) throw ParameterError("averaged_delta: n must be >= 1");
  return (delta - 1.0) / n + 1.0;
}

namespace {

void check_bound_args(double delta_eff, int n, double L, double mu, double sigma2, double D, double r0, int T) {
  if (!(mu > 0.0)) throw ParameterError("rate_bound: mu must be positive");
  if (!(L > 0.0) || L < mu) throw ParameterError("rate_bound: need L >= mu > 0");
  if (delta_eff < 1.0) throw ParameterError("rate_bound: effective delta must be >= 1");
  if (n < 1) throw ParameterError("rate_bound: n must be >= 1");
  if (sigma2 < 0.0 || D < 0.0 || r0 < 0.0) throw ParameterError("rate_bound: sigma2, D, r0 must be >= 0");
  if (T < 1) throw ParameterError("rate_bound: T must be >= 1");
}

}  // namespace

double dcsgd_rate_bound(double delta_n, int n, double L, double mu, double sigma2, double D, double r0, int T) {
  check_bound_args(delta_n, n, L, mu, sigma2, D, r0, T);
  const double delta = 1.0 + n * (delta_n - 1.0);
  const double head = 64.0 * delta_n * L * r0 * std::exp(-mu * T / (4.0 * delta_n * L));
  const double tail = 36.0 * ((delta_n - 1.0) * D + delta * sigma2 / n) / (mu * T);
  return head + tail;
}

double dcsgd_pp_rate_bound(double delta, double a_s, double delta_s, int n, double L, double mu, double sigma2,
                           double D, double r0, int T) {
  check_bound_args(delta_s, n, L, mu, sigma2, D, r0, T);
  if (delta < 1.0) throw ParameterError("rate_bound: delta must be >= 1");
  if (a_s < 0.0) throw ParameterError("rate_bound: a_s must be >= 0");
  const double head = 64.0 * delta_s * L * r0 * std::exp(-mu * T / (4.0 * delta_s * L));
  const double tail = 36.0 * ((delta_s - 1.0) * D + (1.0 + a_s) * delta * sigma2 / n) / (mu * T);
  return head + tail;
}

}  // namespace compsgd
