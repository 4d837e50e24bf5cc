// SPDX-License-Identifier: Apache-2.0
#include "compsgd/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <set>
#include <sstream>

#include "compsgd/errors.hpp"
#include "compsgd/induced.hpp"

namespace compsgd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Issues {
  std::vector<std::string> list;
  void add(std::string s) { list.push_back(std::move(s)); }
  bool empty() const { return list.empty(); }
  [[noreturn]] void raise() const {
    std::string msg = "config validation failed:";
    for (const std::string& s : list) msg += "\n  - " + s;
    throw ParameterError(msg);
  }
};

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& ctx, Issues& issues) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        ok = true;
        break;
      }
    if (!ok) issues.add(ctx + ": unknown key '" + item.key() + "'");
  }
}

bool name_is_safe(const std::string& name) {
  if (name.empty() || name.size() > 64) return false;
  for (char c : name)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

ProblemInstance problem_spec_from_json(const json& j, Issues& issues, bool& ok) {
  ok = false;
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    issues.add("problem: expected an object with a string 'kind'");
    return {};
  }
  const std::string kind = j["kind"].get<std::string>();
  try {
    if (kind == "counterexample") {
      check_keys(j, {"kind", "t"}, "problem", issues);
      const double t = j.value("t", 1.0);
      ProblemInstance p = make_counterexample(t);
      ok = true;
      return p;
    }
    if (kind == "random_quadratic") {
      check_keys(j, {"kind", "n", "d", "mu", "L", "heterogeneity", "sigma2", "seed"}, "problem", issues);
      for (const char* req : {"n", "d", "mu", "L"})
        if (!j.contains(req)) {
          issues.add(std::string("problem: random_quadratic requires '") + req + "'");
          return {};
        }
      ProblemInstance p = make_random_quadratic(j["n"].get<int>(), j["d"].get<int>(), j["mu"].get<double>(),
                                                j["L"].get<double>(), j.value("heterogeneity", 0.0),
                                                j.value("sigma2", 0.0), j.value("seed", std::uint64_t{0}));
      ok = true;
      return p;
    }
    if (kind == "instance") {
      check_keys(j, {"kind", "instance"}, "problem", issues);
      if (!j.contains("instance")) {
        issues.add("problem: kind 'instance' requires an 'instance' document");
        return {};
      }
      ProblemInstance p = problem_from_json(j["instance"]);
      ok = true;
      return p;
    }
    issues.add("problem: unknown kind '" + kind + "'");
  } catch (const std::exception& e) {
    issues.add(std::string("problem: ") + e.what());
  }
  return {};
}

SamplingScheme sampling_from_json(const json& j, int n) {
  if (!j.is_object() || !j.contains("family") || !j["family"].is_string())
    throw ParameterError("sampling: expected an object with a string 'family'");
  const std::string family = j["family"].get<std::string>();
  if (family == "full") return SamplingScheme::full(n);
  if (family == "b_nice") {
    if (!j.contains("b")) throw ParameterError("sampling: b_nice requires 'b'");
    return SamplingScheme::b_nice(n, j["b"].get<int>());
  }
  if (family == "independent") {
    if (!j.contains("p")) throw ParameterError("sampling: independent requires 'p'");
    std::vector<double> p = j["p"].get<std::vector<double>>();
    if (static_cast<int>(p.size()) != n) throw ParameterError("sampling: 'p' must have one entry per node");
    return SamplingScheme::independent(std::move(p));
  }
  if (family == "explicit") {
    if (j.contains("file")) return load_explicit_sampling_file(j["file"].get<std::string>(), n);
    if (!j.contains("table")) throw ParameterError("sampling: explicit requires 'table' or 'file'");
    std::vector<std::pair<std::uint32_t, double>> table;
    for (const json& row : j["table"]) {
      if (!row.is_array() || row.size() != 2) throw ParameterError("sampling: table rows must be [mask, prob]");
      table.emplace_back(row[0].get<std::uint32_t>(), row[1].get<double>());
    }
    return SamplingScheme::explicit_table(n, std::move(table));
  }
  throw ParameterError("sampling: unknown family '" + family + "'");
}

std::string spec_label(const CompressorSpec& spec) {
  switch (spec.kind) {
    case CompressorKind::Identity: return "identity";
    case CompressorKind::NuRand1: return "nu_rand1";
    case CompressorKind::TernaryDither: return "ternary_dither";
    case CompressorKind::TopK: return "top_k(" + std::to_string(spec.k) + ")";
    case CompressorKind::RandK: return "rand_k(" + std::to_string(spec.k) + ")";
    case CompressorKind::WangniK: return "wangni_k(" + std::to_string(spec.k) + ")";
    case CompressorKind::Induced:
      return "induced(" + spec_label(spec.inner[0]) + "+" + spec_label(spec.inner[1]) + ")";
  }
  return "unknown";
}

}  // namespace

std::string csv_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json compressor_spec_to_json(const CompressorSpec& spec) {
  json j;
  j["kind"] = kind_name(spec.kind);
  if (spec.kind == CompressorKind::TopK || spec.kind == CompressorKind::RandK ||
      spec.kind == CompressorKind::WangniK)
    j["k"] = spec.k;
  if (spec.kind == CompressorKind::Induced) {
    j["first"] = compressor_spec_to_json(spec.inner[0]);
    j["second"] = compressor_spec_to_json(spec.inner[1]);
  }
  return j;
}

CompressorSpec compressor_spec_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw ParameterError("compressor: expected an object with a string 'kind'");
  try {
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "induced" && j.contains("split_budget")) return split_budget_induced_spec(j["split_budget"].get<int>());
    CompressorSpec spec;
    spec.kind = kind_from_name(kind);
    switch (spec.kind) {
      case CompressorKind::TopK:
      case CompressorKind::RandK:
      case CompressorKind::WangniK:
        if (!j.contains("k")) throw ParameterError("compressor: '" + kind + "' requires 'k'");
        spec.k = j["k"].get<int>();
        break;
      case CompressorKind::Induced:
        if (!j.contains("first") || !j.contains("second"))
          throw ParameterError("compressor: induced requires 'first' and 'second' (or 'split_budget')");
        return induced_spec(compressor_spec_from_json(j["first"]), compressor_spec_from_json(j["second"]));
      default:
        break;
    }
    return spec;
  } catch (const json::exception& e) {
    throw ParameterError(std::string("compressor: ") + e.what());
  }
}

json sampling_to_json(const SamplingScheme& s) {
  json j;
  switch (s.family()) {
    case SamplingScheme::Family::Full:
      j["family"] = "full";
      break;
    case SamplingScheme::Family::BNice:
      j["family"] = "b_nice";
      j["b"] = s.b();
      break;
    case SamplingScheme::Family::Independent:
      j["family"] = "independent";
      j["p"] = probability_vector(s);
      break;
    case SamplingScheme::Family::Explicit: {
      j["family"] = "explicit";
      json table = json::array();
      for (const auto& [mask, prob] : s.table()) table.push_back(json::array({mask, prob}));
      j["table"] = std::move(table);
      break;
    }
  }
  return j;
}

ExperimentConfig parse_experiment_config(const json& j) {
  if (!j.is_object()) throw ParameterError("config: expected a JSON object");
  Issues issues;
  check_keys(j, {"problem", "iterations", "seeds", "out", "target_f_gap", "methods"}, "config", issues);

  ExperimentConfig cfg;
  bool problem_ok = false;
  if (!j.contains("problem")) {
    issues.add("problem: missing");
  } else {
    cfg.problem_spec = j["problem"];
    cfg.problem = problem_spec_from_json(j["problem"], issues, problem_ok);
  }

  if (!j.contains("iterations")) {
    issues.add("iterations: missing");
  } else {
    try {
      cfg.iterations = j["iterations"].get<int>();
      if (cfg.iterations < 0) issues.add("iterations: must be >= 0");
    } catch (const json::exception&) {
      issues.add("iterations: must be an integer");
    }
  }

  cfg.seeds = {1};
  if (j.contains("seeds")) {
    try {
      cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    } catch (const json::exception&) {
      issues.add("seeds: must be an array of nonnegative integers");
    }
  }

  if (j.contains("out")) {
    if (j["out"].is_string())
      cfg.out_dir = j["out"].get<std::string>();
    else
      issues.add("out: must be a string");
  }

  if (j.contains("target_f_gap")) {
    try {
      cfg.target_f_gap = j["target_f_gap"].get<double>();
      if (!(cfg.target_f_gap > 0.0)) issues.add("target_f_gap: must be positive");
    } catch (const json::exception&) {
      issues.add("target_f_gap: must be a number");
    }
  }

  if (!j.contains("methods") || !j["methods"].is_array() || j["methods"].empty()) {
    issues.add("methods: need a non-empty array");
  } else {
    std::set<std::string> names;
    int idx = 0;
    for (const json& mj : j["methods"]) {
      const std::string ctx = "methods[" + std::to_string(idx) + "]";
      ++idx;
      MethodConfig m;
      if (!mj.is_object()) {
        issues.add(ctx + ": expected an object");
        continue;
      }
      check_keys(mj, {"name", "mode", "compressor", "sampling", "schedule", "expect_divergence"}, ctx, issues);

      if (!mj.contains("name") || !mj["name"].is_string() || !name_is_safe(mj["name"].get<std::string>())) {
        issues.add(ctx + ": 'name' must be a short [A-Za-z0-9_-]+ string");
      } else {
        m.name = mj["name"].get<std::string>();
        if (!names.insert(m.name).second) issues.add(ctx + ": duplicate method name '" + m.name + "'");
      }

      bool mode_ok = false;
      if (!mj.contains("mode") || !mj["mode"].is_string()) {
        issues.add(ctx + ": 'mode' must be one of plain|ef|pp");
      } else {
        try {
          m.mode = mode_from_name(mj["mode"].get<std::string>());
          mode_ok = true;
        } catch (const ParameterError& e) {
          issues.add(ctx + ": " + e.what());
        }
      }

      bool compressor_ok = false;
      if (!mj.contains("compressor")) {
        issues.add(ctx + ": 'compressor' missing");
      } else {
        try {
          m.compressor = compressor_spec_from_json(mj["compressor"]);
          if (problem_ok) validate_spec(m.compressor, static_cast<std::uint32_t>(dimension(cfg.problem)));
          compressor_ok = true;
        } catch (const std::exception& e) {
          issues.add(ctx + ": " + e.what());
        }
      }

      if (mode_ok && m.mode == Mode::PartialParticipation) {
        if (!mj.contains("sampling")) {
          issues.add(ctx + ": partial participation requires 'sampling'");
        } else if (problem_ok) {
          try {
            m.sampling = sampling_from_json(mj["sampling"], node_count(cfg.problem));
            if (!is_proper(*m.sampling)) issues.add(ctx + ": sampling scheme is improper");
          } catch (const std::exception& e) {
            issues.add(ctx + ": " + e.what());
          }
        }
      } else if (mj.contains("sampling")) {
        issues.add(ctx + ": 'sampling' is only valid with mode 'pp'");
      }

      if (!mj.contains("schedule") || !mj["schedule"].is_object() || !mj["schedule"].contains("kind")) {
        issues.add(ctx + ": 'schedule' must be an object with 'kind'");
      } else {
        const json& sj = mj["schedule"];
        const std::string skind = sj["kind"].is_string() ? sj["kind"].get<std::string>() : "";
        if (skind == "constant") {
          check_keys(sj, {"kind", "eta"}, ctx + ".schedule", issues);
          m.schedule_kind = Schedule::Kind::Constant;
          if (!sj.contains("eta")) {
            issues.add(ctx + ": constant schedule requires 'eta'");
          } else {
            try {
              m.eta = sj["eta"].get<double>();
              if (!(m.eta > 0.0)) issues.add(ctx + ": eta must be positive");
            } catch (const json::exception&) {
              issues.add(ctx + ": eta must be a number");
            }
          }
        } else if (skind == "two_phase") {
          check_keys(sj, {"kind", "a", "d"}, ctx + ".schedule", issues);
          m.schedule_kind = Schedule::Kind::TwoPhase;
          try {
            if (sj.contains("a")) m.override_a = sj["a"].get<double>();
            if (sj.contains("d")) m.override_d = sj["d"].get<double>();
          } catch (const json::exception&) {
            issues.add(ctx + ": schedule 'a'/'d' must be numbers");
          }
        } else {
          issues.add(ctx + ": schedule kind must be 'constant' or 'two_phase'");
        }
      }

      if (mj.contains("expect_divergence")) {
        if (mj["expect_divergence"].is_boolean())
          m.expect_divergence = mj["expect_divergence"].get<bool>();
        else
          issues.add(ctx + ": expect_divergence must be a boolean");
      }

      // dry-build the schedule so misconfigurations surface here, not mid-run
      if (problem_ok && compressor_ok && mode_ok && issues.empty()) {
        try {
          (void)make_method_schedule(m, cfg.problem, std::max(cfg.iterations, 1));
        } catch (const std::exception& e) {
          issues.add(ctx + ": " + e.what());
        }
      }
      cfg.methods.push_back(std::move(m));
    }
  }

  if (!issues.empty()) issues.raise();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("config " + path + ": " + e.what());
  }
  return parse_experiment_config(j);
}

double method_delta_eff(const MethodConfig& m, const ProblemInstance& p) {
  const double delta = nominal_delta(m.compressor, static_cast<std::uint32_t>(dimension(p)));
  if (m.mode == Mode::PartialParticipation) {
    const std::vector<double> v = default_eso_vector(*m.sampling);
    return pp_variance_parameters(*m.sampling, v, delta).delta_s;
  }
  return averaged_delta(delta, node_count(p));
}

Schedule make_method_schedule(const MethodConfig& m, const ProblemInstance& p, int iterations) {
  if (m.schedule_kind == Schedule::Kind::Constant) return Schedule::constant(m.eta);
  const double a = m.override_a.value_or(p.constants.mu);
  const double d = m.override_d.value_or(2.0 * method_delta_eff(m, p) * p.constants.L);
  return Schedule::two_phase(a, d, iterations);
}

std::optional<double> method_rate_bound(const MethodConfig& m, const ProblemInstance& p, int T) {
  if (m.schedule_kind != Schedule::Kind::TwoPhase || T < 1) return std::nullopt;
  const double delta = nominal_delta(m.compressor, static_cast<std::uint32_t>(dimension(p)));
  const double r0 = squared_distance(p.x0, p.constants.x_star);
  const auto& k = p.constants;
  if (m.mode == Mode::Plain) {
    return dcsgd_rate_bound(averaged_delta(delta, node_count(p)), node_count(p), k.L, k.mu, p.noise_sigma2, k.D, r0,
                            T);
  }
  if (m.mode == Mode::PartialParticipation) {
    const std::vector<double> v = default_eso_vector(*m.sampling);
    const ParticipationVariance pv = pp_variance_parameters(*m.sampling, v, delta);
    return dcsgd_pp_rate_bound(delta, pv.a_s, pv.delta_s, node_count(p), k.L, k.mu, p.noise_sigma2, k.D, r0, T);
  }
  return std::nullopt;  // no rate claim for error feedback
}

namespace {

void write_run_csv(const std::string& path, const RunRecord& record) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write: " + path);
  out << "k,f_gap,dist2,bits_up\n";
  for (const RunRow& row : record.rows)
    out << row.k << ',' << csv_double(row.f_gap) << ',' << csv_double(row.dist2) << ',' << row.bits_up << '\n';
}

std::vector<int> checkpoint_list(int T) {
  if (T <= 0) return {0};
  std::set<int> ks = {(T + 3) / 4, (T + 1) / 2, (3 * T + 3) / 4, T};
  return std::vector<int>(ks.begin(), ks.end());
}

json resolved_config_json(const ExperimentConfig& cfg) {
  json j;
  j["problem"] = cfg.problem_spec;
  j["problem_constants"] = {{"L", cfg.problem.constants.L},
                            {"mu", cfg.problem.constants.mu},
                            {"f_star", cfg.problem.constants.f_star},
                            {"D", cfg.problem.constants.D},
                            {"x_star", cfg.problem.constants.x_star},
                            {"r0", squared_distance(cfg.problem.x0, cfg.problem.constants.x_star)},
                            {"sigma2", cfg.problem.noise_sigma2},
                            {"n", node_count(cfg.problem)},
                            {"d", dimension(cfg.problem)}};
  j["iterations"] = cfg.iterations;
  j["seeds"] = cfg.seeds;
  j["out"] = cfg.out_dir;
  j["target_f_gap"] = cfg.target_f_gap;
  j["methods"] = json::array();
  for (const MethodConfig& m : cfg.methods) {
    json mj;
    mj["name"] = m.name;
    mj["mode"] = mode_name(m.mode);
    mj["compressor"] = compressor_spec_to_json(m.compressor);
    mj["compressor_label"] = spec_label(m.compressor);
    if (m.sampling) mj["sampling"] = sampling_to_json(*m.sampling);
    const Schedule sched = make_method_schedule(m, cfg.problem, cfg.iterations);
    if (sched.kind() == Schedule::Kind::Constant) {
      mj["schedule"] = {{"kind", "constant"}, {"eta", sched.stepsize_constant()}};
    } else {
      mj["schedule"] = {{"kind", "two_phase"}, {"a", sched.a()},       {"d", sched.d()},
                        {"t0", sched.t0()},    {"kappa", sched.kappa()}};
    }
    mj["expect_divergence"] = m.expect_divergence;
    const double delta = nominal_delta(m.compressor, static_cast<std::uint32_t>(dimension(cfg.problem)));
    mj["nominal_delta"] = delta;
    mj["effective_delta"] = method_delta_eff(m, cfg.problem);
    if (m.sampling) {
      const std::vector<double> v = default_eso_vector(*m.sampling);
      mj["a_s"] = pp_variance_parameters(*m.sampling, v, delta).a_s;
    }
    if (const std::optional<double> bound = method_rate_bound(m, cfg.problem, cfg.iterations))
      mj["rate_bound"] = *bound;
    j["methods"].push_back(std::move(mj));
  }
  return j;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw FormatError("cannot create output directory " + config.out_dir + ": " + ec.message());

  struct Job {
    const MethodConfig* method = nullptr;
    std::uint64_t seed = 0;
  };
  std::vector<Job> jobs;
  for (const MethodConfig& m : config.methods)
    for (std::uint64_t seed : config.seeds) jobs.push_back(Job{&m, seed});

  // seeds are independent; run them concurrently and join in order
  std::vector<RunRecord> records(jobs.size());
  {
    std::vector<std::future<RunRecord>> futures;
    futures.reserve(jobs.size());
    for (const Job& job : jobs) {
      futures.push_back(std::async(std::launch::async, [&config, &job]() {
        RunConfig rc;
        rc.mode = job.method->mode;
        rc.compressor = job.method->compressor;
        rc.sampling = job.method->sampling;
        rc.schedule = make_method_schedule(*job.method, config.problem, config.iterations);
        rc.iterations = config.iterations;
        rc.seed = job.seed;
        return run(config.problem, rc);
      }));
    }
    for (std::size_t i = 0; i < futures.size(); ++i) records[i] = futures[i].get();
  }

  ExperimentResult result;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const Job& job = jobs[i];
    const RunRecord& record = records[i];
    const std::string path =
        (fs::path(config.out_dir) / (job.method->name + "__seed" + std::to_string(job.seed) + ".csv")).string();
    write_run_csv(path, record);
    result.files_written.push_back(path);

    RunSummary s;
    s.method = job.method->name;
    s.seed = job.seed;
    s.diverged = record.diverged;
    s.expect_divergence = job.method->expect_divergence;
    s.total_bits = record.total_bits;
    s.final_f_gap = record.rows.back().f_gap;
    s.output_f_gap = problem_value(config.problem, record.output_point) - config.problem.constants.f_star;
    for (const RunRow& row : record.rows)
      if (row.f_gap <= config.target_f_gap) {
        s.iters_to_target = row.k;
        break;
      }
    if (record.diverged && !job.method->expect_divergence) result.unexpected_divergence = true;
    result.runs.push_back(std::move(s));
  }

  const std::string summary_path = (fs::path(config.out_dir) / "summary.csv").string();
  {
    std::ofstream out(summary_path, std::ios::binary);
    if (!out) throw FormatError("cannot write: " + summary_path);
    out << "method,k,mean_f_gap,stderr_f_gap,mean_total_bits,rate_bound,runs,diverged_runs\n";
    const std::vector<int> checkpoints = checkpoint_list(config.iterations);
    for (const MethodConfig& m : config.methods) {
      std::vector<const RunRecord*> mine;
      int diverged_runs = 0;
      double bits_sum = 0.0;
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (jobs[i].method != &m) continue;
        mine.push_back(&records[i]);
        bits_sum += static_cast<double>(records[i].total_bits);
        if (records[i].diverged) ++diverged_runs;
      }
      if (mine.empty()) continue;  // zero seeds: header-only summary
      const double mean_bits = bits_sum / static_cast<double>(mine.size());
      for (int k : checkpoints) {
        double sum = 0.0, sumsq = 0.0;
        long count = 0;
        for (const RunRecord* r : mine) {
          if (k >= static_cast<int>(r->rows.size())) continue;  // run halted early
          const double g = r->rows[k].f_gap;
          sum += g;
          sumsq += g * g;
          ++count;
        }
        out << m.name << ',' << k << ',';
        if (count == 0) {
          out << ",,";
        } else {
          const double mean = sum / count;
          double se = 0.0;
          if (count > 1) {
            const double var = std::max(0.0, (sumsq - count * mean * mean) / (count - 1));
            se = std::sqrt(var / count);
          }
          out << csv_double(mean) << ',' << csv_double(se) << ',';
        }
        out << csv_double(mean_bits) << ',';
        if (const std::optional<double> bound = method_rate_bound(m, config.problem, k)) out << csv_double(*bound);
        out << ',' << count << ',' << diverged_runs << '\n';
      }
    }
  }
  result.files_written.push_back(summary_path);

  const std::string resolved_path = (fs::path(config.out_dir) / "resolved_config.json").string();
  {
    std::ofstream out(resolved_path, std::ios::binary);
    if (!out) throw FormatError("cannot write: " + resolved_path);
    out << resolved_config_json(config).dump(2) << '\n';
  }
  result.files_written.push_back(resolved_path);
  return result;
}

CertificationRow certify_compressor(const CompressorSpec& spec, int d, long trials, std::uint64_t seed) {
  if (d < 1) throw ParameterError("certify_compressor: d must be >= 1");
  if (trials < 10000) throw ParameterError("certify_compressor: trials must be >= 10000");
  validate_spec(spec, static_cast<std::uint32_t>(d));

  // fixed panel: one basis vector, the all-ones vector, a heavy-tailed draw,
  // a nearly-sparse draw
  std::vector<DenseVector> panel;
  {
    DenseVector e0(d, 0.0);
    e0[0] = 1.0;
    panel.push_back(std::move(e0));
    panel.push_back(DenseVector(d, 1.0));
    // magnitudes are floored away from zero: a coordinate whose selection
    // probability is tiny sees a handful of hits in `trials` samples and the
    // z-score loses its CLT calibration
    Rng heavy(derive_stream(seed, 101, 0));
    DenseVector h(d);
    for (double& v : h) {
      const double g = heavy.normal();
      v = std::copysign(0.2 + std::fabs(g * g * g), g);  // cubic tails, spiky
    }
    panel.push_back(std::move(h));
    Rng sparse(derive_stream(seed, 102, 0));
    DenseVector s(d);
    for (double& v : s) {
      const double g = sparse.normal();
      v = 0.1 * std::copysign(0.5 + std::fabs(g), g);
    }
    s[0] += 10.0 * (1.0 + sparse.uniform());
    if (d > 1) s[d / 2] -= 10.0 * (1.0 + sparse.uniform());
    panel.push_back(std::move(s));
  }

  CertificationRow row;
  row.kind = spec_label(spec);
  row.nominal_delta = nominal_delta(spec, static_cast<std::uint32_t>(d));
  row.samples = trials;
  row.delta_hat = -std::numeric_limits<double>::infinity();

  for (std::size_t vi = 0; vi < panel.size(); ++vi) {
    const DenseVector& x = panel[vi];
    const double x2 = squared_norm(x);
    Rng rng(derive_stream(seed, 1000 + vi, 1));

    // accumulate deviations y - x, not raw outputs: an operator that returns
    // x exactly then scores z = 0 instead of picking up summation rounding
    DenseVector dev_sum(x.size(), 0.0), dev_sumsq(x.size(), 0.0);
    double ratio_sum = 0.0, ratio_sumsq = 0.0, contr_sum = 0.0;
    for (long t = 0; t < trials; ++t) {
      const DenseVector y = decompress(compress(spec, x, rng));
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double dev = y[i] - x[i];
        dev_sum[i] += dev;
        dev_sumsq[i] += dev * dev;
      }
      const double r = squared_norm(y) / x2;
      ratio_sum += r;
      ratio_sumsq += r * r;
      contr_sum += squared_distance(y, x) / x2;
    }

    const double n = static_cast<double>(trials);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double mean = dev_sum[i] / n;
      const double var = std::max(0.0, (dev_sumsq[i] - n * mean * mean) / (n - 1.0));
      const double se = std::sqrt(var / n);
      double z;
      if (se == 0.0)
        z = (mean == 0.0) ? 0.0 : std::numeric_limits<double>::infinity();
      else
        z = std::fabs(mean) / se;
      row.max_bias_z = std::max(row.max_bias_z, z);
    }
    const double ratio_mean = ratio_sum / n;
    const double ratio_var = std::max(0.0, (ratio_sumsq - n * ratio_mean * ratio_mean) / (n - 1.0));
    if (ratio_mean > row.delta_hat) {
      row.delta_hat = ratio_mean;
      row.delta_se = std::sqrt(ratio_var / n);
    }
    row.contraction_hat = std::max(row.contraction_hat, contr_sum / n);
  }
  row.unbiased = row.max_bias_z <= 4.0;
  return row;
}

std::vector<CertificationRow> certify_roster(int d, int k, long trials, std::uint64_t seed) {
  std::vector<CompressorSpec> specs = {identity_spec(), top_k_spec(k),  rand_k_spec(k),
                                       nu_rand1_spec(), wangni_spec(k), ternary_spec()};
  if (k >= 2)
    specs.push_back(split_budget_induced_spec(k));
  else
    specs.push_back(induced_spec(top_k_spec(1), rand_k_spec(1)));
  std::vector<CertificationRow> rows;
  rows.reserve(specs.size());
  for (const CompressorSpec& spec : specs) rows.push_back(certify_compressor(spec, d, trials, seed));
  return rows;
}

void write_certification_csv(std::ostream& out, const std::vector<CertificationRow>& rows) {
  out << "kind,max_bias_z,delta_hat,delta_se,contraction_hat,nominal_delta,unbiased,samples\n";
  for (const CertificationRow& r : rows) {
    out << r.kind << ',' << csv_double(r.max_bias_z) << ',' << csv_double(r.delta_hat) << ','
        << csv_double(r.delta_se) << ',' << csv_double(r.contraction_hat) << ',' << csv_double(r.nominal_delta)
        << ',' << (r.unbiased ? "true" : "false") << ',' << r.samples << '\n';
  }
}

std::vector<BoundsRow> compare_bounds(const json& config) {
  if (!config.is_object()) throw ParameterError("compare_bounds: expected a JSON object");
  Issues issues;
  check_keys(config, {"problem", "delta", "n_grid", "L", "mu", "sigma2", "D", "r0", "T", "sampling"}, "compare_bounds",
             issues);

  double L = 0.0, mu = 0.0, sigma2 = 0.0, D = 0.0, r0 = 1.0;
  bool have_constants = false;
  if (config.contains("problem")) {
    bool ok = false;
    const ProblemInstance p = problem_spec_from_json(config["problem"], issues, ok);
    if (ok) {
      L = p.constants.L;
      mu = p.constants.mu;
      sigma2 = p.noise_sigma2;
      D = p.constants.D;
      r0 = squared_distance(p.x0, p.constants.x_star);
      have_constants = true;
    }
  }
  auto take = [&](const char* key, double& slot) {
    if (!config.contains(key)) return false;
    try {
      slot = config[key].get<double>();
      return true;
    } catch (const json::exception&) {
      issues.add(std::string("compare_bounds: '") + key + "' must be a number");
      return false;
    }
  };
  const bool got_l = take("L", L);
  const bool got_mu = take("mu", mu);
  take("sigma2", sigma2);
  take("D", D);
  take("r0", r0);
  if (!have_constants && (!got_l || !got_mu))
    issues.add("compare_bounds: missing constants — provide 'problem' or explicit 'L' and 'mu'");

  double delta = 1.0;
  if (!config.contains("delta"))
    issues.add("compare_bounds: 'delta' missing");
  else
    take("delta", delta);

  int T = 0;
  if (!config.contains("T")) {
    issues.add("compare_bounds: 'T' missing");
  } else {
    try {
      T = config["T"].get<int>();
    } catch (const json::exception&) {
      issues.add("compare_bounds: 'T' must be an integer");
    }
  }

  std::vector<int> grid = {1, 2, 4, 8};
  if (config.contains("n_grid")) {
    try {
      grid = config["n_grid"].get<std::vector<int>>();
    } catch (const json::exception&) {
      issues.add("compare_bounds: 'n_grid' must be an array of integers");
    }
  }

  std::string family = "full";
  double b_fraction = 0.5;
  if (config.contains("sampling")) {
    const json& sj = config["sampling"];
    if (!sj.is_object() || !sj.contains("family") || !sj["family"].is_string()) {
      issues.add("compare_bounds: sampling must be an object with a string 'family'");
    } else {
      family = sj["family"].get<std::string>();
      if (family != "full" && family != "b_nice")
        issues.add("compare_bounds: sampling family must be 'full' or 'b_nice'");
      if (sj.contains("b_fraction")) {
        try {
          b_fraction = sj["b_fraction"].get<double>();
          if (!(b_fraction > 0.0 && b_fraction <= 1.0))
            issues.add("compare_bounds: b_fraction must be in (0, 1]");
        } catch (const json::exception&) {
          issues.add("compare_bounds: b_fraction must be a number");
        }
      }
    }
  }

  if (delta < 1.0) issues.add("compare_bounds: delta must be >= 1");
  if (!(mu > 0.0)) issues.add("compare_bounds: mu must be positive");
  if (!(L >= mu)) issues.add("compare_bounds: need L >= mu");
  if (T < 1) issues.add("compare_bounds: T must be >= 1");
  if (sigma2 < 0.0) issues.add("compare_bounds: sigma2 must be >= 0");
  if (D < 0.0) issues.add("compare_bounds: D must be >= 0");
  if (r0 < 0.0) issues.add("compare_bounds: r0 must be >= 0");
  for (int n : grid)
    if (n < 1) issues.add("compare_bounds: n_grid entries must be >= 1");
  if (!issues.empty()) issues.raise();

  std::vector<BoundsRow> rows;
  rows.reserve(grid.size());
  for (int n : grid) {
    BoundsRow row;
    row.n = n;
    row.delta_n = averaged_delta(delta, n);
    row.bound_full = dcsgd_rate_bound(row.delta_n, n, L, mu, sigma2, D, r0, T);
    SamplingScheme scheme = (family == "full")
                                ? SamplingScheme::full(n)
                                : SamplingScheme::b_nice(n, std::max(1, static_cast<int>(std::lround(b_fraction * n))));
    const std::vector<double> v = default_eso_vector(scheme);
    const ParticipationVariance pv = pp_variance_parameters(scheme, v, delta);
    row.a_s = pv.a_s;
    row.delta_s = pv.delta_s;
    row.bound_pp = dcsgd_pp_rate_bound(delta, pv.a_s, pv.delta_s, n, L, mu, sigma2, D, r0, T);
    rows.push_back(row);
  }
  return rows;
}

void write_bounds_csv(std::ostream& out, const std::vector<BoundsRow>& rows) {
  out << "n,delta_n,bound_full,a_s,delta_s,bound_pp\n";
  for (const BoundsRow& r : rows) {
    out << r.n << ',' << csv_double(r.delta_n) << ',' << csv_double(r.bound_full) << ',' << csv_double(r.a_s) << ','
        << csv_double(r.delta_s) << ',' << csv_double(r.bound_pp) << '\n';
  }
}

ExperimentConfig make_counterexample_experiment(double t, double eta, int iterations,
                                                std::vector<std::uint64_t> seeds, std::string out_dir) {
  ExperimentConfig cfg;
  cfg.problem_spec = {{"kind", "counterexample"}, {"t", t}};
  cfg.problem = make_counterexample(t);
  cfg.iterations = iterations;
  cfg.seeds = std::move(seeds);
  cfg.out_dir = std::move(out_dir);
  cfg.target_f_gap = 1e-6;

  MethodConfig greedy;
  greedy.name = "top1_plain";
  greedy.mode = Mode::Plain;
  greedy.compressor = top_k_spec(1);
  greedy.schedule_kind = Schedule::Kind::Constant;
  greedy.eta = eta;
  greedy.expect_divergence = true;

  MethodConfig corrected = greedy;
  corrected.name = "top1_ef";
  corrected.mode = Mode::ErrorFeedback;
  corrected.expect_divergence = false;

  MethodConfig importance = greedy;
  importance.name = "nu_rand1_plain";
  importance.mode = Mode::Plain;
  importance.compressor = nu_rand1_spec();
  importance.expect_divergence = false;

  cfg.methods = {std::move(greedy), std::move(corrected), std::move(importance)};
  return cfg;
}

}  // namespace compsgd
