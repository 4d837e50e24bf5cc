// SPDX-License-Identifier: Apache-2.0
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "compsgd/errors.hpp"
#include "compsgd/harness.hpp"

namespace {

using namespace compsgd;

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const std::uint64_t v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      seeds.push_back(v);
    } catch (const std::exception&) {
      throw ParameterError("--seeds: '" + item + "' is not a nonnegative integer");
    }
  }
  if (seeds.empty()) throw ParameterError("--seeds: empty list");
  return seeds;
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("config " + path + ": " + e.what());
  }
  return j;
}

void print_run_summaries(const ExperimentResult& result, double target) {
  std::printf("%-24s %-8s %-10s %-14s %-14s %s\n", "method", "seed", "diverged", "iters_to_tgt", "final_f_gap",
              "total_bits");
  for (const RunSummary& s : result.runs) {
    std::printf("%-24s %-8llu %-10s %-14s %-14.6g %llu\n", s.method.c_str(),
                static_cast<unsigned long long>(s.seed),
                s.diverged ? (s.expect_divergence ? "expected" : "YES" ) : "no",
                s.iters_to_target >= 0 ? std::to_string(s.iters_to_target).c_str() : "-", s.final_f_gap,
                static_cast<unsigned long long>(s.total_bits));
  }
  std::printf("(target f_gap: %g)\n", target);
}

int cmd_run(const std::string& config_path, const std::string& out_override, const std::string& seeds_text) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (!seeds_text.empty()) cfg.seeds = parse_seeds(seeds_text);
  const ExperimentResult result = run_experiment(cfg);
  print_run_summaries(result, cfg.target_f_gap);
  std::printf("wrote %zu files under %s\n", result.files_written.size(), cfg.out_dir.c_str());
  if (result.unexpected_divergence) {
    std::fprintf(stderr, "error: a run diverged that was not expected to\n");
    return 3;
  }
  return 0;
}

int cmd_certify(const std::string& out_dir, long trials, const std::string& seeds_text, int dim, int budget) {
  const std::uint64_t seed = seeds_text.empty() ? 1 : parse_seeds(seeds_text).front();
  const std::vector<CertificationRow> rows = certify_roster(dim, budget, trials, seed);
  write_certification_csv(std::cout, rows);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    const std::string path = (std::filesystem::path(out_dir) / "certification.csv").string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write: " + path);
    write_certification_csv(out, rows);
    std::printf("wrote %s\n", path.c_str());
  }
  return 0;
}

int cmd_compare_bounds(const std::string& config_path, const std::string& out_dir) {
  const std::vector<BoundsRow> rows = compare_bounds(load_json(config_path));
  write_bounds_csv(std::cout, rows);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    const std::string path = (std::filesystem::path(out_dir) / "bounds.csv").string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write: " + path);
    write_bounds_csv(out, rows);
    std::printf("wrote %s\n", path.c_str());
  }
  return 0;
}

int cmd_counterexample(const std::string& out_dir, const std::string& seeds_text, double t, double eta,
                       int iterations) {
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  if (!seeds_text.empty()) seeds = parse_seeds(seeds_text);
  const ExperimentConfig cfg = make_counterexample_experiment(t, eta, iterations, seeds, out_dir);
  const ExperimentResult result = run_experiment(cfg);
  print_run_summaries(result, cfg.target_f_gap);

  for (const MethodConfig& m : cfg.methods) {
    long count = 0, sum = 0, diverged = 0;
    for (const RunSummary& s : result.runs) {
      if (s.method != m.name) continue;
      if (s.diverged) ++diverged;
      if (s.iters_to_target >= 0) {
        sum += s.iters_to_target;
        ++count;
      }
    }
    if (diverged > 0)
      std::printf("%-24s diverged in %ld/%zu runs\n", m.name.c_str(), diverged, seeds.size());
    else if (count > 0)
      std::printf("%-24s mean iterations to target: %.1f\n", m.name.c_str(),
                  static_cast<double>(sum) / static_cast<double>(count));
    else
      std::printf("%-24s never reached target\n", m.name.c_str());
  }
  std::printf("wrote %zu files under %s\n", result.files_written.size(), cfg.out_dir.c_str());
  if (result.unexpected_divergence) {
    std::fprintf(stderr, "error: a run diverged that was not expected to\n");
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"communication-compressed distributed SGD simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, seeds_text;
  long trials = 100000;
  int dim = 10, budget = 2;
  double t = 1.0, eta = 1.0 / 115.0;
  int iterations = 4000;

  CLI::App* run_cmd = app.add_subcommand("run", "execute an experiment config");
  run_cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
  run_cmd->add_option("--out", out_dir, "output directory override");
  run_cmd->add_option("--seeds", seeds_text, "comma-separated seed list override");

  CLI::App* certify_cmd = app.add_subcommand("certify", "Monte-Carlo certification of the compressor roster");
  certify_cmd->add_option("--out", out_dir, "directory for certification.csv");
  certify_cmd->add_option("--trials", trials, "samples per (operator, vector) pair, >= 10000");
  certify_cmd->add_option("--seeds", seeds_text, "seed (first entry used)");
  certify_cmd->add_option("--dim", dim, "vector dimension");
  certify_cmd->add_option("--budget", budget, "coordinate budget k");

  CLI::App* bounds_cmd = app.add_subcommand("compare-bounds", "tabulate rate bounds across node counts");
  bounds_cmd->add_option("--config", config_path, "bounds config (JSON)")->required();
  bounds_cmd->add_option("--out", out_dir, "directory for bounds.csv");

  CLI::App* ce_cmd = app.add_subcommand("counterexample", "divergence-vs-correction comparison");
  ce_cmd->add_option("--out", out_dir, "output directory");
  ce_cmd->add_option("--seeds", seeds_text, "comma-separated seed list");
  ce_cmd->add_option("--t", t, "starting point scale");
  ce_cmd->add_option("--eta", eta, "constant stepsize");
  ce_cmd->add_option("--iterations", iterations, "iteration budget");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad flags are validation failures
  }

  try {
    if (app.got_subcommand(run_cmd)) return cmd_run(config_path, out_dir, seeds_text);
    if (app.got_subcommand(certify_cmd)) return cmd_certify(out_dir, trials, seeds_text, dim, budget);
    if (app.got_subcommand(bounds_cmd)) return cmd_compare_bounds(config_path, out_dir);
    if (app.got_subcommand(ce_cmd))
      return cmd_counterexample(out_dir.empty() ? "results/counterexample" : out_dir, seeds_text, t, eta, iterations);
  } catch (const ParameterError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 1;
  }
  return 0;
}
