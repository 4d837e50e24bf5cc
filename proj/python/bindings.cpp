// SPDX-License-Identifier: Apache-2.0
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "compsgd/compressors.hpp"
#include "compsgd/errors.hpp"
#include "compsgd/harness.hpp"
#include "compsgd/induced.hpp"
#include "compsgd/linalg.hpp"
#include "compsgd/message.hpp"
#include "compsgd/optimizer.hpp"
#include "compsgd/problems.hpp"
#include "compsgd/rng.hpp"
#include "compsgd/sampling.hpp"
#include "compsgd/vec.hpp"

namespace py = pybind11;
using namespace compsgd;

namespace {

std::string spec_repr(const CompressorSpec& s) {
  switch (s.kind) {
    case CompressorKind::TopK:
      return "top_k(" + std::to_string(s.k) + ")";
    case CompressorKind::RandK:
      return "rand_k(" + std::to_string(s.k) + ")";
    case CompressorKind::WangniK:
      return "wangni_k(" + std::to_string(s.k) + ")";
    case CompressorKind::Induced:
      return "induced(" + spec_repr(s.inner[0]) + ", " + spec_repr(s.inner[1]) + ")";
    default:
      return kind_name(s.kind);
  }
}

std::vector<std::vector<double>> matrix_rows(const Matrix& m) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()),
                                        std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = m(r, c);
  return rows;
}

RunConfig build_run_config(const std::string& mode, const CompressorSpec& compressor, const Schedule& schedule,
                           int iterations, std::uint64_t seed, const std::optional<SamplingScheme>& sampling) {
  RunConfig cfg;
  cfg.mode = mode_from_name(mode);
  cfg.compressor = compressor;
  cfg.schedule = schedule;
  cfg.iterations = iterations;
  cfg.seed = seed;
  cfg.sampling = sampling;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Communication-compressed distributed SGD: compressors, client sampling, quadratic "
            "benchmarks, training loops, and rate ceilings.";

  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  // ---- compressors ----
  py::class_<CompressorSpec>(m, "CompressorSpec", "Opaque description of a compression operator.")
      .def("__repr__", [](const CompressorSpec& s) { return "<CompressorSpec " + spec_repr(s) + ">"; })
      .def_property_readonly("label", [](const CompressorSpec& s) { return spec_repr(s); });

  m.def("identity", &identity_spec, "Keep every coordinate (delta = 1).");
  m.def("top_k", &top_k_spec, py::arg("k"), "Largest-magnitude k coordinates (biased, contractive).");
  m.def("rand_k", &rand_k_spec, py::arg("k"), "Uniform k-subset scaled by d/k (unbiased).");
  m.def("nu_rand1", &nu_rand1_spec, "One coordinate, importance-sampled by |x_i| (unbiased).");
  m.def("wangni_k", &wangni_spec, py::arg("k"), "Budgeted importance sampling, expected k coordinates (unbiased).");
  m.def("ternary", &ternary_spec, "Stochastic sign quantization against the max magnitude (unbiased).");
  m.def("induced", &induced_spec, py::arg("first"), py::arg("second"),
        "Unbiased two-stage composition: first (contractive) plus second applied to its residual.");
  m.def("split_budget_induced", &split_budget_induced_spec, py::arg("k"),
        "Induced operator splitting a k-coordinate budget between top and importance halves.");

  m.def("validate_spec", &validate_spec, py::arg("spec"), py::arg("dim"),
        "Raise ParameterError when the operator cannot act on dimension dim.");
  m.def("is_unbiased", &is_unbiased, py::arg("spec"));
  m.def("nominal_delta", &nominal_delta, py::arg("spec"), py::arg("dim"),
        "Worst-case variance factor of the operator at dimension dim.");
  m.def("induced_delta", &induced_delta, py::arg("delta1"), py::arg("delta2"),
        "Variance factor of the two-stage composition: delta2 (1 - 1/delta1) + 1/delta1.");

  // ---- messages ----
  py::class_<CompressedMessage>(m, "Message", "Decoded-on-demand compressed vector with exact bit accounting.")
      .def_readonly("dim", &CompressedMessage::dim)
      .def_readonly("bit_cost", &CompressedMessage::bit_cost)
      .def("decompress", [](const CompressedMessage& msg) { return decompress(msg); },
           "Decode to a dense list of floats.")
      .def("to_bytes",
           [](const CompressedMessage& msg) {
             const std::vector<std::uint8_t> bytes = serialize(msg);
             return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
           },
           "Serialize to the canonical wire encoding.")
      .def("__repr__", [](const CompressedMessage& msg) {
        return "<Message dim=" + std::to_string(msg.dim) + " bits=" + std::to_string(msg.bit_cost) + ">";
      });

  m.def("from_bytes",
        [](const py::bytes& data) {
          const std::string buf = data;
          return deserialize(std::vector<std::uint8_t>(buf.begin(), buf.end()));
        },
        py::arg("data"), "Parse a wire-encoded message; raises FormatError on malformed input.");
  m.def("index_bits", &index_bits, py::arg("dim"));

  m.def("compress",
        [](const CompressorSpec& spec, const DenseVector& x, std::uint64_t seed) {
          Rng rng(seed);
          return compress(spec, x, rng);
        },
        py::arg("spec"), py::arg("x"), py::arg("seed") = 0,
        "Apply the operator to x; randomized operators draw from the given seed.");

  // ---- sampling ----
  py::class_<SamplingScheme>(m, "SamplingScheme", "Distribution over participating worker subsets.")
      .def_static("full", &SamplingScheme::full, py::arg("n"))
      .def_static("b_nice", &SamplingScheme::b_nice, py::arg("n"), py::arg("b"))
      .def_static("independent", &SamplingScheme::independent, py::arg("p"))
      .def_static("explicit_table", &SamplingScheme::explicit_table, py::arg("n"), py::arg("table"))
      .def_property_readonly("n", &SamplingScheme::n)
      .def("__repr__", [](const SamplingScheme& s) { return "<SamplingScheme " + s.describe() + ">"; });

  m.def("probability_vector", &probability_vector, py::arg("scheme"));
  m.def("probability_matrix", [](const SamplingScheme& s) { return matrix_rows(probability_matrix(s)); },
        py::arg("scheme"), "Pairwise inclusion probabilities as nested lists.");
  m.def("is_proper", &is_proper, py::arg("scheme"));
  m.def("expected_cardinality", &expected_cardinality, py::arg("scheme"));
  m.def("default_eso_vector", &default_eso_vector, py::arg("scheme"), "The always-valid certificate v = n(1 - p).");

  py::class_<EsoCertificate>(m, "EsoCertificate")
      .def_readonly("v", &EsoCertificate::v)
      .def_readonly("valid", &EsoCertificate::valid)
      .def_readonly("min_eig", &EsoCertificate::min_eig);
  m.def("validate_eso", &validate_eso, py::arg("scheme"), py::arg("v"));

  m.def("draw_subset",
        [](const SamplingScheme& s, std::uint64_t seed) {
          Rng rng(seed);
          return draw_subset(s, rng);
        },
        py::arg("scheme"), py::arg("seed") = 0, "Sample one participating subset (ascending indices).");
  m.def("subset_support", &subset_support, py::arg("scheme"),
        "All positive-probability subsets as (bitmask, probability) pairs.");

  py::class_<ParticipationVariance>(m, "ParticipationVariance")
      .def_readonly("a_s", &ParticipationVariance::a_s)
      .def_readonly("delta_s", &ParticipationVariance::delta_s);
  m.def("pp_variance_parameters", &pp_variance_parameters, py::arg("scheme"), py::arg("v"), py::arg("delta"));

  py::class_<VarianceInequality>(m, "VarianceInequality")
      .def_readonly("lhs", &VarianceInequality::lhs)
      .def_readonly("rhs", &VarianceInequality::rhs);
  m.def("check_variance_inequality", &check_variance_inequality, py::arg("scheme"), py::arg("v"), py::arg("zetas"),
        "Exact enumeration of the participation variance bound (n <= 12).");

  // ---- problems ----
  py::class_<ProblemInstance>(m, "Problem", "Finite-sum quadratic with exact curvature constants.")
      .def_property_readonly("dimension", &dimension)
      .def_property_readonly("node_count", &node_count)
      .def_property_readonly("noise_sigma2", [](const ProblemInstance& p) { return p.noise_sigma2; })
      .def_property_readonly("x0", [](const ProblemInstance& p) { return p.x0; })
      .def_property_readonly("L", [](const ProblemInstance& p) { return p.constants.L; })
      .def_property_readonly("mu", [](const ProblemInstance& p) { return p.constants.mu; })
      .def_property_readonly("D", [](const ProblemInstance& p) { return p.constants.D; })
      .def_property_readonly("f_star", [](const ProblemInstance& p) { return p.constants.f_star; })
      .def_property_readonly("x_star", [](const ProblemInstance& p) { return p.constants.x_star; })
      .def_property_readonly("f_i_star", [](const ProblemInstance& p) { return p.constants.f_i_star; })
      .def("value", &problem_value, py::arg("x"))
      .def("gradient", &problem_gradient, py::arg("x"))
      .def("node_gradient",
           [](const ProblemInstance& p, int node, const DenseVector& x) {
             if (node < 0 || node >= node_count(p)) throw ParameterError("node index out of range");
             return node_gradient(p.nodes[static_cast<std::size_t>(node)], x);
           },
           py::arg("node"), py::arg("x"))
      .def("gradient_oracle",
           [](const ProblemInstance& p, int node, const DenseVector& x, std::uint64_t seed) {
             Rng rng(seed);
             return gradient_oracle(p, node, x, rng);
           },
           py::arg("node"), py::arg("x"), py::arg("seed") = 0,
           "Stochastic node gradient: exact plus isotropic noise of total variance noise_sigma2.")
      .def("to_json", [](const ProblemInstance& p) { return problem_to_json(p).dump(2); })
      .def_static("from_json",
                  [](const std::string& text) { return problem_from_json(nlohmann::json::parse(text)); },
                  py::arg("text"))
      .def("__repr__", [](const ProblemInstance& p) {
        return "<Problem n=" + std::to_string(node_count(p)) + " d=" + std::to_string(dimension(p)) + ">";
      });

  m.def("make_counterexample", &make_counterexample, py::arg("t") = 1.0,
        "3-node, 3-dimensional instance on which plain greedy sparsification diverges.");
  m.def("make_random_quadratic", &make_random_quadratic, py::arg("n"), py::arg("d"), py::arg("mu"), py::arg("L"),
        py::arg("heterogeneity") = 0.0, py::arg("sigma2") = 0.0, py::arg("seed") = 0);

  // ---- optimizer ----
  py::class_<Schedule>(m, "Schedule", "Per-iteration stepsize and output weight.")
      .def_static("constant", &Schedule::constant, py::arg("eta"))
      .def_static("two_phase", &Schedule::two_phase, py::arg("a"), py::arg("d"), py::arg("T"))
      .def("eta", &Schedule::eta, py::arg("k"))
      .def("weight", &Schedule::weight, py::arg("k"))
      .def_property_readonly("t0", &Schedule::t0)
      .def_property_readonly("kappa", &Schedule::kappa);

  py::class_<RunRow>(m, "RunRow")
      .def_readonly("k", &RunRow::k)
      .def_readonly("f_gap", &RunRow::f_gap)
      .def_readonly("dist2", &RunRow::dist2)
      .def_readonly("bits_up", &RunRow::bits_up);

  py::class_<RunRecord>(m, "RunRecord")
      .def_readonly("rows", &RunRecord::rows)
      .def_readonly("output_point", &RunRecord::output_point)
      .def_readonly("diverged", &RunRecord::diverged)
      .def_readonly("total_bits", &RunRecord::total_bits);

  m.def("run",
        [](const ProblemInstance& p, const std::string& mode, const CompressorSpec& compressor,
           const Schedule& schedule, int iterations, std::uint64_t seed,
           const std::optional<SamplingScheme>& sampling) {
          return run(p, build_run_config(mode, compressor, schedule, iterations, seed, sampling));
        },
        py::arg("problem"), py::arg("mode"), py::arg("compressor"), py::arg("schedule"), py::arg("iterations"),
        py::arg("seed") = 1, py::arg("sampling") = std::nullopt,
        "Execute a training loop; mode is 'plain', 'ef', or 'pp' (pp requires sampling).");

  m.def("averaged_delta", &averaged_delta, py::arg("delta"), py::arg("n"),
        "Variance factor after averaging n independent compressions: 1 + (delta - 1)/n.");
  m.def("dcsgd_rate_bound", &dcsgd_rate_bound, py::arg("delta_n"), py::arg("n"), py::arg("L"), py::arg("mu"),
        py::arg("sigma2"), py::arg("D"), py::arg("r0"), py::arg("T"),
        "Guaranteed ceiling on the output suboptimality under the two-phase schedule.");
  m.def("dcsgd_pp_rate_bound", &dcsgd_pp_rate_bound, py::arg("delta"), py::arg("a_s"), py::arg("delta_s"),
        py::arg("n"), py::arg("L"), py::arg("mu"), py::arg("sigma2"), py::arg("D"), py::arg("r0"), py::arg("T"),
        "The same ceiling under partial participation.");

  // ---- harness ----
  py::class_<CertificationRow>(m, "CertificationRow")
      .def_readonly("kind", &CertificationRow::kind)
      .def_readonly("max_bias_z", &CertificationRow::max_bias_z)
      .def_readonly("delta_hat", &CertificationRow::delta_hat)
      .def_readonly("delta_se", &CertificationRow::delta_se)
      .def_readonly("contraction_hat", &CertificationRow::contraction_hat)
      .def_readonly("nominal_delta", &CertificationRow::nominal_delta)
      .def_readonly("unbiased", &CertificationRow::unbiased)
      .def_readonly("samples", &CertificationRow::samples);

  m.def("certify_compressor", &certify_compressor, py::arg("spec"), py::arg("d"), py::arg("trials") = 100000,
        py::arg("seed") = 1, "Monte-Carlo bias and variance certification on the fixed panel.");
  m.def("certify_roster", &certify_roster, py::arg("d"), py::arg("k"), py::arg("trials") = 100000,
        py::arg("seed") = 1);

  py::class_<BoundsRow>(m, "BoundsRow")
      .def_readonly("n", &BoundsRow::n)
      .def_readonly("delta_n", &BoundsRow::delta_n)
      .def_readonly("bound_full", &BoundsRow::bound_full)
      .def_readonly("a_s", &BoundsRow::a_s)
      .def_readonly("delta_s", &BoundsRow::delta_s)
      .def_readonly("bound_pp", &BoundsRow::bound_pp);

  m.def("compare_bounds",
        [](const std::string& config) { return compare_bounds(nlohmann::json::parse(config)); },
        py::arg("config"), "Rate ceilings across a worker-count grid; config is a JSON document string.");

  py::class_<RunSummary>(m, "RunSummary")
      .def_readonly("method", &RunSummary::method)
      .def_readonly("seed", &RunSummary::seed)
      .def_readonly("diverged", &RunSummary::diverged)
      .def_readonly("expect_divergence", &RunSummary::expect_divergence)
      .def_readonly("iters_to_target", &RunSummary::iters_to_target)
      .def_readonly("total_bits", &RunSummary::total_bits)
      .def_readonly("final_f_gap", &RunSummary::final_f_gap)
      .def_readonly("output_f_gap", &RunSummary::output_f_gap);

  py::class_<ExperimentResult>(m, "ExperimentResult")
      .def_readonly("runs", &ExperimentResult::runs)
      .def_readonly("unexpected_divergence", &ExperimentResult::unexpected_divergence)
      .def_readonly("files_written", &ExperimentResult::files_written);

  m.def("run_experiment",
        [](const std::string& config) { return run_experiment(parse_experiment_config(nlohmann::json::parse(config))); },
        py::arg("config"),
        "Validate a JSON experiment document, run every (method, seed) job, write CSVs and the resolved config.");
}
