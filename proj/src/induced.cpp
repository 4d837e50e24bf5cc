// SPDX-License-Identifier: Apache-2.0
#include "compsgd/induced.hpp"

#include "compsgd/errors.hpp"

namespace compsgd {

double induced_delta(double delta1, double delta2) {
  if (delta1 < 1.0 || delta2 < 1.0) throw ParameterError("induced_delta: variance factors must be >= 1");
  return delta2 * (1.0 - 1.0 / delta1) + 1.0 / delta1;
}

CompressedMessage induced_compress(const CompressorSpec& contractive, const CompressorSpec& unbiased,
                                   const DenseVector& x, Rng& rng) {
  if (x.empty()) throw ParameterError("induced_compress: empty vector");
  const std::uint32_t dim = static_cast<std::uint32_t>(x.size());
  validate_spec(contractive, dim);
  validate_spec(unbiased, dim);
  if (contractive.kind == CompressorKind::Induced || unbiased.kind == CompressorKind::Induced)
    throw ParameterError("induced_compress: parts cannot themselves be induced");
  if (!is_unbiased(unbiased)) throw ParameterError("induced_compress: second part must be unbiased");

  CompressedMessage first = compress(contractive, x, rng);
  const DenseVector residual = subtracted(x, decompress(first));
  CompressedMessage second = compress(unbiased, residual, rng);
  return make_composite_message(std::move(first), std::move(second));
}

CompressorSpec split_budget_induced_spec(int k) {
  if (k < 2) throw ParameterError("split_budget_induced_spec: budget must be >= 2");
  const int k1 = (k + 1) / 2;
  const int k2 = k - k1;
  return induced_spec(top_k_spec(k1), wangni_spec(k2));
}

}  // namespace compsgd
