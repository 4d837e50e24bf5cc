// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "compsgd/compressors.hpp"
#include "compsgd/message.hpp"
#include "compsgd/rng.hpp"
#include "compsgd/vec.hpp"

namespace compsgd {

/// Variance factor of the two-stage operator built from a contractive part
/// with factor delta1 and an unbiased residual part with factor delta2:
///   delta = delta2 * (1 - 1/delta1) + 1/delta1.
/// Both inputs must be >= 1. The result is always <= delta2, with equality
/// only at delta1 = infinity (i.e. a useless first stage).
double induced_delta(double delta1, double delta2);

/// Apply the contractive compressor, then the unbiased one to the residual,
/// and ship both payloads as one composite message. The decoded sum is
/// unbiased for x whenever the second part is unbiased.
CompressedMessage induced_compress(const CompressorSpec& contractive, const CompressorSpec& unbiased,
                                   const DenseVector& x, Rng& rng);

/// Convenience: split a k-coordinate budget between a deterministic top
/// selection and an unbiased magnitude-proportional remainder. k >= 2.
CompressorSpec split_budget_induced_spec(int k);

}  // namespace compsgd
