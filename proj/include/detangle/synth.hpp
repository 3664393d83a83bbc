#pragma once

#include "detangle/analyze.hpp"
#include "detangle/extrapolate.hpp"
#include "detangle/model.hpp"
#include "detangle/random.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace detangle {

enum class ValidityPolicy { kClamp, kReject };

struct SynthesisSpec {
  std::size_t count = 0;
  /// Subset-mixing weights; empty means the representation's subset masses.
  std::vector<double> mixing;
  ValidityPolicy policy = ValidityPolicy::kClamp;
  int max_resamples = 100;
  std::uint64_t seed = 0;
};

struct LatentSample {
  Eigen::MatrixXd latents;           // count x M
  std::vector<std::size_t> subsets;  // subset drawn for each row
};

double sample_estimate(const DistEstimate& e, Rng& rng);

/// Per row: draw a subset by the mixing weights, then every latent
/// independently from that subset's estimate.
LatentSample sample_latents(const Representation& rep, const SynthesisSpec& spec);

/// Decodes sampled latents. Rows of subset l carry the grouping category of
/// l when the model partitions by a grouping attribute.
Dataset synthesize(const DataModel& model, const Representation& rep, const SynthesisSpec& spec);

struct ConditionalSynthesis {
  Dataset data;
  ExtrapolatedRepresentation extrapolated;
};

ConditionalSynthesis conditional_synthesize(const DataModel& model, const Representation& rep,
                                            const Dataset& extracted, const ExtrapolationQuery& p,
                                            const SynthesisSpec& spec);

}  // namespace detangle
