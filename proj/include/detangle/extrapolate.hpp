#pragma once

#include "detangle/analyze.hpp"
#include "detangle/core_data.hpp"
#include "detangle/model.hpp"
#include "detangle/request.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <set>
#include <string>
#include <vector>

namespace detangle {

/// Interpolation levels: 0 observed record, 1 on the grid, 2 inside the
/// implied cuboid, 3 outside it.
enum class ExtensionLevel { kObserved = 0, kGrid = 1, kCuboid = 2, kOutside = 3 };

struct TaxonomyDim {
  std::size_t attribute = 0;     // index into the taxonomy schema
  std::vector<double> observed;  // observed values, sorted unique
  Interval interval;             // continuous: [min, max] of the observed values
  std::vector<char> implied;     // categorical: membership per category
};

/// Grid and cuboid are never enumerated; membership is tested per
/// dimension.
struct ExtensionTaxonomy {
  Schema schema;
  std::vector<TaxonomyDim> dims;
  std::set<std::vector<double>> observed_tuples;  // distinct observed value tuples

  bool in_observed(std::size_t d, double v) const;
  bool in_implied(std::size_t d, double v) const;
};

ExtensionTaxonomy build_taxonomy(const Dataset& extracted, const std::vector<std::size_t>& dims);

ExtensionLevel classify_point(const ExtensionTaxonomy& tax, const std::vector<double>& x);

/// Level of the whole support of the condition. Dimensions of the taxonomy
/// without a condition keep their observed values as support.
ExtensionLevel classify_query(const ExtensionTaxonomy& tax, const ExtrapolationQuery& p);

/// Unnormalized importance weight of every extracted row: the product over
/// conditions of target mass (or density) over empirical mass (or density).
Eigen::VectorXd importance_weights(const Dataset& extracted, const std::vector<MarginalCondition>& conditions);

struct ExtrapolatedRepresentation {
  Representation representation;
  ExtensionLevel level = ExtensionLevel::kObserved;
  std::vector<double> ess;  // per subset
  std::vector<std::string> warnings;
};

inline constexpr double kEssWarning = 30.0;

ExtrapolatedRepresentation extrapolate(const DataModel& model, const Representation& rep, const Dataset& extracted,
                                       const ExtrapolationQuery& p);

}  // namespace detangle
