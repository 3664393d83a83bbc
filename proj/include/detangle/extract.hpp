#pragma once

#include "detangle/core_data.hpp"
#include "detangle/request.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace detangle {

struct LogisticHyper {
  /// Step size; when unset the step is 1/L with L a Lipschitz bound of the
  /// loss gradient, which makes the training loss non-increasing.
  std::optional<double> learning_rate;
  int epochs = 200;
  double l2 = 1e-3;
};

struct LogisticModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  LogisticHyper hyper;
  std::vector<double> loss_trace;  // loss before each epoch, then the final loss

  double probability(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd probabilities(const Eigen::MatrixXd& X) const;
};

/// Full-batch gradient descent on mean log-loss + (l2/2)*|w|^2 (bias not
/// penalized), starting from zero weights.
LogisticModel train_logistic(const Eigen::MatrixXd& X, const std::vector<int>& y, const LogisticHyper& hyper = {});

struct PuParams {
  int iterations = 100;
  double theta_hi = 0.8;
  double theta_lo = 0.2;
  double tau = 0.5;
  /// Fraction of candidates assigned negative labels in the first round;
  /// the count is further capped by the window size.
  double negative_fraction = 0.1;
  LogisticHyper classifier;
};

struct ExtractionResult {
  std::vector<std::size_t> rows;      // extracted rows, ascending
  std::vector<std::size_t> columns;   // extracted columns, ascending
  std::vector<std::size_t> window;    // I_q
  std::map<std::size_t, double> probabilities;  // candidate row -> c(d)
  double tau = 0.5;
  int iterations_run = 0;
};

/// PU-learning record extraction over feature columns `features`. The
/// returned result has `columns` empty; callers combine it with
/// select_attributes.
ExtractionResult pu_extract(const Dataset& data, const ExtractionQuery& q, double alpha_r,
                            const std::vector<std::size_t>& features, const PuParams& params, std::uint64_t seed);

/// The selected attributes plus the non-target attributes with the highest absolute
/// correlation to any target, up to ceil(alpha_c * m) attributes.
std::vector<std::size_t> select_attributes(const Dataset& data, const std::vector<std::size_t>& targets,
                                           double alpha_c);

/// Max |Pearson| between any encoded component of `candidate` and any
/// encoded component of the targets.
double attribute_score(const Dataset& data, const Codec& codec, std::size_t candidate,
                       const std::vector<std::size_t>& targets);

/// Every extracted row has c(d) > tau; window rows count as c = 1.
bool check_covering(const ExtractionResult& result, double tau);

}  // namespace detangle
