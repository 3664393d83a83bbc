#include "detangle/extract.hpp"

#include "detangle/log.hpp"
#include "detangle/random.hpp"
#include "detangle/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace detangle {

namespace {

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// log(1 + exp(t)) without overflow.
double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double logistic_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& yv, const Eigen::VectorXd& w, double b,
                     double l2) {
  const Eigen::VectorXd margin = (X * w).array() + b;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < margin.size(); ++i) loss += softplus(margin(i)) - yv(i) * margin(i);
  return loss / static_cast<double>(X.rows()) + 0.5 * l2 * w.squaredNorm();
}

}  // namespace

double LogisticModel::probability(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return sigmoid(weights.dot(x) + bias);
}

Eigen::VectorXd LogisticModel::probabilities(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd z = (X * weights).array() + bias;
  return z.unaryExpr([](double t) { return sigmoid(t); });
}

LogisticModel train_logistic(const Eigen::MatrixXd& X, const std::vector<int>& y, const LogisticHyper& hyper) {
  const auto n = X.rows();
  if (static_cast<std::size_t>(n) != y.size()) throw NumericError("feature rows and labels differ in length");
  if (n < 2) throw NumericError("logistic regression needs at least two rows");
  if (!X.allFinite()) throw NumericError("non-finite feature value");
  const auto positives = std::count(y.begin(), y.end(), 1);
  if (positives == 0 || positives == n) throw NumericError("logistic regression needs both classes present");
  if (hyper.epochs < 0 || hyper.l2 < 0) throw NumericError("negative epochs or L2 strength");

  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv(i) = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : 0.0;

  double step;
  if (hyper.learning_rate) {
    step = *hyper.learning_rate;
  } else {
    // Hessian of the mean log-loss is bounded by [X 1]^T[X 1] / (4n); the
    // Frobenius norm bounds its spectral norm.
    const double lipschitz = (X.squaredNorm() + static_cast<double>(n)) / (4.0 * static_cast<double>(n)) + hyper.l2;
    step = 1.0 / lipschitz;
  }

  LogisticModel model;
  model.hyper = hyper;
  model.weights = Eigen::VectorXd::Zero(X.cols());
  model.bias = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  model.loss_trace.reserve(static_cast<std::size_t>(hyper.epochs) + 1);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    model.loss_trace.push_back(logistic_loss(X, yv, model.weights, model.bias, hyper.l2));
    const Eigen::VectorXd residual = model.probabilities(X) - yv;
    const Eigen::VectorXd grad_w = X.transpose() * residual * inv_n + hyper.l2 * model.weights;
    const double grad_b = residual.sum() * inv_n;
    model.weights -= step * grad_w;
    model.bias -= step * grad_b;
  }
  model.loss_trace.push_back(logistic_loss(X, yv, model.weights, model.bias, hyper.l2));
  if (!model.weights.allFinite() || !std::isfinite(model.bias)) throw NumericError("logistic training diverged");
  return model;
}

ExtractionResult pu_extract(const Dataset& data, const ExtractionQuery& q, double alpha_r,
                            const std::vector<std::size_t>& features, const PuParams& params, std::uint64_t seed) {
  if (!(params.theta_lo < params.theta_hi)) throw ValidationError("PU thresholds need theta_lo < theta_hi");
  if (params.iterations < 1) throw ValidationError("PU needs at least one iteration");
  if (!(params.negative_fraction > 0.0 && params.negative_fraction <= 1.0))
    throw ValidationError("negative fraction must lie in (0, 1]");
  if (features.empty()) throw ValidationError("PU extraction needs at least one feature column");

  const TargetWindow window = target_window(data, q);
  const std::size_t n = data.rows();
  const std::size_t row_budget = budget_count(alpha_r, n);
  if (row_budget < window.rows.size())
    throw BudgetError("target window has " + std::to_string(window.rows.size()) + " rows but the row budget is " +
                      std::to_string(row_budget) + "; increase alpha_r");

  ExtractionResult result;
  result.window = window.rows;
  result.tau = params.tau;

  std::vector<char> in_window(n, 0);
  for (auto i : window.rows) in_window[i] = 1;
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < n; ++i)
    if (!in_window[i]) candidates.push_back(i);

  if (candidates.empty()) {
    result.rows = window.rows;
    log::info("PU extraction: no candidate rows, extracted data is the target window");
    return result;
  }

  std::vector<std::size_t> sorted_features = features;
  std::sort(sorted_features.begin(), sorted_features.end());
  std::vector<std::size_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0);
  const Dataset projected = data.slice(all_rows, sorted_features);
  const Codec codec = build_codec(projected.schema(), projected);
  const Eigen::MatrixXd X = encode_dataset(codec, projected);

  // label per row: 1 positive side, 0 negative side, -1 unlabeled
  std::vector<int> label(n, -1);
  for (auto i : window.rows) label[i] = 1;

  Rng rng(seed);
  const std::size_t by_fraction = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(params.negative_fraction * static_cast<double>(candidates.size()))));
  const std::size_t n_neg = std::min({window.rows.size(), by_fraction, candidates.size()});
  {
    std::vector<std::size_t> pool = candidates;
    for (std::size_t k = 0; k < n_neg; ++k) {
      const std::size_t pick = k + rng.index(pool.size() - k);
      std::swap(pool[k], pool[pick]);
      label[pool[k]] = 0;
    }
  }

  auto train_current = [&] {
    std::vector<std::size_t> train_rows;
    std::vector<int> y;
    for (std::size_t i = 0; i < n; ++i)
      if (label[i] >= 0) {
        train_rows.push_back(i);
        y.push_back(label[i]);
      }
    Eigen::MatrixXd Xt(static_cast<Eigen::Index>(train_rows.size()), X.cols());
    for (std::size_t r = 0; r < train_rows.size(); ++r)
      Xt.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(train_rows[r]));
    return train_logistic(Xt, y, params.classifier);
  };

  LogisticModel clf;
  int it = 0;
  for (; it < params.iterations; ++it) {
    clf = train_current();
    bool changed = false;
    for (auto i : candidates) {
      if (label[i] != -1) continue;
      const double p = clf.probability(X.row(static_cast<Eigen::Index>(i)).transpose());
      if (p >= params.theta_hi) {
        label[i] = 1;
        changed = true;
      } else if (p <= params.theta_lo) {
        label[i] = 0;
        changed = true;
      }
    }
    if (!changed) {
      ++it;
      break;
    }
  }
  result.iterations_run = it;
  // Final classifier on the settled label sets scores every candidate.
  clf = train_current();

  std::vector<std::pair<double, std::size_t>> ranked;
  for (auto i : candidates) {
    const double p = clf.probability(X.row(static_cast<Eigen::Index>(i)).transpose());
    result.probabilities[i] = p;
    if (p > params.tau) ranked.emplace_back(p, i);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  const std::size_t slots = row_budget - window.rows.size();
  if (ranked.size() > slots) ranked.resize(slots);

  result.rows = window.rows;
  for (const auto& [p, i] : ranked) result.rows.push_back(i);
  std::sort(result.rows.begin(), result.rows.end());
  return result;
}

namespace {

double score_encoded(const Eigen::MatrixXd& E, const Codec& codec, std::size_t candidate,
                     const std::vector<std::size_t>& targets) {
  const auto& cb = codec.block_for(candidate);
  double best = 0.0;
  for (auto t : targets) {
    const auto& tb = codec.block_for(t);
    for (std::size_t a = 0; a < cb.width; ++a)
      for (std::size_t b = 0; b < tb.width; ++b)
        best = std::max(best, std::abs(pearson(E.col(static_cast<Eigen::Index>(cb.offset + a)),
                                               E.col(static_cast<Eigen::Index>(tb.offset + b)))));
  }
  return best;
}

}  // namespace

double attribute_score(const Dataset& data, const Codec& codec, std::size_t candidate,
                       const std::vector<std::size_t>& targets) {
  return score_encoded(encode_dataset(codec, data), codec, candidate, targets);
}

std::vector<std::size_t> select_attributes(const Dataset& data, const std::vector<std::size_t>& targets,
                                           double alpha_c) {
  if (targets.empty()) throw ValidationError("target attribute selection must be nonempty");
  const std::size_t m = data.cols();
  const std::size_t budget = budget_count(alpha_c, m);
  std::set<std::size_t> target_set(targets.begin(), targets.end());
  for (auto t : target_set)
    if (t >= m) throw SchemaError("target attribute index out of range");
  if (budget < target_set.size())
    throw BudgetError("column budget " + std::to_string(budget) + " is smaller than the " +
                      std::to_string(target_set.size()) + " target attributes; increase alpha_c");

  std::vector<std::size_t> out(target_set.begin(), target_set.end());
  const std::size_t extra = budget - target_set.size();
  if (extra > 0 && data.rows() > 0) {
    const Codec codec = build_codec(data.schema(), data);
    const Eigen::MatrixXd E = encode_dataset(codec, data);
    std::vector<std::pair<long long, std::size_t>> scored;  // quantized score keeps near-ties stable
    const std::vector<std::size_t> target_list(target_set.begin(), target_set.end());
    for (std::size_t j = 0; j < m; ++j) {
      if (target_set.count(j)) continue;
      scored.emplace_back(std::llround(score_encoded(E, codec, j, target_list) * 1e12), j);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (std::size_t k = 0; k < std::min(extra, scored.size()); ++k) out.push_back(scored[k].second);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool check_covering(const ExtractionResult& result, double tau) {
  std::set<std::size_t> window(result.window.begin(), result.window.end());
  for (auto i : result.rows) {
    if (window.count(i)) {
      if (!(1.0 > tau)) return false;
      continue;
    }
    auto it = result.probabilities.find(i);
    if (it == result.probabilities.end() || !(it->second > tau)) return false;
  }
  return true;
}

}  // namespace detangle
