// Acceptance suite: one [PASS]/[FAIL] line per criterion, nonzero exit if
// any criterion fails.
//
//   acceptance [--expect-fail ID,...]
//
// --expect-fail names criteria with a documented, known failure. They still
// print [FAIL], but the exit status is 0 only if the failing set equals the
// listed set, so a regression or an unexpected pass is still reported.

#include "detangle/extract.hpp"
#include "detangle/extrapolate.hpp"
#include "detangle/log.hpp"
#include "detangle/metrics.hpp"
#include "detangle/persist.hpp"
#include "detangle/pipeline.hpp"
#include "detangle/random.hpp"
#include "detangle/stats.hpp"
#include "detangle/synth.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace detangle;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;  // 0: no runtime bound
  std::function<Outcome()> run;
};

std::string fmt(double x, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << x;
  return s.str();
}

Eigen::VectorXd normals(std::size_t n, Rng& rng, double mean = 0.0, double sd = 1.0) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = mean + sd * rng.normal();
  return v;
}

// 1 ------------------------------------------------------------------------

Outcome gain_fraction_reproduction() {
  const double g = gain_fraction(3.9653, 4.0124, 4.0273);
  return {std::abs(g - 0.7597) <= 5e-4, "fraction=" + fmt(g, 6)};
}

// 2 ------------------------------------------------------------------------

// Segments A..D with 400 A rows. x3, x4 place A and B together (around +1.5)
// and C, D together (around -1.5). With the dependency, y follows
// 1.5 x1 - 1.5 x2 in A and B and the opposite sign in C and D; without it,
// y ignores every attribute.
Dataset segmented(bool dependency, std::uint64_t seed) {
  const Schema s({AttributeSpace::categorical_of("segment", {"A", "B", "C", "D"}),
                  AttributeSpace::categorical_of("y", {"0", "1"}), AttributeSpace::continuous("x1"),
                  AttributeSpace::continuous("x2"), AttributeSpace::continuous("x3"),
                  AttributeSpace::continuous("x4"), AttributeSpace::continuous("x5"),
                  AttributeSpace::continuous("x6")});
  Rng rng(seed);
  const Eigen::Index n = 2000;
  Eigen::MatrixXd cells(n, 8);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int seg = i < 400 ? 0 : 1 + static_cast<int>((i - 400) * 3 / (n - 400));
    const double side = seg < 2 ? 1.0 : -1.0;
    double x[6];
    for (double& v : x) v = rng.normal();
    x[2] += 1.5 * side;
    x[3] += 1.5 * side;
    const double logit = dependency ? side * (1.5 * x[0] - 1.5 * x[1]) - 0.5 : -0.5;
    const double y = rng.uniform() < 1.0 / (1.0 + std::exp(-logit)) ? 1.0 : 0.0;
    cells.row(i) << seg, y, x[0], x[1], x[2], x[3], x[4], x[5];
  }
  return Dataset(s, cells);
}

Eigen::MatrixXd features_of(const Dataset& d, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), 6);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (Eigen::Index j = 0; j < 6; ++j) X(static_cast<Eigen::Index>(r), j) = d.at(rows[r], static_cast<std::size_t>(j) + 2);
  return X;
}

std::vector<int> labels_of(const Dataset& d, const std::vector<std::size_t>& rows) {
  std::vector<int> y;
  for (auto i : rows) y.push_back(static_cast<int>(d.at(i, 1)));
  return y;
}

// Mean held-out AP of the y classifier over random train/test splits of
// segment A, trained on the window only and on the PU-extracted rows.
std::pair<double, double> extraction_gain(bool dependency) {
  const Dataset data = segmented(dependency, 4242);
  const ExtractionQuery q{ConditionExpr::compare("segment", CompareOp::kEq, std::string("A")),
                          {"y", "x1", "x2", "x3", "x4", "x5", "x6"}};
  double base = 0, enriched = 0;
  const int splits = 10;
  for (int split = 0; split < splits; ++split) {
    Rng rng(derive_seed(77, static_cast<std::uint64_t>(split), 0));
    std::vector<std::size_t> a_rows(400);
    for (std::size_t i = 0; i < 400; ++i) a_rows[i] = i;
    for (std::size_t k = 0; k < 60; ++k) std::swap(a_rows[k], a_rows[k + rng.index(400 - k)]);
    std::vector<std::size_t> test(a_rows.begin() + 60, a_rows.end());
    std::sort(test.begin(), test.end());

    // Held-out A rows are removed before extraction.
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < data.rows(); ++i)
      if (!std::binary_search(test.begin(), test.end(), i)) keep.push_back(i);
    const Dataset pool = data.select_rows(keep);
    std::vector<std::size_t> targets;
    for (const auto& name : q.selection) targets.push_back(pool.schema().index_of(name));
    const auto columns = select_attributes(pool, targets, 0.99);
    const ExtractionResult r = pu_extract(pool, q, 0.3, pu_features(pool.schema(), q, columns), PuParams{},
                                          derive_seed(91, static_cast<std::uint64_t>(split), 1));

    const LogisticModel only_window = train_logistic(features_of(pool, r.window), labels_of(pool, r.window));
    const LogisticModel extracted = train_logistic(features_of(pool, r.rows), labels_of(pool, r.rows));
    const Eigen::MatrixXd Xt = features_of(data, test);
    const std::vector<int> yt = labels_of(data, test);
    auto ap = [&](const LogisticModel& m) {
      const Eigen::VectorXd p = m.probabilities(Xt);
      return oracles::average_precision(std::vector<double>(p.data(), p.data() + p.size()), yt);
    };
    base += ap(only_window);
    enriched += ap(extracted);
  }
  return {100.0 * base / splits, 100.0 * enriched / splits};
}

Outcome extraction_directional() {
  const auto [base_dep, pu_dep] = extraction_gain(true);
  const auto [base_ind, pu_ind] = extraction_gain(false);
  const double gain = pu_dep - base_dep, change = pu_ind - base_ind;
  return {gain >= 2.0 && std::abs(change) <= 3.0,
          "dependency: AP " + fmt(base_dep) + " -> " + fmt(pu_dep) + " (gain " + fmt(gain, 3) +
              " pts); removed: AP " + fmt(base_ind) + " -> " + fmt(pu_ind) + " (change " + fmt(change, 3) + " pts)"};
}

// 3 ------------------------------------------------------------------------

Schema random_schema(Rng& rng, std::size_t dims) {
  std::vector<AttributeSpace> attrs;
  for (std::size_t d = 0; d < dims; ++d) {
    const std::string name = "a" + std::to_string(d);
    switch (rng.index(3)) {
      case 0:
        attrs.push_back(AttributeSpace::continuous(name));
        break;
      case 1:
        attrs.push_back(AttributeSpace::categorical_of(name, {"p", "q", "r", "s"}));
        break;
      default: {
        const std::vector<std::string> cats{"p", "q", "r", "s", "t"};
        std::vector<std::pair<std::string, std::string>> order;
        for (std::size_t a = 0; a < cats.size(); ++a)
          for (std::size_t b = a + 1; b < cats.size(); ++b)
            if (rng.uniform() < 0.3) order.emplace_back(cats[a], cats[b]);
        attrs.push_back(AttributeSpace::categorical_of(name, cats, order));
      }
    }
  }
  return Schema(std::move(attrs));
}

double random_value(const AttributeSpace& a, Rng& rng) {
  if (a.categorical()) return static_cast<double>(rng.index(a.categories.size()));
  return static_cast<double>(rng.index(7)) - 1.0 + (rng.uniform() < 0.3 ? 0.5 : 0.0);
}

Outcome extension_oracle() {
  Rng rng(3030);
  int agree = 0;
  const int instances = 1000;
  for (int k = 0; k < instances; ++k) {
    const std::size_t dims = 1 + rng.index(3);
    const Schema s = random_schema(rng, dims);
    std::vector<std::vector<double>> obs(1 + rng.index(6));
    for (auto& t : obs)
      for (std::size_t d = 0; d < dims; ++d) t.push_back(random_value(s[d], rng));
    std::vector<std::size_t> all(dims);
    for (std::size_t d = 0; d < dims; ++d) all[d] = d;
    const ExtensionTaxonomy tax = build_taxonomy(fixtures::from_rows(s, obs), all);
    std::vector<double> x;
    if (rng.uniform() < 0.3) {
      // Mix coordinates of observed points to hit the grid often.
      for (std::size_t d = 0; d < dims; ++d) x.push_back(obs[rng.index(obs.size())][d]);
    } else {
      for (std::size_t d = 0; d < dims; ++d) x.push_back(random_value(s[d], rng));
    }
    agree += static_cast<int>(classify_point(tax, x)) == oracles::extension_level(s, obs, x);
  }
  return {agree == instances, std::to_string(agree) + "/" + std::to_string(instances) + " agree"};
}

// 4 ------------------------------------------------------------------------

Outcome pu_quality() {
  const auto b = fixtures::two_cluster_benchmark(2024);
  const ExtractionResult r = pu_extract(b.data, b.query, 0.6, b.features, PuParams{}, 7);
  double tp = 0, added = 0, hidden = 0;
  for (char h : b.hidden_positive) hidden += h;
  for (auto i : r.rows)
    if (!std::binary_search(r.window.begin(), r.window.end(), i)) {
      ++added;
      tp += b.hidden_positive[i];
    }
  const double recall = tp / hidden, precision = added > 0 ? tp / added : 0.0;

  Rng rng(4040);
  int ok = 0;
  const int configs = 100;
  for (int k = 0; k < configs; ++k) {
    const auto bench = fixtures::two_cluster_benchmark(rng.next());
    PuParams p;
    p.iterations = 5 + static_cast<int>(rng.index(96));
    p.tau = 0.3 + 0.6 * rng.uniform();
    p.theta_hi = 0.6 + 0.35 * rng.uniform();
    p.theta_lo = 0.05 + 0.35 * rng.uniform();
    p.negative_fraction = 0.05 + 0.5 * rng.uniform();
    const double alpha_r = 0.2 + 0.75 * rng.uniform();
    const double alpha_c = 0.67 + 0.32 * rng.uniform();
    const auto cols = select_attributes(bench.data, {1, 2}, alpha_c);
    const ExtractionResult e = pu_extract(bench.data, bench.query, alpha_r, bench.features, p, rng.next());
    const bool window_kept = std::includes(e.rows.begin(), e.rows.end(), e.window.begin(), e.window.end());
    ok += check_covering(e, p.tau) && e.rows.size() <= budget_count(alpha_r, bench.data.rows()) &&
          cols.size() <= budget_count(alpha_c, bench.data.cols()) && window_kept;
  }
  return {recall >= 0.9 && precision >= 0.9 && ok == configs,
          "recall=" + fmt(recall) + " precision=" + fmt(precision) + "; invariants held on " + std::to_string(ok) +
              "/" + std::to_string(configs) + " configurations"};
}

// 5 ------------------------------------------------------------------------

Outcome model_numerics() {
  Rng rng(5050);
  double worst_exact = 0, worst_oracle = 0, worst_corr = 0;
  bool monotone = true;
  for (int trial = 0; trial < 10; ++trial) {
    const int k = 1 + static_cast<int>(rng.index(3));
    Eigen::MatrixXd A(k, 6);
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = rng.normal();
    Eigen::MatrixXd F(300, k);
    for (Eigen::Index i = 0; i < F.size(); ++i) F.data()[i] = rng.normal();
    const Dataset exact(fixtures::continuous_schema(6), F * A);
    const DataModel m = fit_model(exact, RelationshipFamily{}, k, static_cast<std::size_t>(k), {}, {});
    worst_exact = std::max(worst_exact, recon_error(m, exact));

    Eigen::MatrixXd noisy = F * A;
    for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy.data()[i] += 0.3 * rng.normal();
    const Dataset d(fixtures::continuous_schema(6), noisy);
    double prev = INFINITY;
    for (std::size_t dim = 1; dim <= 6; ++dim) {
      const DataModel md = fit_model(d, RelationshipFamily{}, 6, dim, {}, {});
      const double err = recon_error(md, d);
      worst_oracle = std::max(worst_oracle, std::abs(err - oracles::rank_k_residual(centered_encoding(md, d), static_cast<int>(dim))));
      monotone = monotone && err <= prev + 1e-12;
      prev = err;
      const Eigen::MatrixXd Z = encode_data(md, d);
      for (Eigen::Index a = 0; a < Z.cols(); ++a)
        for (Eigen::Index b = a + 1; b < Z.cols(); ++b)
          worst_corr = std::max(worst_corr, std::abs(oracles::pearson(Z.col(a), Z.col(b))));
    }
  }
  return {worst_exact <= 1e-8 && worst_oracle <= 1e-6 && monotone && worst_corr <= 1e-6,
          "rank-k mse=" + fmt(worst_exact, 3) + ", |mse-svd|=" + fmt(worst_oracle, 3) +
              ", monotone=" + (monotone ? "yes" : "no") + ", max |corr|=" + fmt(worst_corr, 3)};
}

// 6 ------------------------------------------------------------------------

Outcome em_behaviour() {
  Rng rng(6060);
  double worst_step = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 100 + rng.index(400);
    const int clusters = 1 + static_cast<int>(rng.index(4));
    Eigen::VectorXd x(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < x.size(); ++i)
      x(i) = 3.0 * static_cast<double>(rng.index(static_cast<std::size_t>(clusters))) + (0.3 + rng.uniform()) * rng.normal();
    const GmmFit f = fit_gmm_em(x, 1 + static_cast<int>(rng.index(4)), rng.next());
    for (std::size_t s = 1; s < f.log_likelihood.size(); ++s)
      worst_step = std::min(worst_step, f.log_likelihood[s] - f.log_likelihood[s - 1]);
  }
  Eigen::VectorXd two(1000);
  two << normals(500, rng, -4.0, 0.5), normals(500, rng, 4.0, 0.5);
  const auto g = std::get<GmmParams>(fit_gmm(two, 2, 11).params);
  // The oracle is the cluster-wise MLE given the known labels.
  const double m0 = two.head(500).mean(), m1 = two.tail(500).mean();
  const double err = std::max(std::abs(g.means[0] - m0), std::abs(g.means[1] - m1));
  return {worst_step >= -1e-9 && err <= 0.05,
          "worst log-likelihood step=" + fmt(worst_step, 3) + ", mean error=" + fmt(err, 3)};
}

// 7 ------------------------------------------------------------------------

Outcome density_sanity() {
  Rng rng(7070);
  const Eigen::VectorXd x = normals(300, rng, 2.0, 1.5);
  const DistEstimate k = fit_kde(x);
  const double h = std::get<KdeParams>(k.params).bandwidth;
  const double lo = x.minCoeff() - 10 * h, hi = x.maxCoeff() + 10 * h;
  const int points = 10000;
  const double dx = (hi - lo) / (points - 1);
  double integral = 0;
  for (int i = 0; i < points; ++i) integral += (i == 0 || i == points - 1 ? 0.5 : 1.0) * k.density(lo + i * dx);
  integral *= dx;

  Eigen::VectorXd one(1);
  one << 0.7;
  const double bw = 0.37;
  const double peak = fit_kde(one, bw).density(0.7);
  const double peak_err = std::abs(peak - 1.0 / (bw * std::sqrt(2 * M_PI)));

  const double sd = std::sqrt((x.array() - x.mean()).square().sum() / (x.size() - 1.0));
  const double silverman_err = std::abs(silverman_bandwidth(x) - 1.06 * sd * std::pow(300.0, -0.2));
  return {integral >= 0.999 && integral <= 1.001 && peak_err <= 1e-9 && silverman_err <= 1e-9,
          "integral=" + fmt(integral, 7) + ", peak error=" + fmt(peak_err, 3) + ", bandwidth error=" +
              fmt(silverman_err, 3)};
}

// 8 ------------------------------------------------------------------------

Outcome information_estimators() {
  Rng rng(8080);
  const Eigen::VectorXd a = normals(10000, rng), b = normals(10000, rng);
  const double mi_ind = mutual_info(a, b, kDefaultBins);
  const double h = plug_in_entropy(discretize(a, kDefaultBins));
  const double self_err = std::abs(mutual_info(a, a, kDefaultBins) - h) / h;

  std::vector<int> z;
  Eigen::MatrixXd c(10, 1);
  const int table[4][3] = {{0, 0, 4}, {0, 1, 1}, {1, 0, 1}, {1, 1, 4}};
  Eigen::Index r = 0;
  for (const auto& cell : table)
    for (int k = 0; k < cell[2]; ++k) {
      z.push_back(cell[0]);
      c(r++, 0) = cell[1];
    }
  const double h2 = cond_entropy_codes(z, c, 2);

  int holds = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t rows = 2 + rng.index(5), cols = 2 + rng.index(5);
    std::vector<int> zs;
    Eigen::MatrixXd cs(0, 1);
    std::vector<double> cv;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        for (std::size_t k = rng.index(6); k > 0; --k) {
          zs.push_back(static_cast<int>(i));
          cv.push_back(static_cast<double>(j));
        }
    if (zs.empty()) {
      zs.push_back(0);
      cv.push_back(0);
    }
    cs = Eigen::Map<Eigen::VectorXd>(cv.data(), static_cast<Eigen::Index>(cv.size()));
    holds += cond_entropy_codes(zs, cs, static_cast<int>(cols)) <= plug_in_entropy(zs) + 1e-9;
  }
  return {mi_ind <= 0.01 && self_err <= 0.02 && std::abs(h2 - 0.5004) <= 1e-4 && holds == 100,
          "MI(indep)=" + fmt(mi_ind, 3) + ", |MI(X,X)-H|/H=" + fmt(self_err, 3) + ", H(Z|C)=" + fmt(h2, 6) +
              ", conditioning property " + std::to_string(holds) + "/100"};
}

// 9 ------------------------------------------------------------------------

Representation split_gaussians(const DataModel& model, const Dataset& rows) {
  const Eigen::MatrixXd Z = encode_data(model, rows);
  Representation r;
  const std::size_t g = *model.grouping;
  std::vector<std::vector<std::size_t>> positions(model.subset_categories.size());
  for (std::size_t i = 0; i < rows.rows(); ++i)
    for (std::size_t l = 0; l < positions.size(); ++l)
      if (rows.at(i, g) == model.subset_categories[l]) positions[l].push_back(i);
  for (std::size_t t = 0; t < model.latent_count(); ++t) {
    r.estimates.emplace_back();
    for (const auto& pos : positions) r.estimates.back().push_back(fit_gaussian(subset_samples(Z, pos, t)));
  }
  for (const auto& pos : positions) r.subset_mass.push_back(static_cast<double>(pos.size()) / rows.rows());
  return r;
}

Outcome extrapolation_checks() {
  const Dataset d = fixtures::gender_dataset(5000, 0.5, 9090);
  DataModel m = fit_model(d, RelationshipFamily{}, 2, 2, {}, {});
  m = assign_subsets(m, d, std::string("gender"));
  const Representation rep = analyze(m, d, AnalyzeConfig{}, 1);

  double pf = 0;
  for (std::size_t i = 0; i < d.rows(); ++i) pf += d.at(i, 0) == 0.0;
  pf /= static_cast<double>(d.rows());
  auto table = [](double f) {
    return ExtrapolationQuery{{"gender"}, {{"gender", CategoricalTable{{{"F", f}, {"M", 1 - f}}}}}};
  };
  const auto same = extrapolate(m, rep, d, table(pf));
  double delta = 0;
  for (std::size_t t = 0; t < rep.latent_count(); ++t)
    for (std::size_t l = 0; l < rep.subset_count(); ++l) {
      const auto& a = std::get<GaussianParams>(rep.estimates[t][l].params);
      const auto& b = std::get<GaussianParams>(same.representation.estimates[t][l].params);
      delta = std::max({delta, std::abs(a.mean - b.mean), std::abs(a.variance - b.variance)});
    }
  for (std::size_t l = 0; l < rep.subset_count(); ++l)
    delta = std::max(delta, std::abs(rep.subset_mass[l] - same.representation.subset_mass[l]));

  SynthesisSpec spec;
  spec.count = 10000;
  spec.seed = 99;
  const auto c = conditional_synthesize(m, rep, d, table(0.7), spec);
  double share = 0;
  for (std::size_t i = 0; i < c.data.rows(); ++i) share += c.data.at(i, 0) == 0.0;
  share /= static_cast<double>(c.data.rows());

  const Dataset truth = fixtures::gender_dataset(5000, 0.7, 9191);
  const double accuracy = extrapolation_accuracy(c.extrapolated, split_gaussians(m, truth), DistanceKind::kTv);

  bool infeasible = false;
  try {
    extrapolate(m, rep, d, ExtrapolationQuery{{"gender"}, {{"gender", CategoricalTable{{{"X", 1.0}}}}}});
  } catch (const InfeasibleExtrapolationError&) {
    infeasible = true;
  }
  return {delta <= 1e-6 && std::abs(share - 0.7) <= 0.03 && accuracy <= 0.1 && infeasible,
          "identity delta=" + fmt(delta, 3) + ", synthetic P(F)=" + fmt(share) + ", TV to truth=" + fmt(accuracy, 3) +
              ", infeasible " + (infeasible ? "rejected" : "accepted")};
}

// 10 -----------------------------------------------------------------------

struct TinyInstance {
  Dataset data;
  ExtractionQuery query;
  double alpha_r, alpha_c;
};

TinyInstance tiny_instance(Rng& rng) {
  const std::size_t n = 8 + rng.index(3), m = 3 + rng.index(2);
  std::vector<AttributeSpace> attrs{AttributeSpace::categorical_of("z", {"0", "1"})};
  for (std::size_t j = 1; j < m; ++j) attrs.push_back(AttributeSpace::continuous("a" + std::to_string(j)));
  Eigen::MatrixXd cells(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < cells.rows(); ++i) {
    const double z = rng.uniform() < 0.5 ? 0 : 1;
    cells(i, 0) = z;
    for (Eigen::Index j = 1; j < cells.cols(); ++j)
      cells(i, j) = std::round((j == 1 ? z : 0.0) * 2.0 + rng.normal() * (j == 1 ? 0.7 : 1.0));
  }
  // The window is every row with a1 at or below its median.
  std::vector<double> a1(cells.col(1).data(), cells.col(1).data() + n);
  std::nth_element(a1.begin(), a1.begin() + static_cast<long>(n / 2), a1.end());
  TinyInstance t{Dataset(Schema(std::move(attrs)), cells),
                 {ConditionExpr::compare("a1", CompareOp::kLe, a1[n / 2]), {"z"}},
                 0.0, 0.5 + 0.49 * rng.uniform()};
  const std::size_t window = target_window(t.data, t.query).rows.size();
  t.alpha_r = std::min(0.99, (static_cast<double>(window) + static_cast<double>(rng.index(4))) / static_cast<double>(n));
  return t;
}

Outcome epsilon_optimality() {
  Rng rng(1010);
  const int instances = 50;
  int within = 0, failed = 0;
  double worst = 0;
  for (int k = 0; k < instances; ++k) {
    const TinyInstance t = tiny_instance(rng);
    BruteForceSpec spec;
    spec.alpha_r = t.alpha_r;
    spec.alpha_c = t.alpha_c;
    spec.beta = 2;
    spec.latent_dims = {1, 2};
    spec.z_uti = 0;
    spec.bins = 2;
    try {
      const BruteForceResult best = brute_force_optimal(t.data, t.query, spec);
      const auto columns = select_attributes(t.data, {0}, t.alpha_c);
      const ExtractionResult r = pu_extract(t.data, t.query, t.alpha_r, pu_features(t.data.schema(), t.query, columns),
                                            PuParams{}, rng.next());
      const DataModel model = fit_model(t.data.slice(r.rows, columns), RelationshipFamily{}, spec.beta, static_cast<std::size_t>(spec.beta),
                                        {}, ModelMetadata{r.rows, columns, 0});
      const double h = utility_entropy(t.data, r.rows, columns, model, 0, spec.bins);
      worst = std::max(worst, h - best.h_uti);
      within += h - best.h_uti <= 0.15;
    } catch (const Error& e) {
      ++failed;
      log::warn(std::string("tiny instance ") + std::to_string(k) + ": " + e.what());
    }
  }
  const double share = static_cast<double>(within) / instances;
  return {share >= 0.8, std::to_string(within) + "/" + std::to_string(instances) + " within 0.15 nats (" +
                            fmt(100 * share, 3) + "%), worst gap " + fmt(worst, 3) + " nats, " +
                            std::to_string(failed) + " errors"};
}

// 11 -----------------------------------------------------------------------

std::vector<std::string> artifact_names() {
  return {kExtractionFile, kModelFile,      kRepresentationFile, kExtrapolatedFile,
          kSyntheticFile,  kSyntheticReportFile, kMetricsFile,   kMetricsJsonFile};
}

Outcome determinism_and_persistence() {
  fixtures::TempDir dir;
  PipelineConfig cfg = fixtures::write_demo(dir.path(), 400, 1111);
  const std::string first = (dir.path() / "first").string(), second = (dir.path() / "second").string();
  cfg.output = first;
  run_stage("pipeline", cfg);
  cfg.output = second;
  run_stage("pipeline", cfg);
  int identical = 0;
  const auto names = artifact_names();
  for (const auto& f : names)
    identical += fixtures::read_file(first + "/" + f) == fixtures::read_file(second + "/" + f);

  // Reload the model and representation and compare with freshly fitted ones.
  const Dataset data = load_csv(cfg.data, load_schema(cfg.schema));
  const ExtractionResult r = extraction_from_json(read_json_file(first + "/" + kExtractionFile));
  const Dataset slice = data.slice(r.rows, r.columns);
  const DataModel loaded = model_from_json(read_json_file(first + "/" + kModelFile));
  ExternalKnowledge ek = load_knowledge(*cfg.knowledge);
  DataModel fresh = fit_model(slice, RelationshipFamily{}, load_request(cfg.request).beta, cfg.latent_dim, ek,
                              ModelMetadata{r.rows, r.columns, stage_seed(cfg.seed, "model")});
  fresh = assign_subsets(fresh, slice, cfg.grouping);
  const double encode_delta = (encode_data(loaded, slice) - encode_data(fresh, slice)).cwiseAbs().maxCoeff();
  const Representation rep = analyze(fresh, slice, cfg.analysis, stage_seed(cfg.seed, "analyze"));
  const bool rep_same = representation_to_json(representation_from_json(representation_to_json(rep))) ==
                        representation_to_json(rep);

  // Stage isolation: delete downstream artifacts and rerun single stages.
  int reproduced = 0;
  const std::vector<std::pair<std::string, std::string>> reruns{
      {"model", kModelFile}, {"analyze", kRepresentationFile}, {"extrapolate", kExtrapolatedFile},
      {"synth", kSyntheticFile}, {"evaluate", kMetricsFile}};
  for (const auto& [stage, file] : reruns) {
    const std::string before = fixtures::read_file(second + "/" + file);
    fs::remove(second + "/" + file);
    run_stage(stage, cfg);
    reproduced += fixtures::read_file(second + "/" + file) == before;
  }
  const bool pass = identical == static_cast<int>(names.size()) && encode_delta <= 1e-12 && rep_same &&
                    reproduced == static_cast<int>(reruns.size());
  return {pass, std::to_string(identical) + "/" + std::to_string(names.size()) +
                    " artifacts byte-identical, reload encode delta=" + fmt(encode_delta, 3) + ", " +
                    std::to_string(reproduced) + "/" + std::to_string(reruns.size()) + " isolated reruns identical"};
}

// 12 -----------------------------------------------------------------------

Outcome distance_properties() {
  Rng rng(1212);
  bool kl_zero = true, tv_symmetric = true;
  for (int k = 0; k < 50; ++k) {
    const DistEstimate a = fit_gmm(normals(50, rng, rng.normal(), 1 + rng.uniform()), 2, rng.next());
    const DistEstimate b = fit_kde(normals(40, rng, rng.normal(), 1 + rng.uniform()));
    kl_zero = kl_zero && stat_distance(a, a, DistanceKind::kKl) == 0.0 && stat_distance(b, b, DistanceKind::kKl) == 0.0;
    tv_symmetric = tv_symmetric && stat_distance(a, b, DistanceKind::kTv) == stat_distance(b, a, DistanceKind::kTv);
    std::vector<double> p{rng.uniform(), rng.uniform(), rng.uniform()}, q{rng.uniform(), rng.uniform(), rng.uniform()};
    const double sp = p[0] + p[1] + p[2], sq = q[0] + q[1] + q[2];
    for (auto& v : p) v /= sp;
    for (auto& v : q) v /= sq;
    kl_zero = kl_zero && stat_distance(p, p, DistanceKind::kKl) == 0.0;
    tv_symmetric = tv_symmetric && stat_distance(p, q, DistanceKind::kTv) == stat_distance(q, p, DistanceKind::kTv);
  }
  const double kl = stat_distance({0.5, 0.5}, {0.25, 0.75}, DistanceKind::kKl);
  const double tv = stat_distance({0.5, 0.5}, {0.25, 0.75}, DistanceKind::kTv);
  const double kl_oracle = oracles::bernoulli_kl(0.5, 0.25);
  return {kl_zero && tv_symmetric && std::abs(kl - 0.14384) <= 1e-5 && std::abs(kl - kl_oracle) <= 1e-12 && tv == 0.25,
          std::string("KL(p,p)=0 ") + (kl_zero ? "yes" : "no") + ", TV symmetric " + (tv_symmetric ? "yes" : "no") +
              ", Bernoulli KL=" + fmt(kl, 7) + ", TV=" + fmt(tv, 6)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> expected;
  for (int a = 1; a < argc; ++a) {
    const std::string arg = argv[a];
    if (arg != "--expect-fail" || a + 1 >= argc) {
      std::cerr << "usage: acceptance [--expect-fail ID,...]\n";
      return 2;
    }
    std::stringstream ids(argv[++a]);
    for (std::string id; std::getline(ids, id, ',');) expected.insert(std::stoi(id));
  }

  const std::vector<Criterion> criteria{
      {1, "gain-fraction reproduction", 1e-3, gain_fraction_reproduction},
      {2, "directional extraction gain", 60, extraction_directional},
      {3, "extension-set oracle equivalence", 5, extension_oracle},
      {4, "PU extraction quality", 30, pu_quality},
      {5, "model numerics", 5, model_numerics},
      {6, "EM monotonicity and recovery", 10, em_behaviour},
      {7, "density sanity", 0, density_sanity},
      {8, "information estimators", 0, information_estimators},
      {9, "extrapolation", 30, extrapolation_checks},
      {10, "epsilon-optimality vs brute force", 120, epsilon_optimality},
      {11, "determinism and persistence", 0, determinism_and_persistence},
      {12, "distance properties", 0, distance_properties},
  };
  int failures = 0;
  std::set<int> failed;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_seconds > 0 && seconds > c.limit_seconds) {
      o.pass = false;
      o.detail += "; runtime over the " + fmt(c.limit_seconds) + " s limit";
    }
    failures += !o.pass;
    if (!o.pass) failed.insert(c.id);
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << c.id << ". " << c.name << ": " << o.detail << " ("
              << fmt(seconds * 1000.0, 4) << " ms)" << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size()
            << " criteria passed" << std::endl;
  if (!expected.empty()) {
    std::cout << "expected failures:";
    for (int id : expected) std::cout << ' ' << id;
    std::cout << (failed == expected ? " (matched)" : " (mismatch)") << std::endl;
    return failed == expected ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
