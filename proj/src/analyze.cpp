#include "detangle/analyze.hpp"

#include "detangle/random.hpp"
#include "detangle/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace detangle {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Ones when `weights` is empty, otherwise the weights scaled to max 1.
Eigen::VectorXd scaled_weights(const Eigen::VectorXd& samples, const Eigen::VectorXd& weights) {
  if (weights.size() == 0) return Eigen::VectorXd::Ones(samples.size());
  if (weights.size() != samples.size()) throw ValidationError("sample and weight vectors differ in length");
  if (!weights.allFinite() || (weights.array() < 0.0).any()) throw ValidationError("weights must be finite and >= 0");
  const double top = weights.maxCoeff();
  if (!(top > 0.0)) throw ValidationError("weights sum to zero");
  return weights / top;
}

void require_samples(const Eigen::VectorXd& samples) {
  if (samples.size() == 0) throw ValidationError("cannot fit a distribution to an empty sample");
  if (!samples.allFinite()) throw NumericError("non-finite latent sample");
}

std::size_t pick_weighted(Rng& rng, const std::vector<double>& mass) {
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  const double u = rng.uniform() * total;
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    if (mass[i] <= 0.0) continue;
    acc += mass[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

struct MixtureState {
  std::vector<double> weights, means, variances;
};

// E-step: fills responsibilities and returns the weighted log-likelihood.
double expectation(const Eigen::VectorXd& x, const Eigen::VectorXd& w, const MixtureState& s, Eigen::MatrixXd& resp) {
  const auto n = x.size();
  const auto k = static_cast<Eigen::Index>(s.means.size());
  resp.resize(n, k);
  double ll = 0.0;
  Eigen::VectorXd row(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < k; ++c) {
      const auto cc = static_cast<std::size_t>(c);
      row(c) = std::log(s.weights[cc]) + normal_log_pdf(x(i), s.means[cc], s.variances[cc]);
    }
    const double lse = log_sum_exp(row);
    resp.row(i) = (row.array() - lse).exp().transpose();
    ll += w(i) * lse;
  }
  return ll;
}

void maximization(const Eigen::VectorXd& x, const Eigen::VectorXd& w, const Eigen::MatrixXd& resp, MixtureState& s) {
  const auto k = resp.cols();
  double total = 0.0;
  std::vector<double> mass(static_cast<std::size_t>(k));
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto cc = static_cast<std::size_t>(c);
    const Eigen::VectorXd wr = w.cwiseProduct(resp.col(c));
    const double nk = wr.sum();
    mass[cc] = nk;
    total += nk;
    // A component that lost all responsibility keeps its shape.
    if (nk < 1e-300) continue;
    const double mean = wr.dot(x) / nk;
    const double var = wr.dot((x.array() - mean).square().matrix()) / nk;
    s.means[cc] = mean;
    s.variances[cc] = std::max(var, kGmmVarianceFloor);
  }
  for (std::size_t c = 0; c < mass.size(); ++c) s.weights[c] = std::max(mass[c] / total, 1e-300);
  const double norm = std::accumulate(s.weights.begin(), s.weights.end(), 0.0);
  for (auto& v : s.weights) v /= norm;
}

}  // namespace

std::string DistEstimate::kind() const {
  return std::visit(Overloaded{[](const GaussianParams&) { return std::string("gaussian"); },
                               [](const GmmParams&) { return std::string("gmm"); },
                               [](const KdeParams&) { return std::string("kde"); }},
                    params);
}

double DistEstimate::log_density(double x) const {
  return std::visit(
      Overloaded{[&](const GaussianParams& g) { return normal_log_pdf(x, g.mean, g.variance); },
                 [&](const GmmParams& g) {
                   Eigen::VectorXd terms(static_cast<Eigen::Index>(g.means.size()));
                   for (std::size_t c = 0; c < g.means.size(); ++c)
                     terms(static_cast<Eigen::Index>(c)) = std::log(g.weights[c]) + normal_log_pdf(x, g.means[c], g.variances[c]);
                   return log_sum_exp(terms);
                 },
                 [&](const KdeParams& k) {
                   const double h2 = k.bandwidth * k.bandwidth;
                   Eigen::VectorXd terms(static_cast<Eigen::Index>(k.points.size()));
                   for (std::size_t i = 0; i < k.points.size(); ++i)
                     terms(static_cast<Eigen::Index>(i)) =
                         k.weights[i] > 0.0 ? std::log(k.weights[i]) + normal_log_pdf(x, k.points[i], h2)
                                            : -std::numeric_limits<double>::infinity();
                   return log_sum_exp(terms);
                 }},
      params);
}

double DistEstimate::density(double x) const {
  return std::visit(Overloaded{[&](const GaussianParams& g) { return normal_pdf(x, g.mean, g.variance); },
                               [&](const GmmParams& g) {
                                 double d = 0.0;
                                 for (std::size_t c = 0; c < g.means.size(); ++c)
                                   d += g.weights[c] * normal_pdf(x, g.means[c], g.variances[c]);
                                 return d;
                               },
                               [&](const KdeParams& k) {
                                 const double h = k.bandwidth;
                                 double d = 0.0;
                                 for (std::size_t i = 0; i < k.points.size(); ++i)
                                   d += k.weights[i] * kInvSqrt2Pi * std::exp(-0.5 * std::pow((x - k.points[i]) / h, 2));
                                 return d / h;
                               }},
                    params);
}

double DistEstimate::mean() const {
  return std::visit(Overloaded{[](const GaussianParams& g) { return g.mean; },
                               [](const GmmParams& g) {
                                 double m = 0.0;
                                 for (std::size_t c = 0; c < g.means.size(); ++c) m += g.weights[c] * g.means[c];
                                 return m;
                               },
                               [](const KdeParams& k) {
                                 double m = 0.0;
                                 for (std::size_t i = 0; i < k.points.size(); ++i) m += k.weights[i] * k.points[i];
                                 return m;
                               }},
                    params);
}

double DistEstimate::variance() const {
  const double mu = mean();
  return std::visit(Overloaded{[](const GaussianParams& g) { return g.variance; },
                               [&](const GmmParams& g) {
                                 double v = 0.0;
                                 for (std::size_t c = 0; c < g.means.size(); ++c)
                                   v += g.weights[c] * (g.variances[c] + (g.means[c] - mu) * (g.means[c] - mu));
                                 return v;
                               },
                               [&](const KdeParams& k) {
                                 double v = k.bandwidth * k.bandwidth;
                                 for (std::size_t i = 0; i < k.points.size(); ++i)
                                   v += k.weights[i] * (k.points[i] - mu) * (k.points[i] - mu);
                                 return v;
                               }},
                    params);
}

std::pair<double, double> DistEstimate::support() const {
  return std::visit(Overloaded{[](const GaussianParams& g) {
                                 const double r = 5.0 * std::sqrt(g.variance);
                                 return std::pair{g.mean - r, g.mean + r};
                               },
                               [](const GmmParams& g) {
                                 double lo = std::numeric_limits<double>::infinity(), hi = -lo;
                                 for (std::size_t c = 0; c < g.means.size(); ++c) {
                                   const double r = 5.0 * std::sqrt(g.variances[c]);
                                   lo = std::min(lo, g.means[c] - r);
                                   hi = std::max(hi, g.means[c] + r);
                                 }
                                 return std::pair{lo, hi};
                               },
                               [](const KdeParams& k) {
                                 const auto [mn, mx] = std::minmax_element(k.points.begin(), k.points.end());
                                 return std::pair{*mn - 5.0 * k.bandwidth, *mx + 5.0 * k.bandwidth};
                               }},
                    params);
}

void validate_estimate(const DistEstimate& e) {
  std::visit(Overloaded{[](const GaussianParams& g) {
                          if (!std::isfinite(g.mean)) throw ValidationError("gaussian mean is not finite");
                          if (!std::isfinite(g.variance) || g.variance < kGaussianVarianceFloor)
                            throw ValidationError("gaussian variance below 1e-12 or not finite");
                        },
                        [](const GmmParams& g) {
                          const auto k = g.weights.size();
                          if (k == 0 || g.means.size() != k || g.variances.size() != k)
                            throw ValidationError("gmm parameter lists are empty or differ in length");
                          double sum = 0.0;
                          for (std::size_t c = 0; c < k; ++c) {
                            if (!(g.weights[c] > 0.0) || !std::isfinite(g.weights[c]))
                              throw ValidationError("gmm weight must be positive");
                            if (!std::isfinite(g.means[c])) throw ValidationError("gmm mean is not finite");
                            if (!std::isfinite(g.variances[c]) || g.variances[c] < kGaussianVarianceFloor)
                              throw ValidationError("gmm variance below 1e-12 or not finite");
                            sum += g.weights[c];
                          }
                          if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("gmm weights do not sum to one");
                        },
                        [](const KdeParams& k) {
                          if (k.points.empty() || k.weights.size() != k.points.size())
                            throw ValidationError("kde points are empty or weights differ in length");
                          if (!(k.bandwidth > 0.0) || !std::isfinite(k.bandwidth))
                            throw ValidationError("kde bandwidth must be positive");
                          double sum = 0.0;
                          for (std::size_t i = 0; i < k.points.size(); ++i) {
                            if (!std::isfinite(k.points[i])) throw ValidationError("kde point is not finite");
                            if (!(k.weights[i] >= 0.0)) throw ValidationError("kde weight is negative");
                            sum += k.weights[i];
                          }
                          if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("kde weights do not sum to one");
                        }},
             e.params);
}

DistEstimate fit_gaussian(const Eigen::VectorXd& samples, const Eigen::VectorXd& weights) {
  require_samples(samples);
  const Eigen::VectorXd w = scaled_weights(samples, weights);
  const auto [mean, var] = weighted_moments(samples, w);
  DistEstimate e;
  e.params = GaussianParams{mean, std::max(var, kGaussianVarianceFloor)};
  e.samples = static_cast<std::size_t>(samples.size());
  return e;
}

GmmFit fit_gmm_em(const Eigen::VectorXd& samples, int components, std::uint64_t seed, const Eigen::VectorXd& weights) {
  require_samples(samples);
  if (components < 1) throw ValidationError("mixture needs K >= 1 components");
  if (static_cast<Eigen::Index>(components) > samples.size())
    throw ValidationError("mixture has K = " + std::to_string(components) + " components but only " +
                          std::to_string(samples.size()) + " samples");
  const Eigen::VectorXd w_in = scaled_weights(samples, weights);

  // Sorting first makes the fit independent of sample order.
  std::vector<std::size_t> order(static_cast<std::size_t>(samples.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
    return samples(ia) != samples(ib) ? samples(ia) < samples(ib) : w_in(ia) < w_in(ib);
  });
  Eigen::VectorXd x(samples.size()), w(samples.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    x(static_cast<Eigen::Index>(r)) = samples(static_cast<Eigen::Index>(order[r]));
    w(static_cast<Eigen::Index>(r)) = w_in(static_cast<Eigen::Index>(order[r]));
  }

  // k-means++ seeding, weighted by sample weight times squared distance.
  const auto k = static_cast<std::size_t>(components);
  Rng rng(seed);
  std::vector<double> base(order.size());
  for (std::size_t i = 0; i < base.size(); ++i) base[i] = w(static_cast<Eigen::Index>(i));
  std::vector<double> centers{x(static_cast<Eigen::Index>(pick_weighted(rng, base)))};
  while (centers.size() < k) {
    std::vector<double> mass(base.size());
    double total = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) {
      double d2 = std::numeric_limits<double>::infinity();
      for (double c : centers) d2 = std::min(d2, std::pow(x(static_cast<Eigen::Index>(i)) - c, 2));
      mass[i] = base[i] * d2;
      total += mass[i];
    }
    centers.push_back(x(static_cast<Eigen::Index>(pick_weighted(rng, total > 0.0 ? mass : base))));
  }
  const auto [mean, var] = weighted_moments(x, w);
  (void)mean;
  MixtureState s;
  s.means = centers;
  s.variances.assign(k, std::max(var, kGmmVarianceFloor));
  s.weights.assign(k, 1.0 / static_cast<double>(k));

  GmmFit fit;
  Eigen::MatrixXd resp;
  double ll = expectation(x, w, s, resp);
  fit.log_likelihood.push_back(ll);
  constexpr int kMaxIterations = 500;
  for (int it = 0; it < kMaxIterations; ++it) {
    maximization(x, w, resp, s);
    const double next = expectation(x, w, s, resp);
    fit.log_likelihood.push_back(next);
    fit.iterations = it + 1;
    const bool converged = next - ll < 1e-8;
    ll = next;
    if (converged) break;
  }

  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (s.means[a] != s.means[b]) return s.means[a] < s.means[b];
    if (s.variances[a] != s.variances[b]) return s.variances[a] < s.variances[b];
    return s.weights[a] < s.weights[b];
  });
  GmmParams g;
  g.seed = seed;
  for (auto c : idx) {
    g.weights.push_back(s.weights[c]);
    g.means.push_back(s.means[c]);
    g.variances.push_back(s.variances[c]);
  }
  fit.estimate.params = std::move(g);
  fit.estimate.samples = static_cast<std::size_t>(samples.size());
  return fit;
}

DistEstimate fit_gmm(const Eigen::VectorXd& samples, int components, std::uint64_t seed) {
  return fit_gmm_em(samples, components, seed).estimate;
}

double silverman_bandwidth(const Eigen::VectorXd& samples, const Eigen::VectorXd& weights) {
  require_samples(samples);
  const Eigen::VectorXd w = scaled_weights(samples, weights);
  const double n = effective_sample_size(w);
  const auto [mean, var] = weighted_moments(samples, w);
  (void)mean;
  const double unbiased = n > 1.0 ? var * n / (n - 1.0) : 0.0;
  const double sd = std::max(std::sqrt(unbiased), 1e-6);
  return 1.06 * sd * std::pow(n, -0.2);
}

DistEstimate fit_kde(const Eigen::VectorXd& samples, std::optional<double> bandwidth, const Eigen::VectorXd& weights) {
  require_samples(samples);
  if (bandwidth && !(*bandwidth > 0.0)) throw ValidationError("kde bandwidth must be positive");
  const Eigen::VectorXd w = scaled_weights(samples, weights);
  KdeParams k;
  k.bandwidth = bandwidth ? *bandwidth : silverman_bandwidth(samples, weights);
  const double total = w.sum();
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    if (w(i) <= 0.0) continue;
    k.points.push_back(samples(i));
    k.weights.push_back(w(i) / total);
  }
  DistEstimate e;
  e.params = std::move(k);
  e.samples = static_cast<std::size_t>(samples.size());
  return e;
}

double log_likelihood(const DistEstimate& e, const Eigen::VectorXd& samples, const Eigen::VectorXd& weights) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    const double wi = weights.size() ? weights(i) : 1.0;
    if (wi != 0.0) ll += wi * e.log_density(samples(i));
  }
  return ll;
}

double bic(const DistEstimate& e, const Eigen::VectorXd& samples) {
  const double params = std::visit(Overloaded{[](const GaussianParams&) { return 2.0; },
                                              [](const GmmParams& g) { return 3.0 * static_cast<double>(g.means.size()) - 1.0; },
                                              [](const KdeParams& k) { return static_cast<double>(k.points.size()); }},
                                   e.params);
  return -2.0 * log_likelihood(e, samples) + params * std::log(static_cast<double>(samples.size()));
}

DistEstimate refit_weighted(const DistEstimate& e, const Eigen::VectorXd& samples, const Eigen::VectorXd& weights) {
  return std::visit(
      Overloaded{[&](const GaussianParams&) { return fit_gaussian(samples, weights); },
                 [&](const GmmParams& g) {
                   return fit_gmm_em(samples, static_cast<int>(g.means.size()), g.seed, weights).estimate;
                 },
                 [&](const KdeParams& k) { return fit_kde(samples, k.bandwidth, weights); }},
      e.params);
}

EstimatorKind estimator_kind_from_string(const std::string& s) {
  if (s == "gaussian") return EstimatorKind::kGaussian;
  if (s == "gmm") return EstimatorKind::kGmm;
  if (s == "kde") return EstimatorKind::kKde;
  if (s == "auto") return EstimatorKind::kAuto;
  throw ValidationError("unknown estimator kind \"" + s + "\" (expected gaussian, gmm, kde or auto)");
}

std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::kGaussian: return "gaussian";
    case EstimatorKind::kGmm: return "gmm";
    case EstimatorKind::kKde: return "kde";
    case EstimatorKind::kAuto: return "auto";
  }
  return "gaussian";
}

DistEstimate fit_auto(const Eigen::VectorXd& samples, int max_components, double gap, std::uint64_t seed) {
  DistEstimate single = fit_gaussian(samples);
  const double base = bic(single, samples);
  const int top = std::min<int>(max_components, static_cast<int>(samples.size()));
  std::optional<DistEstimate> best;
  double best_bic = std::numeric_limits<double>::infinity();
  for (int k = 2; k <= top; ++k) {
    DistEstimate cand = fit_gmm(samples, k, seed);
    const double b = bic(cand, samples);
    if (b < best_bic) {
      best_bic = b;
      best = std::move(cand);
    }
  }
  if (best && base - best_bic > gap) return *best;
  return single;
}

void validate_representation(const Representation& rep, const DataModel& model) {
  if (rep.latent_count() != model.latent_count())
    throw ValidationError("representation has " + std::to_string(rep.latent_count()) + " latents, model has " +
                          std::to_string(model.latent_count()));
  double mass = 0.0;
  for (double m : rep.subset_mass) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw ValidationError("subset mass must be finite and >= 0");
    mass += m;
  }
  if (rep.subset_count() == 0 || std::abs(mass - 1.0) > 1e-9)
    throw ValidationError("subset masses must be nonempty and sum to one");
  for (std::size_t t = 0; t < rep.latent_count(); ++t) {
    if (rep.estimates[t].size() != rep.subset_count() || model.latents[t].subsets.size() != rep.subset_count())
      throw ValidationError("latent " + std::to_string(t) + " subset count does not match the model");
    for (const auto& e : rep.estimates[t]) validate_estimate(e);
  }
}

bool is_compatible(const Representation& rep, const DataModel& model) {
  try {
    validate_representation(rep, model);
    return true;
  } catch (const ValidationError&) {
    return false;
  }
}

Eigen::VectorXd subset_samples(const Eigen::MatrixXd& latents, const std::vector<std::size_t>& positions,
                               std::size_t t) {
  Eigen::VectorXd s(static_cast<Eigen::Index>(positions.size()));
  for (std::size_t i = 0; i < positions.size(); ++i)
    s(static_cast<Eigen::Index>(i)) = latents(static_cast<Eigen::Index>(positions[i]), static_cast<Eigen::Index>(t));
  return s;
}

Representation analyze(const DataModel& model, const Dataset& extracted, const AnalyzeConfig& config,
                       std::uint64_t seed) {
  if (extracted.rows() != model.meta.rows.size())
    throw ValidationError("extracted data has " + std::to_string(extracted.rows()) + " rows, model was fitted on " +
                          std::to_string(model.meta.rows.size()));
  const Eigen::MatrixXd Z = encode_data(model, extracted);
  Representation rep;
  rep.estimates.resize(model.latent_count());
  for (std::size_t t = 0; t < model.latent_count(); ++t) {
    const auto positions = subset_positions(model, t);
    if (t == 0) {
      double total = 0.0;
      for (const auto& p : positions) total += static_cast<double>(p.size());
      for (const auto& p : positions) rep.subset_mass.push_back(static_cast<double>(p.size()) / total);
    }
    auto it = config.per_latent.find(t);
    const EstimatorKind kind = it != config.per_latent.end() ? it->second : config.kind;
    for (std::size_t l = 0; l < positions.size(); ++l) {
      if (positions[l].empty())
        throw ValidationError("subset " + std::to_string(l) + " of latent " + std::to_string(t) + " has no rows");
      const Eigen::VectorXd s = subset_samples(Z, positions[l], t);
      const std::uint64_t fit_seed = derive_seed(seed, t, l);
      switch (kind) {
        case EstimatorKind::kGaussian: rep.estimates[t].push_back(fit_gaussian(s)); break;
        case EstimatorKind::kGmm:
          rep.estimates[t].push_back(
              fit_gmm(s, std::min<int>(config.gmm_components, static_cast<int>(s.size())), fit_seed));
          break;
        case EstimatorKind::kKde: rep.estimates[t].push_back(fit_kde(s, config.kde_bandwidth)); break;
        case EstimatorKind::kAuto:
          rep.estimates[t].push_back(fit_auto(s, config.max_auto_components, config.bic_gap, fit_seed));
          break;
      }
    }
  }
  validate_representation(rep, model);
  return rep;
}

}  // namespace detangle
