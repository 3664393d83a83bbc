#pragma once

#include "detangle/core_data.hpp"
#include "detangle/model.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace detangle {

inline constexpr double kGaussianVarianceFloor = 1e-12;
inline constexpr double kGmmVarianceFloor = 1e-8;

struct GaussianParams {
  double mean = 0.0;
  double variance = 1.0;
};

struct GmmParams {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;
  std::uint64_t seed = 0;  // initialization seed, reused by weighted refits
};

struct KdeParams {
  std::vector<double> points;
  std::vector<double> weights;  // sum to one
  double bandwidth = 1.0;
};

/// One fitted 1-D distribution.
struct DistEstimate {
  std::variant<GaussianParams, GmmParams, KdeParams> params;
  std::size_t samples = 0;

  std::string kind() const;
  double density(double x) const;
  double log_density(double x) const;
  double mean() const;
  double variance() const;
  /// [lo, hi] covering the bulk of the mass: mean +- 5 sd per component.
  std::pair<double, double> support() const;
};

/// Throws ValidationError naming the violated parameter invariant.
void validate_estimate(const DistEstimate& e);

// Weights, when given, must be nonnegative with a positive sum. They are
// rescaled by their maximum, so equal weights reproduce the unweighted fit
// bit for bit.
DistEstimate fit_gaussian(const Eigen::VectorXd& samples, const Eigen::VectorXd& weights = {});

struct GmmFit {
  DistEstimate estimate;
  std::vector<double> log_likelihood;  // at initialization, then after each EM step
  int iterations = 0;
};

GmmFit fit_gmm_em(const Eigen::VectorXd& samples, int components, std::uint64_t seed,
                  const Eigen::VectorXd& weights = {});
DistEstimate fit_gmm(const Eigen::VectorXd& samples, int components, std::uint64_t seed);

/// Silverman's rule 1.06 * sd * n^(-1/5), sd = max(sample std, 1e-6).
double silverman_bandwidth(const Eigen::VectorXd& samples, const Eigen::VectorXd& weights = {});
DistEstimate fit_kde(const Eigen::VectorXd& samples, std::optional<double> bandwidth = std::nullopt,
                     const Eigen::VectorXd& weights = {});

/// Weighted log-likelihood of the samples under `e`.
double log_likelihood(const DistEstimate& e, const Eigen::VectorXd& samples, const Eigen::VectorXd& weights = {});
/// -2 log L + p log n with p the free parameter count.
double bic(const DistEstimate& e, const Eigen::VectorXd& samples);

/// Refits `e`'s family on weighted samples: same component count and
/// initialization seed for mixtures, same bandwidth for KDE.
DistEstimate refit_weighted(const DistEstimate& e, const Eigen::VectorXd& samples, const Eigen::VectorXd& weights);

enum class EstimatorKind { kGaussian, kGmm, kKde, kAuto };

EstimatorKind estimator_kind_from_string(const std::string& s);
std::string to_string(EstimatorKind k);

struct AnalyzeConfig {
  EstimatorKind kind = EstimatorKind::kGaussian;
  std::map<std::size_t, EstimatorKind> per_latent;
  int gmm_components = 2;
  int max_auto_components = 5;
  double bic_gap = 10.0;
  std::optional<double> kde_bandwidth;
};

/// Auto selection: the BIC-best mixture over K = 1..max_components when it
/// beats the single Gaussian by more than `gap`, else the Gaussian.
DistEstimate fit_auto(const Eigen::VectorXd& samples, int max_components, double gap, std::uint64_t seed);

/// Fitted representation: estimates[t][l] for latent t and subset l, plus each subset's
/// share of the extracted rows.
struct Representation {
  std::vector<std::vector<DistEstimate>> estimates;
  std::vector<double> subset_mass;

  std::size_t latent_count() const { return estimates.size(); }
  std::size_t subset_count() const { return subset_mass.size(); }
};

/// The compatibility predicate: shape matches the model's latents and
/// subsets, and every estimate satisfies its parameter invariants.
void validate_representation(const Representation& rep, const DataModel& model);
bool is_compatible(const Representation& rep, const DataModel& model);

/// Latent samples of subset l of latent t (rows of the extracted slice).
Eigen::VectorXd subset_samples(const Eigen::MatrixXd& latents, const std::vector<std::size_t>& positions,
                               std::size_t t);

Representation analyze(const DataModel& model, const Dataset& extracted, const AnalyzeConfig& config,
                       std::uint64_t seed);

}  // namespace detangle
