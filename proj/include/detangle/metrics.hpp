#pragma once

#include "detangle/analyze.hpp"
#include "detangle/extract.hpp"
#include "detangle/extrapolate.hpp"
#include "detangle/model.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace detangle {

inline constexpr int kDefaultBins = 10;
inline constexpr int kDefaultGrid = 512;

/// -sum p ln p in nats. The table must be nonnegative and sum to one.
double entropy_discrete(const std::vector<double>& p);

/// Equal-frequency codes. A column with at most `bins` distinct values
/// keeps one code per distinct value.
std::vector<int> discretize(const Eigen::VectorXd& x, int bins);

/// Plug-in entropy of the empirical distribution of integer codes.
double plug_in_entropy(const std::vector<int>& codes);

/// H(Z | latent cells): every latent column and every target column is
/// discretized with `bins` equal-frequency bins.
double cond_entropy(const Eigen::MatrixXd& z, const Eigen::MatrixXd& latents, int bins);
double cond_entropy(const Eigen::VectorXd& z, const Eigen::MatrixXd& latents, int bins);
/// Same with z already discrete (record identities, labels).
double cond_entropy_codes(const std::vector<int>& z, const Eigen::MatrixXd& latents, int bins);

double mutual_info(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int bins);
double avg_mutual_info(const Eigen::MatrixXd& latents, const Eigen::MatrixXd& targets, int bins);

enum class PsiKind { kCov, kMi };
double independence_psi(const Eigen::MatrixXd& latents, PsiKind kind, int bins = kDefaultBins);
inline bool is_kappa_independent(double psi, double kappa) { return psi <= kappa; }

/// H(record identity | binned latents).
double privacy_entropy(const Eigen::MatrixXd& latents, int bins);

double phi(double h_uti, double h_pri, double lambda);
double xi(double h_data, double psi, double lambda_ind);

/// Mean squared error in the modeled encoded space between the rows and
/// their reconstruction decode(encode(rows)).
double recon_error(const DataModel& model, const Dataset& rows);
inline bool is_reconstructable(double err, double eps) { return err <= eps; }

enum class DistanceKind { kKl, kTv };
DistanceKind distance_kind_from_string(const std::string& s);

/// Densities discretized on `grid` shared points spanning both supports.
double stat_distance(const DistEstimate& a, const DistEstimate& b, DistanceKind kind, int grid = kDefaultGrid);
/// Exact distance between two probability tables of equal length.
double stat_distance(const std::vector<double>& p, const std::vector<double>& q, DistanceKind kind);

/// Max stat_distance over matching (latent, subset) estimates.
double extrapolation_accuracy(const Representation& produced, const Representation& reference, DistanceKind kind,
                              int grid = kDefaultGrid);
double extrapolation_accuracy(const ExtrapolatedRepresentation& produced, const Representation& reference,
                              DistanceKind kind, int grid = kDefaultGrid);

double gain_fraction(double base, double partial, double full);

struct MetricEntry {
  std::string name;
  double value = 0.0;
  std::string unit;
  std::optional<double> threshold;
  std::optional<bool> pass;
};

struct MetricReport {
  std::vector<MetricEntry> entries;

  void add(std::string name, double value, std::string unit, std::optional<double> threshold = std::nullopt,
           std::optional<bool> pass = std::nullopt);
  const MetricEntry* find(const std::string& name) const;
  nlohmann::json to_json() const;
  /// One name=value line per entry, with name.pass lines for checks.
  std::string to_key_value() const;
};

struct BruteForceSpec {
  double alpha_r = 0.5;
  double alpha_c = 0.5;
  int beta = 1;
  std::vector<std::size_t> latent_dims;
  std::size_t z_uti = 0;  // attribute index in the full schema
  int bins = 2;
  bool privacy = false;
  double lambda = 1.0;
};

struct BruteForceResult {
  std::vector<std::size_t> rows;
  std::vector<std::size_t> columns;
  std::size_t latent_dim = 0;
  double h_uti = 0.0;
  double phi = 0.0;
  DataModel model;
  Representation representation;
  std::size_t configurations = 0;
};

/// H(z_uti | latents of the extracted rows) for one configuration.
double utility_entropy(const Dataset& data, const std::vector<std::size_t>& rows,
                       const std::vector<std::size_t>& columns, const DataModel& model, std::size_t z_uti, int bins);

/// Exhaustive search over column supersets of the selection and row
/// supersets of the target window, within budgets and the
/// listed latent dimensions. Limited to n <= 10, m <= 4, encoded width <= 8.
BruteForceResult brute_force_optimal(const Dataset& data, const ExtractionQuery& q, const BruteForceSpec& spec);

}  // namespace detangle
