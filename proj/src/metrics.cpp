#include "detangle/metrics.hpp"

#include "detangle/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace detangle {

namespace {

void require_bins(int bins) {
  if (bins < 2) throw ValidationError("bins must be >= 2");
}

// Dense ids for the rows of a code matrix (one code vector per column).
std::vector<int> joint_codes(const std::vector<std::vector<int>>& columns, std::size_t n) {
  std::map<std::vector<int>, int> ids;
  std::vector<int> out(n);
  std::vector<int> key(columns.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < columns.size(); ++c) key[c] = columns[c][i];
    auto [it, inserted] = ids.emplace(key, static_cast<int>(ids.size()));
    out[i] = it->second;
  }
  return out;
}

std::vector<std::vector<int>> discretize_columns(const Eigen::MatrixXd& m, int bins) {
  std::vector<std::vector<int>> cols;
  for (Eigen::Index c = 0; c < m.cols(); ++c) cols.push_back(discretize(m.col(c), bins));
  return cols;
}

std::vector<int> pair_codes(const std::vector<int>& a, const std::vector<int>& b) {
  return joint_codes({a, b}, a.size());
}

}  // namespace

double entropy_discrete(const std::vector<double>& p) {
  double sum = 0.0, h = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("probability table has a negative or non-finite entry");
    sum += v;
    if (v > 0.0) h -= v * std::log(v);
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("probability table does not sum to one");
  return std::max(h, 0.0);
}

std::vector<int> discretize(const Eigen::VectorXd& x, int bins) {
  require_bins(bins);
  std::vector<double> sorted(x.data(), x.data() + x.size());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<int> codes(static_cast<std::size_t>(x.size()));
  if (distinct.size() <= static_cast<std::size_t>(bins)) {
    for (Eigen::Index i = 0; i < x.size(); ++i)
      codes[static_cast<std::size_t>(i)] =
          static_cast<int>(std::lower_bound(distinct.begin(), distinct.end(), x(i)) - distinct.begin());
    return codes;
  }
  std::vector<double> cuts;
  const std::size_t n = sorted.size();
  for (int k = 1; k < bins; ++k) cuts.push_back(sorted[static_cast<std::size_t>(k) * n / static_cast<std::size_t>(bins)]);
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    codes[static_cast<std::size_t>(i)] = static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), x(i)) - cuts.begin());
  return codes;
}

double plug_in_entropy(const std::vector<int>& codes) {
  if (codes.empty()) return 0.0;
  std::map<int, double> counts;
  for (int c : codes) counts[c] += 1.0;
  const double n = static_cast<double>(codes.size());
  double h = 0.0;
  for (const auto& [c, k] : counts) h -= k / n * std::log(k / n);
  return std::max(h, 0.0);
}

double cond_entropy_codes(const std::vector<int>& z, const Eigen::MatrixXd& latents, int bins) {
  if (static_cast<Eigen::Index>(z.size()) != latents.rows())
    throw ValidationError("target and latent matrix differ in length");
  const std::vector<int> cells = joint_codes(discretize_columns(latents, bins), z.size());
  return std::max(plug_in_entropy(pair_codes(z, cells)) - plug_in_entropy(cells), 0.0);
}

double cond_entropy(const Eigen::MatrixXd& z, const Eigen::MatrixXd& latents, int bins) {
  if (z.rows() != latents.rows()) throw ValidationError("target and latent matrix differ in length");
  return cond_entropy_codes(joint_codes(discretize_columns(z, bins), static_cast<std::size_t>(z.rows())), latents,
                            bins);
}

double cond_entropy(const Eigen::VectorXd& z, const Eigen::MatrixXd& latents, int bins) {
  return cond_entropy(Eigen::MatrixXd(z), latents, bins);
}

double mutual_info(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int bins) {
  if (x.size() != y.size()) throw ValidationError("mutual information inputs differ in length");
  const auto cx = discretize(x, bins);
  const auto cy = discretize(y, bins);
  return std::max(plug_in_entropy(cx) + plug_in_entropy(cy) - plug_in_entropy(pair_codes(cx, cy)), 0.0);
}

double avg_mutual_info(const Eigen::MatrixXd& latents, const Eigen::MatrixXd& targets, int bins) {
  if (latents.cols() == 0 || targets.cols() == 0 || latents.rows() == 0)
    throw ValidationError("average mutual information needs latents and targets");
  double total = 0.0;
  for (Eigen::Index a = 0; a < latents.cols(); ++a)
    for (Eigen::Index b = 0; b < targets.cols(); ++b) total += mutual_info(latents.col(a), targets.col(b), bins);
  return total / static_cast<double>(latents.cols() * targets.cols());
}

double independence_psi(const Eigen::MatrixXd& latents, PsiKind kind, int bins) {
  double psi = 0.0;
  for (Eigen::Index a = 0; a < latents.cols(); ++a)
    for (Eigen::Index b = a + 1; b < latents.cols(); ++b) {
      const double v = kind == PsiKind::kCov ? std::abs(pearson(latents.col(a), latents.col(b)))
                                             : mutual_info(latents.col(a), latents.col(b), bins);
      psi = std::max(psi, v);
    }
  return psi;
}

double privacy_entropy(const Eigen::MatrixXd& latents, int bins) {
  std::vector<int> identity(static_cast<std::size_t>(latents.rows()));
  std::iota(identity.begin(), identity.end(), 0);
  return cond_entropy_codes(identity, latents, bins);
}

double phi(double h_uti, double h_pri, double lambda) {
  if (!(lambda > 0.0)) throw ValidationError("utility weight lambda must be > 0");
  return h_pri - lambda * h_uti;
}

double xi(double h_data, double psi, double lambda_ind) {
  if (!(lambda_ind >= 0.0)) throw ValidationError("independence weight must be >= 0");
  return -h_data - lambda_ind * psi;
}

double recon_error(const DataModel& model, const Dataset& rows) {
  const Eigen::MatrixXd X = centered_encoding(model, rows);
  if (X.size() == 0) return 0.0;
  const Eigen::MatrixXd R = X - X * model.loadings.transpose() * model.loadings;
  return R.squaredNorm() / static_cast<double>(X.size());
}

DistanceKind distance_kind_from_string(const std::string& s) {
  if (s == "kl") return DistanceKind::kKl;
  if (s == "tv") return DistanceKind::kTv;
  throw ValidationError("unknown distance kind \"" + s + "\" (expected kl or tv)");
}

double stat_distance(const std::vector<double>& p, const std::vector<double>& q, DistanceKind kind) {
  if (p.size() != q.size()) throw ValidationError("probability tables differ in length");
  entropy_discrete(p);
  entropy_discrete(q);
  double d = 0.0;
  if (kind == DistanceKind::kTv) {
    for (std::size_t i = 0; i < p.size(); ++i) d += std::abs(p[i] - q[i]);
    return 0.5 * d;
  }
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) d += p[i] * std::log(p[i] / std::max(q[i], 1e-12));
  return std::max(d, 0.0);
}

double stat_distance(const DistEstimate& a, const DistEstimate& b, DistanceKind kind, int grid) {
  if (grid < 10) throw ValidationError("distance grid needs at least 10 points");
  const auto [alo, ahi] = a.support();
  const auto [blo, bhi] = b.support();
  const double lo = std::min(alo, blo), hi = std::max(ahi, bhi);
  std::vector<double> p(static_cast<std::size_t>(grid)), q(p.size());
  double sp = 0.0, sq = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double x = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(grid - 1);
    p[k] = a.density(x);
    q[k] = b.density(x);
    sp += p[k];
    sq += q[k];
  }
  if (!(sp > 0.0) || !(sq > 0.0)) throw NumericError("density vanishes on the whole distance grid");
  for (auto& v : p) v /= sp;
  for (auto& v : q) v /= sq;
  double d = 0.0;
  if (kind == DistanceKind::kTv) {
    for (std::size_t k = 0; k < p.size(); ++k) d += std::abs(p[k] - q[k]);
    return std::min(0.5 * d, 1.0);
  }
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p[k] > 0.0) d += p[k] * std::log(p[k] / std::max(q[k], 1e-12));
  return std::max(d, 0.0);
}

double extrapolation_accuracy(const Representation& produced, const Representation& reference, DistanceKind kind,
                              int grid) {
  if (produced.latent_count() != reference.latent_count())
    throw ValidationError("representations have different latent counts");
  double worst = 0.0;
  for (std::size_t t = 0; t < produced.latent_count(); ++t) {
    if (produced.estimates[t].size() != reference.estimates[t].size())
      throw ValidationError("representations have different subsets for latent " + std::to_string(t));
    for (std::size_t l = 0; l < produced.estimates[t].size(); ++l)
      worst = std::max(worst, stat_distance(produced.estimates[t][l], reference.estimates[t][l], kind, grid));
  }
  return worst;
}

double extrapolation_accuracy(const ExtrapolatedRepresentation& produced, const Representation& reference,
                              DistanceKind kind, int grid) {
  return extrapolation_accuracy(produced.representation, reference, kind, grid);
}

double gain_fraction(double base, double partial, double full) {
  if (full == base) throw ValidationError("gain fraction is undefined when full equals base");
  return (partial - base) / (full - base);
}

void MetricReport::add(std::string name, double value, std::string unit, std::optional<double> threshold,
                       std::optional<bool> pass) {
  entries.push_back({std::move(name), value, std::move(unit), threshold, pass});
}

const MetricEntry* MetricReport::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json j = {{"name", e.name}, {"value", e.value}, {"unit", e.unit}};
    if (e.threshold) j["threshold"] = *e.threshold;
    if (e.pass) j["pass"] = *e.pass;
    list.push_back(std::move(j));
  }
  return {{"format", "detangle.metrics"}, {"version", 1}, {"metrics", list}};
}

std::string MetricReport::to_key_value() const {
  std::ostringstream out;
  for (const auto& e : entries) {
    out << e.name << '=' << format_double(e.value) << '\n';
    if (e.threshold) out << e.name << ".threshold=" << format_double(*e.threshold) << '\n';
    if (e.pass) out << e.name << ".pass=" << (*e.pass ? "true" : "false") << '\n';
  }
  return out.str();
}

double utility_entropy(const Dataset& data, const std::vector<std::size_t>& rows,
                       const std::vector<std::size_t>& columns, const DataModel& model, std::size_t z_uti, int bins) {
  const Dataset slice = data.slice(rows, columns);
  Eigen::VectorXd z(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) z(static_cast<Eigen::Index>(i)) = data.at(rows[i], z_uti);
  return cond_entropy(z, encode_data(model, slice), bins);
}

BruteForceResult brute_force_optimal(const Dataset& data, const ExtractionQuery& q, const BruteForceSpec& spec) {
  const std::size_t n = data.rows(), m = data.cols();
  if (n > 10 || m > 4) throw ValidationError("brute-force search is limited to n <= 10 and m <= 4");
  if (n == 0) throw ValidationError("brute-force search needs data");
  if (build_codec(data.schema(), data).width() > 8)
    throw ValidationError("brute-force search is limited to encoded width <= 8");
  const TargetWindow window = target_window(data, q);
  if (std::find(window.columns.begin(), window.columns.end(), spec.z_uti) == window.columns.end())
    throw ValidationError("utility attribute must belong to the extraction selection");
  std::vector<std::size_t> targets = window.columns;
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  const std::size_t col_budget = budget_count(spec.alpha_c, m), row_budget = budget_count(spec.alpha_r, n);
  if (col_budget < targets.size()) throw BudgetError("column budget is smaller than the extraction selection");
  if (row_budget < window.rows.size()) throw BudgetError("row budget is smaller than the target window");

  auto supersets = [](const std::vector<std::size_t>& base, std::size_t universe, std::size_t cap) {
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < universe; ++i)
      if (!std::binary_search(base.begin(), base.end(), i)) free.push_back(i);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t mask = 0; mask < (std::size_t{1} << free.size()); ++mask) {
      std::vector<std::size_t> s = base;
      for (std::size_t b = 0; b < free.size(); ++b)
        if (mask >> b & 1U) s.push_back(free[b]);
      if (s.size() > cap) continue;
      std::sort(s.begin(), s.end());
      out.push_back(std::move(s));
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  const auto column_sets = supersets(targets, m, col_budget);
  const auto row_sets = supersets(window.rows, n, row_budget);
  std::vector<std::size_t> dims = spec.latent_dims;
  std::sort(dims.begin(), dims.end());

  BruteForceResult best;
  bool found = false;
  for (const auto& J : column_sets) {
    for (const auto& I : row_sets) {
      if (I.size() < 2) continue;
      const Dataset slice = data.slice(I, J);
      for (auto dim : dims) {
        DataModel model;
        try {
          model = fit_model(slice, RelationshipFamily{}, spec.beta, dim, {}, ModelMetadata{I, J, 0});
        } catch (const Error&) {
          continue;  // dimension not admissible for this slice
        }
        ++best.configurations;
        const Eigen::MatrixXd Z = encode_data(model, slice);
        Eigen::VectorXd z(static_cast<Eigen::Index>(I.size()));
        for (std::size_t i = 0; i < I.size(); ++i) z(static_cast<Eigen::Index>(i)) = data.at(I[i], spec.z_uti);
        const double h = cond_entropy(z, Z, spec.bins);
        const double f = spec.privacy ? phi(h, privacy_entropy(Z, spec.bins), spec.lambda) : -spec.lambda * h;
        const bool better = !found || h < best.h_uti - 1e-12 ||
                            (spec.privacy && std::abs(h - best.h_uti) <= 1e-12 && f > best.phi + 1e-12);
        if (better) {
          found = true;
          best.rows = I;
          best.columns = J;
          best.latent_dim = dim;
          best.h_uti = h;
          best.phi = f;
          best.model = std::move(model);
        }
      }
    }
  }
  if (!found) throw ValidationError("no admissible configuration in the brute-force enumeration");
  best.representation = analyze(best.model, data.slice(best.rows, best.columns), AnalyzeConfig{}, 0);
  return best;
}

}  // namespace detangle
