#include "detangle/extrapolate.hpp"

#include "detangle/log.hpp"
#include "detangle/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace detangle {

namespace {

void check_coordinate(const Schema& schema, std::size_t j, double v) {
  const auto& a = schema[j];
  if (!std::isfinite(v)) throw SchemaError("coordinate for \"" + a.name + "\" is not finite");
  if (a.categorical() && (v != std::floor(v) || v < 0 || v >= static_cast<double>(a.categories.size())))
    throw SchemaError("coordinate for categorical \"" + a.name + "\" is not a category index");
}

// Support of one dimension under the query: finitely many points, or a
// continuum that either stays inside the implied interval or leaves it.
struct DimSupport {
  std::vector<double> points;
  bool continuum = false;
  bool continuum_inside = true;
};

DimSupport condition_support(const ExtensionTaxonomy& tax, std::size_t d, const Marginal& m) {
  const auto& attr = tax.schema[tax.dims[d].attribute];
  const Interval& iv = tax.dims[d].interval;
  DimSupport s;
  if (const auto* table = std::get_if<CategoricalTable>(&m)) {
    for (const auto& [label, p] : table->probabilities) {
      if (!(p > 0.0)) continue;
      auto k = attr.category_index(label);
      if (!k) throw SchemaError("\"" + label + "\" is not a category of \"" + attr.name + "\"");
      s.points.push_back(*k);
    }
  } else if (const auto* pm = std::get_if<PointMass>(&m)) {
    s.points.push_back(pm->value);
  } else if (const auto* u = std::get_if<UniformRange>(&m)) {
    if (u->lo == u->hi) {
      s.points.push_back(u->lo);
    } else {
      s.continuum = true;
      s.continuum_inside = u->lo >= iv.lo && u->hi <= iv.hi;
    }
  } else {
    // Unbounded support only stays inside when the observed interval is the
    // whole declared domain.
    s.continuum = true;
    s.continuum_inside = attr.interval && attr.interval->lo == iv.lo && attr.interval->hi == iv.hi;
  }
  return s;
}

}  // namespace

bool ExtensionTaxonomy::in_observed(std::size_t d, double v) const {
  return std::binary_search(dims[d].observed.begin(), dims[d].observed.end(), v);
}

bool ExtensionTaxonomy::in_implied(std::size_t d, double v) const {
  const auto& dim = dims[d];
  if (schema[dim.attribute].categorical()) {
    if (v < 0 || v >= static_cast<double>(dim.implied.size()) || v != std::floor(v)) return false;
    return dim.implied[static_cast<std::size_t>(v)] != 0;
  }
  return v >= dim.interval.lo && v <= dim.interval.hi;
}

ExtensionTaxonomy build_taxonomy(const Dataset& extracted, const std::vector<std::size_t>& dims) {
  if (extracted.rows() == 0) throw ValidationError("cannot build an extension taxonomy from empty data");
  ExtensionTaxonomy tax;
  tax.schema = extracted.schema();
  for (auto j : dims) {
    if (j >= extracted.cols()) throw SchemaError("taxonomy dimension index out of range");
    TaxonomyDim dim;
    dim.attribute = j;
    for (std::size_t i = 0; i < extracted.rows(); ++i) dim.observed.push_back(extracted.at(i, j));
    std::sort(dim.observed.begin(), dim.observed.end());
    dim.observed.erase(std::unique(dim.observed.begin(), dim.observed.end()), dim.observed.end());
    dim.interval = {dim.observed.front(), dim.observed.back()};
    const auto& a = tax.schema[j];
    if (a.categorical()) {
      const int k = static_cast<int>(a.categories.size());
      dim.implied.assign(a.categories.size(), 0);
      for (double v : dim.observed) dim.implied[static_cast<std::size_t>(v)] = 1;
      if (!a.order.empty()) {
        for (int x = 0; x < k; ++x)
          for (double lo : dim.observed)
            for (double hi : dim.observed)
              if (tax.schema.precedes(j, static_cast<int>(lo), x) && tax.schema.precedes(j, x, static_cast<int>(hi)))
                dim.implied[static_cast<std::size_t>(x)] = 1;
      }
    }
    tax.dims.push_back(std::move(dim));
  }
  for (std::size_t i = 0; i < extracted.rows(); ++i) {
    std::vector<double> tuple;
    tuple.reserve(dims.size());
    for (auto j : dims) tuple.push_back(extracted.at(i, j));
    tax.observed_tuples.insert(std::move(tuple));
  }
  return tax;
}

ExtensionLevel classify_point(const ExtensionTaxonomy& tax, const std::vector<double>& x) {
  if (x.size() != tax.dims.size())
    throw SchemaError("point has " + std::to_string(x.size()) + " coordinates, taxonomy has " +
                      std::to_string(tax.dims.size()) + " dimensions");
  for (std::size_t d = 0; d < x.size(); ++d) check_coordinate(tax.schema, tax.dims[d].attribute, x[d]);
  if (tax.observed_tuples.count(x)) return ExtensionLevel::kObserved;
  bool grid = true;
  for (std::size_t d = 0; d < x.size(); ++d) {
    if (!tax.in_implied(d, x[d])) return ExtensionLevel::kOutside;
    grid = grid && tax.in_observed(d, x[d]);
  }
  return grid ? ExtensionLevel::kGrid : ExtensionLevel::kCuboid;
}

ExtensionLevel classify_query(const ExtensionTaxonomy& tax, const ExtrapolationQuery& p) {
  std::vector<DimSupport> supports(tax.dims.size());
  std::vector<char> conditioned(tax.dims.size(), 0);
  for (const auto& c : p.conditions) {
    std::size_t d = 0;
    while (d < tax.dims.size() && tax.schema[tax.dims[d].attribute].name != c.attribute) ++d;
    if (d == tax.dims.size())
      throw ValidationError("condition on \"" + c.attribute + "\" is outside the extrapolation selection");
    supports[d] = condition_support(tax, d, c.marginal);
    conditioned[d] = 1;
  }
  int level = 0;
  for (std::size_t d = 0; d < tax.dims.size(); ++d) {
    if (!conditioned[d]) {
      supports[d].points = tax.dims[d].observed;
      continue;
    }
    const auto& s = supports[d];
    if (s.continuum) level = std::max(level, s.continuum_inside ? 2 : 3);
    for (double v : s.points) {
      check_coordinate(tax.schema, tax.dims[d].attribute, v);
      if (!tax.in_implied(d, v)) level = 3;
      else if (!tax.in_observed(d, v)) level = std::max(level, 2);
    }
  }
  if (level >= 2) return static_cast<ExtensionLevel>(level);

  // Every coordinate is observed: the support is observed-only when its
  // product lies inside the observed tuples, which cannot hold if it is larger.
  double product = 1.0;
  for (const auto& s : supports) product *= static_cast<double>(s.points.size());
  if (product == 0.0) return ExtensionLevel::kObserved;
  if (product > static_cast<double>(tax.observed_tuples.size())) return ExtensionLevel::kGrid;
  std::vector<std::size_t> odometer(supports.size(), 0);
  std::vector<double> tuple(supports.size());
  while (true) {
    for (std::size_t d = 0; d < supports.size(); ++d) tuple[d] = supports[d].points[odometer[d]];
    if (!tax.observed_tuples.count(tuple)) return ExtensionLevel::kGrid;
    std::size_t d = 0;
    while (d < supports.size() && ++odometer[d] == supports[d].points.size()) odometer[d++] = 0;
    if (d == supports.size()) break;
  }
  return ExtensionLevel::kObserved;
}

Eigen::VectorXd importance_weights(const Dataset& extracted, const std::vector<MarginalCondition>& conditions) {
  const std::size_t n = extracted.rows();
  Eigen::VectorXd w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  const double nd = static_cast<double>(n);
  for (const auto& c : conditions) {
    const std::size_t j = extracted.schema().index_of(c.attribute);
    const auto& attr = extracted.schema()[j];
    const Eigen::VectorXd col = extracted.cells().col(static_cast<Eigen::Index>(j));
    if (const auto* table = std::get_if<CategoricalTable>(&c.marginal)) {
      if (!attr.categorical()) throw SchemaError("categorical marginal on continuous \"" + attr.name + "\"");
      std::vector<double> target(attr.categories.size(), 0.0), count(attr.categories.size(), 0.0);
      for (const auto& [label, p] : table->probabilities) {
        auto k = attr.category_index(label);
        if (!k) throw SchemaError("\"" + label + "\" is not a category of \"" + attr.name + "\"");
        target[static_cast<std::size_t>(*k)] = p;
      }
      for (Eigen::Index i = 0; i < col.size(); ++i) count[static_cast<std::size_t>(col(i))] += 1.0;
      for (Eigen::Index i = 0; i < col.size(); ++i) {
        const auto k = static_cast<std::size_t>(col(i));
        w(i) *= target[k] / (count[k] / nd);
      }
      continue;
    }
    if (attr.categorical()) throw SchemaError("continuous marginal on categorical \"" + attr.name + "\"");
    std::optional<double> point;
    if (const auto* pm = std::get_if<PointMass>(&c.marginal)) point = pm->value;
    if (const auto* u = std::get_if<UniformRange>(&c.marginal); u && u->lo == u->hi) point = u->lo;
    if (point) {
      const double matches = static_cast<double>((col.array() == *point).count());
      for (Eigen::Index i = 0; i < col.size(); ++i) w(i) *= col(i) == *point ? nd / matches : 0.0;
      continue;
    }
    const DistEstimate empirical = fit_kde(col);
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      const double x = col(i);
      double target;
      if (const auto* u = std::get_if<UniformRange>(&c.marginal))
        target = x >= u->lo && x <= u->hi ? 1.0 / (u->hi - u->lo) : 0.0;
      else {
        const auto& nl = std::get<NormalLaw>(c.marginal);
        target = normal_pdf(x, nl.mean, nl.variance);
      }
      w(i) *= target / empirical.density(x);
    }
  }
  return w;
}

ExtrapolatedRepresentation extrapolate(const DataModel& model, const Representation& rep, const Dataset& extracted,
                                       const ExtrapolationQuery& p) {
  validate_representation(rep, model);
  const std::size_t n = extracted.rows();
  if (n != model.meta.rows.size())
    throw ValidationError("extracted data does not match the rows the model was fitted on");

  std::vector<std::size_t> dims;
  for (const auto& name : p.selection) dims.push_back(model.schema.index_of(name));
  ExtrapolatedRepresentation out;
  out.level = classify_query(build_taxonomy(extracted, dims), p);

  const Eigen::VectorXd raw = importance_weights(extracted, p.conditions);
  const double total = raw.sum();
  if (!(total > 0.0) || !std::isfinite(total))
    throw InfeasibleExtrapolationError("condition support is disjoint from the extracted data (all weights zero)");
  const Eigen::VectorXd w = raw * (static_cast<double>(n) / total);

  const Eigen::MatrixXd Z = encode_data(model, extracted);
  auto& r = out.representation;
  r.estimates.resize(model.latent_count());
  for (std::size_t t = 0; t < model.latent_count(); ++t) {
    const auto positions = subset_positions(model, t);
    for (std::size_t l = 0; l < positions.size(); ++l) {
      Eigen::VectorXd ws(static_cast<Eigen::Index>(positions[l].size()));
      for (std::size_t k = 0; k < positions[l].size(); ++k)
        ws(static_cast<Eigen::Index>(k)) = w(static_cast<Eigen::Index>(positions[l][k]));
      if (t == 0) {
        out.ess.push_back(effective_sample_size(ws));
        r.subset_mass.push_back(ws.sum());
      }
      if (!(ws.sum() > 0.0)) {
        if (t == 0) out.warnings.push_back("subset " + std::to_string(l) + " has zero weight; source estimate kept");
        r.estimates[t].push_back(rep.estimates[t][l]);
        continue;
      }
      r.estimates[t].push_back(refit_weighted(rep.estimates[t][l], subset_samples(Z, positions[l], t), ws));
    }
  }
  const double mass = std::accumulate(r.subset_mass.begin(), r.subset_mass.end(), 0.0);
  for (auto& m : r.subset_mass) m /= mass;

  if (out.level == ExtensionLevel::kOutside)
    out.warnings.push_back("level-3 extrapolation: condition support leaves the observed cuboid");
  for (const auto& c : p.conditions)
    if (std::holds_alternative<NormalLaw>(c.marginal))
      out.warnings.push_back("normal condition on \"" + c.attribute + "\" has unbounded support");
  for (std::size_t l = 0; l < out.ess.size(); ++l)
    if (out.ess[l] > 0.0 && out.ess[l] < kEssWarning)
      out.warnings.push_back("subset " + std::to_string(l) + " effective sample size " + format_double(out.ess[l]) +
                             " is below 30");
  for (const auto& msg : out.warnings) log::warn(msg);
  validate_representation(r, model);
  return out;
}

}  // namespace detangle
