#include "detangle/model.hpp"

#include "detangle/log.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

namespace detangle {

namespace {

Eigen::VectorXd block_of(const Codec& codec, std::size_t attribute, const Eigen::VectorXd& encoded) {
  const auto& b = codec.block_for(attribute);
  return encoded.segment(static_cast<Eigen::Index>(b.offset), static_cast<Eigen::Index>(b.width));
}

// Decodes a single attribute from its encoded block.
double decode_block(const Codec& codec, std::size_t attribute, const Eigen::VectorXd& block, bool& clamped) {
  const auto& a = codec.schema()[attribute];
  const auto& b = codec.block_for(attribute);
  if (a.categorical()) {
    Eigen::Index best = 0;
    block.maxCoeff(&best);
    return static_cast<double>(best);
  }
  double value = block(0) * b.scale + b.mean;
  if (a.interval) {
    const double c = std::clamp(value, a.interval->lo, a.interval->hi);
    clamped = clamped || c != value;
    value = c;
  }
  return value;
}

Eigen::VectorXd source_features(const Codec& codec, const std::vector<std::size_t>& sources,
                                const Eigen::VectorXd& encoded) {
  std::size_t width = 1;
  for (auto s : sources) width += codec.block_for(s).width;
  Eigen::VectorXd f(static_cast<Eigen::Index>(width));
  Eigen::Index at = 0;
  for (auto s : sources) {
    const auto seg = block_of(codec, s, encoded);
    f.segment(at, seg.size()) = seg;
    at += seg.size();
  }
  f(at) = 1.0;
  return f;
}

}  // namespace

double DataModel::explained_variance_fraction() const {
  const double total = singular_values.squaredNorm();
  if (total <= 0.0) return 1.0;
  return singular_values.head(static_cast<Eigen::Index>(latent_count())).squaredNorm() / total;
}

std::size_t components_for_variance(const Eigen::VectorXd& singular_values, double fraction) {
  const double total = singular_values.squaredNorm();
  if (total <= 0.0) return 1;
  double acc = 0.0;
  for (Eigen::Index k = 0; k < singular_values.size(); ++k) {
    acc += singular_values(k) * singular_values(k);
    if (acc >= fraction * total) return static_cast<std::size_t>(k + 1);
  }
  return static_cast<std::size_t>(singular_values.size());
}

DataModel fit_model(const Dataset& extracted, const RelationshipFamily& family, int beta,
                    std::optional<std::size_t> latent_dim, const ExternalKnowledge& knowledge,
                    const ModelMetadata& meta) {
  if (family.kind != FamilyKind::kAffineOrthogonal) throw ValidationError("unsupported relationship family");
  if (beta < 1) throw BudgetError("model budget beta must be >= 1");
  const std::size_t n = extracted.rows();
  if (n < 2) throw NumericError("model fitting needs at least two extracted rows, got " + std::to_string(n));

  DataModel model;
  model.schema = extracted.schema();
  model.meta = meta;
  if (model.meta.rows.empty()) {
    model.meta.rows.resize(n);
    std::iota(model.meta.rows.begin(), model.meta.rows.end(), 0);
  }
  if (model.meta.rows.size() != n) throw ValidationError("model metadata row count does not match extracted data");

  // Declared functional dependencies whose attributes were all extracted.
  std::set<std::size_t> dependent_targets;
  for (const auto& fd : knowledge.dependencies) {
    auto target = model.schema.find(fd.target);
    std::vector<std::size_t> sources;
    bool present = target.has_value();
    for (const auto& s : fd.sources) {
      auto j = model.schema.find(s);
      if (!j) present = false;
      else sources.push_back(*j);
    }
    if (!present) {
      log::info("functional dependency on \"" + fd.target + "\" skipped: attributes not extracted");
      continue;
    }
    if (!dependent_targets.insert(*target).second) continue;
    DependentAttribute d;
    d.attribute = *target;
    d.sources = std::move(sources);
    model.dependents.push_back(std::move(d));
  }
  for (const auto& d : model.dependents)
    for (auto s : d.sources)
      if (dependent_targets.count(s))
        throw SchemaError("functional dependency source \"" + model.schema[s].name +
                          "\" is itself a dependent attribute");
  if (dependent_targets.size() == model.schema.size())
    throw SchemaError("every extracted attribute is functionally dependent; nothing left to model");

  model.codec = build_codec(model.schema, extracted);
  const Eigen::MatrixXd E = encode_dataset(model.codec, extracted);
  for (const auto& blk : model.codec.blocks()) {
    if (dependent_targets.count(blk.attribute)) continue;
    for (std::size_t k = 0; k < blk.width; ++k) model.modeled_columns.push_back(blk.offset + k);
  }
  const std::size_t width = model.modeled_columns.size();

  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
  for (std::size_t c = 0; c < width; ++c)
    X.col(static_cast<Eigen::Index>(c)) = E.col(static_cast<Eigen::Index>(model.modeled_columns[c]));
  model.center = X.colwise().mean().transpose();
  Eigen::MatrixXd Xc = X.rowwise() - model.center.transpose();
  // Every modeled column gets unit variance, so one-hot blocks weigh as much
  // as standardized scalars; constant columns keep scale 1.
  model.scale = (Xc.colwise().squaredNorm() / static_cast<double>(n)).cwiseSqrt().transpose();
  for (Eigen::Index c = 0; c < model.scale.size(); ++c)
    if (!(model.scale(c) > 0.0)) model.scale(c) = 1.0;
  Xc = Xc.array().rowwise() / model.scale.transpose().array();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Xc, Eigen::ComputeThinV);
  model.singular_values = svd.singularValues();

  std::size_t dim;
  const std::size_t max_dim = std::min(width, n);
  if (latent_dim) {
    dim = *latent_dim;
    if (dim < 1) throw ValidationError("latent_dim must be >= 1");
    if (dim > static_cast<std::size_t>(beta))
      throw BudgetError("latent_dim " + std::to_string(dim) + " exceeds model budget beta = " + std::to_string(beta));
    if (dim > max_dim)
      throw ValidationError("latent_dim " + std::to_string(dim) + " exceeds min(encoded width, rows) = " +
                            std::to_string(max_dim));
  } else {
    dim = std::min({static_cast<std::size_t>(beta), components_for_variance(model.singular_values, 0.95), max_dim});
  }

  const Eigen::MatrixXd& V = svd.matrixV();
  model.loadings = V.leftCols(static_cast<Eigen::Index>(dim)).transpose();
  for (Eigen::Index t = 0; t < model.loadings.rows(); ++t) {
    Eigen::Index lead = 0;
    double best = -1.0;
    for (Eigen::Index k = 0; k < model.loadings.cols(); ++k)
      if (std::abs(model.loadings(t, k)) > best) {
        best = std::abs(model.loadings(t, k));
        lead = k;
      }
    if (model.loadings(t, lead) < 0) model.loadings.row(t) *= -1.0;
  }

  for (auto& d : model.dependents) {
    std::size_t sw = 1;
    for (auto s : d.sources) sw += model.codec.block_for(s).width;
    Eigen::MatrixXd A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(sw));
    const auto& tb = model.codec.block_for(d.attribute);
    Eigen::MatrixXd T(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(tb.width));
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::VectorXd e = E.row(static_cast<Eigen::Index>(i)).transpose();
      A.row(static_cast<Eigen::Index>(i)) = source_features(model.codec, d.sources, e).transpose();
      T.row(static_cast<Eigen::Index>(i)) = block_of(model.codec, d.attribute, e).transpose();
    }
    d.map = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(A).solve(T).transpose();
  }

  model.latents.resize(dim);
  for (std::size_t t = 0; t < dim; ++t) {
    model.latents[t].index = t;
    model.latents[t].subsets = {model.meta.rows};
  }
  return model;
}

Eigen::MatrixXd centered_encoding(const DataModel& model, const Dataset& rows) {
  if (!(rows.schema() == model.schema)) throw SchemaError("rows do not match the model's attribute schema");
  const Eigen::MatrixXd E = encode_dataset(model.codec, rows);
  Eigen::MatrixXd X(E.rows(), static_cast<Eigen::Index>(model.modeled_width()));
  for (std::size_t c = 0; c < model.modeled_width(); ++c)
    X.col(static_cast<Eigen::Index>(c)) = E.col(static_cast<Eigen::Index>(model.modeled_columns[c]));
  return (X.rowwise() - model.center.transpose()).array().rowwise() / model.scale.transpose().array();
}

Eigen::MatrixXd encode_data(const DataModel& model, const Dataset& rows) {
  return centered_encoding(model, rows) * model.loadings.transpose();
}

DecodeResult decode_latent(const DataModel& model, const Eigen::VectorXd& z,
                           const std::map<std::size_t, double>& overrides) {
  if (static_cast<std::size_t>(z.size()) != model.latent_count())
    throw SchemaError("latent vector has width " + std::to_string(z.size()) + ", model has " +
                      std::to_string(model.latent_count()) + " latents");
  const Eigen::VectorXd x = (model.loadings.transpose() * z).cwiseProduct(model.scale) + model.center;
  Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.codec.width()));
  for (std::size_t c = 0; c < model.modeled_width(); ++c)
    full(static_cast<Eigen::Index>(model.modeled_columns[c])) = x(static_cast<Eigen::Index>(c));
  DecodeResult out = decode_vector_checked(model.codec, full);
  for (const auto& [attribute, value] : overrides) out.record(static_cast<Eigen::Index>(attribute)) = value;
  if (!model.dependents.empty()) {
    const Eigen::VectorXd enc = encode_record(model.codec, out.record);
    for (const auto& d : model.dependents) {
      const Eigen::VectorXd target = d.map * source_features(model.codec, d.sources, enc);
      out.record(static_cast<Eigen::Index>(d.attribute)) = decode_block(model.codec, d.attribute, target, out.clamped);
    }
  }
  return out;
}

Dataset decode_latents(const DataModel& model, const Eigen::MatrixXd& Z) {
  if (static_cast<std::size_t>(Z.cols()) != model.latent_count())
    throw SchemaError("latent matrix has " + std::to_string(Z.cols()) + " columns, model has " +
                      std::to_string(model.latent_count()) + " latents");
  Eigen::MatrixXd cells(Z.rows(), static_cast<Eigen::Index>(model.schema.size()));
  for (Eigen::Index i = 0; i < Z.rows(); ++i) cells.row(i) = decode_latent(model, Z.row(i).transpose()).record;
  return Dataset(model.schema, std::move(cells));
}

DataModel assign_subsets(const DataModel& model, const Dataset& extracted,
                         const std::optional<std::string>& grouping) {
  if (!(extracted.schema() == model.schema) || extracted.rows() != model.meta.rows.size())
    throw SchemaError("extracted data does not match the model's fitted rows and attributes");
  DataModel out = model;
  out.grouping.reset();
  out.subset_categories.clear();
  RowSubsets subsets;
  if (!grouping) {
    subsets = {model.meta.rows};
  } else {
    const std::size_t j = model.schema.index_of(*grouping);
    const auto& a = model.schema[j];
    if (!a.categorical()) throw ValidationError("grouping attribute \"" + *grouping + "\" is not categorical");
    std::vector<std::vector<std::size_t>> by_category(a.categories.size());
    for (std::size_t r = 0; r < extracted.rows(); ++r)
      by_category[static_cast<std::size_t>(extracted.at(r, j))].push_back(model.meta.rows[r]);
    for (std::size_t k = 0; k < by_category.size(); ++k)
      if (!by_category[k].empty()) {
        subsets.push_back(std::move(by_category[k]));
        out.subset_categories.push_back(static_cast<int>(k));
      }
    out.grouping = j;
    if (subsets.size() == 1)
      log::warn("grouping attribute \"" + *grouping + "\" is constant on the extracted rows; one subset only");
  }
  for (auto& latent : out.latents) latent.subsets = subsets;
  return out;
}

std::vector<std::vector<std::size_t>> subset_positions(const DataModel& model, std::size_t latent) {
  std::unordered_map<std::size_t, std::size_t> pos;
  for (std::size_t r = 0; r < model.meta.rows.size(); ++r) pos[model.meta.rows[r]] = r;
  std::vector<std::vector<std::size_t>> out;
  for (const auto& subset : model.latents.at(latent).subsets) {
    std::vector<std::size_t> p;
    p.reserve(subset.size());
    for (auto i : subset) {
      auto it = pos.find(i);
      if (it == pos.end()) throw ValidationError("subset row " + std::to_string(i) + " is not an extracted row");
      p.push_back(it->second);
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace detangle
