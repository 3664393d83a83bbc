#pragma once

#include "detangle/core_data.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace detangle {

enum class FamilyKind { kAffineOrthogonal };

struct RelationshipFamily {
  FamilyKind kind = FamilyKind::kAffineOrthogonal;
};

using RowSubsets = std::vector<std::vector<std::size_t>>;

/// Z_t: loading row t of the model plus its subset instruction V_t
/// (original row indices, each subset a nonempty part of the extracted rows).
struct LatentVariable {
  std::size_t index = 0;
  RowSubsets subsets;
};

/// An attribute restored from others through a declared functional
/// dependency. Its encoded block is an affine least-squares function of
/// the encoded source blocks: target = map * [sources; 1].
struct DependentAttribute {
  std::size_t attribute = 0;
  std::vector<std::size_t> sources;
  Eigen::MatrixXd map;
};

struct ModelMetadata {
  std::vector<std::size_t> rows;     // extracted rows in the source dataset
  std::vector<std::size_t> columns;  // extracted columns in the source dataset
  std::uint64_t seed = 0;
};

/// Fitted data model: principal-component loadings over the standardized
/// encoded extracted data. encode(x) = W ((P x - c) / s) and
/// decode(z) = s * (W^T z) + c, where P picks the encoded columns of modeled
/// (non-dependent) attributes and s holds their standard deviations.
struct DataModel {
  Schema schema;  // extracted attributes
  Codec codec;    // over all of `schema`
  std::vector<std::size_t> modeled_columns;
  Eigen::VectorXd center;
  Eigen::VectorXd scale;
  Eigen::MatrixXd loadings;  // M x modeled width, orthonormal rows
  Eigen::VectorXd singular_values;  // all of them, descending
  std::vector<LatentVariable> latents;
  std::vector<DependentAttribute> dependents;
  /// Categorical attribute that partitions V_t, with the category of each
  /// subset in subset order.
  std::optional<std::size_t> grouping;
  std::vector<int> subset_categories;
  ModelMetadata meta;

  std::size_t latent_count() const { return static_cast<std::size_t>(loadings.rows()); }
  std::size_t modeled_width() const { return modeled_columns.size(); }
  double explained_variance_fraction() const;
};

/// Number of leading components whose squared singular values reach
/// `fraction` of the total.
std::size_t components_for_variance(const Eigen::VectorXd& singular_values, double fraction);

/// Fits the affine-orthogonal family on the extracted slice. When
/// `latent_dim` is unset, uses min(beta, components explaining 95%).
DataModel fit_model(const Dataset& extracted, const RelationshipFamily& family, int beta,
                    std::optional<std::size_t> latent_dim, const ExternalKnowledge& knowledge,
                    const ModelMetadata& meta);

/// (P x - c) / s for each row: the standardized modeled encoding
/// (n x modeled width).
Eigen::MatrixXd centered_encoding(const DataModel& model, const Dataset& rows);

Eigen::MatrixXd encode_data(const DataModel& model, const Dataset& rows);

/// Decodes one latent vector. `overrides` pins attribute values (by
/// extracted-schema index) before dependents are restored.
DecodeResult decode_latent(const DataModel& model, const Eigen::VectorXd& z,
                           const std::map<std::size_t, double>& overrides = {});

Dataset decode_latents(const DataModel& model, const Eigen::MatrixXd& Z);

/// Recomputes the row subsets of every latent: all extracted rows
/// without grouping, or their partition by the observed values of `grouping`.
DataModel assign_subsets(const DataModel& model, const Dataset& extracted,
                         const std::optional<std::string>& grouping);

/// Positions of the original row indices of each subset inside the
/// extracted slice (whose rows follow meta.rows).
std::vector<std::vector<std::size_t>> subset_positions(const DataModel& model, std::size_t latent);

}  // namespace detangle
