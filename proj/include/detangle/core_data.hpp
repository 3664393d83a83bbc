#pragma once

#include "detangle/error.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace detangle {

enum class AttributeKind { kCategorical, kContinuous };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// One attribute space A_j. Categorical values are stored as the index of
/// their label in `categories`; continuous values are stored as-is.
struct AttributeSpace {
  std::string name;
  AttributeKind kind = AttributeKind::kContinuous;
  std::vector<std::string> categories;
  std::optional<Interval> interval;
  /// Declared pairs (a, b) meaning a precedes-or-equals b.
  std::vector<std::pair<std::string, std::string>> order;

  bool categorical() const { return kind == AttributeKind::kCategorical; }
  /// Continuous attributes and categorical ones with a declared order admit <, >.
  bool ordered() const { return !categorical() || !order.empty(); }
  std::optional<int> category_index(std::string_view label) const;

  static AttributeSpace continuous(std::string name, std::optional<Interval> interval = std::nullopt);
  static AttributeSpace categorical_of(std::string name, std::vector<std::string> categories,
                                       std::vector<std::pair<std::string, std::string>> order = {});
};

/// Ordered attribute list with the reflexive-transitive closure of every
/// declared partial order precomputed.
class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<AttributeSpace> attributes);

  std::size_t size() const { return attributes_.size(); }
  const AttributeSpace& operator[](std::size_t j) const { return attributes_[j]; }
  const std::vector<AttributeSpace>& attributes() const { return attributes_; }

  std::optional<std::size_t> find(std::string_view name) const;
  /// Throws SchemaError when the attribute is not declared.
  std::size_t index_of(std::string_view name) const;
  std::vector<std::string> names() const;

  /// a precedes-or-equals b in attribute j's declared partial order.
  bool precedes(std::size_t j, int a, int b) const;

  Schema select(std::span<const std::size_t> columns) const;

  /// Throws SchemaError if `value` is not a member of A_j.
  void check_value(std::size_t j, double value) const;
  std::string format_value(std::size_t j, double value) const;

  bool operator==(const Schema& other) const { return names() == other.names(); }

 private:
  std::vector<AttributeSpace> attributes_;
  std::vector<std::vector<char>> closure_;  // per attribute, K*K row-major
};

using Record = Eigen::RowVectorXd;

/// n x m table of attribute values; immutable after construction.
class Dataset {
 public:
  Dataset() = default;
  /// Validates every cell against the schema.
  Dataset(Schema schema, Eigen::MatrixXd cells);

  const Schema& schema() const { return schema_; }
  const Eigen::MatrixXd& cells() const { return cells_; }
  std::size_t rows() const { return static_cast<std::size_t>(cells_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(cells_.cols()); }
  Record record(std::size_t i) const { return cells_.row(static_cast<Eigen::Index>(i)); }
  double at(std::size_t i, std::size_t j) const {
    return cells_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  Dataset slice(std::span<const std::size_t> rows, std::span<const std::size_t> cols) const;
  Dataset select_rows(std::span<const std::size_t> rows) const;

 private:
  Schema schema_;
  Eigen::MatrixXd cells_;
};

struct FunctionalDependency {
  std::vector<std::string> sources;
  std::string target;
  std::string description;
};

struct NamedDistribution {
  std::string name;
  std::vector<double> parameters;
};

struct ExternalKnowledge {
  std::vector<FunctionalDependency> dependencies;
  std::map<std::string, NamedDistribution> distributions;
  std::vector<std::string> latent_variables;

  void validate(const Schema& schema) const;
};

// Schema / knowledge documents.
Schema schema_from_json(const nlohmann::json& doc);
nlohmann::json schema_to_json(const Schema& schema);
Schema load_schema(const std::string& path);
ExternalKnowledge knowledge_from_json(const nlohmann::json& doc);
ExternalKnowledge load_knowledge(const std::string& path);

/// RFC-4180 CSV with a header row matching the schema names in order.
Dataset load_csv(const std::string& path, const Schema& schema);
Dataset parse_csv(std::string_view text, const Schema& schema);
std::string format_csv(const Dataset& data);
void write_csv(const std::string& path, const Dataset& data);

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double x);

/// How one attribute maps into the encoded vector.
struct CodecBlock {
  std::size_t attribute = 0;
  std::size_t offset = 0;
  std::size_t width = 1;
  double mean = 0.0;
  double scale = 1.0;  // sigma for continuous blocks, floored to 1 when zero
};

/// Numeric bridge between records and real vectors: one-hot blocks for
/// categorical attributes, standardized scalars for continuous ones.
class Codec {
 public:
  Codec() = default;
  Codec(Schema schema, std::vector<CodecBlock> blocks);

  const Schema& schema() const { return schema_; }
  const std::vector<CodecBlock>& blocks() const { return blocks_; }
  const CodecBlock& block_for(std::size_t attribute) const;
  std::size_t width() const { return width_; }

 private:
  Schema schema_;
  std::vector<CodecBlock> blocks_;
  std::vector<std::size_t> block_of_attribute_;
  std::size_t width_ = 0;
};

Codec build_codec(const Schema& schema, const Dataset& data);
Eigen::VectorXd encode_record(const Codec& codec, const Record& record);
Eigen::MatrixXd encode_dataset(const Codec& codec, const Dataset& data);

struct DecodeResult {
  Record record;
  bool clamped = false;  // some continuous value fell outside its interval
};

/// Argmax per categorical block, de-standardization plus interval clamp for
/// continuous blocks.
DecodeResult decode_vector_checked(const Codec& codec, const Eigen::VectorXd& v);
Record decode_vector(const Codec& codec, const Eigen::VectorXd& v);

}  // namespace detangle
