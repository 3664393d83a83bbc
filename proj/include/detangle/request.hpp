#pragma once

#include "detangle/core_data.hpp"

#include <json.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace detangle {

enum class CompareOp { kEq, kNe, kLt, kLe, kGt, kGe };

using Literal = std::variant<double, std::string>;

/// Boolean expression over attribute comparisons. Serialized as a nested
/// prefix array, e.g. ["and", [">=", "age", 30], ["==", "country", "SG"]].
struct ConditionExpr {
  enum class Node { kTrue, kFalse, kCompare, kAnd, kOr, kNot };

  Node node = Node::kTrue;
  std::vector<ConditionExpr> children;
  std::string attribute;
  CompareOp op = CompareOp::kEq;
  Literal literal = 0.0;

  static ConditionExpr always() { return {}; }
  static ConditionExpr never();
  static ConditionExpr compare(std::string attribute, CompareOp op, Literal literal);
  static ConditionExpr all_of(std::vector<ConditionExpr> terms);
  static ConditionExpr any_of(std::vector<ConditionExpr> terms);
  static ConditionExpr negate(ConditionExpr term);

  /// Attribute names referenced anywhere in the tree.
  std::vector<std::string> attributes() const;
};

ConditionExpr condition_from_json(const nlohmann::json& doc);
nlohmann::json condition_to_json(const ConditionExpr& cond);

/// A condition resolved against a schema: attribute indices and category
/// literals are looked up once and every comparison is type-checked.
class BoundCondition {
 public:
  BoundCondition(const ConditionExpr& cond, const Schema& schema);
  bool operator()(const Record& record) const;

 private:
  struct Term {
    ConditionExpr::Node node;
    std::vector<Term> children;
    std::size_t attribute = 0;
    CompareOp op = CompareOp::kEq;
    double literal = 0.0;
  };
  Term bind(const ConditionExpr& cond) const;
  bool eval(const Term& t, const Record& record) const;

  Schema schema_;
  Term root_;
};

bool eval_condition(const ConditionExpr& cond, const Schema& schema, const Record& record);

struct ExtractionQuery {
  ConditionExpr condition;
  std::vector<std::string> selection;
};

struct TargetWindow {
  std::vector<std::size_t> rows;     // I_q, ascending
  std::vector<std::size_t> columns;  // selection as schema indices
};

/// Rows satisfying the condition. Throws EmptyWindowError when none do.
TargetWindow target_window(const Dataset& data, const ExtractionQuery& q);

struct PointMass {
  double value = 0.0;
};
struct UniformRange {
  double lo = 0.0;
  double hi = 0.0;
};
struct NormalLaw {
  double mean = 0.0;
  double variance = 1.0;
};
/// Categorical target marginal keyed by label; absent labels have mass 0.
struct CategoricalTable {
  std::map<std::string, double> probabilities;
};

using Marginal = std::variant<CategoricalTable, PointMass, UniformRange, NormalLaw>;

struct MarginalCondition {
  std::string attribute;
  Marginal marginal;
};

struct ExtrapolationQuery {
  std::vector<std::string> selection;
  std::vector<MarginalCondition> conditions;
};

struct Objective {
  /// Designated utility attribute; empty means the joint of the extraction selection.
  std::optional<std::string> utility;
  bool privacy = false;
  double lambda = 1.0;
};

struct Request {
  ExtractionQuery extraction;
  std::optional<ExtrapolationQuery> extrapolation;
  Objective objective;
  double alpha_r = 0.5;
  double alpha_c = 0.5;
  int beta = 1;
};

Request request_from_json(const nlohmann::json& doc);
nlohmann::json request_to_json(const Request& r);
Request load_request(const std::string& path);
Marginal marginal_from_json(const nlohmann::json& doc);
nlohmann::json marginal_to_json(const Marginal& m);

/// Checks every request invariant against the schema, collecting all
/// violations into one ValidationError. Categorical marginals whose mass is
/// within 1e-6 of one are renormalized.
Request validate_request(const Request& r, const Schema& schema);

}  // namespace detangle
