#include "detangle/request.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace detangle {

ConditionExpr ConditionExpr::never() {
  ConditionExpr c;
  c.node = Node::kFalse;
  return c;
}

ConditionExpr ConditionExpr::compare(std::string attribute, CompareOp op, Literal literal) {
  ConditionExpr c;
  c.node = Node::kCompare;
  c.attribute = std::move(attribute);
  c.op = op;
  c.literal = std::move(literal);
  return c;
}

ConditionExpr ConditionExpr::all_of(std::vector<ConditionExpr> terms) {
  ConditionExpr c;
  c.node = Node::kAnd;
  c.children = std::move(terms);
  return c;
}

ConditionExpr ConditionExpr::any_of(std::vector<ConditionExpr> terms) {
  ConditionExpr c;
  c.node = Node::kOr;
  c.children = std::move(terms);
  return c;
}

ConditionExpr ConditionExpr::negate(ConditionExpr term) {
  ConditionExpr c;
  c.node = Node::kNot;
  c.children.push_back(std::move(term));
  return c;
}

std::vector<std::string> ConditionExpr::attributes() const {
  std::vector<std::string> out;
  if (node == Node::kCompare) out.push_back(attribute);
  for (const auto& c : children) {
    auto sub = c.attributes();
    out.insert(out.end(), sub.begin(), sub.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

constexpr std::pair<CompareOp, const char*> kOpNames[] = {
    {CompareOp::kEq, "=="}, {CompareOp::kNe, "!="}, {CompareOp::kLt, "<"},
    {CompareOp::kLe, "<="}, {CompareOp::kGt, ">"},  {CompareOp::kGe, ">="},
};

std::optional<CompareOp> parse_op(const std::string& s) {
  for (const auto& [op, name] : kOpNames)
    if (s == name) return op;
  return std::nullopt;
}

const char* op_name(CompareOp op) {
  for (const auto& [o, name] : kOpNames)
    if (o == op) return name;
  return "?";
}

}  // namespace

ConditionExpr condition_from_json(const nlohmann::json& doc) {
  if (doc.is_boolean()) return doc.get<bool>() ? ConditionExpr::always() : ConditionExpr::never();
  if (!doc.is_array() || doc.empty() || !doc[0].is_string())
    throw ParseError("condition must be a boolean or a prefix array, got " + doc.dump());
  const auto head = doc[0].get<std::string>();
  if (head == "true") return ConditionExpr::always();
  if (head == "false") return ConditionExpr::never();
  if (head == "and" || head == "or") {
    std::vector<ConditionExpr> terms;
    for (std::size_t k = 1; k < doc.size(); ++k) terms.push_back(condition_from_json(doc[k]));
    return head == "and" ? ConditionExpr::all_of(std::move(terms)) : ConditionExpr::any_of(std::move(terms));
  }
  if (head == "not") {
    if (doc.size() != 2) throw ParseError("\"not\" takes exactly one operand");
    return ConditionExpr::negate(condition_from_json(doc[1]));
  }
  auto op = parse_op(head);
  if (!op) throw ParseError("unknown condition operator \"" + head + "\"");
  if (doc.size() != 3 || !doc[1].is_string()) throw ParseError("comparison must be [op, attribute, literal]");
  Literal lit;
  if (doc[2].is_number()) {
    lit = doc[2].get<double>();
  } else if (doc[2].is_string()) {
    lit = doc[2].get<std::string>();
  } else {
    throw ParseError("comparison literal must be a number or a string");
  }
  return ConditionExpr::compare(doc[1].get<std::string>(), *op, std::move(lit));
}

nlohmann::json condition_to_json(const ConditionExpr& cond) {
  using Node = ConditionExpr::Node;
  switch (cond.node) {
    case Node::kTrue:
      return true;
    case Node::kFalse:
      return false;
    case Node::kAnd:
    case Node::kOr: {
      nlohmann::json out = nlohmann::json::array({cond.node == Node::kAnd ? "and" : "or"});
      for (const auto& c : cond.children) out.push_back(condition_to_json(c));
      return out;
    }
    case Node::kNot:
      return nlohmann::json::array({"not", condition_to_json(cond.children.at(0))});
    case Node::kCompare: {
      nlohmann::json lit = std::holds_alternative<double>(cond.literal)
                               ? nlohmann::json(std::get<double>(cond.literal))
                               : nlohmann::json(std::get<std::string>(cond.literal));
      return nlohmann::json::array({op_name(cond.op), cond.attribute, lit});
    }
  }
  return false;
}

BoundCondition::BoundCondition(const ConditionExpr& cond, const Schema& schema) : schema_(schema) {
  root_ = bind(cond);
}

BoundCondition::Term BoundCondition::bind(const ConditionExpr& cond) const {
  Term t;
  t.node = cond.node;
  for (const auto& c : cond.children) t.children.push_back(bind(c));
  if (cond.node == ConditionExpr::Node::kNot && t.children.size() != 1)
    throw ValidationError("\"not\" takes exactly one operand");
  if (cond.node != ConditionExpr::Node::kCompare) return t;

  t.attribute = schema_.index_of(cond.attribute);
  t.op = cond.op;
  const auto& a = schema_[t.attribute];
  const bool ordering = cond.op != CompareOp::kEq && cond.op != CompareOp::kNe;
  if (a.categorical()) {
    if (!std::holds_alternative<std::string>(cond.literal))
      throw ValidationError("attribute \"" + a.name + "\" is categorical; literal must be a category label");
    const auto& label = std::get<std::string>(cond.literal);
    auto k = a.category_index(label);
    if (!k) throw ValidationError("\"" + label + "\" is not a category of \"" + a.name + "\"");
    if (ordering && !a.ordered())
      throw ValidationError(std::string("ordered comparison \"") + op_name(cond.op) + "\" on unordered categorical \"" +
                            a.name + "\"");
    t.literal = *k;
  } else {
    if (!std::holds_alternative<double>(cond.literal))
      throw ValidationError("attribute \"" + a.name + "\" is continuous; literal must be numeric");
    t.literal = std::get<double>(cond.literal);
  }
  return t;
}

bool BoundCondition::eval(const Term& t, const Record& record) const {
  using Node = ConditionExpr::Node;
  switch (t.node) {
    case Node::kTrue:
      return true;
    case Node::kFalse:
      return false;
    case Node::kAnd:
      return std::all_of(t.children.begin(), t.children.end(), [&](const Term& c) { return eval(c, record); });
    case Node::kOr:
      return std::any_of(t.children.begin(), t.children.end(), [&](const Term& c) { return eval(c, record); });
    case Node::kNot:
      return !eval(t.children.front(), record);
    case Node::kCompare:
      break;
  }
  const double x = record(static_cast<Eigen::Index>(t.attribute));
  const double y = t.literal;
  if (schema_[t.attribute].categorical() && t.op != CompareOp::kEq && t.op != CompareOp::kNe) {
    const int xi = static_cast<int>(x);
    const int yi = static_cast<int>(y);
    switch (t.op) {
      case CompareOp::kLe:
        return schema_.precedes(t.attribute, xi, yi);
      case CompareOp::kLt:
        return xi != yi && schema_.precedes(t.attribute, xi, yi);
      case CompareOp::kGe:
        return schema_.precedes(t.attribute, yi, xi);
      case CompareOp::kGt:
        return xi != yi && schema_.precedes(t.attribute, yi, xi);
      default:
        break;
    }
  }
  switch (t.op) {
    case CompareOp::kEq:
      return x == y;
    case CompareOp::kNe:
      return x != y;
    case CompareOp::kLt:
      return x < y;
    case CompareOp::kLe:
      return x <= y;
    case CompareOp::kGt:
      return x > y;
    case CompareOp::kGe:
      return x >= y;
  }
  return false;
}

bool BoundCondition::operator()(const Record& record) const {
  if (static_cast<std::size_t>(record.size()) != schema_.size())
    throw SchemaError("record width does not match the condition's schema");
  return eval(root_, record);
}

bool eval_condition(const ConditionExpr& cond, const Schema& schema, const Record& record) {
  return BoundCondition(cond, schema)(record);
}

TargetWindow target_window(const Dataset& data, const ExtractionQuery& q) {
  const BoundCondition cond(q.condition, data.schema());
  TargetWindow w;
  for (const auto& name : q.selection) w.columns.push_back(data.schema().index_of(name));
  for (std::size_t i = 0; i < data.rows(); ++i)
    if (cond(data.record(i))) w.rows.push_back(i);
  if (w.rows.empty()) throw EmptyWindowError();
  return w;
}

Marginal marginal_from_json(const nlohmann::json& doc) {
  const auto kind = doc.at("kind").get<std::string>();
  if (kind == "categorical") {
    CategoricalTable t;
    for (const auto& [label, p] : doc.at("probabilities").items()) t.probabilities[label] = p.get<double>();
    return t;
  }
  if (kind == "point") return PointMass{doc.at("value").get<double>()};
  if (kind == "uniform") return UniformRange{doc.at("lo").get<double>(), doc.at("hi").get<double>()};
  if (kind == "normal") return NormalLaw{doc.at("mean").get<double>(), doc.at("variance").get<double>()};
  throw ParseError("unknown marginal kind \"" + kind + "\"");
}

nlohmann::json marginal_to_json(const Marginal& m) {
  return std::visit(
      [](const auto& v) -> nlohmann::json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, CategoricalTable>) {
          return {{"kind", "categorical"}, {"probabilities", v.probabilities}};
        } else if constexpr (std::is_same_v<T, PointMass>) {
          return {{"kind", "point"}, {"value", v.value}};
        } else if constexpr (std::is_same_v<T, UniformRange>) {
          return {{"kind", "uniform"}, {"lo", v.lo}, {"hi", v.hi}};
        } else {
          return {{"kind", "normal"}, {"mean", v.mean}, {"variance", v.variance}};
        }
      },
      m);
}

Request request_from_json(const nlohmann::json& doc) {
  try {
    Request r;
    const auto& ex = doc.at("extraction");
    r.extraction.condition = condition_from_json(ex.value("condition", nlohmann::json(true)));
    r.extraction.selection = ex.at("select").get<std::vector<std::string>>();
    if (doc.contains("extrapolation") && !doc.at("extrapolation").is_null()) {
      const auto& px = doc.at("extrapolation");
      ExtrapolationQuery p;
      p.selection = px.at("select").get<std::vector<std::string>>();
      for (const auto& c : px.at("condition"))
        p.conditions.push_back({c.at("attribute").get<std::string>(), marginal_from_json(c.at("marginal"))});
      r.extrapolation = std::move(p);
    }
    if (doc.contains("objective")) {
      const auto& ob = doc.at("objective");
      if (ob.contains("utility") && !ob.at("utility").is_null()) r.objective.utility = ob.at("utility").get<std::string>();
      r.objective.privacy = ob.value("privacy", false);
      r.objective.lambda = ob.value("lambda", 1.0);
    }
    r.alpha_r = doc.at("alpha_r").get<double>();
    r.alpha_c = doc.at("alpha_c").get<double>();
    r.beta = doc.at("beta").get<int>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("request document: ") + e.what());
  }
}

nlohmann::json request_to_json(const Request& r) {
  nlohmann::json doc;
  doc["extraction"] = {{"condition", condition_to_json(r.extraction.condition)}, {"select", r.extraction.selection}};
  if (r.extrapolation) {
    nlohmann::json conds = nlohmann::json::array();
    for (const auto& c : r.extrapolation->conditions)
      conds.push_back({{"attribute", c.attribute}, {"marginal", marginal_to_json(c.marginal)}});
    doc["extrapolation"] = {{"select", r.extrapolation->selection}, {"condition", conds}};
  }
  doc["objective"] = {{"utility", r.objective.utility ? nlohmann::json(*r.objective.utility) : nlohmann::json()},
                      {"privacy", r.objective.privacy},
                      {"lambda", r.objective.lambda}};
  doc["alpha_r"] = r.alpha_r;
  doc["alpha_c"] = r.alpha_c;
  doc["beta"] = r.beta;
  return doc;
}

Request load_request(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open request file \"" + path + "\"");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return request_from_json(nlohmann::json::parse(buf.str()));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("\"" + path + "\": " + e.what());
  }
}

Request validate_request(const Request& r, const Schema& schema) {
  std::vector<std::string> problems;
  auto fail = [&](const std::string& path, const std::string& what) { problems.push_back(path + ": " + what); };
  Request out = r;

  if (!(r.alpha_r > 0.0 && r.alpha_r < 1.0)) fail("alpha_r", "budget out of (0,1)");
  if (!(r.alpha_c > 0.0 && r.alpha_c < 1.0)) fail("alpha_c", "budget out of (0,1)");
  if (r.beta < 1) fail("beta", "model budget must be >= 1");
  if (!(r.objective.lambda > 0.0) || !std::isfinite(r.objective.lambda)) fail("objective.lambda", "must be > 0");

  try {
    BoundCondition(r.extraction.condition, schema);
  } catch (const Error& e) {
    fail("extraction.condition", e.what());
  }
  std::set<std::string> q_sel;
  if (r.extraction.selection.empty()) fail("extraction.select", "selection must be nonempty");
  for (std::size_t k = 0; k < r.extraction.selection.size(); ++k) {
    const auto& name = r.extraction.selection[k];
    if (!schema.find(name)) fail("extraction.select[" + std::to_string(k) + "]", "unknown attribute \"" + name + "\"");
    if (!q_sel.insert(name).second) fail("extraction.select[" + std::to_string(k) + "]", "duplicate \"" + name + "\"");
  }
  if (r.objective.utility && !q_sel.count(*r.objective.utility))
    fail("objective.utility", "\"" + *r.objective.utility + "\" is not in the extraction selection");

  if (r.extrapolation) {
    const auto& p = *r.extrapolation;
    std::set<std::string> p_sel;
    for (std::size_t k = 0; k < p.selection.size(); ++k) {
      const auto& name = p.selection[k];
      p_sel.insert(name);
      if (!q_sel.count(name))
        fail("extrapolation.select[" + std::to_string(k) + "]", "\"" + name + "\" is not in the extraction selection");
    }
    std::set<std::string> conditioned;
    for (std::size_t k = 0; k < p.conditions.size(); ++k) {
      const auto& c = p.conditions[k];
      const std::string path = "extrapolation.condition[" + std::to_string(k) + "]";
      auto j = schema.find(c.attribute);
      if (!j) {
        fail(path, "unknown attribute \"" + c.attribute + "\"");
        continue;
      }
      if (!p_sel.count(c.attribute)) fail(path, "\"" + c.attribute + "\" is not in the extrapolation selection");
      if (!conditioned.insert(c.attribute).second) fail(path, "attribute conditioned twice");
      const auto& a = schema[*j];
      auto& target = out.extrapolation->conditions[k].marginal;
      if (a.categorical()) {
        if (!std::holds_alternative<CategoricalTable>(c.marginal)) {
          fail(path, "categorical attribute needs a categorical table");
          continue;
        }
        auto& table = std::get<CategoricalTable>(target).probabilities;
        double sum = 0.0;
        bool ok = true;
        for (const auto& [label, prob] : table) {
          if (!a.category_index(label)) {
            fail(path, "\"" + label + "\" is not a category of \"" + a.name + "\"");
            ok = false;
          }
          if (!(prob >= 0.0) || !std::isfinite(prob)) {
            fail(path, "probability of \"" + label + "\" must be nonnegative");
            ok = false;
          }
          sum += prob;
        }
        if (ok) {
          if (std::abs(sum - 1.0) > 1e-6) {
            fail(path, "probabilities sum to " + format_double(sum) + ", not 1");
          } else if (sum != 1.0) {
            for (auto& [label, prob] : table) prob /= sum;
          }
        }
      } else if (std::holds_alternative<CategoricalTable>(c.marginal)) {
        fail(path, "continuous attribute needs a point, uniform or normal marginal");
      } else if (auto* u = std::get_if<UniformRange>(&c.marginal); u && !(u->lo <= u->hi)) {
        fail(path, "uniform range needs lo <= hi");
      } else if (auto* nl = std::get_if<NormalLaw>(&c.marginal);
                 nl && (!(nl->variance > 0.0) || !std::isfinite(nl->mean))) {
        fail(path, "normal marginal needs a finite mean and positive variance");
      } else if (auto* pm = std::get_if<PointMass>(&c.marginal); pm && !std::isfinite(pm->value)) {
        fail(path, "point mass must be finite");
      }
    }
  }

  if (!problems.empty()) {
    std::string msg = "invalid request:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }
  return out;
}

}  // namespace detangle
