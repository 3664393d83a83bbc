#include "detangle/core_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace detangle {

std::optional<int> AttributeSpace::category_index(std::string_view label) const {
  for (std::size_t k = 0; k < categories.size(); ++k) {
    if (categories[k] == label) return static_cast<int>(k);
  }
  return std::nullopt;
}

AttributeSpace AttributeSpace::continuous(std::string name, std::optional<Interval> interval) {
  AttributeSpace a;
  a.name = std::move(name);
  a.kind = AttributeKind::kContinuous;
  a.interval = interval;
  return a;
}

AttributeSpace AttributeSpace::categorical_of(std::string name, std::vector<std::string> categories,
                                              std::vector<std::pair<std::string, std::string>> order) {
  AttributeSpace a;
  a.name = std::move(name);
  a.kind = AttributeKind::kCategorical;
  a.categories = std::move(categories);
  a.order = std::move(order);
  return a;
}

Schema::Schema(std::vector<AttributeSpace> attributes) : attributes_(std::move(attributes)) {
  if (attributes_.empty()) throw SchemaError("schema must declare at least one attribute");
  std::set<std::string> seen;
  closure_.resize(attributes_.size());
  for (std::size_t j = 0; j < attributes_.size(); ++j) {
    const auto& a = attributes_[j];
    if (a.name.empty()) throw SchemaError("attribute " + std::to_string(j) + " has an empty name");
    if (!seen.insert(a.name).second) throw SchemaError("duplicate attribute name \"" + a.name + "\"");
    if (a.categorical()) {
      if (a.categories.empty()) throw SchemaError("categorical attribute \"" + a.name + "\" has no categories");
      std::set<std::string> labels(a.categories.begin(), a.categories.end());
      if (labels.size() != a.categories.size())
        throw SchemaError("categorical attribute \"" + a.name + "\" repeats a category label");
      if (a.interval) throw SchemaError("categorical attribute \"" + a.name + "\" cannot declare an interval");
      const std::size_t k = a.categories.size();
      auto& c = closure_[j];
      c.assign(k * k, 0);
      for (std::size_t i = 0; i < k; ++i) c[i * k + i] = 1;
      for (const auto& [lo, hi] : a.order) {
        auto li = a.category_index(lo);
        auto hi_i = a.category_index(hi);
        if (!li || !hi_i)
          throw SchemaError("order pair (" + lo + ", " + hi + ") of \"" + a.name + "\" names an undeclared category");
        c[static_cast<std::size_t>(*li) * k + static_cast<std::size_t>(*hi_i)] = 1;
      }
      // Warshall
      for (std::size_t via = 0; via < k; ++via)
        for (std::size_t i = 0; i < k; ++i)
          if (c[i * k + via])
            for (std::size_t t = 0; t < k; ++t)
              if (c[via * k + t]) c[i * k + t] = 1;
    } else {
      if (!a.categories.empty() || !a.order.empty())
        throw SchemaError("continuous attribute \"" + a.name + "\" cannot declare categories or an order");
      if (a.interval && !(a.interval->lo <= a.interval->hi))
        throw SchemaError("attribute \"" + a.name + "\" has an interval with lo > hi");
    }
  }
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
  for (std::size_t j = 0; j < attributes_.size(); ++j)
    if (attributes_[j].name == name) return j;
  return std::nullopt;
}

std::size_t Schema::index_of(std::string_view name) const {
  auto j = find(name);
  if (!j) throw SchemaError("unknown attribute \"" + std::string(name) + "\"");
  return *j;
}

std::vector<std::string> Schema::names() const {
  std::vector<std::string> out;
  out.reserve(attributes_.size());
  for (const auto& a : attributes_) out.push_back(a.name);
  return out;
}

bool Schema::precedes(std::size_t j, int a, int b) const {
  const auto k = attributes_[j].categories.size();
  return closure_[j][static_cast<std::size_t>(a) * k + static_cast<std::size_t>(b)] != 0;
}

Schema Schema::select(std::span<const std::size_t> columns) const {
  std::vector<AttributeSpace> out;
  out.reserve(columns.size());
  for (auto j : columns) {
    if (j >= attributes_.size()) throw SchemaError("column index " + std::to_string(j) + " out of range");
    out.push_back(attributes_[j]);
  }
  return Schema(std::move(out));
}

void Schema::check_value(std::size_t j, double value) const {
  const auto& a = attributes_[j];
  if (!std::isfinite(value)) throw SchemaError("non-finite value for \"" + a.name + "\"");
  if (a.categorical()) {
    const double k = static_cast<double>(a.categories.size());
    if (value != std::floor(value) || value < 0 || value >= k)
      throw SchemaError("value " + format_double(value) + " is not a category index of \"" + a.name + "\"");
  } else if (a.interval && (value < a.interval->lo || value > a.interval->hi)) {
    throw SchemaError("value " + format_double(value) + " outside [" + format_double(a.interval->lo) + ", " +
                      format_double(a.interval->hi) + "] of \"" + a.name + "\"");
  }
}

std::string Schema::format_value(std::size_t j, double value) const {
  const auto& a = attributes_[j];
  if (a.categorical()) return a.categories.at(static_cast<std::size_t>(value));
  return format_double(value);
}

Dataset::Dataset(Schema schema, Eigen::MatrixXd cells) : schema_(std::move(schema)), cells_(std::move(cells)) {
  if (static_cast<std::size_t>(cells_.cols()) != schema_.size())
    throw SchemaError("dataset has " + std::to_string(cells_.cols()) + " columns, schema declares " +
                      std::to_string(schema_.size()));
  for (Eigen::Index i = 0; i < cells_.rows(); ++i)
    for (std::size_t j = 0; j < schema_.size(); ++j) {
      try {
        schema_.check_value(j, cells_(i, static_cast<Eigen::Index>(j)));
      } catch (const SchemaError& e) {
        throw SchemaError("row " + std::to_string(i + 1) + ": " + e.what());
      }
    }
}

Dataset Dataset::slice(std::span<const std::size_t> rows, std::span<const std::size_t> cols) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= this->rows()) throw SchemaError("row index " + std::to_string(rows[r]) + " out of range");
    for (std::size_t c = 0; c < cols.size(); ++c) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = at(rows[r], cols[c]);
  }
  return Dataset(schema_.select(cols), std::move(out));
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  std::vector<std::size_t> all(cols());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
  return slice(rows, all);
}

void ExternalKnowledge::validate(const Schema& schema) const {
  for (const auto& fd : dependencies) {
    if (fd.sources.empty()) throw SchemaError("functional dependency on \"" + fd.target + "\" has no sources");
    schema.index_of(fd.target);
    for (const auto& s : fd.sources) {
      schema.index_of(s);
      if (s == fd.target) throw SchemaError("functional dependency \"" + fd.target + "\" depends on itself");
    }
  }
  for (const auto& [name, dist] : distributions) schema.index_of(name);
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open \"" + path + "\"");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("\"" + path + "\": " + e.what());
  }
}

}  // namespace

Schema schema_from_json(const nlohmann::json& doc) {
  try {
    const auto& list = doc.contains("attributes") ? doc.at("attributes") : doc;
    std::vector<AttributeSpace> attrs;
    for (const auto& item : list) {
      AttributeSpace a;
      a.name = item.at("name").get<std::string>();
      const auto kind = item.at("kind").get<std::string>();
      if (kind == "categorical") {
        a.kind = AttributeKind::kCategorical;
        a.categories = item.at("domain").get<std::vector<std::string>>();
        if (item.contains("order"))
          for (const auto& p : item.at("order"))
            a.order.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
      } else if (kind == "continuous") {
        a.kind = AttributeKind::kContinuous;
        if (item.contains("domain") && !item.at("domain").is_null()) {
          const auto& d = item.at("domain");
          a.interval = Interval{d.at(0).get<double>(), d.at(1).get<double>()};
        }
      } else {
        throw SchemaError("attribute \"" + a.name + "\": unknown kind \"" + kind + "\"");
      }
      attrs.push_back(std::move(a));
    }
    return Schema(std::move(attrs));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("schema document: ") + e.what());
  }
}

nlohmann::json schema_to_json(const Schema& schema) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& a : schema.attributes()) {
    nlohmann::json item;
    item["name"] = a.name;
    if (a.categorical()) {
      item["kind"] = "categorical";
      item["domain"] = a.categories;
      if (!a.order.empty()) {
        nlohmann::json pairs = nlohmann::json::array();
        for (const auto& [lo, hi] : a.order) pairs.push_back({lo, hi});
        item["order"] = pairs;
      }
    } else {
      item["kind"] = "continuous";
      if (a.interval) item["domain"] = {a.interval->lo, a.interval->hi};
    }
    list.push_back(std::move(item));
  }
  return {{"attributes", list}};
}

Schema load_schema(const std::string& path) { return schema_from_json(read_json(path)); }

ExternalKnowledge knowledge_from_json(const nlohmann::json& doc) {
  ExternalKnowledge ek;
  try {
    if (doc.contains("dependencies"))
      for (const auto& d : doc.at("dependencies")) {
        FunctionalDependency fd;
        fd.sources = d.at("sources").get<std::vector<std::string>>();
        fd.target = d.at("target").get<std::string>();
        fd.description = d.value("description", "");
        ek.dependencies.push_back(std::move(fd));
      }
    if (doc.contains("distributions"))
      for (const auto& [name, d] : doc.at("distributions").items())
        ek.distributions[name] = NamedDistribution{d.at("name").get<std::string>(),
                                                   d.value("parameters", std::vector<double>{})};
    if (doc.contains("latent_variables"))
      ek.latent_variables = doc.at("latent_variables").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("knowledge document: ") + e.what());
  }
  return ek;
}

ExternalKnowledge load_knowledge(const std::string& path) { return knowledge_from_json(read_json(path)); }

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

Codec::Codec(Schema schema, std::vector<CodecBlock> blocks) : schema_(std::move(schema)), blocks_(std::move(blocks)) {
  if (blocks_.size() != schema_.size()) throw SchemaError("codec needs one block per attribute");
  block_of_attribute_.assign(schema_.size(), 0);
  std::size_t offset = 0;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    auto& blk = blocks_[b];
    const auto& a = schema_[blk.attribute];
    const std::size_t expect = a.categorical() ? a.categories.size() : 1;
    if (blk.width != expect || blk.offset != offset || blk.attribute != b)
      throw SchemaError("codec block layout does not match schema at \"" + a.name + "\"");
    if (!a.categorical() && !(blk.scale > 0.0)) throw SchemaError("codec scale must be positive");
    block_of_attribute_[blk.attribute] = b;
    offset += blk.width;
  }
  width_ = offset;
}

const CodecBlock& Codec::block_for(std::size_t attribute) const { return blocks_.at(block_of_attribute_.at(attribute)); }

Codec build_codec(const Schema& schema, const Dataset& data) {
  if (data.rows() == 0) throw NumericError("cannot build a codec from an empty dataset");
  if (!(data.schema() == schema)) throw SchemaError("dataset schema does not match codec schema");
  std::vector<CodecBlock> blocks;
  std::size_t offset = 0;
  const double n = static_cast<double>(data.rows());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    CodecBlock blk;
    blk.attribute = j;
    blk.offset = offset;
    if (schema[j].categorical()) {
      blk.width = schema[j].categories.size();
    } else {
      const auto col = data.cells().col(static_cast<Eigen::Index>(j));
      blk.mean = col.sum() / n;
      const double var = (col.array() - blk.mean).square().sum() / n;
      const double sd = std::sqrt(var);
      blk.scale = sd > 1e-12 ? sd : 1.0;
    }
    offset += blk.width;
    blocks.push_back(blk);
  }
  return Codec(schema, std::move(blocks));
}

Eigen::VectorXd encode_record(const Codec& codec, const Record& record) {
  if (static_cast<std::size_t>(record.size()) != codec.schema().size())
    throw SchemaError("record width " + std::to_string(record.size()) + " does not match schema width " +
                      std::to_string(codec.schema().size()));
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(codec.width()));
  for (const auto& blk : codec.blocks()) {
    const double x = record(static_cast<Eigen::Index>(blk.attribute));
    if (codec.schema()[blk.attribute].categorical()) {
      v(static_cast<Eigen::Index>(blk.offset + static_cast<std::size_t>(x))) = 1.0;
    } else {
      v(static_cast<Eigen::Index>(blk.offset)) = (x - blk.mean) / blk.scale;
    }
  }
  return v;
}

Eigen::MatrixXd encode_dataset(const Codec& codec, const Dataset& data) {
  if (!(data.schema() == codec.schema())) throw SchemaError("dataset schema does not match codec schema");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(data.rows()), static_cast<Eigen::Index>(codec.width()));
  for (std::size_t i = 0; i < data.rows(); ++i) out.row(static_cast<Eigen::Index>(i)) = encode_record(codec, data.record(i)).transpose();
  return out;
}

DecodeResult decode_vector_checked(const Codec& codec, const Eigen::VectorXd& v) {
  if (static_cast<std::size_t>(v.size()) != codec.width())
    throw SchemaError("encoded vector has width " + std::to_string(v.size()) + ", codec expects " +
                      std::to_string(codec.width()));
  DecodeResult out;
  out.record = Record::Zero(static_cast<Eigen::Index>(codec.schema().size()));
  for (const auto& blk : codec.blocks()) {
    const auto& a = codec.schema()[blk.attribute];
    double value;
    if (a.categorical()) {
      Eigen::Index best = 0;
      v.segment(static_cast<Eigen::Index>(blk.offset), static_cast<Eigen::Index>(blk.width)).maxCoeff(&best);
      value = static_cast<double>(best);
    } else {
      value = v(static_cast<Eigen::Index>(blk.offset)) * blk.scale + blk.mean;
      if (a.interval) {
        const double c = std::clamp(value, a.interval->lo, a.interval->hi);
        if (c != value) out.clamped = true;
        value = c;
      }
    }
    out.record(static_cast<Eigen::Index>(blk.attribute)) = value;
  }
  return out;
}

Record decode_vector(const Codec& codec, const Eigen::VectorXd& v) { return decode_vector_checked(codec, v).record; }

}  // namespace detangle
