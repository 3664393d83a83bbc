#include "detangle/persist.hpp"

#include <fstream>
#include <sstream>

namespace detangle {

using nlohmann::json;

namespace {

json vec_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_to_json(m.row(r).transpose()));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Eigen::MatrixXd mat_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows) throw ParseError("matrix row count mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::VectorXd v = vec_from_json(data.at(static_cast<std::size_t>(r)));
    if (v.size() != cols) throw ParseError("matrix column count mismatch");
    m.row(r) = v.transpose();
  }
  return m;
}

json tagged(const std::string& format) { return {{"format", format}, {"version", kArtifactVersion}}; }

template <typename F>
auto parsing(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ParseError(what + ": " + e.what());
  }
}

json representation_body(const Representation& r) {
  json latents = json::array();
  for (const auto& row : r.estimates) {
    json subsets = json::array();
    for (const auto& e : row) subsets.push_back(estimate_to_json(e));
    latents.push_back(std::move(subsets));
  }
  return {{"subset_mass", r.subset_mass}, {"latents", latents}};
}

Representation representation_body_from(const json& doc) {
  Representation r;
  r.subset_mass = doc.at("subset_mass").get<std::vector<double>>();
  for (const auto& row : doc.at("latents")) {
    std::vector<DistEstimate> est;
    for (const auto& e : row) est.push_back(estimate_from_json(e));
    r.estimates.push_back(std::move(est));
  }
  for (const auto& row : r.estimates)
    for (const auto& e : row) validate_estimate(e);
  return r;
}

}  // namespace

void check_artifact(const json& doc, const std::string& format) {
  if (!doc.is_object() || !doc.contains("format") || !doc.contains("version"))
    throw ParseError("artifact has no format/version tag (expected \"" + format + "\")");
  if (doc.at("format") != format)
    throw ParseError("artifact format is " + doc.at("format").dump() + ", expected \"" + format + "\"");
  if (doc.at("version") != kArtifactVersion)
    throw ParseError("artifact version " + doc.at("version").dump() + " is not supported (expected " +
                     std::to_string(kArtifactVersion) + ")");
}

json extraction_to_json(const ExtractionResult& r) {
  json doc = tagged("detangle.extraction");
  doc["rows"] = r.rows;
  doc["columns"] = r.columns;
  doc["window"] = r.window;
  json probs = json::array();
  for (const auto& [row, p] : r.probabilities) probs.push_back(json::array({row, p}));
  doc["probabilities"] = probs;
  doc["tau"] = r.tau;
  doc["iterations"] = r.iterations_run;
  return doc;
}

ExtractionResult extraction_from_json(const json& doc) {
  check_artifact(doc, "detangle.extraction");
  return parsing("extraction artifact", [&] {
    ExtractionResult r;
    r.rows = doc.at("rows").get<std::vector<std::size_t>>();
    r.columns = doc.at("columns").get<std::vector<std::size_t>>();
    r.window = doc.at("window").get<std::vector<std::size_t>>();
    for (const auto& pair : doc.at("probabilities"))
      r.probabilities[pair.at(0).get<std::size_t>()] = pair.at(1).get<double>();
    r.tau = doc.at("tau").get<double>();
    r.iterations_run = doc.at("iterations").get<int>();
    return r;
  });
}

json estimate_to_json(const DistEstimate& e) {
  json j = {{"kind", e.kind()}, {"samples", e.samples}};
  if (const auto* g = std::get_if<GaussianParams>(&e.params)) {
    j["mean"] = g->mean;
    j["variance"] = g->variance;
  } else if (const auto* g = std::get_if<GmmParams>(&e.params)) {
    j["weights"] = g->weights;
    j["means"] = g->means;
    j["variances"] = g->variances;
    j["seed"] = g->seed;
  } else {
    const auto& k = std::get<KdeParams>(e.params);
    j["points"] = k.points;
    j["weights"] = k.weights;
    j["bandwidth"] = k.bandwidth;
  }
  return j;
}

DistEstimate estimate_from_json(const json& doc) {
  return parsing("distribution estimate", [&] {
    DistEstimate e;
    e.samples = doc.at("samples").get<std::size_t>();
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "gaussian") {
      e.params = GaussianParams{doc.at("mean").get<double>(), doc.at("variance").get<double>()};
    } else if (kind == "gmm") {
      GmmParams g;
      g.weights = doc.at("weights").get<std::vector<double>>();
      g.means = doc.at("means").get<std::vector<double>>();
      g.variances = doc.at("variances").get<std::vector<double>>();
      g.seed = doc.at("seed").get<std::uint64_t>();
      e.params = std::move(g);
    } else if (kind == "kde") {
      KdeParams k;
      k.points = doc.at("points").get<std::vector<double>>();
      k.weights = doc.at("weights").get<std::vector<double>>();
      k.bandwidth = doc.at("bandwidth").get<double>();
      e.params = std::move(k);
    } else {
      throw ParseError("unknown estimate kind \"" + kind + "\"");
    }
    return e;
  });
}

json model_to_json(const DataModel& m) {
  json doc = tagged("detangle.model");
  doc["family"] = "affine-orthogonal";
  doc["schema"] = schema_to_json(m.schema);
  json blocks = json::array();
  for (const auto& b : m.codec.blocks())
    blocks.push_back({{"attribute", b.attribute}, {"offset", b.offset}, {"width", b.width}, {"mean", b.mean},
                      {"scale", b.scale}});
  doc["codec"] = blocks;
  doc["modeled_columns"] = m.modeled_columns;
  doc["center"] = vec_to_json(m.center);
  doc["scale"] = vec_to_json(m.scale);
  doc["loadings"] = mat_to_json(m.loadings);
  doc["singular_values"] = vec_to_json(m.singular_values);
  json latents = json::array();
  for (const auto& l : m.latents) latents.push_back({{"index", l.index}, {"subsets", l.subsets}});
  doc["latents"] = latents;
  json deps = json::array();
  for (const auto& d : m.dependents)
    deps.push_back({{"attribute", d.attribute}, {"sources", d.sources}, {"map", mat_to_json(d.map)}});
  doc["dependents"] = deps;
  doc["grouping"] = m.grouping ? json(*m.grouping) : json(nullptr);
  doc["subset_categories"] = m.subset_categories;
  doc["meta"] = {{"rows", m.meta.rows}, {"columns", m.meta.columns}, {"seed", m.meta.seed}};
  return doc;
}

DataModel model_from_json(const json& doc) {
  check_artifact(doc, "detangle.model");
  return parsing("model artifact", [&] {
    if (doc.at("family") != "affine-orthogonal") throw ParseError("unknown relationship family in model artifact");
    DataModel m;
    m.schema = schema_from_json(doc.at("schema"));
    std::vector<CodecBlock> blocks;
    for (const auto& b : doc.at("codec"))
      blocks.push_back({b.at("attribute").get<std::size_t>(), b.at("offset").get<std::size_t>(),
                        b.at("width").get<std::size_t>(), b.at("mean").get<double>(), b.at("scale").get<double>()});
    m.codec = Codec(m.schema, std::move(blocks));
    m.modeled_columns = doc.at("modeled_columns").get<std::vector<std::size_t>>();
    m.center = vec_from_json(doc.at("center"));
    m.scale = vec_from_json(doc.at("scale"));
    m.loadings = mat_from_json(doc.at("loadings"));
    m.singular_values = vec_from_json(doc.at("singular_values"));
    for (const auto& l : doc.at("latents"))
      m.latents.push_back({l.at("index").get<std::size_t>(), l.at("subsets").get<RowSubsets>()});
    for (const auto& d : doc.at("dependents"))
      m.dependents.push_back({d.at("attribute").get<std::size_t>(), d.at("sources").get<std::vector<std::size_t>>(),
                              mat_from_json(d.at("map"))});
    if (!doc.at("grouping").is_null()) m.grouping = doc.at("grouping").get<std::size_t>();
    m.subset_categories = doc.at("subset_categories").get<std::vector<int>>();
    const auto& meta = doc.at("meta");
    m.meta.rows = meta.at("rows").get<std::vector<std::size_t>>();
    m.meta.columns = meta.at("columns").get<std::vector<std::size_t>>();
    m.meta.seed = meta.at("seed").get<std::uint64_t>();
    if (m.center.size() != static_cast<Eigen::Index>(m.modeled_columns.size()) ||
        m.scale.size() != m.center.size() ||
        m.loadings.cols() != static_cast<Eigen::Index>(m.modeled_columns.size()) ||
        m.latents.size() != static_cast<std::size_t>(m.loadings.rows()))
      throw ParseError("model artifact has inconsistent dimensions");
    for (auto c : m.modeled_columns)
      if (c >= m.codec.width()) throw ParseError("model artifact modeled column out of range");
    return m;
  });
}

json representation_to_json(const Representation& r) {
  json doc = tagged("detangle.representation");
  doc.update(representation_body(r));
  return doc;
}

Representation representation_from_json(const json& doc) {
  check_artifact(doc, "detangle.representation");
  return parsing("representation artifact", [&] { return representation_body_from(doc); });
}

json extrapolated_to_json(const ExtrapolatedRepresentation& r) {
  json doc = tagged("detangle.extrapolated");
  doc.update(representation_body(r.representation));
  doc["level"] = static_cast<int>(r.level);
  doc["ess"] = r.ess;
  doc["warnings"] = r.warnings;
  return doc;
}

ExtrapolatedRepresentation extrapolated_from_json(const json& doc) {
  check_artifact(doc, "detangle.extrapolated");
  return parsing("extrapolated artifact", [&] {
    ExtrapolatedRepresentation r;
    r.representation = representation_body_from(doc);
    const int level = doc.at("level").get<int>();
    if (level < 0 || level > 3) throw ParseError("extrapolation level out of range");
    r.level = static_cast<ExtensionLevel>(level);
    r.ess = doc.at("ess").get<std::vector<double>>();
    r.warnings = doc.at("warnings").get<std::vector<std::string>>();
    return r;
  });
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open \"" + path + "\"");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::exception& e) {
    throw ParseError("\"" + path + "\": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot write \"" + path + "\"");
  out << text;
  if (!out) throw ParseError("write to \"" + path + "\" failed");
}

void write_json_file(const std::string& path, const json& doc) { write_text_file(path, doc.dump(2) + "\n"); }

}  // namespace detangle
