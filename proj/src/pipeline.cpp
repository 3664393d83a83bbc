#include "detangle/pipeline.hpp"

#include "detangle/extrapolate.hpp"
#include "detangle/log.hpp"
#include "detangle/persist.hpp"
#include "detangle/random.hpp"
#include "detangle/stats.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <set>

namespace detangle {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw ValidationError(where + ": unknown key \"" + key + "\"");
  }
}

std::string resolve(const std::string& base, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute() || base.empty()) return path;
  return (fs::path(base) / path).string();
}

std::string artifact(const PipelineConfig& cfg, const char* name) { return (fs::path(cfg.output) / name).string(); }

struct Inputs {
  Schema schema;
  Dataset data;
  Request request;
};

Inputs load_inputs(const PipelineConfig& cfg) {
  Inputs in;
  in.schema = load_schema(cfg.schema);
  in.data = load_csv(cfg.data, in.schema);
  in.request = validate_request(load_request(cfg.request), in.schema);
  return in;
}

Dataset extracted_slice(const Dataset& data, const ExtractionResult& r) { return data.slice(r.rows, r.columns); }

ExtractionResult load_extraction(const PipelineConfig& cfg) {
  return extraction_from_json(read_json_file(artifact(cfg, kExtractionFile)));
}
DataModel load_model(const PipelineConfig& cfg) { return model_from_json(read_json_file(artifact(cfg, kModelFile))); }

Eigen::MatrixXd columns_of(const Dataset& d, const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(d.rows()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    out.col(static_cast<Eigen::Index>(c)) = d.cells().col(static_cast<Eigen::Index>(cols[c]));
  return out;
}

bool use_extrapolated(const PipelineConfig& cfg) {
  return cfg.stages.extrapolate && fs::exists(artifact(cfg, kExtrapolatedFile));
}

}  // namespace

std::uint64_t stage_seed(std::uint64_t seed, const std::string& stage) { return derive_seed(seed, stage); }

PipelineConfig config_from_json(const json& doc, const std::string& base_dir) {
  try {
    reject_unknown(doc,
                   {"data", "schema", "request", "knowledge", "output", "seed", "stages", "pu", "model", "analysis",
                    "synthesis", "evaluation"},
                   "config");
    PipelineConfig c;
    c.data = resolve(base_dir, doc.at("data").get<std::string>());
    c.schema = resolve(base_dir, doc.at("schema").get<std::string>());
    c.request = resolve(base_dir, doc.at("request").get<std::string>());
    if (doc.contains("knowledge") && !doc.at("knowledge").is_null())
      c.knowledge = resolve(base_dir, doc.at("knowledge").get<std::string>());
    c.output = resolve(base_dir, doc.value("output", std::string("out")));
    if (doc.contains("seed")) {
      if (!doc.at("seed").is_number_unsigned()) throw ValidationError("config.seed: expected an unsigned 64-bit integer");
      c.seed = doc.at("seed").get<std::uint64_t>();
    }
    if (doc.contains("stages")) {
      const auto& s = doc.at("stages");
      reject_unknown(s, {"extract", "model", "analyze", "extrapolate", "synth", "evaluate"}, "config.stages");
      c.stages.extract = s.value("extract", true);
      c.stages.model = s.value("model", true);
      c.stages.analyze = s.value("analyze", true);
      c.stages.extrapolate = s.value("extrapolate", true);
      c.stages.synth = s.value("synth", true);
      c.stages.evaluate = s.value("evaluate", true);
    }
    if (doc.contains("pu")) {
      const auto& p = doc.at("pu");
      reject_unknown(p, {"iterations", "theta_hi", "theta_lo", "tau", "negative_fraction", "epochs", "l2", "learning_rate"},
                     "config.pu");
      c.pu.iterations = p.value("iterations", c.pu.iterations);
      c.pu.theta_hi = p.value("theta_hi", c.pu.theta_hi);
      c.pu.theta_lo = p.value("theta_lo", c.pu.theta_lo);
      c.pu.tau = p.value("tau", c.pu.tau);
      c.pu.negative_fraction = p.value("negative_fraction", c.pu.negative_fraction);
      c.pu.classifier.epochs = p.value("epochs", c.pu.classifier.epochs);
      c.pu.classifier.l2 = p.value("l2", c.pu.classifier.l2);
      if (p.contains("learning_rate") && !p.at("learning_rate").is_null())
        c.pu.classifier.learning_rate = p.at("learning_rate").get<double>();
    }
    if (doc.contains("model")) {
      const auto& m = doc.at("model");
      reject_unknown(m, {"latent_dim", "grouping"}, "config.model");
      if (m.contains("latent_dim") && !m.at("latent_dim").is_null()) c.latent_dim = m.at("latent_dim").get<std::size_t>();
      if (m.contains("grouping") && !m.at("grouping").is_null()) c.grouping = m.at("grouping").get<std::string>();
    }
    if (doc.contains("analysis")) {
      const auto& a = doc.at("analysis");
      reject_unknown(a, {"kind", "per_latent", "gmm_components", "max_auto_components", "bic_gap", "kde_bandwidth"},
                     "config.analysis");
      if (a.contains("kind")) c.analysis.kind = estimator_kind_from_string(a.at("kind").get<std::string>());
      if (a.contains("per_latent"))
        for (const auto& [key, value] : a.at("per_latent").items())
          c.analysis.per_latent[std::stoul(key)] = estimator_kind_from_string(value.get<std::string>());
      c.analysis.gmm_components = a.value("gmm_components", c.analysis.gmm_components);
      c.analysis.max_auto_components = a.value("max_auto_components", c.analysis.max_auto_components);
      c.analysis.bic_gap = a.value("bic_gap", c.analysis.bic_gap);
      if (a.contains("kde_bandwidth") && !a.at("kde_bandwidth").is_null())
        c.analysis.kde_bandwidth = a.at("kde_bandwidth").get<double>();
    }
    if (doc.contains("synthesis")) {
      const auto& s = doc.at("synthesis");
      reject_unknown(s, {"count", "policy", "max_resamples", "project"}, "config.synthesis");
      c.synth_count = s.value("count", c.synth_count);
      const auto policy = s.value("policy", std::string("clamp"));
      if (policy == "clamp") c.policy = ValidityPolicy::kClamp;
      else if (policy == "reject") c.policy = ValidityPolicy::kReject;
      else throw ValidationError("config.synthesis.policy: expected clamp or reject");
      c.max_resamples = s.value("max_resamples", c.max_resamples);
      c.project_synthetic = s.value("project", false);
    }
    if (doc.contains("evaluation")) {
      const auto& e = doc.at("evaluation");
      reject_unknown(e, {"bins", "grid", "distance", "kappa", "epsilon_recon", "lambda_ind"}, "config.evaluation");
      c.bins = e.value("bins", c.bins);
      c.grid = e.value("grid", c.grid);
      if (e.contains("distance")) c.distance = distance_kind_from_string(e.at("distance").get<std::string>());
      c.kappa = e.value("kappa", c.kappa);
      c.epsilon_recon = e.value("epsilon_recon", c.epsilon_recon);
      c.lambda_ind = e.value("lambda_ind", c.lambda_ind);
    }
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

PipelineConfig load_config(const std::string& path) {
  return config_from_json(read_json_file(path), fs::path(path).parent_path().string());
}

std::vector<std::size_t> pu_features(const Schema& schema, const ExtractionQuery& q,
                                     const std::vector<std::size_t>& columns) {
  std::set<std::size_t> condition;
  for (const auto& name : q.condition.attributes()) condition.insert(schema.index_of(name));
  std::vector<std::size_t> out;
  for (auto j : columns)
    if (!condition.count(j)) out.push_back(j);
  if (out.empty())
    for (std::size_t j = 0; j < schema.size(); ++j)
      if (!condition.count(j)) out.push_back(j);
  if (out.empty()) out = columns;
  return out;
}

void run_extract(const PipelineConfig& cfg) {
  const Inputs in = load_inputs(cfg);
  const auto& q = in.request.extraction;
  std::vector<std::size_t> targets;
  for (const auto& name : q.selection) targets.push_back(in.schema.index_of(name));
  const auto columns = select_attributes(in.data, targets, in.request.alpha_c);
  ExtractionResult r = pu_extract(in.data, q, in.request.alpha_r, pu_features(in.schema, q, columns), cfg.pu,
                                  stage_seed(cfg.seed, "extract"));
  r.columns = columns;
  log::info("extract: " + std::to_string(r.rows.size()) + " rows (" + std::to_string(r.window.size()) +
            " in the target window), " + std::to_string(r.columns.size()) + " columns");
  write_json_file(artifact(cfg, kExtractionFile), extraction_to_json(r));
}

void run_model(const PipelineConfig& cfg) {
  const Inputs in = load_inputs(cfg);
  const ExtractionResult r = load_extraction(cfg);
  const Dataset slice = extracted_slice(in.data, r);
  ExternalKnowledge knowledge;
  if (cfg.knowledge) {
    knowledge = load_knowledge(*cfg.knowledge);
    knowledge.validate(in.schema);
  }
  DataModel model = fit_model(slice, RelationshipFamily{}, in.request.beta, cfg.latent_dim, knowledge,
                              ModelMetadata{r.rows, r.columns, stage_seed(cfg.seed, "model")});
  if (cfg.grouping) model = assign_subsets(model, slice, cfg.grouping);
  log::info("model: " + std::to_string(model.latent_count()) + " latents explaining " +
            format_double(model.explained_variance_fraction()) + " of the variance");
  write_json_file(artifact(cfg, kModelFile), model_to_json(model));
}

void run_analyze(const PipelineConfig& cfg) {
  const Inputs in = load_inputs(cfg);
  const ExtractionResult r = load_extraction(cfg);
  const DataModel model = load_model(cfg);
  const Representation rep = analyze(model, extracted_slice(in.data, r), cfg.analysis, stage_seed(cfg.seed, "analyze"));
  write_json_file(artifact(cfg, kRepresentationFile), representation_to_json(rep));
}

void run_extrapolate(const PipelineConfig& cfg) {
  const Inputs in = load_inputs(cfg);
  const std::string path = artifact(cfg, kExtrapolatedFile);
  if (!in.request.extrapolation) {
    log::info("extrapolate: request has no extrapolation query; nothing to do");
    fs::remove(path);
    return;
  }
  const ExtractionResult r = load_extraction(cfg);
  const DataModel model = load_model(cfg);
  const Representation rep = representation_from_json(read_json_file(artifact(cfg, kRepresentationFile)));
  const ExtrapolatedRepresentation out = extrapolate(model, rep, extracted_slice(in.data, r), *in.request.extrapolation);
  log::info("extrapolate: level " + std::to_string(static_cast<int>(out.level)));
  write_json_file(path, extrapolated_to_json(out));
}

void run_synth(const PipelineConfig& cfg) {
  const Inputs in = load_inputs(cfg);
  const DataModel model = load_model(cfg);
  json report = {{"format", "detangle.synthetic-report"}, {"version", kArtifactVersion}};
  Representation rep;
  if (use_extrapolated(cfg)) {
    const ExtrapolatedRepresentation x = extrapolated_from_json(read_json_file(artifact(cfg, kExtrapolatedFile)));
    rep = x.representation;
    report["source"] = kExtrapolatedFile;
    report["level"] = static_cast<int>(x.level);
    report["ess"] = x.ess;
    report["warnings"] = x.warnings;
  } else {
    rep = representation_from_json(read_json_file(artifact(cfg, kRepresentationFile)));
    report["source"] = kRepresentationFile;
  }
  SynthesisSpec spec;
  spec.count = cfg.synth_count;
  spec.policy = cfg.policy;
  spec.max_resamples = cfg.max_resamples;
  spec.seed = stage_seed(cfg.seed, "synth");
  Dataset out = synthesize(model, rep, spec);
  if (cfg.project_synthetic && in.request.extrapolation) {
    std::vector<std::size_t> cols;
    for (const auto& name : in.request.extrapolation->selection) cols.push_back(model.schema.index_of(name));
    std::sort(cols.begin(), cols.end());
    std::vector<std::size_t> all(out.rows());
    std::iota(all.begin(), all.end(), 0);
    out = out.slice(all, cols);
  }
  report["rows"] = out.rows();
  report["columns"] = out.schema().names();
  report["seed"] = spec.seed;
  write_csv(artifact(cfg, kSyntheticFile), out);
  write_json_file(artifact(cfg, kSyntheticReportFile), report);
}

MetricReport run_evaluate(const PipelineConfig& cfg) {
  const Inputs in = load_inputs(cfg);
  const ExtractionResult r = load_extraction(cfg);
  const DataModel model = load_model(cfg);
  const Representation rep = representation_from_json(read_json_file(artifact(cfg, kRepresentationFile)));
  const Dataset slice = extracted_slice(in.data, r);
  const Eigen::MatrixXd Z = encode_data(model, slice);
  const auto& req = in.request;
  MetricReport m;

  double min_p = 1.0;
  for (auto i : r.rows)
    if (auto it = r.probabilities.find(i); it != r.probabilities.end()) min_p = std::min(min_p, it->second);
  m.add("covering.min_probability", min_p, "probability", r.tau, check_covering(r, r.tau));
  const auto row_budget = budget_count(req.alpha_r, in.data.rows());
  const auto col_budget = budget_count(req.alpha_c, in.data.cols());
  m.add("budget.rows", static_cast<double>(r.rows.size()), "rows", static_cast<double>(row_budget),
        r.rows.size() <= row_budget);
  m.add("budget.columns", static_cast<double>(r.columns.size()), "columns", static_cast<double>(col_budget),
        r.columns.size() <= col_budget);
  m.add("compactness.latents", static_cast<double>(model.latent_count()), "latents", static_cast<double>(req.beta),
        model.latent_count() <= static_cast<std::size_t>(req.beta));
  m.add("model.explained_variance", model.explained_variance_fraction(), "ratio");

  const double recon = recon_error(model, slice);
  m.add("reconstruction.mse", recon, "squared encoded units", cfg.epsilon_recon,
        is_reconstructable(recon, cfg.epsilon_recon));
  const double psi_cov = independence_psi(Z, PsiKind::kCov, cfg.bins);
  m.add("independence.psi_cov", psi_cov, "correlation", cfg.kappa, is_kappa_independent(psi_cov, cfg.kappa));
  m.add("independence.psi_mi", independence_psi(Z, PsiKind::kMi, cfg.bins), "nats");

  // Positions of the selected attributes (and the utility attribute) inside the extracted columns.
  auto position = [&](const std::string& name) {
    const auto j = in.schema.index_of(name);
    return static_cast<std::size_t>(std::find(r.columns.begin(), r.columns.end(), j) - r.columns.begin());
  };
  std::vector<std::size_t> targets;
  for (const auto& name : req.extraction.selection) targets.push_back(position(name));
  std::vector<std::size_t> utility = targets;
  if (req.objective.utility) utility = {position(*req.objective.utility)};
  const double h_uti = cond_entropy(columns_of(slice, utility), Z, cfg.bins);
  const double h_pri = privacy_entropy(Z, cfg.bins);
  std::vector<std::size_t> all(slice.cols());
  std::iota(all.begin(), all.end(), 0);
  const double h_data = cond_entropy(columns_of(slice, all), Z, cfg.bins);
  m.add("entropy.utility", h_uti, "nats");
  m.add("entropy.privacy", h_pri, "nats");
  m.add("entropy.data", h_data, "nats");
  m.add("objective.phi", phi(h_uti, h_pri, req.objective.lambda), "nats");
  m.add("objective.xi", xi(h_data, psi_cov, cfg.lambda_ind), "nats");
  m.add("mutual_info.average", avg_mutual_info(Z, columns_of(slice, targets), cfg.bins), "nats");
  m.add("representation.compatible", is_compatible(rep, model) ? 1.0 : 0.0, "bool", std::nullopt,
        is_compatible(rep, model));
  if (use_extrapolated(cfg)) {
    const auto x = extrapolated_from_json(read_json_file(artifact(cfg, kExtrapolatedFile)));
    m.add("extrapolation.level", static_cast<double>(x.level), "level");
    if (!x.ess.empty())
      m.add("extrapolation.min_ess", *std::min_element(x.ess.begin(), x.ess.end()), "samples", kEssWarning,
            *std::min_element(x.ess.begin(), x.ess.end()) >= kEssWarning);
    m.add("extrapolation.shift", extrapolation_accuracy(x, rep, cfg.distance, cfg.grid),
          cfg.distance == DistanceKind::kKl ? "nats" : "probability");
    m.add("extrapolation.mass_shift",
          stat_distance(x.representation.subset_mass, rep.subset_mass, cfg.distance),
          cfg.distance == DistanceKind::kKl ? "nats" : "probability");
    m.add("extrapolation.compatible", is_compatible(x.representation, model) ? 1.0 : 0.0, "bool", std::nullopt,
          is_compatible(x.representation, model));
  }
  write_text_file(artifact(cfg, kMetricsFile), m.to_key_value());
  write_json_file(artifact(cfg, kMetricsJsonFile), m.to_json());
  return m;
}

void run_stage(const std::string& stage, const PipelineConfig& cfg) {
  struct Step {
    const char* name;
    bool enabled;
    void (*run)(const PipelineConfig&);
  };
  const Step steps[] = {
      {"extract", cfg.stages.extract, run_extract},
      {"model", cfg.stages.model, run_model},
      {"analyze", cfg.stages.analyze, run_analyze},
      {"extrapolate", cfg.stages.extrapolate, run_extrapolate},
      {"synth", cfg.stages.synth, run_synth},
      {"evaluate", cfg.stages.evaluate, [](const PipelineConfig& c) { run_evaluate(c); }},
  };
  auto execute = [&](const Step& s) {
    try {
      fs::create_directories(cfg.output);
      log::info(std::string("running stage ") + s.name);
      s.run(cfg);
    } catch (const std::exception& e) {
      throw StageError(s.name, e.what());
    }
  };
  if (stage == "pipeline") {
    for (const auto& s : steps)
      if (s.enabled) execute(s);
    return;
  }
  for (const auto& s : steps)
    if (stage == s.name) return execute(s);
  throw ValidationError("unknown stage \"" + stage + "\"");
}

}  // namespace detangle
