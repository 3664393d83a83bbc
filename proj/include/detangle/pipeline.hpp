#pragma once

#include "detangle/analyze.hpp"
#include "detangle/extract.hpp"
#include "detangle/metrics.hpp"
#include "detangle/synth.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace detangle {

struct StageToggles {
  bool extract = true;
  bool model = true;
  bool analyze = true;
  bool extrapolate = true;
  bool synth = true;
  bool evaluate = true;
};

struct PipelineConfig {
  // Paths; relative ones are resolved against the config file's directory.
  std::string data;
  std::string schema;
  std::string request;
  std::optional<std::string> knowledge;
  std::string output = "out";

  std::uint64_t seed = 0;
  StageToggles stages;

  PuParams pu;
  std::optional<std::size_t> latent_dim;
  std::optional<std::string> grouping;
  AnalyzeConfig analysis;

  std::size_t synth_count = 1000;
  ValidityPolicy policy = ValidityPolicy::kClamp;
  int max_resamples = 100;
  bool project_synthetic = false;  // emit only the extrapolation selection

  int bins = kDefaultBins;
  int grid = kDefaultGrid;
  DistanceKind distance = DistanceKind::kTv;
  double kappa = 0.1;
  double epsilon_recon = 0.1;
  double lambda_ind = 1.0;
};

PipelineConfig config_from_json(const nlohmann::json& doc, const std::string& base_dir);
PipelineConfig load_config(const std::string& path);

/// An error raised inside a named pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause)
      : Error("stage " + stage + ": " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Artifact file names inside the output directory.
inline constexpr const char* kExtractionFile = "extraction.json";
inline constexpr const char* kModelFile = "model.json";
inline constexpr const char* kRepresentationFile = "representation.json";
inline constexpr const char* kExtrapolatedFile = "extrapolated.json";
inline constexpr const char* kSyntheticFile = "synthetic.csv";
inline constexpr const char* kSyntheticReportFile = "synthetic.report.json";
inline constexpr const char* kMetricsFile = "metrics.txt";
inline constexpr const char* kMetricsJsonFile = "metrics.json";

/// Each stage reads its inputs from the config and the artifacts of earlier
/// stages in the output directory, and writes its own artifact there.
void run_extract(const PipelineConfig& cfg);
void run_model(const PipelineConfig& cfg);
void run_analyze(const PipelineConfig& cfg);
void run_extrapolate(const PipelineConfig& cfg);
void run_synth(const PipelineConfig& cfg);
MetricReport run_evaluate(const PipelineConfig& cfg);

/// Runs `stage` ("extract", ..., "evaluate", or "pipeline" for every
/// enabled stage in order). Failures are rethrown as StageError.
void run_stage(const std::string& stage, const PipelineConfig& cfg);

/// The PU feature columns: the extracted columns without the attributes
/// the extraction condition reads. When that is empty, every other
/// attribute of the schema; when that is empty too, all extracted columns.
std::vector<std::size_t> pu_features(const Schema& schema, const ExtractionQuery& q,
                                     const std::vector<std::size_t>& columns);

std::uint64_t stage_seed(std::uint64_t seed, const std::string& stage);

}  // namespace detangle
