#pragma once

// Shared data generators for the unit and acceptance tests.

#include "detangle/core_data.hpp"
#include "detangle/pipeline.hpp"
#include "detangle/request.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fixtures {

using detangle::Dataset;
using detangle::Schema;

Schema continuous_schema(std::size_t m, const std::string& prefix = "x");
Dataset from_rows(const Schema& schema, const std::vector<std::vector<double>>& rows);
Eigen::VectorXd column(const Dataset& d, std::size_t j);

/// Removed with its contents on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

/// 50 labelled rows from N((2,2), 0.25 I) plus 200 unlabeled rows, half from
/// the same cluster and half from N((-2,-2), 0.25 I). Attributes:
/// window{no,yes}, x, y.
struct PuBenchmark {
  Dataset data;
  detangle::ExtractionQuery query;
  std::vector<char> hidden_positive;  // per row
  std::vector<std::size_t> features;  // x, y
};
PuBenchmark two_cluster_benchmark(std::uint64_t seed);

/// gender{F,M,X} (X declared, never observed) with P(F) = p_female, plus
/// height and weight that shift with gender.
Dataset gender_dataset(std::size_t n, double p_female, std::uint64_t seed);

/// Writes the make_demo files into `dir` and loads the config they include.
detangle::PipelineConfig write_demo(const std::filesystem::path& dir, std::size_t rows, std::uint64_t seed);

std::string read_file(const std::string& path);

}  // namespace fixtures
