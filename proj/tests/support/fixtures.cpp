#include "fixtures.hpp"

#include "demo_data.hpp"
#include "detangle/random.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace fixtures {

using detangle::AttributeSpace;
using detangle::Interval;
using detangle::Rng;

Schema continuous_schema(std::size_t m, const std::string& prefix) {
  std::vector<AttributeSpace> attrs;
  for (std::size_t j = 0; j < m; ++j) attrs.push_back(AttributeSpace::continuous(prefix + std::to_string(j + 1)));
  return Schema(std::move(attrs));
}

Dataset from_rows(const Schema& schema, const std::vector<std::vector<double>>& rows) {
  Eigen::MatrixXd cells(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(schema.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < schema.size(); ++j)
      cells(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i].at(j);
  return Dataset(schema, std::move(cells));
}

Eigen::VectorXd column(const Dataset& d, std::size_t j) { return d.cells().col(static_cast<Eigen::Index>(j)); }

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("detangle-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

PuBenchmark two_cluster_benchmark(std::uint64_t seed) {
  Schema schema({AttributeSpace::categorical_of("window", {"no", "yes"}), AttributeSpace::continuous("x"),
                 AttributeSpace::continuous("y")});
  Rng rng(seed);
  const std::size_t labelled = 50, unlabeled = 200;
  Eigen::MatrixXd cells(labelled + unlabeled, 3);
  std::vector<char> hidden(labelled + unlabeled, 0);
  for (std::size_t i = 0; i < labelled + unlabeled; ++i) {
    const bool positive = i < labelled || i < labelled + unlabeled / 2;
    const double c = positive ? 2.0 : -2.0;
    const auto r = static_cast<Eigen::Index>(i);
    cells(r, 0) = i < labelled ? 1.0 : 0.0;
    cells(r, 1) = c + 0.5 * rng.normal();
    cells(r, 2) = c + 0.5 * rng.normal();
    hidden[i] = positive && i >= labelled;
  }
  PuBenchmark b;
  b.data = Dataset(schema, std::move(cells));
  b.query.condition = detangle::ConditionExpr::compare("window", detangle::CompareOp::kEq, std::string("yes"));
  b.query.selection = {"x", "y"};
  b.hidden_positive = std::move(hidden);
  b.features = {1, 2};
  return b;
}

Dataset gender_dataset(std::size_t n, double p_female, std::uint64_t seed) {
  Schema schema({AttributeSpace::categorical_of("gender", {"F", "M", "X"}),
                 AttributeSpace::continuous("height", Interval{120, 220}),
                 AttributeSpace::continuous("weight", Interval{30, 160})});
  Rng rng(seed);
  Eigen::MatrixXd cells(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    const bool female = rng.uniform() < p_female;
    const double height = std::clamp((female ? 163.0 : 177.0) + 7.0 * rng.normal(), 120.0, 220.0);
    const double weight = std::clamp(0.9 * (height - 100.0) + (female ? -4.0 : 4.0) + 6.0 * rng.normal(), 30.0, 160.0);
    cells.row(static_cast<Eigen::Index>(i)) << (female ? 0.0 : 1.0), height, weight;
  }
  return Dataset(schema, std::move(cells));
}

detangle::PipelineConfig write_demo(const std::filesystem::path& dir, std::size_t rows, std::uint64_t seed) {
  detangle::demo::write_demo(dir, rows, seed);
  return detangle::load_config((dir / "config.json").string());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fixtures
