#include "demo_data.hpp"

#include "detangle/persist.hpp"
#include "detangle/random.hpp"

#include <algorithm>
#include <cmath>

namespace detangle::demo {

using nlohmann::json;

void write_demo(const std::filesystem::path& dir, std::size_t n, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  Schema schema({
      AttributeSpace::categorical_of("segment", {"A", "B", "C", "D"}),
      AttributeSpace::categorical_of("gender", {"F", "M"}),
      AttributeSpace::continuous("age", Interval{18, 90}),
      AttributeSpace::continuous("income", Interval{0, 500}),
      AttributeSpace::continuous("spend", Interval{0, 300}),
      AttributeSpace::continuous("tenure", Interval{0, 40}),
      AttributeSpace::continuous("tax", Interval{0, 100}),
  });

  Rng rng(seed);
  Eigen::MatrixXd cells(static_cast<Eigen::Index>(n), 7);
  // Segments A and B share their income profile; C and D sit lower.
  const double income_mean[] = {120, 115, 60, 55};
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double seg = static_cast<double>(rng.index(4));
    const double gender = rng.uniform() < 0.5 ? 0.0 : 1.0;
    const double age = std::clamp(40.0 + 12.0 * rng.normal(), 18.0, 90.0);
    const double income =
        std::clamp(income_mean[static_cast<int>(seg)] + 0.8 * (age - 40.0) + 20.0 * rng.normal(), 0.0, 500.0);
    const double spend = std::clamp(0.4 * income + 10.0 * gender + 8.0 * rng.normal(), 0.0, 300.0);
    const double tenure = std::clamp(0.25 * (age - 18.0) + 3.0 * rng.normal(), 0.0, 40.0);
    const double tax = std::round(0.2 * income * 100.0) / 100.0;
    cells.row(r) << seg, gender, std::round(age * 10) / 10, std::round(income * 100) / 100,
        std::round(spend * 100) / 100, std::round(tenure * 10) / 10, tax;
  }
  write_csv((dir / "data.csv").string(), Dataset(schema, cells));
  write_json_file((dir / "schema.json").string(), schema_to_json(schema));

  write_json_file((dir / "knowledge.json").string(),
                  json{{"dependencies", json::array({{{"sources", {"income"}},
                                                      {"target", "tax"},
                                                      {"description", "flat 20% income tax"}}})}});

  write_json_file((dir / "request.json").string(),
                  json{{"extraction",
                        {{"condition", json::array({"==", "segment", "A"})}, {"select", {"gender", "income", "spend"}}}},
                       {"extrapolation",
                        {{"select", {"gender", "income"}},
                         {"condition",
                          json::array({{{"attribute", "gender"},
                                        {"marginal", {{"kind", "categorical"}, {"probabilities", {{"F", 0.7}, {"M", 0.3}}}}}}})}}},
                       {"objective", {{"utility", "spend"}, {"lambda", 1.0}}},
                       {"alpha_r", 0.5},
                       {"alpha_c", 0.75},
                       {"beta", 3}});

  write_json_file((dir / "config.json").string(),
                  json{{"data", "data.csv"},
                       {"schema", "schema.json"},
                       {"request", "request.json"},
                       {"knowledge", "knowledge.json"},
                       {"output", "out"},
                       {"seed", 2024},
                       {"model", {{"grouping", "gender"}}},
                       {"analysis", {{"kind", "auto"}}},
                       {"synthesis", {{"count", 1000}, {"policy", "clamp"}}},
                       {"evaluation", {{"bins", 10}, {"kappa", 0.1}, {"epsilon_recon", 0.5}}}});
}

}  // namespace detangle::demo
