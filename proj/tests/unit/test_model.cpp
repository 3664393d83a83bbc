#include "detangle/metrics.hpp"
#include "detangle/model.hpp"
#include "detangle/random.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace detangle;

namespace {

DataModel fit(const Dataset& d, int beta, std::optional<std::size_t> dim, const ExternalKnowledge& ek = {}) {
  return fit_model(d, RelationshipFamily{}, beta, dim, ek, ModelMetadata{});
}

// Rank-2 data embedded in five continuous columns.
Dataset rank_two(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd A(2, 5);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = rng.normal();
  Eigen::MatrixXd cells(static_cast<Eigen::Index>(n), 5);
  for (Eigen::Index i = 0; i < cells.rows(); ++i) {
    Eigen::RowVector2d f(rng.normal(), 3.0 * rng.normal());
    cells.row(i) = f * A + Eigen::RowVectorXd::LinSpaced(5, 1, 5);
  }
  return Dataset(fixtures::continuous_schema(5), cells);
}

Dataset mixed(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const Schema s({AttributeSpace::categorical_of("g", {"a", "b"}), AttributeSpace::continuous("x", Interval{0, 100}),
                  AttributeSpace::continuous("y")});
  Eigen::MatrixXd cells(static_cast<Eigen::Index>(n), 3);
  for (Eigen::Index i = 0; i < cells.rows(); ++i) {
    const double g = rng.uniform() < 0.5 ? 0 : 1;
    const double x = std::clamp(50 + 10 * g + 5 * rng.normal(), 0.0, 100.0);
    cells.row(i) << g, x, 0.5 * x + rng.normal();
  }
  return Dataset(s, cells);
}

}  // namespace

TEST_CASE("exact rank-2 data reconstructs at two latents") {
  const Dataset d = rank_two(300, 4);
  const DataModel m = fit(d, 3, 2);
  const double err = recon_error(m, d);
  CHECK(err <= 1e-8);
  CHECK(std::abs(err - oracles::rank_k_residual(centered_encoding(m, d), 2)) <= 1e-6);
}

TEST_CASE("loadings are orthonormal and latents uncorrelated") {
  const Dataset d = mixed(400, 3);
  const DataModel m = fit(d, 4, 3);
  const Eigen::MatrixXd WWt = m.loadings * m.loadings.transpose();
  CHECK((WWt - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-8);
  const Eigen::MatrixXd Z = encode_data(m, d);
  const Eigen::MatrixXd cov = Z.transpose() * Z / static_cast<double>(d.rows());
  for (int a = 0; a < 3; ++a) {
    CHECK(std::abs(Z.col(a).mean()) <= 1e-8);
    for (int b = 0; b < 3; ++b)
      if (a != b) CHECK(std::abs(cov(a, b)) <= 1e-6);
  }
}

TEST_CASE("full latent dimension round-trips") {
  const Dataset d = mixed(100, 8);
  const DataModel m = fit(d, 4, 4);
  const Dataset back = decode_latents(m, encode_data(m, d));
  for (std::size_t i = 0; i < d.rows(); ++i) {
    CHECK(back.at(i, 0) == d.at(i, 0));
    CHECK(std::abs(back.at(i, 1) - d.at(i, 1)) <= 1e-6);
    CHECK(std::abs(back.at(i, 2) - d.at(i, 2)) <= 1e-6);
  }
}

TEST_CASE("reconstruction error is non-increasing in the latent count") {
  const Dataset d = mixed(200, 12);
  double prev = INFINITY;
  for (std::size_t k = 1; k <= 4; ++k) {
    const double e = recon_error(fit(d, 4, k), d);
    CHECK(e <= prev + 1e-12);
    prev = e;
  }
}

TEST_CASE("isotropic 2-D data splits variance evenly") {
  Rng rng(21);
  Eigen::MatrixXd cells(5000, 2);
  for (Eigen::Index i = 0; i < cells.size(); ++i) cells.data()[i] = rng.normal();
  const Dataset d(fixtures::continuous_schema(2), cells);
  const DataModel m = fit(d, 1, 1);
  CHECK(m.explained_variance_fraction() == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("mean record encodes to the origin and the origin decodes to it") {
  const Dataset d = rank_two(50, 1);
  const DataModel m = fit(d, 2, 2);
  const Eigen::RowVectorXd mean = d.cells().colwise().mean();
  const Dataset one(d.schema(), mean);
  const Eigen::MatrixXd z = encode_data(m, one);
  CHECK(z.rows() == 1);
  CHECK(z.cwiseAbs().maxCoeff() <= 1e-8);
  const Record r = decode_latent(m, Eigen::VectorXd::Zero(2)).record;
  CHECK((r - mean).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("decoding clamps to the declared domain") {
  const Dataset d = mixed(100, 2);
  const DataModel m = fit(d, 2, 2);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(2);
  z(0) = 1e6;
  const DecodeResult r = decode_latent(m, z);
  CHECK(r.clamped);
  CHECK((r.record(1) == 0.0 || r.record(1) == 100.0));
  CHECK_THROWS(decode_latents(m, Eigen::MatrixXd::Zero(1, 3)));
}

TEST_CASE("model errors") {
  const Dataset d = mixed(10, 1);
  CHECK_THROWS_AS(fit(d, 1, 2), BudgetError);
  CHECK_THROWS_AS(fit(d, 0, std::nullopt), BudgetError);
  CHECK_THROWS_AS(fit(fixtures::from_rows(fixtures::continuous_schema(2), {{1, 2}}), 1, 1), NumericError);
  CHECK_THROWS(encode_data(fit(d, 2, 2), fixtures::gender_dataset(5, 0.5, 1)));
}

TEST_CASE("default latent count respects the budget and the variance rule") {
  const Dataset d = rank_two(200, 5);
  CHECK(fit(d, 5, std::nullopt).latent_count() == 2);
  CHECK(fit(d, 1, std::nullopt).latent_count() == 1);
}

TEST_CASE("fitting is deterministic") {
  const Dataset d = mixed(150, 6);
  CHECK(fit(d, 3, 3).loadings == fit(d, 3, 3).loadings);
}

TEST_CASE("a functional dependency is dropped and restored") {
  Rng rng(4);
  const Schema s({AttributeSpace::continuous("income"), AttributeSpace::continuous("spend"),
                  AttributeSpace::continuous("tax")});
  Eigen::MatrixXd cells(100, 3);
  for (int i = 0; i < 100; ++i) {
    const double income = 100 + 20 * rng.normal();
    cells.row(i) << income, 0.3 * income + rng.normal(), 0.2 * income;
  }
  const Dataset d(s, cells);
  ExternalKnowledge ek;
  ek.dependencies.push_back({{"income"}, "tax", "flat"});
  const DataModel m = fit(d, 2, 2, ek);
  CHECK(m.modeled_width() == 2);
  CHECK(m.dependents.size() == 1);
  const Dataset back = decode_latents(m, encode_data(m, d));
  for (std::size_t i = 0; i < d.rows(); ++i) CHECK(std::abs(back.at(i, 2) - 0.2 * back.at(i, 0)) <= 1e-8);
}

TEST_CASE("subsets follow the grouping attribute") {
  const Dataset d = mixed(120, 9);
  DataModel m = fit(d, 2, 2);
  for (const auto& z : m.latents) CHECK(z.subsets.size() == 1);

  m = assign_subsets(m, d, std::string("g"));
  for (const auto& z : m.latents) {
    REQUIRE(z.subsets.size() == 2);
    std::vector<std::size_t> all = z.subsets[0];
    all.insert(all.end(), z.subsets[1].begin(), z.subsets[1].end());
    std::sort(all.begin(), all.end());
    CHECK(all.size() == d.rows());
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
    for (auto i : z.subsets[0]) CHECK(d.at(i, 0) == 0.0);
  }
  CHECK_THROWS_AS(assign_subsets(m, d, std::string("x")), ValidationError);

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < d.rows(); ++i)
    if (d.at(i, 0) == 1.0) rows.push_back(i);
  const std::vector<std::size_t> cols{0, 1, 2};
  const Dataset only_b = d.slice(rows, cols);
  DataModel mb = assign_subsets(fit(only_b, 2, 2), only_b, std::string("g"));
  CHECK(mb.latents[0].subsets.size() == 1);
}
