#include <gpm/types.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace gpm;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  f << content;
}

}  // namespace

TEST_CASE("csv loading maps discrete codes in appearance order") {
  const std::string path = temp_path("gpm_types_basic.csv");
  write_file(path, "x,y\nc,d:2\n0.5,a\n1.0,b\n");
  Dataset ds = load_dataset_csv(path);
  REQUIRE(ds.n() == 2);
  REQUIRE(ds.schema.is_continuous(0));
  REQUIRE(ds.schema.is_discrete(1));
  REQUIRE(ds.schema.cardinality(1) == 2);
  CHECK(ds.rows(0, 0) == 0.5);
  CHECK(ds.rows(0, 1) == 0.0);
  CHECK(ds.rows(1, 0) == 1.0);
  CHECK(ds.rows(1, 1) == 1.0);
  CHECK(ds.schema.var(1).codes == std::vector<std::string>{"a", "b"});
}

TEST_CASE("csv loading rejects an empty data section") {
  const std::string path = temp_path("gpm_types_empty.csv");
  write_file(path, "x,y\nc,d:2\n");
  REQUIRE_THROWS_WITH(load_dataset_csv(path), Catch::Matchers::ContainsSubstring("n >= 1"));
}

TEST_CASE("csv loading names the offending cell for unknown categories") {
  const std::string path = temp_path("gpm_types_badcat.csv");
  write_file(path, "x,y\nc,d:2\n0.5,z\n");
  Schema schema({continuous_var("x"), discrete_var("y", {"a", "b"})});
  try {
    load_dataset_csv(path, schema);
    FAIL("expected an error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 1") != std::string::npos);
    CHECK(msg.find("col 2") != std::string::npos);
    CHECK(msg.find("z") != std::string::npos);
  }
}

TEST_CASE("csv loading reports missing values") {
  const std::string path = temp_path("gpm_types_missing.csv");
  write_file(path, "x,y\nc,c\n0.5,\n");
  REQUIRE_THROWS_WITH(load_dataset_csv(path),
                      Catch::Matchers::ContainsSubstring("missing value"));
}

TEST_CASE("standardize centers to population sd one") {
  Schema schema({continuous_var("x")});
  Eigen::MatrixXd rows(3, 1);
  rows << 1, 2, 3;
  auto [out, rec] = standardize(Dataset{schema, rows});
  CHECK_THAT(out.rows(0, 0), Catch::Matchers::WithinAbs(-std::sqrt(1.5), 1e-14));
  CHECK_THAT(out.rows(1, 0), Catch::Matchers::WithinAbs(0.0, 1e-14));
  CHECK_THAT(out.rows(2, 0), Catch::Matchers::WithinAbs(std::sqrt(1.5), 1e-14));
  CHECK_THAT(out.rows.col(0).mean(), Catch::Matchers::WithinAbs(0.0, 1e-14));
  const double sd = std::sqrt(out.rows.col(0).array().square().mean());
  CHECK_THAT(sd, Catch::Matchers::WithinAbs(1.0, 1e-14));
}

TEST_CASE("standardize leaves constant columns centered with unit scale") {
  Schema schema({continuous_var("x")});
  Eigen::MatrixXd rows(3, 1);
  rows << 5, 5, 5;
  auto [out, rec] = standardize(Dataset{schema, rows});
  CHECK(out.rows.col(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(rec.columns[0].scale == 1.0);
  CHECK(rec.columns[0].shift == 5.0);
}

TEST_CASE("standardize is the identity on all-discrete data") {
  Schema schema({discrete_var("a", 2), discrete_var("b", 3)});
  Eigen::MatrixXd rows(4, 2);
  rows << 0, 1, 1, 2, 0, 0, 1, 1;
  auto [out, rec] = standardize(Dataset{schema, rows});
  CHECK(out.rows == rows);
}

TEST_CASE("standardize is idempotent and invertible") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss(3.0, 2.5);
  Schema schema({continuous_var("x"), continuous_var("y"), discrete_var("k", 3)});
  Eigen::MatrixXd rows(50, 3);
  for (int i = 0; i < 50; ++i) {
    rows(i, 0) = gauss(rng);
    rows(i, 1) = gauss(rng) * 0.1;
    rows(i, 2) = static_cast<double>(rng() % 3);
  }
  Dataset ds{schema, rows};
  auto [once, rec] = standardize(ds);
  auto [twice, rec2] = standardize(once);
  CHECK((twice.rows - once.rows).cwiseAbs().maxCoeff() <= 1e-12);
  Dataset back = unstandardize(once, rec);
  CHECK((back.rows - ds.rows).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("csv round trip is exact") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Schema schema({continuous_var("x"), discrete_var("y", {"lo", "hi"})});
  Eigen::MatrixXd rows(20, 2);
  for (int i = 0; i < 20; ++i) {
    rows(i, 0) = gauss(rng) * std::pow(10.0, static_cast<int>(rng() % 7) - 3);
    rows(i, 1) = static_cast<double>(rng() % 2);
  }
  Dataset ds{schema, rows};
  const std::string path = temp_path("gpm_types_roundtrip.csv");
  save_dataset_csv(ds, path);
  Dataset loaded = load_dataset_csv(path, schema);
  REQUIRE(loaded.schema == ds.schema);
  CHECK(loaded.rows == ds.rows);  // bit-exact

  // schema-less reload recovers the same labels, with codes in appearance order
  Dataset inferred = load_dataset_csv(path);
  for (int i = 0; i < ds.n(); ++i) {
    const auto& codes = inferred.schema.var(1).codes;
    CHECK(codes[static_cast<int>(inferred.rows(i, 1))] ==
          schema.var(1).codes[static_cast<int>(ds.rows(i, 1))]);
  }
}

TEST_CASE("json round trip preserves schema and cells") {
  Schema schema({continuous_var("x"), discrete_var("y", {"a", "b", "c"})});
  Eigen::MatrixXd rows(2, 2);
  rows << 0.25, 2, -1.5, 0;
  Dataset ds{schema, rows};
  Dataset back = dataset_from_json(dataset_to_json(ds));
  CHECK(back.schema == ds.schema);
  CHECK(back.rows == ds.rows);
}

TEST_CASE("schema validation rejects duplicates and bad cardinalities") {
  CHECK_THROWS_AS(Schema({continuous_var("x"), continuous_var("x")}), DataError);
  CHECK_THROWS_AS(Schema({discrete_var("y", 1)}), DataError);
  VariableSpec broken = discrete_var("y", 3);
  broken.codes.pop_back();
  CHECK_THROWS_AS(Schema({broken}), DataError);
}

TEST_CASE("dataset validation rejects out-of-range categories") {
  Schema schema({discrete_var("y", 2)});
  Eigen::MatrixXd rows(1, 1);
  rows << 2;
  CHECK_THROWS_AS((Dataset{schema, rows}).validate(), DataError);
  rows << 0.5;
  CHECK_THROWS_AS((Dataset{schema, rows}).validate(), DataError);
}
