#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <random>
#include <string>

#include "semitrans/io.hpp"

using namespace semitrans;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/semitrans_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
  void write(const std::string& content) const {
    std::ofstream out(path);
    out << content;
  }
};

} // namespace

TEST_CASE("dataset CSV round trip is exact") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = 37;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = gauss(rng) * 1e-3;
    x(i, 1) = gauss(rng) * 1e5;
    y[i] = gauss(rng);
  }
  const Dataset data(x, y);
  TempFile tmp("roundtrip.csv");
  write_dataset_csv(data, tmp.path);
  const Dataset back = read_dataset_csv(tmp.path);
  REQUIRE(back.n() == data.n());
  REQUIRE(back.dim() == data.dim());
  CHECK(back.x == data.x);
  CHECK(back.y == data.y);
}

TEST_CASE("dimension is inferred from the header") {
  TempFile tmp("dims.csv");
  tmp.write("x1,y\n0.5,1.0\n0.7,2.0\n");
  const Dataset d1 = read_dataset_csv(tmp.path);
  CHECK(d1.n() == 2);
  CHECK(d1.dim() == 1);

  tmp.write("x1,x2,y\n0.5,0.1,1.0\n0.7,0.2,2.0\n");
  const Dataset d2 = read_dataset_csv(tmp.path);
  CHECK(d2.dim() == 2);
}

TEST_CASE("CRLF line endings are accepted") {
  TempFile tmp("crlf.csv");
  tmp.write("x1,y\r\n0.5,1.0\r\n0.7,2.0\r\n");
  const Dataset d = read_dataset_csv(tmp.path);
  CHECK(d.n() == 2);
  CHECK(d.y[1] == 2.0);
}

TEST_CASE("read errors identify the offender") {
  TempFile tmp("bad.csv");

  SECTION("non-numeric cell names the line") {
    tmp.write("x1,y\n0.5,1.0\n0.7,NaN\n");
    CHECK_THROWS_WITH(read_dataset_csv(tmp.path), Catch::Matchers::ContainsSubstring("line 3"));
  }

  SECTION("missing y column") {
    tmp.write("x1,x2\n0.5,1.0\n");
    CHECK_THROWS_WITH(read_dataset_csv(tmp.path), Catch::Matchers::ContainsSubstring("'y'"));
  }

  SECTION("empty file") {
    tmp.write("");
    CHECK_THROWS(read_dataset_csv(tmp.path));
  }

  SECTION("header only") {
    tmp.write("x1,y\n");
    CHECK_THROWS_WITH(read_dataset_csv(tmp.path), Catch::Matchers::ContainsSubstring("no data rows"));
  }

  SECTION("ragged row") {
    tmp.write("x1,y\n0.5\n");
    CHECK_THROWS_WITH(read_dataset_csv(tmp.path), Catch::Matchers::ContainsSubstring("line 2"));
  }

  SECTION("missing file") {
    CHECK_THROWS_WITH(read_dataset_csv("/tmp/definitely_not_here.csv"),
                      Catch::Matchers::ContainsSubstring("cannot open"));
  }
}
