#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "commands.hpp"
#include "rankstat/spectral.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <sstream>

using namespace rankstat;

namespace {

const std::string data = RANKSTAT_TEST_DATA;

cli::Config config(const std::string& cmd) {
  cli::Config c;
  c.command = cmd;
  c.input = data + "/diag2.problem";
  c.point = data + "/diag2.point";
  return c;
}

}  // namespace

TEST_CASE("certify exit codes follow the report status") {
  std::ostringstream out;
  cli::Config c = config("certify");
  c.kind = "DC";
  c.rho = 1.0;
  CHECK(cli::run_certify(c, out) == cli::kVerified);
  CHECK(out.str().find("status Verified") != std::string::npos);

  c.kind = "R";
  c.point = data + "/half.point";
  std::ostringstream r;
  CHECK(cli::run_certify(c, r) == cli::kRefuted);
  CHECK(r.str().find("status Refuted") != std::string::npos);

  c.kind = "Q";
  std::ostringstream q;
  CHECK_THROWS_AS(cli::run_certify(c, q), Error);
}

TEST_CASE("solve then certify the fixed point") {
  cli::Config c = config("solve");
  c.point.clear();
  c.rho = 0.5;
  std::ostringstream out;
  CHECK(cli::run_solve(c, out) == 0);
  const std::string s = out.str();
  const auto pos = s.find("\nX\n");
  REQUIRE(pos != std::string::npos);
  std::istringstream in(s.substr(pos + 3));
  const Matrix X = read_matrix(in);
  CHECK(X(0, 0) == doctest::Approx(5.0 / 3.0).epsilon(1e-6));

  const auto path = (std::filesystem::temp_directory_path() / "rankstat_fixed_point.txt").string();
  save_matrix(path, X);
  cli::Config d = config("certify");
  d.kind = "DC";
  d.point = path;
  d.rho = 0.5;
  d.tol = 1e-6;
  std::ostringstream rep;
  CHECK(cli::run_certify(d, rep) == cli::kVerified);
  std::remove(path.c_str());
}

TEST_CASE("relate, validate-phi and the example") {
  std::ostringstream a;
  CHECK(cli::run_relate(config("relate"), a) == 0);
  CHECK(a.str().find("VIOLATED") == std::string::npos);

  cli::Config v = config("validate-phi");
  std::ostringstream b;
  CHECK(cli::run_validate_phi(v, b) == 0);
  CHECK(b.str().find("FAIL") == std::string::npos);

  cli::Config e = config("example-mpscc");
  std::ostringstream c1, c2;
  CHECK(cli::run_example_mpscc(e, c1) == 0);
  CHECK(c1.str().find("M-stationary") != std::string::npos);
  cli::run_example_mpscc(e, c2);
  CHECK(c1.str() == c2.str());
}

TEST_CASE("reports are byte-for-byte reproducible") {
  cli::Config c = config("certify");
  for (const char* k : {"R", "M", "EP", "DC"}) {
    c.kind = k;
    std::ostringstream a, b;
    const int ra = cli::run_certify(c, a);
    const int rb = cli::run_certify(c, b);
    CHECK(ra == rb);
    CHECK(a.str() == b.str());
  }
}
