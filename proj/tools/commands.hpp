#pragma once

#include "rankstat/psd_cone.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rankstat::cli {

// Exit codes.
constexpr int kVerified = 0;
constexpr int kRefuted = 1;
constexpr int kUnknown = 2;
constexpr int kUsage = 64;

struct Config {
  std::string command;
  std::string kind = "R";
  std::string input, point, W, out;
  std::string phi = "quad:a=3";
  std::optional<double> rho;
  std::string rho_grid;
  double tol = 1e-8;
  int budget = 2000;
  std::uint64_t seed = 42;
  bool tol_set = false;
};

int exit_code(Verdict v);

int run_certify(const Config& c, std::ostream& out);
int run_solve(const Config& c, std::ostream& out);
int run_relate(const Config& c, std::ostream& out);
int run_validate_phi(const Config& c, std::ostream& out);

// Both cases of the 3x3 example at xbar = ybar = 0 under the pattern-only
// tangent policy.
struct ExampleCase {
  std::string label;
  Vector w;
  ImplicationResult result;
};

std::vector<ExampleCase> example_cases(double tol, int budget, std::uint64_t seed);
int run_example_mpscc(const Config& c, std::ostream& out);

}  // namespace rankstat::cli
