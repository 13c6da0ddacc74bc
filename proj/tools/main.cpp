#include "commands.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace rankstat;

int main(int argc, char** argv) {
  CLI::App app{"rank-regularised stationarity certificates"};
  app.require_subcommand(1);
  cli::Config c;

  auto common = [&c](CLI::App* s) {
    s->add_option("--out", c.out, "output file (stdout when absent)");
    s->add_option("--seed", c.seed, "seed");
    s->add_option("--budget", c.budget, "search samples / iteration cap")->check(CLI::PositiveNumber);
    s->add_option_function<double>("--tol", [&c](double t) {
       c.tol = t;
       c.tol_set = true;
     }, "tolerance")->check(CLI::PositiveNumber);
  };
  auto problem = [&c](CLI::App* s) {
    s->add_option("--input", c.input, "problem file");
    s->add_option("--point", c.point, "point matrix file");
    s->add_option("--phi", c.phi, "quad:a=<a> | linear | square | table:<path>");
    s->add_option("--rho", c.rho, "penalty parameter");
    s->add_option("--rho-grid", c.rho_grid, "a,b,c or log:lo:hi:count");
  };

  auto* certify = app.add_subcommand("certify", "certify a point");
  common(certify);
  problem(certify);
  certify->add_option("--kind", c.kind, "R | M | EP | DC");
  certify->add_option("--W", c.W, "W matrix file (M only)");

  auto* solve = app.add_subcommand("solve", "DCA on the surrogate");
  common(solve);
  problem(solve);

  auto* relate = app.add_subcommand("relate", "all four certificates and their implications");
  common(relate);
  problem(relate);

  auto* example = app.add_subcommand("example-mpscc", "the 3x3 MPSCC example, both cases");
  common(example);

  auto* vphi = app.add_subcommand("validate-phi", "axioms and the conjugate condition for phi");
  vphi->add_option("--phi", c.phi, "phi tag");
  vphi->add_option("--out", c.out, "output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kUsage;
  }

  std::ofstream file;
  if (!c.out.empty()) {
    file.open(c.out);
    if (!file) {
      std::cerr << "cannot open " << c.out << '\n';
      return cli::kUsage;
    }
  }
  std::ostream& out = c.out.empty() ? std::cout : file;
  try {
    if (*certify) return cli::run_certify(c, out);
    if (*solve) return cli::run_solve(c, out);
    if (*relate) return cli::run_relate(c, out);
    if (*example) return cli::run_example_mpscc(c, out);
    if (*vphi) return cli::run_validate_phi(c, out);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return cli::kUsage;
  }
  return cli::kUsage;
}
