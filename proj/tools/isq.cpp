#include <CLI11.hpp>

#include <iostream>

#include "isq/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"isq: inverse-square Schroedinger operators, b-spectra and graded-mesh eigensolves"};
  app.require_subcommand(1);
  isq::cli::Options opts;
  app.add_option("--out", opts.out_dir, "output directory (overrides [output] directory)");
  app.add_option("--threads", opts.threads, "cap on worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", opts.seed, "seed of the eigensolver start block");

  auto add = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config_path, "run configuration file")->check(CLI::ExistingFile);
    return sub;
  };
  auto* bspec = add("bspec", "b-spectral report (bspec.json)");
  auto* oracle = add("oracle", "radial oracle table (oracle.csv)");
  auto* solve = add("solve", "mesh, assemble and eigensolve");
  solve->add_flag("--export", opts.export_arrays, "write mesh and matrices, not only their hashes");
  auto* analyze = add("analyze", "exponent fits, convergence rates, regularity profile and decay");
  auto* verify = add("verify", "check a configuration against its oracles, or run the acceptance suite");
  bool acceptance = false;
  verify->add_flag("--acceptance", acceptance, "run the full acceptance suite");
  for (auto* s : {bspec, oracle, solve, analyze}) s->get_option("--config")->required();

  CLI11_PARSE(app, argc, argv);
  if (verify->parsed() && !acceptance && opts.config_path.empty()) {
    std::cerr << "verify needs --config or --acceptance\n";
    return 1;
  }
  if (bspec->parsed()) return isq::cli::cmd_bspec(opts);
  if (oracle->parsed()) return isq::cli::cmd_oracle(opts);
  if (solve->parsed()) return isq::cli::cmd_solve(opts);
  if (analyze->parsed()) return isq::cli::cmd_analyze(opts);
  return acceptance ? isq::cli::cmd_acceptance(opts) : isq::cli::cmd_verify(opts);
}
