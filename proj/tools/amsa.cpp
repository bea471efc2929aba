#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "amsa/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty() || args.front() == "--help" || args.front() == "-h") {
    std::cout << "usage: amsa train [--config file] [--experiment sine|step|classif]\n"
                 "                  [--strategy shallow|deep|a1|a2|a3|theoretical] [--runs R] [--iters K]\n"
                 "                  [--samples N] [--seed S] [--rho RHO] [--final-time T] [--width D]\n"
                 "                  [--bounds LO HI] [--integrator euler|heun] [--tau TAU] [--threads P]\n"
                 "                  [--out-dir DIR] [--delta X --C Y] [--ascent-evals E] [--refine M] [--timing]\n";
    return args.empty() ? 64 : 0;
  }
  try {
    const amsa::cli::CliConfig cfg = amsa::cli::parse_config(args);
    return amsa::cli::run_experiment_command(cfg, std::cout, std::cerr);
  } catch (const amsa::cli::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
