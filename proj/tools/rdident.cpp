#include <iostream>

#include <CLI11.hpp>

#include "rdident/rdident.hpp"

int main(int argc, char** argv) {
  CLI::App app{"reaction-diffusion network identification toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", rdident::version);

  rdident::ValidateArgs va;
  auto* validate = app.add_subcommand(
      "validate", "check a network file, print categories and certificates");
  validate->add_option("network", va.network, "network file")->required();

  rdident::SimulateArgs sa;
  auto* simulate =
      app.add_subcommand("simulate", "forward solve, write the observed fields");
  simulate->add_option("config", sa.config, "run config file")->required();
  simulate->add_flag("--print-config", sa.print_config, "echo the parsed config and exit");
  simulate->add_flag("--full-state", sa.full_state, "also write every species field");
  simulate->add_option("--noise", sa.noise, "Gaussian noise level, overrides [output]");
  simulate->add_option("--seed", sa.seed, "random seed, overrides [output]");

  rdident::GradcheckArgs ga;
  auto* gradcheck = app.add_subcommand(
      "gradcheck", "compare the adjoint gradient against central differences");
  gradcheck->add_option("config", ga.config, "run config file")->required();
  gradcheck->add_flag("--print-config", ga.print_config, "echo the parsed config and exit");
  gradcheck->add_option("--threshold", ga.threshold, "relative error threshold");
  gradcheck->add_option("--fd-step", ga.fd_step, "central difference step");
  gradcheck->add_flag("--slope", ga.slope, "also fit the finite-difference error slope");
  gradcheck->add_flag("--corrupt-gradient", ga.corrupt_gradient)->group("");

  rdident::IdentifyArgs ia;
  auto* identify = app.add_subcommand("identify", "fit parameters to observation data");
  identify->add_option("config", ia.config, "run config file")->required();
  identify->add_flag("--print-config", ia.print_config, "echo the parsed config and exit");

  rdident::ExportArgs ea;
  auto* exp = app.add_subcommand("export", "dump a field file as CSV");
  exp->add_option("file", ea.file, "field file")->required();
  exp->add_flag("--stats", ea.stats, "per-level integral, min, max");
  exp->add_option("--slice", ea.slice, "one plane as x,y,value: t=IDX,field=IDX");

  CLI11_PARSE(app, argc, argv);

  if (validate->parsed()) return rdident::cmd_validate(va, std::cout, std::cerr);
  if (simulate->parsed()) return rdident::cmd_simulate(sa, std::cout, std::cerr);
  if (gradcheck->parsed()) return rdident::cmd_gradcheck(ga, std::cout, std::cerr);
  if (identify->parsed()) return rdident::cmd_identify(ia, std::cout, std::cerr);
  if (exp->parsed()) return rdident::cmd_export(ea, std::cout, std::cerr);
  return rdident::exit_error;
}
