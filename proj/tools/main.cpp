#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "swsim/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "swsim: simulation and analysis lab for stepped wedge trials with "
      "continuous recruitment"};
  app.require_subcommand(1);

  swsim::cli::SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Run a Monte Carlo scenario and write replicate/summary tables");
  simulate->add_option("--scenario", sim.scenario, "Catalog scenario id (1..24)");
  simulate->add_option("--config", sim.config_path,
                       "Key-value scenario file (overrides/extends --scenario)");
  simulate->add_option("--reps", sim.reps, "Number of replicates (default 2000)");
  simulate->add_option("--seed", sim.seed, "Base seed");
  simulate->add_option("--out", sim.out_dir, "Output directory");
  simulate->add_option("--threads", sim.threads, "Worker threads (default: all cores)");
  simulate->add_option("--export-data", sim.export_data,
                       "Also write replicate 0's dataset to this CSV path");

  swsim::cli::AnalyzeArgs analyze;
  CLI::App* an = app.add_subcommand(
      "analyze", "Fit discrete-time linear mixed models to a trial record CSV");
  an->add_option("--data", analyze.data_path, "Input CSV")->required();
  an->add_option("--structure", analyze.structures,
                 "Working structures: exch, ne, dtd (default: all three)")
      ->delimiter(',');
  an->add_option("--effect", analyze.effect, "constant | exposure");
  an->add_option("--variance", analyze.variance,
                 "Variance estimators: model, cr0, md (default: all)")
      ->delimiter(',');
  an->add_option("--time-mode", analyze.time_mode, "fractional | absolute");
  an->add_option("--period-length", analyze.period_length,
                 "Period length in raw time units (absolute mode)");
  an->add_flag("--lrt", analyze.lrt, "Also run the exposure-heterogeneity LRT");
  an->add_flag("--md-literal", analyze.md_literal,
               "Use the uninverted (I - H) leverage adjustment");
  an->add_flag("--reml", analyze.reml, "REML instead of ML");

  swsim::cli::CheckRecruitmentArgs check;
  CLI::App* ck = app.add_subcommand(
      "check-recruitment",
      "Regress cluster-period size on period and treatment/exposure indicators");
  ck->add_option("--data", check.data_path, "Input CSV")->required();
  ck->add_option("--time-mode", check.time_mode, "fractional | absolute");
  ck->add_option("--period-length", check.period_length,
                 "Period length in raw time units (absolute mode)");

  swsim::cli::ReportArgs report;
  CLI::App* rp = app.add_subcommand(
      "report", "Re-render summary tables from a simulate output directory");
  rp->add_option("--in", report.in_dir, "Directory holding replicates.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return swsim::cli::kExitUsage;
  }

  if (simulate->parsed())
    return swsim::cli::run_simulate(sim, std::cout, std::cerr);
  if (an->parsed()) return swsim::cli::run_analyze(analyze, std::cout, std::cerr);
  if (ck->parsed())
    return swsim::cli::run_check_recruitment(check, std::cout, std::cerr);
  return swsim::cli::run_report(report, std::cout, std::cerr);
}
