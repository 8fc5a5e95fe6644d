#include "swsim/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <ostream>

#include <nlohmann/json.hpp>

#include "swsim/csv_io.hpp"
#include "swsim/harness.hpp"

namespace swsim::cli {

namespace {

void emit_error(std::ostream& err, int code, const std::string& message) {
  nlohmann::json j{{"error", message}, {"code", code}};
  err << j.dump() << '\n';
}

std::string fmt3(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string fmt4(double v) {
  if (v > -5e-5 && v < 0.0) v = 0.0;  // avoid "-0.0000"
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

WorkingStructure parse_structure(const std::string& name) {
  if (name == "exch") return WorkingStructure::EXCH;
  if (name == "ne") return WorkingStructure::NE;
  if (name == "dtd") return WorkingStructure::DTD;
  throw std::invalid_argument("unknown working structure: " + name);
}

TimeMode parse_time_mode(const std::string& name) {
  if (name == "fractional") return TimeMode::Fractional;
  if (name == "absolute") return TimeMode::Absolute;
  throw std::invalid_argument("time mode must be fractional or absolute");
}

std::string structure_label(WorkingStructure s) {
  switch (s) {
    case WorkingStructure::EXCH: return "EXCH";
    case WorkingStructure::NE: return "NE";
    default: return "DTD";
  }
}

void print_effect_block(std::ostream& out, const std::string& label,
                        const FitResult& fit, const AnalyzeArgs& args) {
  struct Kind {
    std::string name;
    Eigen::MatrixXd vcov;
  };
  std::vector<Kind> kinds;
  for (const std::string& v : args.variance) {
    if (v == "model") kinds.push_back({"Model-based", fit.vcov_model});
    else if (v == "cr0") kinds.push_back({"RVE", sandwich_cr0(fit)});
    else if (v == "md")
      kinds.push_back({"RVE + MD", sandwich_md(fit, !args.md_literal)});
    else throw std::invalid_argument("unknown variance kind: " + v);
  }

  auto print_line = [&](const std::string& estimand, const EffectInference& inf,
                        const std::string& vname) {
    out << "  " << estimand << "  " << vname;
    for (std::size_t pad = vname.size(); pad < 12; ++pad) out << ' ';
    out << "SE " << fmt3(inf.se) << "   95% CI (" << fmt3(inf.ci_low) << ", "
        << fmt3(inf.ci_high) << ")   p " << fmt4(inf.p_value) << '\n';
  };

  out << label << ", estimate";
  if (fit.model.effect == EffectKind::Constant) {
    out << " " << fmt3(fit.zeta[fit.effect_column()]) << '\n';
    for (const Kind& kind : kinds)
      print_line("delta   ", infer_constant_effect(fit, kind.vcov), kind.name);
  } else {
    out << "s by exposure time\n";
    for (int k = 0; k < fit.design.effect_col_count; ++k) {
      const int s = fit.design.exposure_of_effect_col[k];
      for (const Kind& kind : kinds)
        print_line("delta(" + std::to_string(s) + ")",
                   infer_exposure_effect(fit, kind.vcov, s), kind.name);
    }
    for (const Kind& kind : kinds)
      print_line("Delta   ", average_effect(fit, kind.vcov), kind.name);
  }
}

}  // namespace

int run_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
  Scenario scenario;
  try {
    if (!args.config_path.empty()) scenario = scenario_from_config_file(args.config_path);
    else if (args.scenario >= 1) scenario = scenario_from_catalog(args.scenario);
    else {
      emit_error(err, kExitUsage, "simulate needs --scenario or --config");
      return kExitUsage;
    }
    if (args.reps < 1) {
      emit_error(err, kExitUsage, "--reps must be at least 1");
      return kExitUsage;
    }
    if (args.out_dir.empty()) {
      emit_error(err, kExitUsage, "simulate needs --out");
      return kExitUsage;
    }
  } catch (const std::exception& e) {
    emit_error(err, kExitUsage, e.what());
    return kExitUsage;
  }

  try {
    std::filesystem::create_directories(args.out_dir);
    if (!args.export_data.empty()) {
      const Dataset data =
          simulate_dataset(scenario.design(), scenario.plan, scenario.generative(),
                           derive_stream(args.seed, stream_tag::replicate, 0));
      write_dataset_csv(data, args.export_data);
    }
    const ScenarioResult result =
        run_scenario(scenario, args.reps, args.seed, args.threads);
    const std::vector<MetricsSummary> summary = summarize(result);
    const std::filesystem::path dir(args.out_dir);
    write_replicates_csv(result, (dir / "replicates.csv").string());
    write_summary_csv(summary, (dir / "summary.csv").string());
    write_summary_markdown(summary, (dir / "summary.md").string());
    out << "scenario " << (scenario.id > 0 ? std::to_string(scenario.id) : "custom")
        << ", " << args.reps << " replicates, seed " << args.seed << ", "
        << result.failures.size() << " failed\n";
    if (!result.failures.empty())
      out << "note: non-converged or failed replicates are excluded from the "
             "metrics; counts are reported per estimand\n";
    out << format_summary_table(summary);
    return kExitOk;
  } catch (const std::exception& e) {
    emit_error(err, kExitFit, e.what());
    return kExitFit;
  }
}

int run_analyze(const AnalyzeArgs& args, std::ostream& out, std::ostream& err) {
  IngestResult ingest;
  try {
    ingest = ingest_csv(args.data_path, parse_time_mode(args.time_mode),
                        args.period_length);
  } catch (const DataValidationError& e) {
    emit_error(err, kExitData, e.what());
    return kExitData;
  } catch (const std::exception& e) {
    emit_error(err, kExitUsage, e.what());
    return kExitUsage;
  }

  try {
    const EffectKind effect = [&] {
      if (args.effect == "constant") return EffectKind::Constant;
      if (args.effect == "exposure") return EffectKind::ExposureDependent;
      throw std::invalid_argument("effect must be constant or exposure");
    }();
    FitOptions options;
    options.reml = args.reml;
    for (const std::string& name : args.structures) {
      const WorkingStructure structure = parse_structure(name);
      const FitResult fit =
          fit_ml(ingest.dataset, WorkingModel{structure, effect}, options);
      out << "Working model: " << structure_label(structure)
          << (fit.converged ? "" : "  [did not converge]") << '\n';
      print_effect_block(out, args.effect == "constant"
                                  ? std::string("Constant intervention effect")
                                  : std::string("Exposure-dependent intervention effect"),
                         fit, args);
      if (args.lrt) {
        const LrtResult lrt = lrt_exposure_heterogeneity(ingest.dataset, structure, options);
        out << "  LRT for exposure-time heterogeneity: statistic "
            << fmt4(lrt.statistic) << ", dof " << lrt.dof << ", p "
            << fmt4(lrt.p_value) << '\n';
      }
      out << '\n';
    }
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    emit_error(err, kExitUsage, e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    emit_error(err, kExitFit, e.what());
    return kExitFit;
  }
}

int run_check_recruitment(const CheckRecruitmentArgs& args, std::ostream& out,
                          std::ostream& err) {
  try {
    const IngestResult ingest = ingest_csv(
        args.data_path, parse_time_mode(args.time_mode), args.period_length);
    const RecruitmentCheck check = recruitment_dependence_check(ingest.dataset);
    auto print_report = [&](const char* title, const RegressionReport& report) {
      out << title << " (residual dof " << report.dof << ")\n";
      for (const RegressionTerm& term : report.terms)
        out << "  " << term.name << ": coef " << fmt4(term.coef) << ", se "
            << fmt4(term.se) << ", t " << fmt4(term.t_stat) << ", p "
            << fmt4(term.p_value) << '\n';
    };
    print_report("Cluster-period size on period indicators + treatment",
                 check.treatment_model);
    print_report("Cluster-period size on period indicators + exposure indicators",
                 check.exposure_model);
    return kExitOk;
  } catch (const DataValidationError& e) {
    emit_error(err, kExitData, e.what());
    return kExitData;
  } catch (const std::exception& e) {
    emit_error(err, kExitUsage, e.what());
    return kExitUsage;
  }
}

int run_report(const ReportArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const std::filesystem::path dir(args.in_dir);
    const ScenarioResult result = read_replicates_csv((dir / "replicates.csv").string());
    const std::vector<MetricsSummary> summary = summarize(result);
    write_summary_csv(summary, (dir / "summary.csv").string());
    write_summary_markdown(summary, (dir / "summary.md").string());
    out << format_summary_table(summary);
    return kExitOk;
  } catch (const std::exception& e) {
    emit_error(err, kExitData, e.what());
    return kExitData;
  }
}

}  // namespace swsim::cli
