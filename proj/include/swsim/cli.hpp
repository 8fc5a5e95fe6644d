#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace swsim::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitFit = 4;

struct SimulateArgs {
  int scenario = 0;            // 1..24, or 0 when a config file is given
  std::string config_path;
  int reps = 2000;
  std::uint64_t seed = 12345;
  std::string out_dir;
  int threads = 0;
  std::string export_data;     // optional: dump replicate 0's dataset here
};
int run_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err);

struct AnalyzeArgs {
  std::string data_path;
  std::vector<std::string> structures = {"exch", "ne", "dtd"};
  std::string effect = "constant";  // constant | exposure
  std::vector<std::string> variance = {"model", "cr0", "md"};
  std::string time_mode = "fractional";  // fractional | absolute
  double period_length = 0.0;
  bool lrt = false;
  bool md_literal = false;  // uninverted (I - H) variant of the MD correction
  bool reml = false;
};
int run_analyze(const AnalyzeArgs& args, std::ostream& out, std::ostream& err);

struct CheckRecruitmentArgs {
  std::string data_path;
  std::string time_mode = "fractional";
  double period_length = 0.0;
};
int run_check_recruitment(const CheckRecruitmentArgs& args, std::ostream& out,
                          std::ostream& err);

struct ReportArgs {
  std::string in_dir;
};
int run_report(const ReportArgs& args, std::ostream& out, std::ostream& err);

}  // namespace swsim::cli
