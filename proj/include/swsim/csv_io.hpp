#pragma once

#include <stdexcept>
#include <string>

#include "swsim/datagen.hpp"
#include "swsim/trial.hpp"

namespace swsim {

struct DataValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Schema: cluster_id,period,time,treatment,outcome (UTF-8, '.' decimal,
// LF line endings; floats written with 17 significant digits).
void write_dataset_csv(const Dataset& data, const std::string& path);

enum class TimeMode { Fractional, Absolute };

struct IngestResult {
  Dataset dataset;
  TrialDesign design;  // inferred from the observed (cluster, period, treatment)
};

// Reads a trial record file: in Fractional mode the time column already
// holds t in (j-1, j]; in Absolute mode it holds raw time units since trial
// start and `period_length` converts them through the elapsed-fraction rule
// (day 30 of a 60-day first period maps to t = 0.5). Validates stepped-wedge
// monotonicity and that every time falls inside its stated period.
IngestResult ingest_csv(const std::string& path, TimeMode mode,
                        double period_length = 0.0);

}  // namespace swsim
