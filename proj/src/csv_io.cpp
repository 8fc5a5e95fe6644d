#include "swsim/csv_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace swsim {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "cluster_id,period,time,treatment,outcome\n";
  for (const Record& r : data.records) {
    const std::string& label = data.cluster_labels.empty()
                                   ? std::to_string(r.cluster + 1)
                                   : data.cluster_labels[r.cluster];
    out << label << ',' << r.period << ',' << fmt(r.time) << ',' << r.treatment
        << ',' << fmt(r.outcome) << '\n';
  }
}

IngestResult ingest_csv(const std::string& path, TimeMode mode,
                        double period_length) {
  std::ifstream in(path);
  if (!in) throw DataValidationError("cannot open data file: " + path);
  if (mode == TimeMode::Absolute && !(period_length > 0.0))
    throw DataValidationError("absolute time mode needs a positive period length");

  std::string line;
  if (!std::getline(in, line)) throw DataValidationError("data file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_line(line);
  std::map<std::string, int> col;
  for (std::size_t k = 0; k < header.size(); ++k) col[header[k]] = static_cast<int>(k);
  for (const char* required : {"cluster_id", "period", "time", "treatment", "outcome"})
    if (!col.count(required))
      throw DataValidationError(std::string("missing required column: ") + required);

  struct RawRow {
    std::string cluster;
    int period;
    double time;
    int treatment;
    double outcome;
  };
  std::vector<RawRow> raw;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() < header.size())
      throw DataValidationError("line " + std::to_string(line_no) + ": too few fields");
    try {
      RawRow row;
      row.cluster = fields[col["cluster_id"]];
      row.period = std::stoi(fields[col["period"]]);
      row.time = std::stod(fields[col["time"]]);
      row.treatment = std::stoi(fields[col["treatment"]]);
      row.outcome = std::stod(fields[col["outcome"]]);
      if (row.period < 1)
        throw DataValidationError("line " + std::to_string(line_no) + ": period < 1");
      if (row.treatment != 0 && row.treatment != 1)
        throw DataValidationError("line " + std::to_string(line_no) +
                                  ": treatment must be 0 or 1");
      raw.push_back(std::move(row));
    } catch (const DataValidationError&) {
      throw;
    } catch (const std::exception&) {
      throw DataValidationError("line " + std::to_string(line_no) + ": malformed field");
    }
  }
  if (raw.empty()) throw DataValidationError("data file has no records");

  // Cluster labels in order of first appearance.
  std::map<std::string, int> cluster_index;
  std::vector<std::string> labels;
  int n_periods = 0;
  for (const RawRow& row : raw) {
    if (!cluster_index.count(row.cluster)) {
      cluster_index[row.cluster] = static_cast<int>(labels.size());
      labels.push_back(row.cluster);
    }
    n_periods = std::max(n_periods, row.period);
  }
  const int n_clusters = static_cast<int>(labels.size());
  if (n_periods < 2) throw DataValidationError("need at least two periods");

  // Cell-level treatment map with consistency checks.
  std::vector<int> cell_z(static_cast<std::size_t>(n_clusters) * n_periods, -1);
  std::vector<int> cell_count(static_cast<std::size_t>(n_clusters) * n_periods, 0);
  for (const RawRow& row : raw) {
    const int i = cluster_index[row.cluster];
    const std::size_t cell = static_cast<std::size_t>(i) * n_periods + (row.period - 1);
    if (cell_z[cell] < 0) cell_z[cell] = row.treatment;
    else if (cell_z[cell] != row.treatment)
      throw DataValidationError("cluster " + row.cluster + ", period " +
                                std::to_string(row.period) +
                                " mixes treated and control records");
    ++cell_count[cell];
  }

  // Stepped-wedge validation: within each cluster the observed indicator is
  // monotone non-decreasing; the crossover point defines the sequence.
  std::vector<int> sequence(static_cast<std::size_t>(n_clusters), 0);
  int max_sequence = 0;
  for (int i = 0; i < n_clusters; ++i) {
    int last = 0, first_treated = 0;
    for (int j = 1; j <= n_periods; ++j) {
      const int z = cell_z[static_cast<std::size_t>(i) * n_periods + (j - 1)];
      if (z < 0) continue;  // unobserved cell
      if (z < last)
        throw DataValidationError("cluster " + labels[i] +
                                  " reverts from intervention to control at period " +
                                  std::to_string(j));
      if (z == 1 && first_treated == 0) first_treated = j;
      last = z;
    }
    if (first_treated == 0)
      throw DataValidationError("cluster " + labels[i] + " is never treated");
    if (first_treated == 1)
      throw DataValidationError("cluster " + labels[i] + " is treated from period 1");
    sequence[i] = first_treated - 1;
    max_sequence = std::max(max_sequence, sequence[i]);
  }

  TrialDesign design;
  design.n_clusters = n_clusters;
  design.n_periods = n_periods;
  design.n_sequences = std::min(max_sequence, n_periods - 1);
  design.sequence_of_cluster = sequence;
  design.cell_size = Eigen::MatrixXi::Zero(n_clusters, n_periods);
  for (int i = 0; i < n_clusters; ++i)
    for (int j = 0; j < n_periods; ++j)
      design.cell_size(i, j) =
          cell_count[static_cast<std::size_t>(i) * n_periods + j];
  design.validate(/*require_positive_cells=*/false);

  Dataset data;
  data.n_clusters = n_clusters;
  data.n_periods = n_periods;
  data.cluster_labels = labels;
  data.records.reserve(raw.size());
  for (const RawRow& row : raw) {
    Record rec;
    rec.cluster = cluster_index[row.cluster];
    rec.period = row.period;
    rec.treatment = row.treatment;
    rec.exposure = row.treatment ? row.period - sequence[rec.cluster] : 0;
    if (mode == TimeMode::Absolute) {
      // Elapsed fraction of the record's own period.
      rec.time = (row.period - 1) +
                 (row.time - (row.period - 1) * period_length) / period_length;
    } else {
      rec.time = row.time;
    }
    if (!(rec.time >= row.period - 1 && rec.time <= row.period)) {
      // Tolerate float dust at the boundaries, reject anything further out.
      const double eps = 1e-9;
      if (rec.time > row.period - 1 - eps && rec.time <= row.period + eps)
        rec.time = std::clamp(rec.time, static_cast<double>(row.period - 1),
                              static_cast<double>(row.period));
      else
        throw DataValidationError("cluster " + row.cluster + ", period " +
                                  std::to_string(row.period) + ": time " +
                                  fmt(rec.time) + " outside (" +
                                  std::to_string(row.period - 1) + ", " +
                                  std::to_string(row.period) + "]");
    }
    rec.outcome = row.outcome;
    data.records.push_back(rec);
  }
  std::stable_sort(data.records.begin(), data.records.end(),
                   [](const Record& a, const Record& b) {
                     if (a.cluster != b.cluster) return a.cluster < b.cluster;
                     if (a.period != b.period) return a.period < b.period;
                     return a.time < b.time;
                   });
  return {std::move(data), std::move(design)};
}

}  // namespace swsim
