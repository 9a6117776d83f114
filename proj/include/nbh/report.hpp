#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nbh {

// One measurement row. Every row carries enough (seed, variant, engine,
// dataset size) to reproduce the number from the CLI alone.
struct ReportRow {
  std::string run;
  std::string variant;
  std::string engine;
  std::uint64_t dataset_bytes = 0;
  std::uint64_t seed = 0;
  int repetitions = 0;
  double mops = -1.0;   // < 0: not measured
  double apcl = -1.0;   // < 0: not measured
  std::string note;
};

class RunReport {
 public:
  void add(ReportRow row) { rows_.push_back(std::move(row)); }
  const std::vector<ReportRow>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }

  std::string to_csv() const;
  std::string to_table() const;

 private:
  std::vector<ReportRow> rows_;
};

}  // namespace nbh
