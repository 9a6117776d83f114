#include "nbh/report.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

namespace nbh {

namespace {

std::string fmt_double(double v) {
  if (v < 0) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::string RunReport::to_csv() const {
  std::ostringstream os;
  os << "run,variant,engine,dataset_bytes,seed,repetitions,mops,apcl,note\n";
  for (const auto& r : rows_) {
    os << r.run << ',' << r.variant << ',' << r.engine << ',' << r.dataset_bytes << ','
       << r.seed << ',' << r.repetitions << ',' << fmt_double(r.mops) << ','
       << fmt_double(r.apcl) << ',' << r.note << '\n';
  }
  return os.str();
}

std::string RunReport::to_table() const {
  std::array<std::string, 9> head = {"run",  "variant", "engine", "bytes", "seed",
                                     "reps", "mops",    "apcl",   "note"};
  std::vector<std::array<std::string, 9>> cells;
  cells.push_back(head);
  for (const auto& r : rows_) {
    cells.push_back({r.run, r.variant, r.engine, std::to_string(r.dataset_bytes),
                     std::to_string(r.seed), std::to_string(r.repetitions),
                     fmt_double(r.mops), fmt_double(r.apcl), r.note});
  }
  std::array<std::size_t, 9> width{};
  for (auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c)
      width[c] = std::max(width[c], row[c].size());
  std::ostringstream os;
  for (auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      os << row[c] << std::string(width[c] - row[c].size() + 2, ' ');
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace nbh
