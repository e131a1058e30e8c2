#pragma once

#include <map>
#include <string>
#include <vector>

#include "stmpc/controller.hpp"

namespace stmpc {

/// Writes StepRecord streams as CSV with the column order documented in
/// docs/formats.md. Numbers use %.17g so replays are bit-identical.
class TrajectoryWriter {
 public:
  TrajectoryWriter(const std::string& path, int n, int m, int p, double T_s);
  ~TrajectoryWriter();
  void append(const StepRecord& rec);
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Column-keyed CSV table for diagnose-style consumers.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // -1 when missing
  double at(size_t row, const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

/// Rebuild the monitor inputs from a trajectory table.
std::vector<StepRecord> records_from_table(const CsvTable& table);

}  // namespace stmpc
