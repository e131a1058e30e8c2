#include "stmpc/csvlog.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "stmpc/errors.hpp"

namespace stmpc {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

struct TrajectoryWriter::Impl {
  std::ofstream out;
  int n = 0, m = 0, p = 0;
  double T_s = 0.0;
};

TrajectoryWriter::TrajectoryWriter(const std::string& path, int n, int m,
                                   int p, double T_s)
    : impl_(new Impl) {
  impl_->out.open(path);
  if (!impl_->out) throw Error("cannot open trajectory file: " + path);
  impl_->n = n;
  impl_->m = m;
  impl_->p = p;
  impl_->T_s = T_s;
  auto& o = impl_->out;
  o << "k,t";
  for (int i = 0; i < n; ++i) o << ",x" << i;
  for (int i = 0; i < m; ++i) o << ",u" << i;
  for (int i = 0; i < p; ++i) o << ",y" << i;
  for (int i = 0; i < p; ++i) o << ",yt" << i;
  for (int i = 0; i < n; ++i) o << ",xa" << i;
  for (int i = 0; i < m; ++i) o << ",ua" << i;
  for (int i = 0; i < p; ++i) o << ",ya" << i;
  o << ",v_total,v_dynamic,v_offset,v_avoid,stage_cost"
    << ",cand_value,cand_avoid,cand_value_model,cand_avoid_model"
    << ",cand_residual_model,feasible,status,sqp_iters,qp_iters"
    << ",n_regions,min_clearance\n";
}

TrajectoryWriter::~TrajectoryWriter() = default;

void TrajectoryWriter::append(const StepRecord& rec) {
  auto& o = impl_->out;
  o << rec.k << ',' << fmt(rec.k * impl_->T_s);
  auto emit = [&o](const Vector& v) {
    for (int i = 0; i < v.size(); ++i) o << ',' << fmt(v(i));
  };
  emit(rec.x);
  emit(rec.u);
  emit(rec.y);
  emit(rec.y_t);
  emit(rec.x_a);
  emit(rec.u_a);
  emit(rec.y_a);
  o << ',' << fmt(rec.v_total) << ',' << fmt(rec.v_dynamic) << ','
    << fmt(rec.v_offset) << ',' << fmt(rec.v_avoid) << ','
    << fmt(rec.stage_cost) << ',' << fmt(rec.cand_value) << ','
    << fmt(rec.cand_avoid) << ',' << fmt(rec.cand_value_model) << ','
    << fmt(rec.cand_avoid_model) << ',' << fmt(rec.cand_residual_model)
    << ',' << (rec.feasible ? 1 : 0) << ',' << static_cast<int>(rec.status)
    << ',' << rec.sqp_iterations << ',' << rec.qp_iterations << ','
    << rec.n_regions << ',' << fmt(rec.min_clearance) << '\n';
}

void TrajectoryWriter::close() {
  if (impl_->out.is_open()) impl_->out.close();
}

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

double CsvTable::at(size_t row, const std::string& name) const {
  const int c = column(name);
  if (c < 0) throw Error("csv: missing column " + name);
  return rows[row][c];
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open csv: " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw Error("csv: empty file");
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) table.header.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != table.header.size())
      throw Error("csv: ragged row in " + path);
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::vector<StepRecord> records_from_table(const CsvTable& table) {
  int n = 0, m = 0, p = 0;
  for (const auto& name : table.header) {
    if (name.rfind("x", 0) == 0 && name.size() > 1 &&
        std::isdigit(static_cast<unsigned char>(name[1])))
      ++n;
    if (name.rfind("u", 0) == 0 && name.size() > 1 &&
        std::isdigit(static_cast<unsigned char>(name[1])))
      ++m;
    if (name.rfind("yt", 0) == 0) ++p;
  }
  std::vector<StepRecord> records;
  records.reserve(table.rows.size());
  for (size_t r = 0; r < table.rows.size(); ++r) {
    StepRecord rec;
    rec.k = static_cast<int>(table.at(r, "k"));
    rec.x = Vector(n);
    rec.u = Vector(m);
    rec.y = Vector(p);
    rec.y_t = Vector(p);
    rec.x_a = Vector(n);
    rec.u_a = Vector(m);
    rec.y_a = Vector(p);
    for (int i = 0; i < n; ++i) rec.x(i) = table.at(r, "x" + std::to_string(i));
    for (int i = 0; i < m; ++i) rec.u(i) = table.at(r, "u" + std::to_string(i));
    for (int i = 0; i < p; ++i) {
      rec.y(i) = table.at(r, "y" + std::to_string(i));
      rec.y_t(i) = table.at(r, "yt" + std::to_string(i));
      rec.y_a(i) = table.at(r, "ya" + std::to_string(i));
    }
    for (int i = 0; i < n; ++i)
      rec.x_a(i) = table.at(r, "xa" + std::to_string(i));
    for (int i = 0; i < m; ++i)
      rec.u_a(i) = table.at(r, "ua" + std::to_string(i));
    rec.v_total = table.at(r, "v_total");
    rec.v_dynamic = table.at(r, "v_dynamic");
    rec.v_offset = table.at(r, "v_offset");
    rec.v_avoid = table.at(r, "v_avoid");
    rec.stage_cost = table.at(r, "stage_cost");
    rec.cand_value = table.at(r, "cand_value");
    rec.cand_avoid = table.at(r, "cand_avoid");
    rec.cand_value_model = table.at(r, "cand_value_model");
    rec.cand_avoid_model = table.at(r, "cand_avoid_model");
    rec.cand_residual_model = table.at(r, "cand_residual_model");
    rec.feasible = table.at(r, "feasible") != 0.0;
    rec.status = static_cast<SolveStatus>(
        static_cast<int>(table.at(r, "status")));
    rec.sqp_iterations = static_cast<int>(table.at(r, "sqp_iters"));
    rec.qp_iterations = static_cast<int>(table.at(r, "qp_iters"));
    rec.n_regions = static_cast<int>(table.at(r, "n_regions"));
    rec.min_clearance = table.at(r, "min_clearance");
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace stmpc
