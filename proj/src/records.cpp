#include "nph/records.hpp"

#include "nph/errors.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace nph {

void SubjectRecord::validate() const {
  const double sum = ventricle_ml + subarachnoid_ml + cerebral_ml;
  if (std::abs(total_ml - sum) > 1e-6)
    throw InvalidInput("subject " + subject_id + ": total_ml differs from compartment sum by " +
                       std::to_string(total_ml - sum));
  if (ventricle_ml < 0 || subarachnoid_ml < 0 || cerebral_ml < 0)
    throw InvalidInput("subject " + subject_id + ": negative volume");
  if (evans_ratio && !(*evans_ratio > 0.0 && *evans_ratio < 1.0))
    throw InvalidInput("subject " + subject_id + ": evans_ratio must lie in (0,1)");
}

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& s, int row, const char* col) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError("cohort CSV row " + std::to_string(row) + ": bad " + col + " value '" + s + "'");
  }
}

}  // namespace

std::vector<SubjectRecord> load_cohort_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open cohort CSV: " + path.string());

  std::vector<SubjectRecord> records;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (row == 1 && line.rfind("subject_id", 0) == 0) continue;  // header
    auto cells = split_csv_row(line);
    if (cells.size() != 7)
      throw IoError("cohort CSV row " + std::to_string(row) + ": expected 7 columns, got " +
                    std::to_string(cells.size()));
    SubjectRecord r;
    r.subject_id = cells[0];
    if (r.subject_id.empty())
      throw IoError("cohort CSV row " + std::to_string(row) + ": empty subject_id");
    r.ventricle_ml = parse_double(cells[1], row, "ventricle_ml");
    r.subarachnoid_ml = parse_double(cells[2], row, "subarachnoid_ml");
    r.cerebral_ml = parse_double(cells[3], row, "cerebral_ml");
    r.total_ml = parse_double(cells[4], row, "total_ml");
    if (cells[5] == "NPH")
      r.label = Diagnosis::Nph;
    else if (cells[5] == "non-NPH")
      r.label = Diagnosis::NonNph;
    else if (!cells[5].empty())
      throw IoError("cohort CSV row " + std::to_string(row) + ": bad label '" + cells[5] +
                    "' (want NPH, non-NPH, or empty)");
    if (!cells[6].empty()) r.evans_ratio = parse_double(cells[6], row, "evans_ratio");
    try {
      r.validate();
    } catch (const InvalidInput& e) {
      throw IoError("cohort CSV row " + std::to_string(row) + ": " + e.what());
    }
    records.push_back(std::move(r));
  }
  return records;
}

void save_cohort_csv(const std::vector<SubjectRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open cohort CSV for writing: " + path.string());
  out << "subject_id,ventricle_ml,subarachnoid_ml,cerebral_ml,total_ml,label,evans_ratio\n";
  out.precision(10);
  for (const auto& r : records) {
    out << r.subject_id << ',' << r.ventricle_ml << ',' << r.subarachnoid_ml << ',' << r.cerebral_ml
        << ',' << r.total_ml << ',';
    if (r.label) out << to_string(*r.label);
    out << ',';
    if (r.evans_ratio) out << *r.evans_ratio;
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace nph
