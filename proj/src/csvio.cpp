#include "otasim/csvio.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace otasim::csvio {

const char* kHeader =
    "experiment_id,M,train_snr_db,test_snr_db,drift_time_s,trial_id,accuracy,p_final,sigma_n2,"
    "energy_total_j";

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

[[noreturn]] void line_error(size_t line, const std::string& what) {
  throw std::runtime_error("csv: line " + std::to_string(line) + ": " + what);
}

}  // namespace

std::string to_csv(const std::vector<pipeline::SweepRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("csv: refusing to write an empty result table");
  std::string out = kHeader;
  out += "\n";
  for (const auto& r : rows) {
    out += r.experiment_id;
    out += "," + std::to_string(r.sensors);
    out += "," + fmt(r.train_snr_db);
    out += "," + fmt(r.test_snr_db);
    out += "," + fmt(r.drift_time_s);
    out += "," + std::to_string(r.trial_id);
    out += "," + fmt(r.accuracy);
    out += "," + fmt(r.p_final);
    out += "," + fmt(r.sigma_n2);
    out += "," + (r.energy_total_j ? fmt(*r.energy_total_j) : "");
    out += "\n";
  }
  return out;
}

void emit_csv(const std::vector<pipeline::SweepRow>& rows, const std::string& path) {
  const std::string text = to_csv(rows);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("csv: cannot open for write: " + path);
  os << text;
  if (!os) throw std::runtime_error("csv: write failed: " + path);
}

std::vector<pipeline::SweepRow> parse_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("csv: cannot open " + path);
  std::string line;
  size_t lineno = 0;
  std::vector<pipeline::SweepRow> rows;
  while (std::getline(is, line)) {
    ++lineno;
    if (lineno == 1) {
      if (line != kHeader) line_error(lineno, "unexpected header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (line.back() == ',') fields.push_back("");
    if (fields.size() != 10) {
      line_error(lineno, "expected 10 fields, got " + std::to_string(fields.size()));
    }
    pipeline::SweepRow r;
    try {
      r.experiment_id = fields[0];
      r.sensors = std::stoi(fields[1]);
      r.train_snr_db = fields[2].empty() ? std::nan("") : std::stod(fields[2]);
      r.test_snr_db = std::stod(fields[3]);
      r.drift_time_s = std::stod(fields[4]);
      r.trial_id = std::stoi(fields[5]);
      r.accuracy = std::stod(fields[6]);
      r.p_final = std::stod(fields[7]);
      r.sigma_n2 = std::stod(fields[8]);
      if (!fields[9].empty()) r.energy_total_j = std::stod(fields[9]);
    } catch (const std::exception&) {
      line_error(lineno, "malformed numeric field");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace otasim::csvio
