#include "softki/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace softki {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

void RunReport::set(const std::string& key, const std::string& value) {
  for (auto& kv : entries_) {
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void RunReport::set(const std::string& key, double value) {
  set(key, format_double(value));
}

void RunReport::set(const std::string& key, long long value) {
  set(key, std::to_string(value));
}

const std::string* RunReport::get(const std::string& key) const {
  for (const auto& kv : entries_) {
    if (kv.first == key) return &kv.second;
  }
  return nullptr;
}

std::string RunReport::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

std::string trace_csv(const TrainTrace& t) {
  std::string out = "epoch,objective,exact_batches,pseudoloss_batches\n";
  for (std::size_t e = 0; e < t.epoch_objective.size(); ++e) {
    out += std::to_string(e + 1) + "," + format_double(t.epoch_objective[e]) + "," +
           std::to_string(t.exact_count[e]) + "," +
           std::to_string(t.pseudoloss_count[e]) + "\n";
  }
  return out;
}

std::string timing_csv(const TrainTrace& t) {
  std::string out = "epoch,seconds\n";
  for (std::size_t e = 0; e < t.epoch_seconds.size(); ++e) {
    out += std::to_string(e + 1) + "," + format_double(t.epoch_seconds[e]) + "\n";
  }
  return out;
}

std::string vector_csv(const std::string& column, const DenseVector& v) {
  std::string out = "dim," + column + "\n";
  for (Index i = 0; i < v.size(); ++i) {
    out += std::to_string(i) + "," + format_double(v(i)) + "\n";
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileNotFound("cannot write " + path);
  out << content;
  if (!out) throw InvalidArgument("failed writing " + path);
}

}  // namespace softki
