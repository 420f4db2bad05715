#pragma once

// Run reports: ordered `key=value` lines plus small CSV tables.

#include <string>
#include <utility>
#include <vector>

#include "softki/linalg.hpp"
#include "softki/trainer.hpp"

namespace softki {

class RunReport {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);
  void set(const std::string& key, int value) { set(key, (long long)value); }

  const std::string* get(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }
  // One `key=value` per line, in insertion order.
  std::string to_text() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// Shortest text that round-trips the double; "nan"/"inf" for non-finite.
std::string format_double(double v);

std::string trace_csv(const TrainTrace& trace);   // epoch,objective,exact,pseudoloss
std::string timing_csv(const TrainTrace& trace);  // epoch,seconds
std::string vector_csv(const std::string& column, const DenseVector& v);

void write_file(const std::string& path, const std::string& content);

}  // namespace softki
