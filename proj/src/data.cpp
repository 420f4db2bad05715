#include "softki/data.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace softki {

Standardization Standardization::identity(Index d) {
  Standardization s;
  s.x_mean = DenseVector::Zero(d);
  s.x_std = DenseVector::Ones(d);
  return s;
}

DenseMatrix Standardization::apply_x(const DenseMatrix& x) const {
  if (x.cols() != x_mean.size()) {
    throw DimensionMismatch("standardization expects " +
                            std::to_string(x_mean.size()) + " columns, got " +
                            std::to_string(x.cols()));
  }
  return (x.rowwise() - x_mean.transpose()) * x_std.cwiseInverse().asDiagonal();
}

DenseVector Standardization::apply_y(const DenseVector& y) const {
  return (y.array() - y_mean) / y_std;
}

DenseMatrix Standardization::invert_x(const DenseMatrix& x) const {
  return (x * x_std.asDiagonal()).rowwise() + x_mean.transpose();
}

DenseVector Standardization::invert_y(const DenseVector& y) const {
  return (y.array() * y_std + y_mean).matrix();
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& field, double& out) {
  const std::string t = trim(field);
  if (t.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size() && errno != ERANGE;
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw FileNotFound("file not found: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool skipped_header = !schema.header;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    const std::size_t row = rows.size() + 1;
    std::vector<double> values;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      double v;
      if (!parse_double(field, v)) {
        throw ParseError(row, values.size() + 1,
                         "not a number: '" + trim(field) + "'");
      }
      values.push_back(v);
    }
    if (!line.empty() && line.back() == ',') {
      throw ParseError(row, values.size() + 1, "empty field");
    }
    if (width == 0) width = values.size();
    if (values.size() != width) {
      throw ParseError(row, std::min(values.size(), width) + 1,
                       "expected " + std::to_string(width) + " fields, got " +
                           std::to_string(values.size()));
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw EmptyFile("no data rows in " + path);
  if (width < 2) throw ParseError(1, 1, "need at least one feature and a target");
  const int t = schema.target_column < 0 ? int(width) + schema.target_column
                                         : schema.target_column;
  if (t < 0 || t >= int(width)) {
    throw InvalidArgument("target column out of range");
  }
  Dataset ds;
  ds.x.resize(Index(rows.size()), Index(width) - 1);
  ds.y.resize(Index(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Index c = 0;
    for (std::size_t j = 0; j < width; ++j) {
      if (int(j) == t) {
        ds.y(Index(i)) = rows[i][j];
      } else {
        ds.x(Index(i), c++) = rows[i][j];
      }
    }
  }
  ds.stats = Standardization::identity(ds.dims());
  return ds;
}

std::vector<std::string> standardize_pair(Dataset& train, Dataset& test) {
  const Index n = train.size();
  const Index d = train.dims();
  if (n < 1) throw InvalidArgument("cannot standardize an empty training set");
  if (test.size() > 0 && test.dims() != d) {
    throw DimensionMismatch("train and test have different widths");
  }
  std::vector<std::string> warnings;
  Standardization s;
  s.x_mean = train.x.colwise().mean().transpose();
  s.x_std.resize(d);
  for (Index k = 0; k < d; ++k) {
    const double var =
        (train.x.col(k).array() - s.x_mean(k)).square().sum() / double(n);
    s.x_std(k) = std::sqrt(var);
    if (!(s.x_std(k) > 0)) {
      warnings.push_back("DegenerateColumn: feature " + std::to_string(k) +
                         " has zero variance; std set to 1");
      s.x_std(k) = 1.0;
    }
  }
  s.y_mean = train.y.mean();
  s.y_std = std::sqrt((train.y.array() - s.y_mean).square().sum() / double(n));
  if (!(s.y_std > 0)) {
    warnings.push_back("DegenerateColumn: target has zero variance; std set to 1");
    s.y_std = 1.0;
  }
  train.x = s.apply_x(train.x);
  train.y = s.apply_y(train.y);
  train.stats = s;
  train.split = Split::kTrain;
  if (test.size() > 0) {
    test.x = s.apply_x(test.x);
    test.y = s.apply_y(test.y);
  }
  test.stats = s;
  test.split = Split::kTest;
  return warnings;
}

namespace {

Dataset take_rows(const Dataset& src, const std::vector<Index>& idx, Index begin,
                  Index end) {
  Dataset out;
  out.x.resize(end - begin, src.dims());
  out.y.resize(end - begin);
  for (Index i = begin; i < end; ++i) {
    out.x.row(i - begin) = src.x.row(idx[i]);
    out.y(i - begin) = src.y(idx[i]);
  }
  return out;
}

}  // namespace

SplitResult split_standardize(const Dataset& raw, double train_fraction,
                              std::uint64_t seed) {
  if (!(train_fraction > 0 && train_fraction < 1)) {
    throw InvalidArgument("train fraction must lie in (0, 1)");
  }
  const Index n = raw.size();
  std::vector<Index> idx(n);
  std::iota(idx.begin(), idx.end(), Index(0));
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const Index n_train =
      std::clamp<Index>(Index(std::llround(train_fraction * double(n))), 1, n);
  SplitResult out;
  out.train = take_rows(raw, idx, 0, n_train);
  out.test = take_rows(raw, idx, n_train, n);
  out.warnings = standardize_pair(out.train, out.test);
  return out;
}

double ricker(double r, double width, double amplitude) {
  const double q = (r * r) / (width * width);
  return amplitude * (1.0 - q) * std::exp(-0.5 * q);
}

SplitResult ricker_dataset(const RickerOptions& o) {
  if (o.n_train < 1 || o.n_test < 0) throw InvalidArgument("ricker: bad sizes");
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unif(-o.radius, o.radius);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto sample = [&](Index count, bool noisy) {
    Dataset ds;
    ds.x.resize(count, 2);
    ds.y.resize(count);
    for (Index i = 0; i < count; ++i) {
      ds.x(i, 0) = unif(rng);
      ds.x(i, 1) = unif(rng);
      ds.y(i) = ricker(ds.x.row(i).norm(), o.width, o.amplitude);
      if (noisy && o.noise > 0) ds.y(i) += o.noise * normal(rng);
    }
    return ds;
  };
  SplitResult out;
  out.train = sample(o.n_train, true);
  out.test = sample(o.n_test, false);
  out.warnings = standardize_pair(out.train, out.test);
  return out;
}

}  // namespace softki

namespace softki {

SplitResult coincident_dataset(const CoincidentOptions& o) {
  if (o.locations < 1 || o.n_train < 1 || o.n_test < 0) {
    throw InvalidArgument("coincident dataset: bad sizes");
  }
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseMatrix sites(o.locations, 2);
  for (Index i = 0; i < sites.size(); ++i) sites.data()[i] = unif(rng);
  std::uniform_int_distribution<Index> pick(0, o.locations - 1);
  auto sample = [&](Index count) {
    Dataset ds;
    ds.x.resize(count, 2);
    ds.y.resize(count);
    for (Index i = 0; i < count; ++i) {
      ds.x.row(i) = sites.row(pick(rng));
      ds.y(i) = std::sin(ds.x(i, 0)) + 0.5 * std::cos(2.0 * ds.x(i, 1)) +
                o.noise * normal(rng);
    }
    return ds;
  };
  SplitResult out;
  out.train = sample(o.n_train);
  out.test = sample(o.n_test);
  out.warnings = standardize_pair(out.train, out.test);
  return out;
}

}  // namespace softki
