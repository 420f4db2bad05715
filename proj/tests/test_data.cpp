#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <unistd.h>

#include "softki/data.hpp"

using namespace softki;

namespace {

class TempFile {
 public:
  explicit TempFile(const std::string& content) {
    path_ = (std::filesystem::temp_directory_path() /
             ("softki_data_" + std::to_string(counter_++) + "_" +
              std::to_string(::getpid()) + ".csv"))
                .string();
    std::ofstream(path_) << content;
  }
  ~TempFile() { std::remove(path_.c_str()); }
  const std::string& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  std::string path_;
};

Dataset linear_raw(Index n) {
  Dataset d;
  d.x.resize(n, 2);
  d.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    d.x(i, 0) = double(i);
    d.x(i, 1) = std::sin(double(i));
    d.y(i) = 3.0 * double(i) + 1.0;
  }
  return d;
}

}  // namespace

TEST(Csv, TargetLastColumn) {
  TempFile f("1,2\n3,4\n5,6");
  const Dataset d = load_csv(f.path());
  ASSERT_EQ(d.size(), 3);
  ASSERT_EQ(d.dims(), 1);
  EXPECT_EQ(d.x(0, 0), 1);
  EXPECT_EQ(d.x(1, 0), 3);
  EXPECT_EQ(d.x(2, 0), 5);
  EXPECT_EQ(d.y(0), 2);
  EXPECT_EQ(d.y(1), 4);
  EXPECT_EQ(d.y(2), 6);
}

TEST(Csv, HeaderSkippedAndTargetChosen) {
  TempFile f("a,b,c\n1,2,3\n4,5,6\n");
  CsvSchema s;
  s.header = true;
  s.target_column = 0;
  const Dataset d = load_csv(f.path(), s);
  ASSERT_EQ(d.size(), 2);
  EXPECT_EQ(d.y(1), 4);
  EXPECT_EQ(d.x(1, 0), 5);
  EXPECT_EQ(d.x(1, 1), 6);
}

TEST(Csv, NonNumericFieldReportsLocation) {
  TempFile f("1,abc\n");
  try {
    load_csv(f.path());
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 1u);
    EXPECT_EQ(e.col(), 2u);
  }
  TempFile g("h1,h2\n1,2\n3,x4\n");
  CsvSchema s;
  s.header = true;
  try {
    load_csv(g.path(), s);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.col(), 2u);
  }
}

TEST(Csv, RaggedEmptyAndMissing) {
  TempFile ragged("1,2\n3\n");
  EXPECT_THROW(load_csv(ragged.path()), ParseError);
  TempFile empty("");
  EXPECT_THROW(load_csv(empty.path()), EmptyFile);
  TempFile header_only("a,b\n");
  CsvSchema s;
  s.header = true;
  EXPECT_THROW(load_csv(header_only.path(), s), EmptyFile);
  EXPECT_THROW(load_csv("/nonexistent/softki.csv"), FileNotFound);
}

TEST(Split, SizesAndStandardization) {
  const SplitResult s = split_standardize(linear_raw(10), 0.9, 0);
  EXPECT_EQ(s.train.size(), 9);
  EXPECT_EQ(s.test.size(), 1);

  const SplitResult big = split_standardize(linear_raw(500), 0.9, 1);
  const DenseVector mean = big.train.x.colwise().mean();
  EXPECT_LE(mean.cwiseAbs().maxCoeff(), 1e-10);
  for (Index k = 0; k < 2; ++k) {
    const double var = (big.train.x.col(k).array() - mean(k)).square().mean();
    EXPECT_NEAR(std::sqrt(var), 1.0, 1e-10);
  }
  EXPECT_NEAR(big.train.y.mean(), 0.0, 1e-10);
  EXPECT_NEAR(std::sqrt((big.train.y.array() - big.train.y.mean()).square().mean()), 1.0,
              1e-10);
  EXPECT_EQ(big.train.split, Split::kTrain);
  EXPECT_EQ(big.test.split, Split::kTest);
}

TEST(Split, RoundTripRecoversRawValues) {
  const Dataset raw = linear_raw(200);
  const SplitResult s = split_standardize(raw, 0.8, 3);
  const DenseVector y = s.train.stats.invert_y(s.train.y);
  const DenseMatrix x = s.train.stats.invert_x(s.train.x);
  // Raw values are i-indexed, so each restored row identifies its source.
  for (Index r = 0; r < y.size(); ++r) {
    const Index i = Index(std::llround(x(r, 0)));
    EXPECT_NEAR(y(r), raw.y(i), 1e-12 * std::abs(raw.y(i)));
    EXPECT_NEAR(x(r, 1), raw.x(i, 1), 1e-12);
  }
}

TEST(Split, DisjointExhaustiveDeterministic) {
  const Dataset raw = linear_raw(101);
  const SplitResult a = split_standardize(raw, 0.7, 9);
  const SplitResult b = split_standardize(raw, 0.7, 9);
  EXPECT_EQ(a.train.x, b.train.x);
  EXPECT_EQ(a.test.y, b.test.y);
  std::vector<int> seen(101, 0);
  for (const Dataset* d : {&a.train, &a.test}) {
    const DenseMatrix x = d->stats.invert_x(d->x);
    for (Index r = 0; r < x.rows(); ++r) ++seen[std::llround(x(r, 0))];
  }
  for (int c : seen) EXPECT_EQ(c, 1);
  EXPECT_NE(split_standardize(raw, 0.7, 10).train.x, a.train.x);
}

TEST(Split, StatisticsIgnoreTestRows) {
  Dataset tr;
  Dataset te;
  const Dataset raw = linear_raw(50);
  tr.x = raw.x.topRows(40);
  tr.y = raw.y.head(40);
  te.x = raw.x.bottomRows(10);
  te.y = raw.y.tail(10);
  Dataset tr2 = tr, te2 = te;
  te2.x.array() *= 1000.0;
  te2.y.array() -= 77.0;
  standardize_pair(tr, te);
  standardize_pair(tr2, te2);
  EXPECT_EQ(tr.stats.x_mean, tr2.stats.x_mean);
  EXPECT_EQ(tr.stats.x_std, tr2.stats.x_std);
  EXPECT_EQ(tr.stats.y_mean, tr2.stats.y_mean);
  EXPECT_EQ(tr.stats.y_std, tr2.stats.y_std);
  EXPECT_EQ(te.stats.y_mean, tr.stats.y_mean);
}

TEST(Split, DegenerateColumnWarns) {
  Dataset raw = linear_raw(20);
  raw.x.col(1).setConstant(4.0);
  const SplitResult s = split_standardize(raw, 0.5, 0);
  ASSERT_EQ(s.warnings.size(), 1u);
  EXPECT_NE(s.warnings[0].find("DegenerateColumn"), std::string::npos);
  EXPECT_EQ(s.train.stats.x_std(1), 1.0);
  EXPECT_THROW(split_standardize(raw, 1.0, 0), InvalidArgument);
  EXPECT_THROW(split_standardize(raw, 0.0, 0), InvalidArgument);
}

TEST(Ricker, ClosedFormProperties) {
  EXPECT_EQ(ricker(0.0, 1.3, 2.5), 2.5);
  EXPECT_EQ(ricker(1.3, 1.3, 2.5), 0.0);
  EXPECT_NEAR(ricker(2.0, 1.0, 1.0), -3.0 * std::exp(-2.0), 1e-15);
}

TEST(Ricker, DatasetShapeSymmetryAndDeterminism) {
  RickerOptions o;
  o.n_train = 300;
  o.n_test = 40;
  const SplitResult a = ricker_dataset(o);
  const SplitResult b = ricker_dataset(o);
  EXPECT_EQ(a.train.size(), 300);
  EXPECT_EQ(a.test.size(), 40);
  EXPECT_EQ(a.train.dims(), 2);
  EXPECT_EQ(a.train.x, b.train.x);
  EXPECT_EQ(a.test.y, b.test.y);
  const DenseMatrix x = a.train.stats.invert_x(a.train.x);
  const DenseVector y = a.train.stats.invert_y(a.train.y);
  EXPECT_LE(x.cwiseAbs().maxCoeff(), o.radius + 1e-12);
  for (Index i = 0; i < 300; ++i) {
    const double r = x.row(i).norm();
    EXPECT_NEAR(y(i), ricker(r, 1.0, 1.0), 1e-12);
    // Radial symmetry of the generator function.
    EXPECT_EQ(ricker(r, 1.0, 1.0), ricker((-x.row(i)).norm(), 1.0, 1.0));
  }
}

TEST(Coincident, FewDistinctSites) {
  const SplitResult s = coincident_dataset();
  std::set<std::pair<double, double>> sites;
  for (Index i = 0; i < s.train.size(); ++i) sites.insert({s.train.x(i, 0), s.train.x(i, 1)});
  EXPECT_LE(sites.size(), 6u);
  EXPECT_EQ(s.train.size(), 400);
}
