#include "tabsyn/cond.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace tabsyn;

namespace {

// one continuous + two discrete columns with prescribed category counts
Table make_table(const std::vector<long>& d1_counts, const std::vector<long>& d2_counts) {
  Schema s;
  s.columns.push_back({"x", ColKind::continuous, {}, false});
  Column d1{"d1", ColKind::discrete, {}, false};
  for (std::size_t k = 0; k < d1_counts.size(); ++k) d1.categories.push_back("c" + std::to_string(k));
  Column d2{"d2", ColKind::discrete, {}, false};
  for (std::size_t k = 0; k < d2_counts.size(); ++k) d2.categories.push_back("v" + std::to_string(k));
  s.columns.push_back(d1);
  s.columns.push_back(d2);

  long n1 = 0, n2 = 0;
  for (long c : d1_counts) n1 += c;
  for (long c : d2_counts) n2 += c;
  REQUIRE(n1 == n2);

  Table t(s);
  t.add_rows(static_cast<std::size_t>(n1));
  std::size_t r = 0;
  for (std::size_t k = 0; k < d1_counts.size(); ++k)
    for (long i = 0; i < d1_counts[k]; ++i) t.set_cat(r++, 1, static_cast<int>(k));
  r = 0;
  for (std::size_t k = 0; k < d2_counts.size(); ++k)
    for (long i = 0; i < d2_counts[k]; ++i) t.set_cat(r++, 2, static_cast<int>(k));
  for (std::size_t i = 0; i < t.rows(); ++i) t.set_num(i, 0, static_cast<double>(i));
  return t;
}

}  // namespace

TEST_CASE("cond vector layout matches the mask concatenation") {
  // D1 = {1,2,3}, D2 = {1,2}; condition (D2 = 1) -> cond = [0,0,0,1,0]
  Table t = make_table({2, 2, 1}, {3, 2});
  RowCodec codec = RowCodec::fit(t, NormKind::minmax);
  CondSampler sampler(codec, CondMode::log_freq);
  const Vec cond = sampler.cond_vector(sampler.selection_for("d2", "v0"));
  REQUIRE(cond.size() == 5);
  CHECK(cond(0) == 0.0);
  CHECK(cond(1) == 0.0);
  CHECK(cond(2) == 0.0);
  CHECK(cond(3) == 1.0);
  CHECK(cond(4) == 0.0);
  CHECK(cond.sum() == 1.0);
}

TEST_CASE("training condition: balanced counts are sampled uniformly") {
  Table t = make_table({9, 9}, {18});
  RowCodec codec = RowCodec::fit(t, NormKind::minmax);
  CondSampler sampler(codec, CondMode::log_freq);
  Rng rng(1);
  int first = 0, n = 100000, d1_picks = 0;
  for (int i = 0; i < n; ++i) {
    const auto sel = *sampler.sample_training(rng);
    if (sel.column == 1) {
      ++d1_picks;
      if (sel.category == 0) ++first;
    }
  }
  CHECK(std::abs(first / double(d1_picks) - 0.5) < 0.02);
}

TEST_CASE("training condition: log-frequency mass for a 99/1 split") {
  Table t = make_table({99, 1}, {100});
  RowCodec codec = RowCodec::fit(t, NormKind::minmax);
  CondSampler sampler(codec, CondMode::log_freq);
  Rng rng(2);
  const double expected = std::log(2.0) / (std::log(100.0) + std::log(2.0));  // 0.1308
  int minority = 0, d1_picks = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const auto sel = *sampler.sample_training(rng);
    if (sel.column == 1) {
      ++d1_picks;
      if (sel.category == 1) ++minority;
    }
  }
  CHECK(std::abs(minority / double(d1_picks) - expected) < 0.01);
}

TEST_CASE("generation condition: raw frequency mass") {
  Table t = make_table({90, 10}, {100});
  RowCodec codec = RowCodec::fit(t, NormKind::minmax);
  CondSampler sampler(codec, CondMode::log_freq);
  Rng rng(3);
  int major = 0, d1_picks = 0, col1 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const auto sel = *sampler.sample_generation(rng);
    if (sel.column == 1) {
      ++col1;
      if (sel.category == 0) ++major;
    }
  }
  CHECK(std::abs(major / double(col1) - 0.9) < 0.01);
  // both discrete columns picked as i* with probability 1/2
  CHECK(std::abs(col1 / double(n) - 0.5) < 0.01);
}

TEST_CASE("generation condition: single category is always selected") {
  Table t = make_table({5}, {5});
  RowCodec codec = RowCodec::fit(t, NormKind::minmax);
  CondSampler sampler(codec, CondMode::log_freq);
  Rng rng(4);
  for (int i = 0; i < 100; ++i) CHECK(sampler.sample_generation(rng)->category == 0);
}

TEST_CASE("ablation: raw_freq swaps the training PMF") {
  Table t = make_table({99, 1}, {100});
  RowCodec codec = RowCodec::fit(t, NormKind::minmax);
  CondSampler sampler(codec, CondMode::raw_freq);
  Rng rng(5);
  int minority = 0, d1_picks = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const auto sel = *sampler.sample_training(rng);
    if (sel.column == 1) {
      ++d1_picks;
      if (sel.category == 1) ++minority;
    }
  }
  CHECK(std::abs(minority / double(d1_picks) - 0.01) < 0.003);
}

TEST_CASE("ablation: none disables the condition entirely") {
  Table t = make_table({3, 3}, {6});
  RowCodec codec = RowCodec::fit(t, NormKind::minmax);
  CondSampler sampler(codec, CondMode::none);
  CHECK(sampler.cond_width() == 0);
  CHECK_FALSE(sampler.active());
  Rng rng(6);
  CHECK_FALSE(sampler.sample_training(rng).has_value());
  CHECK_THROWS_AS((void)sampler.selection_for("d1", "c0"), std::invalid_argument);
}

TEST_CASE("sample_real_row: uniform over the matching rows") {
  Table t = make_table({3, 7}, {10});
  CategoryIndex index(t);
  CHECK(index.count(1, 0) == 3);
  CHECK(index.count(1, 1) == 7);

  Rng rng(7);
  // single-row category always returns that row
  Table t2 = make_table({1, 9}, {10});
  CategoryIndex idx2(t2);
  for (int i = 0; i < 50; ++i) CHECK(sample_real_row(idx2, {1, 0}, rng) == 0);

  // three-row category: empirical frequencies 1/3 each
  std::map<std::size_t, int> hits;
  const int n = 30000;
  for (int i = 0; i < n; ++i) ++hits[sample_real_row(index, {1, 0}, rng)];
  REQUIRE(hits.size() == 3);
  for (const auto& [row, cnt] : hits) {
    CHECK(t.cat(row, 1) == 0);
    CHECK(std::abs(cnt / double(n) - 1.0 / 3.0) < 0.02);
  }

  // continuous column is not indexed
  CHECK_THROWS_AS((void)sample_real_row(index, {0, 0}, rng), std::invalid_argument);
}

TEST_CASE("invariant: (i*, k*) marginal matches uniform-column x log-frequency PMF") {
  Table t = make_table({50, 30, 20}, {97, 2, 1});
  RowCodec codec = RowCodec::fit(t, NormKind::minmax);
  CondSampler sampler(codec, CondMode::log_freq);

  std::map<std::pair<int, int>, double> expected;
  for (int col : {1, 2}) {
    const auto& d = codec.discrete_transform(col);
    double z = 0.0;
    for (long c : d.counts) z += std::log1p(static_cast<double>(c));
    for (std::size_t k = 0; k < d.counts.size(); ++k)
      expected[{col, static_cast<int>(k)}] =
          0.5 * std::log1p(static_cast<double>(d.counts[k])) / z;
  }

  Rng rng(8);
  std::map<std::pair<int, int>, long> hits;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const auto sel = *sampler.sample_training(rng);
    ++hits[{sel.column, sel.category}];
    // the cond vector always carries exactly one 1
    const Vec cond = sampler.cond_vector(sel);
    CHECK(cond.sum() == 1.0);
    CHECK(cond.maxCoeff() == 1.0);
  }
  double tv = 0.0;
  for (const auto& [key, p] : expected) tv += std::abs(hits[key] / double(n) - p);
  CHECK(0.5 * tv < 0.01);
}
