#include "tabsyn/clbn.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace tabsyn;

namespace {

Schema binary_schema(int ncols) {
  Schema s;
  for (int c = 0; c < ncols; ++c)
    s.columns.push_back({"b" + std::to_string(c), ColKind::discrete, {"0", "1"}, false});
  return s;
}

}  // namespace

TEST_CASE("chow-liu: the tree joins the correlated pair") {
  // b0 and b1 perfectly correlated, b2 independent
  Schema s = binary_schema(3);
  Table t(s);
  Rng rng(1);
  t.add_rows(2000);
  for (int r = 0; r < 2000; ++r) {
    const int x = static_cast<int>(rng.uniform_index(2));
    t.set_cat(r, 0, x);
    t.set_cat(r, 1, x);
    t.set_cat(r, 2, static_cast<int>(rng.uniform_index(2)));
  }
  const ChowLiuModel m = ChowLiuModel::fit(t);
  const auto edges = m.undirected_edges();
  REQUIRE(edges.size() == 2);  // column count - 1
  CHECK(edges[0] == std::pair<int, int>(0, 1));
}

TEST_CASE("chow-liu: independent columns score near the sum of marginal entropies") {
  Schema s = binary_schema(3);
  Table t(s);
  Rng rng(2);
  t.add_rows(20000);
  const double p0 = 0.5, p1 = 0.2, p2 = 0.8;
  for (int r = 0; r < 20000; ++r) {
    t.set_cat(r, 0, rng.uniform() < p0 ? 1 : 0);
    t.set_cat(r, 1, rng.uniform() < p1 ? 1 : 0);
    t.set_cat(r, 2, rng.uniform() < p2 ? 1 : 0);
  }
  const ChowLiuModel m = ChowLiuModel::fit(t);
  auto h = [](double p) { return -(p * std::log(p) + (1 - p) * std::log(1 - p)); };
  const double expected = -(h(p0) + h(p1) + h(p2));
  Rng rng2(3);
  const Table syn = m.sample(20000, rng2);
  CHECK(m.mean_loglik(syn) == doctest::Approx(expected).epsilon(0.02));
}

TEST_CASE("chow-liu sample: root marginal frequencies") {
  Schema s = binary_schema(1);
  Table t(s);
  t.add_rows(100);
  for (int r = 0; r < 100; ++r) t.set_cat(r, 0, r < 30 ? 0 : 1);
  const ChowLiuModel m = ChowLiuModel::fit(t);
  Rng rng(4);
  const Table syn = m.sample(100000, rng);
  long zeros = 0;
  for (std::size_t r = 0; r < syn.rows(); ++r)
    if (syn.cat(r, 0) == 0) ++zeros;
  CHECK(std::abs(zeros / 100000.0 - 0.3) < 0.01);
}

TEST_CASE("chow-liu sample: de-discretized values stay inside the column range") {
  Schema s;
  s.columns.push_back({"x", ColKind::continuous, {}, false});
  s.columns.push_back({"d", ColKind::discrete, {"a", "b"}, false});
  Table t(s);
  Rng rng(5);
  t.add_rows(5000);
  for (int r = 0; r < 5000; ++r) {
    t.set_num(r, 0, rng.uniform(-3.0, 7.0));
    t.set_cat(r, 1, static_cast<int>(rng.uniform_index(2)));
  }
  const ChowLiuModel m = ChowLiuModel::fit(t, 15);
  Rng rng2(6);
  const Table syn = m.sample(20000, rng2);
  double lo = 1e300, hi = -1e300;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    lo = std::min(lo, t.num(r, 0));
    hi = std::max(hi, t.num(r, 0));
  }
  for (std::size_t r = 0; r < syn.rows(); ++r) {
    CHECK(syn.num(r, 0) >= lo);
    CHECK(syn.num(r, 0) <= hi);
  }
  // deterministic under a fixed seed
  Rng a(7), b(7);
  const Table s1 = m.sample(100, a);
  const Table s2 = m.sample(100, b);
  for (std::size_t r = 0; r < 100; ++r) CHECK(s1.num(r, 0) == s2.num(r, 0));
}

TEST_CASE("chow-liu: sampled edge joint matches the learned conditional") {
  Schema s = binary_schema(2);
  Table t(s);
  Rng rng(8);
  t.add_rows(10000);
  for (int r = 0; r < 10000; ++r) {
    const int x = static_cast<int>(rng.uniform_index(2));
    const int y = rng.uniform() < (x ? 0.9 : 0.25) ? 1 : 0;
    t.set_cat(r, 0, x);
    t.set_cat(r, 1, y);
  }
  const ChowLiuModel m = ChowLiuModel::fit(t);
  Rng rng2(9);
  const Table syn = m.sample(100000, rng2);
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t r = 0; r < syn.rows(); ++r)
    joint[{syn.cat(r, 0), syn.cat(r, 1)}] += 1.0 / 100000.0;
  std::map<std::pair<int, int>, double> expected;
  for (std::size_t r = 0; r < t.rows(); ++r) expected[{t.cat(r, 0), t.cat(r, 1)}] += 1e-4;
  double tv = 0.0;
  for (const auto& [k, p] : expected) tv += std::abs(joint[k] - p);
  CHECK(0.5 * tv < 0.02);
}

TEST_CASE("chow-liu: recovers a generating tree from samples") {
  // chain b0 -> b1 -> b2 -> b3 with strong dependence
  Schema s = binary_schema(4);
  Rng rng(10);
  int recovered = 0;
  for (int seed = 0; seed < 5; ++seed) {
    Table t(s);
    t.add_rows(10000);
    Rng data_rng(100 + seed);
    for (int r = 0; r < 10000; ++r) {
      int prev = static_cast<int>(data_rng.uniform_index(2));
      t.set_cat(r, 0, prev);
      for (int c = 1; c < 4; ++c) {
        prev = data_rng.uniform() < (prev ? 0.85 : 0.15) ? 1 : 0;
        t.set_cat(r, c, prev);
      }
    }
    const ChowLiuModel m = ChowLiuModel::fit(t);
    const auto edges = m.undirected_edges();
    const std::vector<std::pair<int, int>> truth{{0, 1}, {1, 2}, {2, 3}};
    if (edges == truth) ++recovered;
  }
  CHECK(recovered == 5);
  (void)rng;
}

TEST_CASE("chow-liu: single column and empty input") {
  Schema s = binary_schema(1);
  Table t(s);
  t.add_rows(10);
  for (int r = 0; r < 10; ++r) t.set_cat(r, 0, r % 2);
  const ChowLiuModel m = ChowLiuModel::fit(t);
  CHECK(m.undirected_edges().empty());

  Table empty(s);
  CHECK_THROWS_AS((void)ChowLiuModel::fit(empty), std::invalid_argument);
}
