#include "tabsyn/ctgan.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace tabsyn;
using namespace tabsyn::ad;

namespace {

// mixed table: one bimodal continuous column and one imbalanced discrete
Table toy_table(int n, Rng& rng) {
  Schema s;
  s.columns.push_back({"x", ColKind::continuous, {}, false});
  s.columns.push_back({"label", ColKind::discrete, {"common", "rare"}, false});
  Table t(s);
  t.add_rows(n);
  for (int r = 0; r < n; ++r) {
    const bool rare = rng.uniform() < 0.2;
    t.set_cat(r, 1, rare ? 1 : 0);
    t.set_num(r, 0, rare ? 4.0 + 0.1 * rng.normal() : -1.0 + 0.3 * rng.normal());
  }
  return t;
}

CtganConfig small_config() {
  CtganConfig cfg;
  cfg.batch = 20;
  cfg.pac = 2;
  cfg.z_dim = 16;
  cfg.hidden = 32;
  cfg.epochs = 1;
  return cfg;
}

// critic net computing exactly C(x) = x . w (positive-region leaky trick)
detail::CriticNet linear_critic(const Vec& w) {
  detail::CriticNet c;
  const int d = static_cast<int>(w.size());
  const int h = 4;
  c.w1 = Var("critic.w1", Mat::Zero(d, h));
  for (int i = 0; i < d; ++i) c.w1.value(i, 0) = w(i);
  c.b1 = Var("critic.b1", Mat::Constant(1, h, 1000.0));
  c.w2 = Var("critic.w2", Mat::Identity(h, h));
  c.b2 = Var("critic.b2", Mat::Zero(1, h));
  c.w3 = Var("critic.w3", Mat::Zero(h, 1));
  c.w3.value(0, 0) = 1.0;
  c.b3 = Var("critic.b3", Mat::Constant(1, 1, -1000.0));
  return c;
}

}  // namespace

TEST_CASE("generator forward: widths, block normalization, tanh range") {
  Rng rng(1);
  Table t = toy_table(200, rng);
  RowCodec codec = RowCodec::fit(t, NormKind::vgm);
  detail::GeneratorNet gen;
  gen.init(16, 32, codec.width(), rng);
  Tape tape;
  const Mat z = rng.normal_matrix(24, 16);
  const auto fwd = gen.forward(tape, z, codec, 0.2, rng, true);
  const Mat& rows = tape.value(fwd.rows);
  CHECK(rows.cols() == codec.width());
  CHECK(rows.rows() == 24);
  for (const RowCodec::Block& b : codec.blocks()) {
    for (int r = 0; r < rows.rows(); ++r) {
      if (b.continuous) {
        CHECK(std::abs(rows(r, b.offset)) < 1.0);
        CHECK(rows.row(r).segment(b.offset + 1, b.width - 1).sum() ==
              doctest::Approx(1.0).epsilon(1e-9));
      } else {
        CHECK(rows.row(r).segment(b.offset, b.width).sum() ==
              doctest::Approx(1.0).epsilon(1e-9));
        CHECK(rows.row(r).segment(b.offset, b.width).minCoeff() >= 0.0);
      }
    }
  }
  CHECK(fwd.disc_cols == std::vector<int>{1});
}

TEST_CASE("critic forward: one score per pac and eval determinism") {
  Rng rng(2);
  detail::CriticNet critic;
  critic.init(3 * 7, 16, rng);
  Tape tape;
  const Mat packed = rng.normal_matrix(50, 21);  // batch 150, pac 3
  const int in = tape.input(packed);
  const int s = critic.forward(tape, in, 0.2, 0.5, rng, /*train=*/false);
  CHECK(tape.rows(s) == 50);
  CHECK(tape.cols(s) == 1);
  // dropout off at evaluation: identical input gives identical scores
  const int s2 = critic.forward(tape, in, 0.2, 0.5, rng, /*train=*/false);
  CHECK(tape.value(s) == tape.value(s2));
  // wrong input width is rejected, never padded
  Tape t2;
  CHECK_THROWS_AS(
      (void)critic.forward(t2, t2.input(rng.normal_matrix(50, 20)), 0.2, 0.5, rng, false),
      std::invalid_argument);
}

TEST_CASE("pac = 1 degenerates to per-row scoring") {
  Rng rng(3);
  detail::CriticNet critic;
  critic.init(5, 8, rng);
  Tape tape;
  const Mat rows = rng.normal_matrix(10, 5);
  const int s = critic.forward(tape, tape.input(rows), 0.2, 0.0, rng, true);
  CHECK(tape.rows(s) == 10);
}

TEST_CASE("gradient penalty: unit-norm linear critic has zero penalty") {
  Vec w(3);
  w << 1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0);
  detail::CriticNet critic = linear_critic(w);
  Rng rng(4);
  Tape tape;
  const Mat real = rng.normal_matrix(6, 3) * 0.1;
  const Mat fake = rng.normal_matrix(6, 3) * 0.1;
  const int gp = detail::gradient_penalty_node(tape, critic, real, fake, Mat(6, 0), 0.2,
                                               0.0, rng);
  CHECK(tape.value(gp)(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("gradient penalty: norm-2 linear critic pays (2-1)^2 = 1") {
  Vec w(3);
  w << 2.0, 0.0, 0.0;
  detail::CriticNet critic = linear_critic(w);
  Rng rng(5);
  Tape tape;
  const Mat real = rng.normal_matrix(4, 3) * 0.1;
  const Mat fake = rng.normal_matrix(4, 3) * 0.1;
  const int gp = detail::gradient_penalty_node(tape, critic, real, fake, Mat(4, 0), 0.2,
                                               0.0, rng);
  CHECK(tape.value(gp)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("gradient penalty: parameter gradient matches finite differences") {
  Rng init_rng(6);
  detail::CriticNet critic;
  critic.init(4, 6, init_rng);
  const Mat real = init_rng.normal_matrix(4, 4);
  const Mat fake = init_rng.normal_matrix(4, 4);

  auto penalty = [&](Tape& t, int* out = nullptr) {
    Rng rng(77);  // frozen interpolates and dropout masks
    const int gp =
        detail::gradient_penalty_node(t, critic, real, fake, Mat(4, 0), 0.2, 0.5, rng);
    if (out) *out = gp;
    return t.value(gp)(0, 0);
  };
  for (Var* v : {&critic.w1, &critic.w2, &critic.w3}) {
    for (Var* u : critic.vars()) u->zero_grad();
    Tape t;
    int gp = -1;
    penalty(t, &gp);
    t.backward(gp);
    const Mat fd = tabsyn::testing::finite_diff(*v, [&] {
      Tape t2;
      return penalty(t2);
    });
    CHECK(tabsyn::testing::max_rel_err(v->grad, fd) < 1e-3);
  }
}

TEST_CASE("gradient penalty: statistically symmetric under real/fake swap") {
  Rng init_rng(7);
  detail::CriticNet critic;
  critic.init(4, 8, init_rng);
  const Mat a = init_rng.normal_matrix(8, 4);
  const Mat b = init_rng.normal_matrix(8, 4);
  double mean_ab = 0.0, mean_ba = 0.0;
  const int trials = 400;
  for (int i = 0; i < trials; ++i) {
    Rng r1(1000 + i), r2(5000 + i);
    Tape t1, t2;
    mean_ab +=
        t1.value(detail::gradient_penalty_node(t1, critic, a, b, Mat(8, 0), 0.2, 0.0, r1))(0, 0);
    mean_ba +=
        t2.value(detail::gradient_penalty_node(t2, critic, b, a, Mat(8, 0), 0.2, 0.0, r2))(0, 0);
  }
  mean_ab /= trials;
  mean_ba /= trials;
  CHECK(mean_ab == doctest::Approx(mean_ba).epsilon(0.05));
}

TEST_CASE("cross-entropy term is exactly zero for a saturated matching block") {
  Tape t;
  Mat logits(2, 3);
  logits << 1000.0, 0.0, 0.0, 0.0, 1000.0, 0.0;
  Mat mask = Mat::Zero(2, 3);
  mask(0, 0) = 1.0;
  mask(1, 1) = 1.0;
  const int ls = t.log_softmax(t.input(logits));
  const int picked = t.mul_mask(ls, mask);
  const double ce = -t.value(t.sum_all(picked))(0, 0) / 2.0;
  CHECK(ce == 0.0);
  // and a mismatched one-hot against head probability eps costs -log(eps)
  Mat soft(1, 2);
  soft << 0.999, 0.001;
  Tape t2;
  const int lg = t2.log_op(t2.input(soft));
  CHECK(t2.value(lg)(0, 1) == doctest::Approx(std::log(0.001)));
}

TEST_CASE("fit: step count, determinism, and error contracts") {
  Rng rng(8);
  Table t = toy_table(105, rng);
  CtganConfig cfg = small_config();
  cfg.epochs = 2;

  // floor(105 / 20) = 5 steps per epoch
  CtganModel m1 = CtganModel::fit(t, cfg, 99);
  CHECK(m1.losses().size() == 10);

  CtganModel m2 = CtganModel::fit(t, cfg, 99);
  REQUIRE(m2.losses().size() == m1.losses().size());
  for (std::size_t i = 0; i < m1.losses().size(); ++i) {
    CHECK(m1.losses()[i].critic == m2.losses()[i].critic);
    CHECK(m1.losses()[i].generator == m2.losses()[i].generator);
  }

  Table empty(t.schema());
  CHECK_THROWS_AS((void)CtganModel::fit(empty, cfg, 0), std::invalid_argument);
  CtganConfig big = cfg;
  big.batch = 2000;
  big.pac = 2;
  CHECK_THROWS_AS((void)CtganModel::fit(t, big, 0), std::invalid_argument);
  CtganConfig bad = cfg;
  bad.batch = 21;  // not divisible by pac
  CHECK_THROWS_AS((void)CtganModel::fit(t, bad, 0), std::invalid_argument);
}

TEST_CASE("fit: unconditional and vanilla-loss variants run") {
  Rng rng(9);
  Schema s;
  s.columns.push_back({"x", ColKind::continuous, {}, false});
  Table t(s);
  t.add_rows(60);
  for (int r = 0; r < 60; ++r) t.set_num(r, 0, rng.normal());

  CtganConfig cfg = small_config();
  cfg.cond = CondMode::none;
  CtganModel m = CtganModel::fit(t, cfg, 1);  // no discrete columns at all
  CHECK(m.losses().size() == 3);

  CtganConfig v = small_config();
  v.loss = LossKind::vanilla;
  v.pac = 1;
  Rng rng2(10);
  Table t2 = toy_table(60, rng2);
  CtganModel mv = CtganModel::fit(t2, v, 2);
  for (const StepLoss& l : mv.losses()) {
    CHECK(std::isfinite(l.critic));
    CHECK(std::isfinite(l.generator));
  }
}

TEST_CASE("sample: schema-valid output, n = 0, seed reproducibility") {
  Rng rng(11);
  Table t = toy_table(100, rng);
  CtganConfig cfg = small_config();
  cfg.epochs = 3;
  CtganModel m = CtganModel::fit(t, cfg, 5);

  Rng empty_rng(0);
  const Table none = m.sample(0, empty_rng);
  CHECK(none.rows() == 0);
  CHECK(none.schema().columns.size() == 2);

  Rng s1(42), s2(42);
  const Table a = m.sample(700, s1);  // spans multiple chunks
  const Table b = m.sample(700, s2);
  REQUIRE(a.rows() == 700);
  const ContinuousTransform& ct = m.codec().continuous_transform(0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    CHECK(a.num(r, 0) == b.num(r, 0));
    CHECK(a.cat(r, 1) == b.cat(r, 1));
    CHECK(a.cat(r, 1) >= 0);
    CHECK(a.cat(r, 1) < 2);
    // alpha in (-1, 1) puts the value inside some mode's 4-phi band
    bool in_band = false;
    for (int k = 0; k < ct.modes(); ++k)
      if (std::abs(a.num(r, 0) - ct.eta[k]) <= 4.0 * ct.phi[k] + 1e-9) in_band = true;
    CHECK(in_band);
  }
}

TEST_CASE("sample: unknown fixed condition is an error") {
  Rng rng(12);
  Table t = toy_table(60, rng);
  CtganModel m = CtganModel::fit(t, small_config(), 6);
  Rng srng(1);
  CHECK_THROWS_AS((void)m.sample(10, srng, "label", "unseen"), std::invalid_argument);
  CHECK_THROWS_AS((void)m.sample(10, srng, "x", "common"), std::invalid_argument);
  CHECK_NOTHROW((void)m.sample(10, srng, "label", "rare"));
}
