#include "tabsyn/tvae.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace tabsyn;
using namespace tabsyn::ad;

namespace {

Table mixed_table(int n, Rng& rng) {
  Schema s;
  s.columns.push_back({"x", ColKind::continuous, {}, false});
  s.columns.push_back({"d", ColKind::discrete, {"a", "b", "c"}, false});
  Table t(s);
  t.add_rows(n);
  for (int r = 0; r < n; ++r) {
    const int k = static_cast<int>(rng.uniform_index(3));
    t.set_cat(r, 1, k);
    t.set_num(r, 0, 2.0 * k + 0.1 * rng.normal());
  }
  return t;
}

}  // namespace

TEST_CASE("encoder: zero trunk weights leave mu at its bias") {
  Rng rng(1);
  detail::EncoderNet enc;
  enc.init(6, 16, 128, rng);
  enc.w1.value.setZero();
  enc.w2.value.setZero();
  enc.wmu.value.setZero();
  enc.b1.value.setZero();
  enc.b2.value.setZero();
  enc.bmu.value.setRandom();
  Tape t;
  const auto [mu, s] = enc.forward(t, t.input(rng.normal_matrix(4, 6)));
  CHECK(t.cols(mu) == 128);
  CHECK(t.cols(s) == 128);
  for (int r = 0; r < 4; ++r)
    for (int j = 0; j < 128; ++j) CHECK(t.value(mu)(r, j) == enc.bmu.value(0, j));
  // sigma = exp(s / 2) is finite and strictly positive
  const int sigma = t.exp_op(t.scale(s, 0.5));
  CHECK(t.value(sigma).allFinite());
  CHECK(t.value(sigma).minCoeff() > 0.0);
}

TEST_CASE("decode_loglik: gaussian term vanishes at the mean with delta = 1/sqrt(2 pi)") {
  // single continuous column with one mode: the beta block is 1-wide, so
  // its categorical term is exactly zero and only the gaussian term remains
  Schema s;
  s.columns.push_back({"x", ColKind::continuous, {}, false});
  Table t(s);
  t.add_rows(8);
  for (int r = 0; r < 8; ++r) t.set_num(r, 0, 5.0);
  RowCodec codec = RowCodec::fit(t, NormKind::vgm);
  REQUIRE(codec.width() == 2);

  Rng rng(2);
  detail::DecoderNet dec;
  dec.init(4, 8, codec.width(), 1, rng);
  dec.log_delta.value(0, 0) = std::log(1.0 / std::sqrt(2.0 * M_PI));

  const Mat z = rng.normal_matrix(1, 4);
  // read the head's alpha output for this z, then score that exact alpha
  Tape probe;
  const int head = dec.forward(probe, probe.input(z));
  const double abar = std::tanh(probe.value(head)(0, 0));
  Mat row(1, 2);
  row << abar, 1.0;
  CHECK(detail::decode_loglik(dec, codec, z, row) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("decode_loglik: categorical terms are log of the head mass") {
  Schema s;
  s.columns.push_back({"d", ColKind::discrete, {"a", "b"}, false});
  Table t(s);
  t.add_rows(4);
  for (int r = 0; r < 4; ++r) t.set_cat(r, 0, r % 2);
  RowCodec codec = RowCodec::fit(t, NormKind::vgm);

  Rng rng(3);
  detail::DecoderNet dec;
  dec.init(4, 8, codec.width(), 0, rng);
  dec.wh.value.setZero();
  dec.bh.value << 1000.0, 0.0;  // softmax saturates to [1, 0]

  const Mat z = Mat::Zero(1, 4);
  Mat match(1, 2), miss(1, 2);
  match << 1.0, 0.0;
  miss << 0.0, 1.0;
  CHECK(detail::decode_loglik(dec, codec, z, match) == 0.0);

  dec.bh.value << 0.0, std::log(0.25 / 0.75);  // head mass [0.75, 0.25]
  CHECK(detail::decode_loglik(dec, codec, z, miss) == doctest::Approx(std::log(0.25)));
  CHECK_THROWS_AS((void)detail::decode_loglik(dec, codec, z, Mat::Zero(1, 5)),
                  std::invalid_argument);
}

TEST_CASE("kl node: closed forms and exact gradients") {
  // KL = 0 iff mu = 0, sigma = 1 (s = 0)
  {
    Tape t;
    const int kl = detail::kl_node(t, t.input(Mat::Zero(3, 4)), t.input(Mat::Zero(3, 4)));
    CHECK(t.value(kl)(0, 0) == 0.0);
  }
  // KL(N(mu, I) || N(0, I)) = ||mu||^2 / 2
  {
    Rng rng(4);
    const Mat mu = rng.normal_matrix(5, 7);
    Tape t;
    const int kl = detail::kl_node(t, t.input(mu), t.input(Mat::Zero(5, 7)));
    CHECK(t.value(kl)(0, 0) == doctest::Approx(0.5 * mu.squaredNorm()).epsilon(1e-12));
  }
  // gradients match the closed form: d/dmu = mu, d/ds = (exp(s) - 1) / 2
  {
    Rng rng(5);
    const Mat mu = rng.normal_matrix(2, 3);
    const Mat s = 0.3 * rng.normal_matrix(2, 3);
    Tape t;
    const int mu_in = t.input(mu);
    const int s_in = t.input(s);
    const int kl = detail::kl_node(t, mu_in, s_in);
    t.backward(kl);
    CHECK(tabsyn::testing::max_rel_err(t.grad_of(mu_in), mu) < 1e-12);
    const Mat ds_expected = ((s.array().exp() - 1.0) * 0.5).matrix();
    CHECK(tabsyn::testing::max_rel_err(t.grad_of(s_in), ds_expected) < 1e-12);
  }
}

TEST_CASE("elbo gradient matches finite differences on a toy schema") {
  Rng data_rng(6);
  Table table = mixed_table(40, data_rng);
  RowCodec codec = RowCodec::fit(table, NormKind::vgm);
  Rng enc_rng(7);
  const Mat batch = codec.encode_table(table, enc_rng);

  detail::EncoderNet enc;
  detail::DecoderNet dec;
  enc.init(codec.width(), 8, 6, enc_rng);
  dec.init(6, 8, codec.width(), 1, enc_rng);

  auto loss = [&](Tape& t, int* out = nullptr) {
    Rng rng(99);  // frozen reparameterization noise
    const int l = detail::elbo_loss_node(t, enc, dec, codec, batch, rng);
    if (out) *out = l;
    return t.value(l)(0, 0);
  };
  std::vector<Var*> all = enc.vars();
  for (Var* v : dec.vars()) all.push_back(v);
  for (Var* v : {&enc.w1, &enc.wmu, &enc.ws, &dec.w1, &dec.wh, &dec.log_delta}) {
    for (Var* u : all) u->zero_grad();
    Tape t;
    int l = -1;
    loss(t, &l);
    t.backward(l);
    const Mat fd = tabsyn::testing::finite_diff(*v, [&] {
      Tape t2;
      return loss(t2);
    });
    CHECK(tabsyn::testing::max_rel_err(v->grad, fd) < 1e-3);
  }
}

TEST_CASE("decoder log-likelihood is invariant to row permutation") {
  Rng rng(8);
  Table table = mixed_table(32, rng);
  RowCodec codec = RowCodec::fit(table, NormKind::vgm);
  const Mat rows = codec.encode_table(table, rng);
  const Mat z = rng.normal_matrix(32, 6);

  detail::DecoderNet dec;
  dec.init(6, 8, codec.width(), 1, rng);

  Mat rows_perm(32, rows.cols()), z_perm(32, 6);
  for (int r = 0; r < 32; ++r) {
    rows_perm.row(r) = rows.row(31 - r);
    z_perm.row(r) = z.row(31 - r);
  }
  const double a = detail::decode_loglik(dec, codec, z, rows);
  const double b = detail::decode_loglik(dec, codec, z_perm, rows_perm);
  CHECK(a == doctest::Approx(b).epsilon(1e-9));
}

TEST_CASE("fit: step count rule and seed determinism") {
  Rng rng(9);
  Table table = mixed_table(105, rng);
  TvaeConfig cfg;
  cfg.batch = 20;
  cfg.epochs = 2;
  cfg.latent = 8;
  cfg.hidden = 16;
  TvaeModel a = TvaeModel::fit(table, cfg, 11);
  CHECK(a.losses().size() == 10);  // floor(105 / 20) * 2
  TvaeModel b = TvaeModel::fit(table, cfg, 11);
  for (std::size_t i = 0; i < a.losses().size(); ++i)
    CHECK(a.losses()[i] == b.losses()[i]);

  CHECK_THROWS_AS((void)TvaeModel::fit(Table(table.schema()), cfg, 0),
                  std::invalid_argument);
}

TEST_CASE("sample: empty, in-band alphas, valid categories") {
  Rng rng(10);
  Table table = mixed_table(120, rng);
  TvaeConfig cfg;
  cfg.batch = 30;
  cfg.epochs = 5;
  cfg.latent = 8;
  cfg.hidden = 16;
  TvaeModel m = TvaeModel::fit(table, cfg, 13);

  Rng s0(1);
  CHECK(m.sample(0, s0).rows() == 0);

  Rng s1(2);
  const Table syn = m.sample(777, s1);
  REQUIRE(syn.rows() == 777);
  const ContinuousTransform& ct = m.codec().continuous_transform(0);
  for (std::size_t r = 0; r < syn.rows(); ++r) {
    bool in_band = false;
    for (int k = 0; k < ct.modes(); ++k)
      if (std::abs(syn.num(r, 0) - ct.eta[k]) <= 4.0 * ct.phi[k] + 1e-9) in_band = true;
    CHECK(in_band);
    CHECK(syn.cat(r, 1) >= 0);
    CHECK(syn.cat(r, 1) < 3);
  }
}

TEST_CASE("training reduces the loss on an easy dataset") {
  Rng rng(11);
  Table table = mixed_table(400, rng);
  TvaeConfig cfg;
  cfg.batch = 50;
  cfg.epochs = 30;
  cfg.latent = 8;
  cfg.hidden = 32;
  TvaeModel m = TvaeModel::fit(table, cfg, 17);
  const auto& l = m.losses();
  const double first = std::accumulate(l.begin(), l.begin() + 8, 0.0) / 8.0;
  const double last = std::accumulate(l.end() - 8, l.end(), 0.0) / 8.0;
  CHECK(last < first);
}
