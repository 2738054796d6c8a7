#include "tabsyn/tvae.hpp"

#include <algorithm>
#include <cmath>

namespace tabsyn {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kLogDeltaInit = -2.3025850929940457;  // log 0.1
constexpr double kLogDeltaMin = -6.907755278982137;    // log 1e-3
constexpr double kLogDeltaMax = 0.0;                   // log 1

Mat uniform_init(Eigen::Index rows, Eigen::Index cols, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return rng.uniform_matrix(rows, cols, -bound, bound);
}
}  // namespace

void TvaeConfig::validate() const {
  if (batch <= 0) throw std::invalid_argument("tvae: batch must be positive");
  if (epochs < 0) throw std::invalid_argument("tvae: epochs must be >= 0");
  if (latent <= 0 || hidden <= 0) throw std::invalid_argument("tvae: bad layer widths");
  if (lr <= 0.0) throw std::invalid_argument("tvae: learning rate must be > 0");
}

namespace detail {

void EncoderNet::init(int in_dim, int hidden, int latent, Rng& rng) {
  w1 = ad::Var("enc.w1", uniform_init(in_dim, hidden, in_dim, rng));
  b1 = ad::Var("enc.b1", uniform_init(1, hidden, in_dim, rng));
  w2 = ad::Var("enc.w2", uniform_init(hidden, hidden, hidden, rng));
  b2 = ad::Var("enc.b2", uniform_init(1, hidden, hidden, rng));
  wmu = ad::Var("enc.wmu", uniform_init(hidden, latent, hidden, rng));
  bmu = ad::Var("enc.bmu", uniform_init(1, latent, hidden, rng));
  ws = ad::Var("enc.ws", uniform_init(hidden, latent, hidden, rng));
  bs = ad::Var("enc.bs", uniform_init(1, latent, hidden, rng));
}

std::pair<int, int> EncoderNet::forward(ad::Tape& t, int rows) {
  const int h1 = t.relu(t.add_bias(t.matmul(rows, t.param(w1)), t.param(b1)));
  const int h2 = t.relu(t.add_bias(t.matmul(h1, t.param(w2)), t.param(b2)));
  const int mu = t.add_bias(t.matmul(h2, t.param(wmu)), t.param(bmu));
  const int s = t.add_bias(t.matmul(h2, t.param(ws)), t.param(bs));
  return {mu, s};
}

std::vector<ad::Var*> EncoderNet::vars() {
  return {&w1, &b1, &w2, &b2, &wmu, &bmu, &ws, &bs};
}

void DecoderNet::init(int latent, int hidden, int out_dim, int n_continuous, Rng& rng) {
  w1 = ad::Var("dec.w1", uniform_init(latent, hidden, latent, rng));
  b1 = ad::Var("dec.b1", uniform_init(1, hidden, latent, rng));
  w2 = ad::Var("dec.w2", uniform_init(hidden, hidden, hidden, rng));
  b2 = ad::Var("dec.b2", uniform_init(1, hidden, hidden, rng));
  wh = ad::Var("dec.wh", uniform_init(hidden, out_dim, hidden, rng));
  bh = ad::Var("dec.bh", uniform_init(1, out_dim, hidden, rng));
  log_delta = ad::Var("dec.log_delta", Mat::Constant(1, std::max(n_continuous, 0),
                                                     kLogDeltaInit));
}

int DecoderNet::forward(ad::Tape& t, int z) {
  const int h1 = t.relu(t.add_bias(t.matmul(z, t.param(w1)), t.param(b1)));
  const int h2 = t.relu(t.add_bias(t.matmul(h1, t.param(w2)), t.param(b2)));
  return t.add_bias(t.matmul(h2, t.param(wh)), t.param(bh));
}

std::vector<ad::Var*> DecoderNet::vars() {
  std::vector<ad::Var*> out{&w1, &b1, &w2, &b2, &wh, &bh};
  if (log_delta.value.size() > 0) out.push_back(&log_delta);
  return out;
}

void DecoderNet::clamp_delta() {
  for (Eigen::Index i = 0; i < log_delta.value.size(); ++i)
    log_delta.value(0, i) = std::clamp(log_delta.value(0, i), kLogDeltaMin, kLogDeltaMax);
}

namespace {

// negative log-likelihood of the batch rows under the decoder head, as a
// scalar node (sum over rows and columns)
int recon_nll_node(ad::Tape& t, DecoderNet& dec, const RowCodec& codec, int rows_in,
                   int head, Eigen::Index m) {
  std::vector<int> abar_parts, adata_parts;
  int nll = -1;
  auto add_term = [&](int term) { nll = nll < 0 ? term : t.add(nll, term); };

  for (const RowCodec::Block& b : codec.blocks()) {
    if (b.continuous) {
      abar_parts.push_back(t.tanh_op(t.slice_cols(head, b.offset, 1)));
      adata_parts.push_back(t.slice_cols(rows_in, b.offset, 1));
      // mode one-hot block is categorical
      const int ls = t.log_softmax(t.slice_cols(head, b.offset + 1, b.width - 1));
      const int mass = t.mul(ls, t.slice_cols(rows_in, b.offset + 1, b.width - 1));
      add_term(t.scale(t.sum_all(mass), -1.0));
    } else {
      const int ls = t.log_softmax(t.slice_cols(head, b.offset, b.width));
      const int mass = t.mul(ls, t.slice_cols(rows_in, b.offset, b.width));
      add_term(t.scale(t.sum_all(mass), -1.0));
    }
  }

  if (!abar_parts.empty()) {
    const int nc = static_cast<int>(abar_parts.size());
    const int abar = t.concat_cols(abar_parts);
    const int adata = t.concat_cols(adata_parts);
    const int diff = t.sub(adata, abar);
    const int ld = t.param(dec.log_delta);
    // 0.5 exp(-2 log delta) per column
    const int inv2var = t.scale(t.exp_op(t.scale(ld, -2.0)), 0.5);
    const int quad = t.sum_all(t.mul_row(t.square(diff), inv2var));
    const int logdet = t.scale(t.sum_all(ld), static_cast<double>(m));
    add_term(t.add_scalar(t.add(quad, logdet),
                          static_cast<double>(m) * nc * kHalfLog2Pi));
  }
  return nll;
}

}  // namespace

int kl_node(ad::Tape& t, int mu, int s) {
  // 0.5 sum(mu^2 + exp(s) - 1 - s)
  return t.scale(
      t.sum_all(t.add_scalar(t.sub(t.add(t.square(mu), t.exp_op(s)), s), -1.0)), 0.5);
}

int elbo_loss_node(ad::Tape& t, EncoderNet& enc, DecoderNet& dec, const RowCodec& codec,
                   const Mat& batch_rows, Rng& rng) {
  const Eigen::Index m = batch_rows.rows();
  const int rows_in = t.input(batch_rows);
  const auto [mu, s] = enc.forward(t, rows_in);
  const int sigma = t.exp_op(t.scale(s, 0.5));
  const int eps = t.input(rng.normal_matrix(m, t.cols(mu)));
  const int z = t.add(mu, t.mul(sigma, eps));
  const int head = dec.forward(t, z);
  const int nll = recon_nll_node(t, dec, codec, rows_in, head, m);
  const int kl = kl_node(t, mu, s);
  return t.scale(t.add(nll, kl), 1.0 / static_cast<double>(m));
}

double decode_loglik(DecoderNet& dec, const RowCodec& codec, const Mat& z,
                     const Mat& encoded_row) {
  if (encoded_row.cols() != codec.width())
    throw std::invalid_argument("decode_loglik: row width mismatch");
  if (z.rows() != encoded_row.rows())
    throw std::invalid_argument("decode_loglik: z/row batch mismatch");
  ad::Tape t;
  const int rows_in = t.input(encoded_row);
  const int head = dec.forward(t, t.input(z));
  const int nll = recon_nll_node(t, dec, codec, rows_in, head, encoded_row.rows());
  return -t.value(nll)(0, 0) / static_cast<double>(encoded_row.rows());
}

}  // namespace detail

TvaeModel TvaeModel::fit(const Table& table, const TvaeConfig& config, std::uint64_t seed,
                         const Progress& progress) {
  config.validate();
  if (table.rows() == 0) throw std::invalid_argument("tvae: empty table");
  if (static_cast<std::size_t>(config.batch) > table.rows())
    throw std::invalid_argument("tvae: batch size exceeds the table row count");

  TvaeModel model;
  model.schema_ = table.schema();
  model.config_ = config;
  model.seed_ = seed;

  Rng rng(seed);
  model.codec_ = RowCodec::fit(table, config.norm);
  const Mat encoded = model.codec_.encode_table(table, rng);
  const int n_cont = static_cast<int>(model.schema_.continuous_columns().size());

  model.enc_.init(model.codec_.width(), config.hidden, config.latent, rng);
  model.dec_.init(config.latent, config.hidden, model.codec_.width(), n_cont, rng);

  std::vector<ad::Var*> params = model.enc_.vars();
  for (ad::Var* v : model.dec_.vars()) params.push_back(v);
  ad::Adam opt(params,
               {.lr = config.lr, .beta1 = config.beta1, .beta2 = config.beta2, .eps = 1e-8});

  const std::size_t steps = table.rows() / static_cast<std::size_t>(config.batch);
  Mat batch(config.batch, model.codec_.width());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t s = 0; s < steps; ++s) {
      for (int j = 0; j < config.batch; ++j)
        batch.row(j) = encoded.row(static_cast<Eigen::Index>(rng.uniform_index(table.rows())));
      ad::Tape t;
      const int loss =
          detail::elbo_loss_node(t, model.enc_, model.dec_, model.codec_, batch, rng);
      const double value = t.value(loss)(0, 0);
      if (!std::isfinite(value)) throw numeric_error("tvae: non-finite loss");
      opt.zero_grad();
      t.backward(loss);
      opt.step();
      model.dec_.clamp_delta();
      model.losses_.push_back(value);
      if (progress) progress(epoch, static_cast<int>(s), value);
    }
  }
  return model;
}

Table TvaeModel::sample(std::size_t n, Rng& rng) const {
  Table out(schema_);
  std::size_t remaining = n;
  while (remaining > 0) {
    const int m = static_cast<int>(std::min<std::size_t>(remaining, 500));
    ad::Tape t;
    const int head = dec_.forward(t, t.input(rng.normal_matrix(m, config_.latent)));
    std::vector<int> parts;
    for (const RowCodec::Block& b : codec_.blocks()) {
      if (b.continuous) {
        parts.push_back(t.tanh_op(t.slice_cols(head, b.offset, 1)));
        parts.push_back(t.softmax(t.slice_cols(head, b.offset + 1, b.width - 1)));
      } else {
        parts.push_back(t.softmax(t.slice_cols(head, b.offset, b.width)));
      }
    }
    const Table chunk = codec_.decode_matrix(t.value(t.concat_cols(parts)));
    for (int j = 0; j < m; ++j) out.append_row_from(chunk, static_cast<std::size_t>(j));
    remaining -= static_cast<std::size_t>(m);
  }
  return out;
}

std::vector<std::pair<std::string, Mat>> TvaeModel::payload() const {
  std::vector<std::pair<std::string, Mat>> out;
  for (const ad::Var* v : const_cast<detail::EncoderNet&>(enc_).vars())
    out.emplace_back(v->name, v->value);
  for (const ad::Var* v : const_cast<detail::DecoderNet&>(dec_).vars())
    out.emplace_back(v->name, v->value);
  return out;
}

TvaeModel TvaeModel::restore(Schema schema, RowCodec codec, TvaeConfig config,
                             std::uint64_t seed,
                             const std::vector<std::pair<std::string, Mat>>& payload) {
  TvaeModel model;
  model.schema_ = std::move(schema);
  model.codec_ = std::move(codec);
  model.config_ = std::move(config);
  model.seed_ = seed;
  const int n_cont = static_cast<int>(model.schema_.continuous_columns().size());
  Rng rng(0);
  model.enc_.init(model.codec_.width(), model.config_.hidden, model.config_.latent, rng);
  model.dec_.init(model.config_.latent, model.config_.hidden, model.codec_.width(), n_cont,
                  rng);
  auto find = [&](const std::string& name) -> const Mat& {
    for (const auto& [k, v] : payload)
      if (k == name) return v;
    throw parse_error("model payload: missing matrix '" + name + "'");
  };
  for (ad::Var* v : model.enc_.vars()) {
    v->value = find(v->name);
    v->grad = Mat::Zero(v->value.rows(), v->value.cols());
  }
  for (ad::Var* v : model.dec_.vars()) {
    v->value = find(v->name);
    v->grad = Mat::Zero(v->value.rows(), v->value.cols());
  }
  return model;
}

}  // namespace tabsyn
