#include "tabsyn/ctgan.hpp"

#include <algorithm>
#include <cmath>

namespace tabsyn {

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "wgangp" || s == "wgan_gp") return LossKind::wgan_gp;
  if (s == "vanilla") return LossKind::vanilla;
  throw parse_error("unknown loss kind '" + s + "'");
}

std::string loss_kind_name(LossKind k) {
  return k == LossKind::wgan_gp ? "wgangp" : "vanilla";
}

void CtganConfig::validate() const {
  if (batch <= 0) throw std::invalid_argument("ctgan: batch must be positive");
  if (pac <= 0) throw std::invalid_argument("ctgan: pac must be positive");
  if (batch % pac != 0) throw std::invalid_argument("ctgan: batch must be divisible by pac");
  if (epochs < 0) throw std::invalid_argument("ctgan: epochs must be >= 0");
  if (z_dim <= 0 || hidden <= 0) throw std::invalid_argument("ctgan: bad layer widths");
  if (gp_weight < 0.0) throw std::invalid_argument("ctgan: penalty weight must be >= 0");
  if (gumbel_tau <= 0.0) throw std::invalid_argument("ctgan: gumbel temperature must be > 0");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("ctgan: bad dropout rate");
  if (lr <= 0.0) throw std::invalid_argument("ctgan: learning rate must be > 0");
}

namespace detail {

namespace {

Mat uniform_init(Eigen::Index rows, Eigen::Index cols, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return rng.uniform_matrix(rows, cols, -bound, bound);
}

}  // namespace

void GeneratorNet::init(int in_dim, int hidden, int out_dim, Rng& rng) {
  w1 = ad::Var("gen.w1", uniform_init(in_dim, hidden, in_dim, rng));
  b1 = ad::Var("gen.b1", uniform_init(1, hidden, in_dim, rng));
  g1 = ad::Var("gen.g1", Mat::Ones(1, hidden));
  be1 = ad::Var("gen.be1", Mat::Zero(1, hidden));
  const int d1 = in_dim + hidden;
  w2 = ad::Var("gen.w2", uniform_init(d1, hidden, d1, rng));
  b2 = ad::Var("gen.b2", uniform_init(1, hidden, d1, rng));
  g2 = ad::Var("gen.g2", Mat::Ones(1, hidden));
  be2 = ad::Var("gen.be2", Mat::Zero(1, hidden));
  const int d2 = d1 + hidden;
  wh = ad::Var("gen.wh", uniform_init(d2, out_dim, d2, rng));
  bh = ad::Var("gen.bh", uniform_init(1, out_dim, d2, rng));
  bn1.mean = Mat::Zero(1, hidden);
  bn1.var = Mat::Ones(1, hidden);
  bn2.mean = Mat::Zero(1, hidden);
  bn2.var = Mat::Ones(1, hidden);
}

GeneratorNet::Forward GeneratorNet::forward(ad::Tape& t, const Mat& z_cond,
                                            const RowCodec& codec, double tau, Rng& rng,
                                            bool train) {
  const int h0 = t.input(z_cond);
  const int a1 = t.add_bias(t.matmul(h0, t.param(w1)), t.param(b1));
  const int r1 = t.relu(t.batch_norm(a1, t.param(g1), t.param(be1), bn1, train));
  const int h1 = t.concat_cols({h0, r1});
  const int a2 = t.add_bias(t.matmul(h1, t.param(w2)), t.param(b2));
  const int r2 = t.relu(t.batch_norm(a2, t.param(g2), t.param(be2), bn2, train));
  const int h2 = t.concat_cols({h1, r2});
  const int head = t.add_bias(t.matmul(h2, t.param(wh)), t.param(bh));

  Forward out;
  std::vector<int> parts;
  for (const RowCodec::Block& b : codec.blocks()) {
    if (b.continuous) {
      parts.push_back(t.tanh_op(t.slice_cols(head, b.offset, 1)));
      parts.push_back(t.gumbel_softmax(t.slice_cols(head, b.offset + 1, b.width - 1), tau, rng));
    } else {
      int scaled = -1;
      parts.push_back(
          t.gumbel_softmax(t.slice_cols(head, b.offset, b.width), tau, rng, &scaled));
      out.disc_scaled.push_back(scaled);
      out.disc_cols.push_back(b.column);
    }
  }
  out.rows = t.concat_cols(parts);
  return out;
}

std::vector<ad::Var*> GeneratorNet::vars() {
  return {&w1, &b1, &g1, &be1, &w2, &b2, &g2, &be2, &wh, &bh};
}

void CriticNet::init(int in_dim, int hidden, Rng& rng) {
  w1 = ad::Var("critic.w1", uniform_init(in_dim, hidden, in_dim, rng));
  b1 = ad::Var("critic.b1", uniform_init(1, hidden, in_dim, rng));
  w2 = ad::Var("critic.w2", uniform_init(hidden, hidden, hidden, rng));
  b2 = ad::Var("critic.b2", uniform_init(1, hidden, hidden, rng));
  w3 = ad::Var("critic.w3", uniform_init(hidden, 1, hidden, rng));
  b3 = ad::Var("critic.b3", uniform_init(1, 1, hidden, rng));
}

int CriticNet::forward(ad::Tape& t, int input, double leaky, double dropout, Rng& rng,
                       bool train) {
  const int h1 = t.dropout(
      t.leaky_relu(t.add_bias(t.matmul(input, t.param(w1)), t.param(b1)), leaky), dropout,
      rng, train);
  const int h2 = t.dropout(
      t.leaky_relu(t.add_bias(t.matmul(h1, t.param(w2)), t.param(b2)), leaky), dropout, rng,
      train);
  return t.add_bias(t.matmul(h2, t.param(w3)), t.param(b3));
}

std::vector<ad::Var*> CriticNet::vars() { return {&w1, &b1, &w2, &b2, &w3, &b3}; }

int gradient_penalty_node(ad::Tape& t, CriticNet& critic, const Mat& real_pac,
                          const Mat& fake_pac, const Mat& cond_pac, double leaky,
                          double dropout, Rng& rng) {
  if (real_pac.rows() != fake_pac.rows() || real_pac.cols() != fake_pac.cols())
    throw std::invalid_argument("gradient_penalty: real/fake shapes differ");
  const Eigen::Index npac = real_pac.rows();
  Mat interp(npac, real_pac.cols());
  for (Eigen::Index k = 0; k < npac; ++k) {
    const double rho = rng.uniform();
    interp.row(k) = rho * fake_pac.row(k) + (1.0 - rho) * real_pac.row(k);
  }
  const int r_tilde = t.input(std::move(interp));
  int in = r_tilde;
  if (cond_pac.cols() > 0) in = t.concat_cols({r_tilde, t.input(cond_pac)});
  const int score = critic.forward(t, in, leaky, dropout, rng, true);
  const int grad = t.grad_nodes(score, r_tilde);
  const int norm = t.sqrt_op(t.row_sum(t.square(grad)));
  return t.mean_all(t.square(t.add_scalar(norm, -1.0)));
}

namespace {

// packs m rows of width w into m/pac rows of width pac*w (row-major layout
// makes this a reinterpretation)
Mat pack_pac(const Mat& rows, int pac) {
  return Eigen::Map<const Mat>(rows.data(), rows.rows() / pac, rows.cols() * pac);
}

struct TrainContext {
  const CtganConfig& cfg;
  const RowCodec& codec;
  const Mat& encoded;
  const CategoryIndex& index;
  const CondSampler& sampler;
  GeneratorNet& gen;
  CriticNet& critic;
  ad::Adam& opt_g;
  ad::Adam& opt_c;
  Rng& rng;
  std::size_t n_rows;
};

struct CondBatch {
  Mat cond;                          // [m, cond width]
  std::vector<MaskSelection> sels;   // one per row when conditioning is active
};

CondBatch sample_cond_batch(TrainContext& ctx) {
  const int m = ctx.cfg.batch;
  CondBatch out;
  out.cond.resize(m, ctx.sampler.cond_width());
  if (!ctx.sampler.active()) return out;
  out.sels.reserve(m);
  for (int j = 0; j < m; ++j) {
    const MaskSelection sel = *ctx.sampler.sample_training(ctx.rng);
    ctx.sampler.write_cond(sel, out.cond.row(j).data());
    out.sels.push_back(sel);
  }
  return out;
}

// real rows matching the batch conditions (uniform rows when unconditional)
Mat sample_real_batch(TrainContext& ctx, const CondBatch& conds) {
  const int m = ctx.cfg.batch;
  Mat real(m, ctx.codec.width());
  for (int j = 0; j < m; ++j) {
    const std::size_t row = ctx.sampler.active()
                                ? sample_real_row(ctx.index, conds.sels[j], ctx.rng)
                                : ctx.rng.uniform_index(ctx.n_rows);
    real.row(j) = ctx.encoded.row(static_cast<Eigen::Index>(row));
  }
  return real;
}

int generator_loss_node(ad::Tape& t, TrainContext& ctx, const GeneratorNet::Forward& fwd,
                        const CondBatch& conds, int fake_scores) {
  const int m = ctx.cfg.batch;
  int loss = ctx.cfg.loss == LossKind::wgan_gp
                 ? t.scale(t.mean_all(fake_scores), -1.0)
                 : t.mean_all(t.softplus(t.scale(fake_scores, -1.0)));
  if (!ctx.sampler.active()) return loss;

  // cross-entropy between the imposed mask and the generated block, written
  // as -log softmax of the shared scaled gumbel logits at (j, k*_j)
  for (std::size_t bi = 0; bi < fwd.disc_cols.size(); ++bi) {
    const int col = fwd.disc_cols[bi];
    Mat mask = Mat::Zero(m, t.cols(fwd.disc_scaled[bi]));
    bool any = false;
    for (int j = 0; j < m; ++j) {
      if (conds.sels[j].column != col) continue;
      mask(j, conds.sels[j].category) = 1.0;
      any = true;
    }
    if (!any) continue;
    const int picked = t.mul_mask(t.log_softmax(fwd.disc_scaled[bi]), std::move(mask));
    loss = t.add(loss, t.scale(t.sum_all(picked), -1.0 / m));
  }
  return loss;
}

StepLoss train_step(TrainContext& ctx) {
  const CtganConfig& cfg = ctx.cfg;
  const int pac = cfg.pac;
  StepLoss out;

  // --- critic update ---
  {
    const CondBatch conds = sample_cond_batch(ctx);
    Mat z_cond(cfg.batch, cfg.z_dim + conds.cond.cols());
    z_cond.leftCols(cfg.z_dim) = ctx.rng.normal_matrix(cfg.batch, cfg.z_dim);
    if (conds.cond.cols() > 0) z_cond.rightCols(conds.cond.cols()) = conds.cond;

    ad::Tape t_gen;  // forward only; the generator is a sampler here
    const auto fwd = ctx.gen.forward(t_gen, z_cond, ctx.codec, cfg.gumbel_tau, ctx.rng, true);
    const Mat fake_pac = pack_pac(t_gen.value(fwd.rows), pac);
    const Mat real_pac = pack_pac(sample_real_batch(ctx, conds), pac);
    const Mat cond_pac = pack_pac(conds.cond, pac);

    ad::Tape t;
    auto scores = [&](const Mat& rows_pac) {
      Mat in(rows_pac.rows(), rows_pac.cols() + cond_pac.cols());
      in.leftCols(rows_pac.cols()) = rows_pac;
      if (cond_pac.cols() > 0) in.rightCols(cond_pac.cols()) = cond_pac;
      return ctx.critic.forward(t, t.input(std::move(in)), cfg.leaky, cfg.dropout, ctx.rng,
                                true);
    };
    const int s_fake = scores(fake_pac);
    const int s_real = scores(real_pac);
    int loss;
    if (cfg.loss == LossKind::wgan_gp) {
      loss = t.add(t.mean_all(s_fake), t.scale(t.mean_all(s_real), -1.0));
      if (cfg.gp_weight > 0.0) {
        const int gp = gradient_penalty_node(t, ctx.critic, real_pac, fake_pac, cond_pac,
                                             cfg.leaky, cfg.dropout, ctx.rng);
        loss = t.add(loss, t.scale(gp, cfg.gp_weight));
      }
    } else {
      const int real_term = t.mean_all(t.softplus(t.scale(s_real, -1.0)));
      const int fake_term = t.mean_all(t.softplus(s_fake));
      loss = t.add(real_term, fake_term);
    }
    out.critic = t.value(loss)(0, 0);
    if (!std::isfinite(out.critic)) throw numeric_error("ctgan: non-finite critic loss");
    ctx.opt_c.zero_grad();
    t.backward(loss);
    ctx.opt_c.step();
  }

  // --- generator update (fresh conditions and noise) ---
  {
    const CondBatch conds = sample_cond_batch(ctx);
    Mat z_cond(cfg.batch, cfg.z_dim + conds.cond.cols());
    z_cond.leftCols(cfg.z_dim) = ctx.rng.normal_matrix(cfg.batch, cfg.z_dim);
    if (conds.cond.cols() > 0) z_cond.rightCols(conds.cond.cols()) = conds.cond;

    ad::Tape t;
    const auto fwd = ctx.gen.forward(t, z_cond, ctx.codec, cfg.gumbel_tau, ctx.rng, true);
    int packed = t.reshape(fwd.rows, cfg.batch / pac, ctx.codec.width() * pac);
    if (ctx.sampler.cond_width() > 0)
      packed = t.concat_cols({packed, t.input(pack_pac(conds.cond, pac))});
    const int scores =
        ctx.critic.forward(t, packed, cfg.leaky, cfg.dropout, ctx.rng, true);
    const int loss = generator_loss_node(t, ctx, fwd, conds, scores);
    out.generator = t.value(loss)(0, 0);
    if (!std::isfinite(out.generator)) throw numeric_error("ctgan: non-finite generator loss");
    ctx.opt_g.zero_grad();
    t.backward(loss);
    ctx.opt_g.step();
  }
  return out;
}

}  // namespace

}  // namespace detail

CtganModel CtganModel::fit(const Table& table, const CtganConfig& config, std::uint64_t seed,
                           const Progress& progress) {
  config.validate();
  if (table.rows() == 0) throw std::invalid_argument("ctgan: empty table");
  if (static_cast<std::size_t>(config.batch) > table.rows())
    throw std::invalid_argument("ctgan: batch size exceeds the table row count");

  CtganModel model;
  model.schema_ = table.schema();
  model.config_ = config;
  model.seed_ = seed;

  Rng rng(seed);
  model.codec_ = RowCodec::fit(table, config.norm);
  const Mat encoded = model.codec_.encode_table(table, rng);
  const CategoryIndex index(table);
  const CondSampler sampler(model.codec_, config.cond);

  const int cond_w = sampler.cond_width();
  model.gen_.init(config.z_dim + cond_w, config.hidden, model.codec_.width(), rng);
  detail::CriticNet critic;
  critic.init(config.pac * (model.codec_.width() + cond_w), config.hidden, rng);

  ad::Adam opt_g(model.gen_.vars(),
                 {.lr = config.lr, .beta1 = config.beta1, .beta2 = config.beta2, .eps = 1e-8});
  ad::Adam opt_c(critic.vars(),
                 {.lr = config.lr, .beta1 = config.beta1, .beta2 = config.beta2, .eps = 1e-8});

  detail::TrainContext ctx{config,  model.codec_, encoded, index, sampler,
                           model.gen_, critic,    opt_g,   opt_c, rng,
                           table.rows()};
  const std::size_t steps = table.rows() / static_cast<std::size_t>(config.batch);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t s = 0; s < steps; ++s) {
      const StepLoss loss = detail::train_step(ctx);
      model.losses_.push_back(loss);
      if (progress) progress(epoch, static_cast<int>(s), loss);
    }
  }
  return model;
}

Table CtganModel::sample_impl(std::size_t n, Rng& rng,
                              const std::optional<MaskSelection>& fixed) const {
  Table out(schema_);
  const CondSampler sampler(codec_, config_.cond);
  const int cond_w = sampler.cond_width();
  std::size_t remaining = n;
  while (remaining > 0) {
    const int m = static_cast<int>(std::min<std::size_t>(remaining, 500));
    Mat z_cond(m, config_.z_dim + cond_w);
    z_cond.leftCols(config_.z_dim) = rng.normal_matrix(m, config_.z_dim);
    if (cond_w > 0) {
      for (int j = 0; j < m; ++j) {
        const MaskSelection sel = fixed ? *fixed : *sampler.sample_generation(rng);
        sampler.write_cond(sel, z_cond.row(j).data() + config_.z_dim);
      }
    }
    ad::Tape t;
    const auto fwd =
        gen_.forward(t, z_cond, codec_, config_.gumbel_tau, rng, /*train=*/false);
    const Table chunk = codec_.decode_matrix(t.value(fwd.rows));
    for (int j = 0; j < m; ++j) out.append_row_from(chunk, static_cast<std::size_t>(j));
    remaining -= static_cast<std::size_t>(m);
  }
  return out;
}

Table CtganModel::sample(std::size_t n, Rng& rng) const {
  return sample_impl(n, rng, std::nullopt);
}

Table CtganModel::sample(std::size_t n, Rng& rng, const std::string& column,
                         const std::string& category) const {
  return sample_impl(n, rng, CondSampler(codec_, config_.cond).selection_for(column, category));
}

std::vector<std::pair<std::string, Mat>> CtganModel::payload() const {
  std::vector<std::pair<std::string, Mat>> out;
  for (const ad::Var* v : const_cast<detail::GeneratorNet&>(gen_).vars())
    out.emplace_back(v->name, v->value);
  out.emplace_back("gen.bn1.mean", gen_.bn1.mean);
  out.emplace_back("gen.bn1.var", gen_.bn1.var);
  out.emplace_back("gen.bn2.mean", gen_.bn2.mean);
  out.emplace_back("gen.bn2.var", gen_.bn2.var);
  return out;
}

CtganModel CtganModel::restore(Schema schema, RowCodec codec, CtganConfig config,
                               std::uint64_t seed,
                               const std::vector<std::pair<std::string, Mat>>& payload) {
  CtganModel model;
  model.schema_ = std::move(schema);
  model.codec_ = std::move(codec);
  model.config_ = std::move(config);
  model.seed_ = seed;
  auto find = [&](const std::string& name) -> const Mat& {
    for (const auto& [k, v] : payload)
      if (k == name) return v;
    throw parse_error("model payload: missing matrix '" + name + "'");
  };
  for (ad::Var* v : model.gen_.vars()) {
    v->value = find(v->name);
    v->grad = Mat::Zero(v->value.rows(), v->value.cols());
  }
  model.gen_.bn1.mean = find("gen.bn1.mean");
  model.gen_.bn1.var = find("gen.bn1.var");
  model.gen_.bn2.mean = find("gen.bn2.mean");
  model.gen_.bn2.var = find("gen.bn2.var");
  return model;
}

}  // namespace tabsyn
