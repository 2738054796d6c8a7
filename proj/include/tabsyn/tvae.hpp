#pragma once

#include "tabsyn/tape.hpp"
#include "tabsyn/transform.hpp"

#include <functional>

namespace tabsyn {

struct TvaeConfig {
  int batch = 500;
  int epochs = 300;
  int latent = 128;
  int hidden = 128;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  NormKind norm = NormKind::vgm;

  void validate() const;
};

namespace detail {

// q(z | r): two ReLU layers, then mu and the log-variance head
// (sigma = exp(half the head output)).
struct EncoderNet {
  ad::Var w1, b1, w2, b2, wmu, bmu, ws, bs;

  void init(int in_dim, int hidden, int latent, Rng& rng);
  // returns {mu node, s node}
  std::pair<int, int> forward(ad::Tape& t, int rows);
  std::vector<ad::Var*> vars();
};

// p(r | z): two ReLU layers and a raw head covering the encoded row; alpha
// columns get a tanh mean with a trainable per-column log-stddev, one-hot
// blocks get categorical logits.
struct DecoderNet {
  ad::Var w1, b1, w2, b2, wh, bh;
  ad::Var log_delta;  // [1, number of continuous columns]

  void init(int latent, int hidden, int out_dim, int n_continuous, Rng& rng);
  int forward(ad::Tape& t, int z);  // raw head [m, row width]
  std::vector<ad::Var*> vars();
  void clamp_delta();
};

// log p(r | z) for one encoded row (sum of the Gaussian alpha terms and the
// categorical block masses)
double decode_loglik(DecoderNet& dec, const RowCodec& codec, const Mat& z,
                     const Mat& encoded_row);

// sum over the batch of KL(N(mu, sigma^2) || N(0, I)) with sigma = exp(s / 2)
int kl_node(ad::Tape& t, int mu, int s);

// scalar loss node: (recon NLL + KL) / batch, reparameterized z = mu + sigma eps
int elbo_loss_node(ad::Tape& t, EncoderNet& enc, DecoderNet& dec, const RowCodec& codec,
                   const Mat& batch_rows, Rng& rng);

}  // namespace detail

class TvaeModel {
 public:
  using Progress = std::function<void(int epoch, int step, double loss)>;

  static TvaeModel fit(const Table& table, const TvaeConfig& config, std::uint64_t seed,
                       const Progress& progress = nullptr);

  Table sample(std::size_t n, Rng& rng) const;

  const Schema& schema() const { return schema_; }
  const RowCodec& codec() const { return codec_; }
  const TvaeConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<double>& losses() const { return losses_; }

  std::vector<std::pair<std::string, Mat>> payload() const;
  static TvaeModel restore(Schema schema, RowCodec codec, TvaeConfig config,
                           std::uint64_t seed,
                           const std::vector<std::pair<std::string, Mat>>& payload);

 private:
  TvaeModel() = default;
  Schema schema_;
  RowCodec codec_;
  TvaeConfig config_;
  std::uint64_t seed_ = 0;
  mutable detail::DecoderNet dec_;
  mutable detail::EncoderNet enc_;
  std::vector<double> losses_;
};

}  // namespace tabsyn
