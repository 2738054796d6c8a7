#pragma once

#include "tabsyn/cond.hpp"
#include "tabsyn/tape.hpp"
#include "tabsyn/transform.hpp"

#include <functional>
#include <optional>

namespace tabsyn {

enum class LossKind { wgan_gp, vanilla };

LossKind loss_kind_from_string(const std::string& s);
std::string loss_kind_name(LossKind k);

struct CtganConfig {
  int batch = 500;
  int epochs = 300;
  int pac = 10;
  int z_dim = 128;
  int hidden = 256;
  double gp_weight = 10.0;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double gumbel_tau = 0.2;
  double leaky = 0.2;
  double dropout = 0.5;
  LossKind loss = LossKind::wgan_gp;
  NormKind norm = NormKind::vgm;
  CondMode cond = CondMode::log_freq;

  void validate() const;
};

struct StepLoss {
  double critic = 0.0;
  double generator = 0.0;
};

namespace detail {

// Conditional generator of the synthetic-row representation:
// h1 = h0 (+) ReLU(BN(FC(h0))), h2 = h1 (+) ReLU(BN(FC(h1))), then one head
// per block: tanh for alpha scalars, gumbel-softmax for beta and discrete
// one-hots.
struct GeneratorNet {
  ad::Var w1, b1, g1, be1;
  ad::Var w2, b2, g2, be2;
  ad::Var wh, bh;
  ad::BnStats bn1, bn2;

  struct Forward {
    int rows = -1;                 // soft encoded batch [m, row width]
    std::vector<int> disc_scaled;  // scaled gumbel logits per discrete column
    std::vector<int> disc_cols;    // schema columns matching disc_scaled
  };

  void init(int in_dim, int hidden, int out_dim, Rng& rng);
  Forward forward(ad::Tape& t, const Mat& z_cond, const RowCodec& codec, double tau,
                  Rng& rng, bool train);
  std::vector<ad::Var*> vars();
};

// Pac critic: FC -> leaky -> dropout twice, then a scalar score per pac.
struct CriticNet {
  ad::Var w1, b1, w2, b2, w3, b3;

  void init(int in_dim, int hidden, Rng& rng);
  int forward(ad::Tape& t, int input, double leaky, double dropout, Rng& rng, bool train);
  std::vector<ad::Var*> vars();
};

// Builds the interpolate r~ = rho fake + (1 - rho) real per pac group, runs
// the critic on [r~, cond], and returns the node holding
// mean_k (||grad_{r~} C||_2 - 1)^2, differentiable w.r.t. critic weights.
int gradient_penalty_node(ad::Tape& t, CriticNet& critic, const Mat& real_pac,
                          const Mat& fake_pac, const Mat& cond_pac, double leaky,
                          double dropout, Rng& rng);

}  // namespace detail

class CtganModel {
 public:
  using Progress = std::function<void(int epoch, int step, const StepLoss&)>;

  static CtganModel fit(const Table& table, const CtganConfig& config, std::uint64_t seed,
                        const Progress& progress = nullptr);

  Table sample(std::size_t n, Rng& rng) const;
  Table sample(std::size_t n, Rng& rng, const std::string& column,
               const std::string& category) const;

  const Schema& schema() const { return schema_; }
  const RowCodec& codec() const { return codec_; }
  const CtganConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<StepLoss>& losses() const { return losses_; }

  // persistence (cli-io)
  std::vector<std::pair<std::string, Mat>> payload() const;
  static CtganModel restore(Schema schema, RowCodec codec, CtganConfig config,
                            std::uint64_t seed,
                            const std::vector<std::pair<std::string, Mat>>& payload);

 private:
  CtganModel() = default;
  Table sample_impl(std::size_t n, Rng& rng,
                    const std::optional<MaskSelection>& fixed) const;

  Schema schema_;
  RowCodec codec_;
  CtganConfig config_;
  std::uint64_t seed_ = 0;
  mutable detail::GeneratorNet gen_;
  std::vector<StepLoss> losses_;
};

}  // namespace tabsyn
