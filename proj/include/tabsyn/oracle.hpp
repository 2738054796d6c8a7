#pragma once

#include "tabsyn/bif.hpp"
#include "tabsyn/rng.hpp"
#include "tabsyn/schema.hpp"

#include <memory>

namespace tabsyn {

// A known joint distribution used by the likelihood-fitness benchmark:
// sample() draws tables, mean_loglik() scores them, refit() keeps the
// structure and relearns parameters from a (synthetic) table.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual const Schema& schema() const = 0;
  virtual Table sample(std::size_t n, Rng& rng) const = 0;
  virtual double mean_loglik(const Table& table) const = 0;
  virtual std::unique_ptr<Oracle> refit(const Table& table, std::uint64_t seed) const = 0;
};

// Two-dimensional Gaussian-mixture oracle (grid / gridr / ring).
class GmmOracle : public Oracle {
 public:
  GmmOracle(Mat means, std::vector<Eigen::Matrix2d> covs, Vec weights);

  const Schema& schema() const override { return schema_; }
  Table sample(std::size_t n, Rng& rng) const override;
  double mean_loglik(const Table& table) const override;
  std::unique_ptr<Oracle> refit(const Table& table, std::uint64_t seed) const override;

  int components() const { return static_cast<int>(weights_.size()); }
  const Mat& means() const { return means_; }
  const std::vector<Eigen::Matrix2d>& covariances() const { return covs_; }
  const Vec& weights() const { return weights_; }

 private:
  Mat means_;  // [K, 2]
  std::vector<Eigen::Matrix2d> covs_;
  std::vector<Eigen::Matrix2d> chol_;
  Vec weights_;
  Vec log_weights_;
  std::vector<Eigen::Matrix2d> inv_;
  Vec log_norm_;  // -log(2 pi) - 0.5 log det
  Schema schema_;
  void precompute();
};

std::unique_ptr<GmmOracle> make_grid_oracle();
std::unique_ptr<GmmOracle> make_gridr_oracle(std::uint64_t seed);
std::unique_ptr<GmmOracle> make_ring_oracle();

// Discrete Bayesian network backed by a parsed BIF document.
class BnOracle : public Oracle {
 public:
  explicit BnOracle(const BifDocument& doc);

  const Schema& schema() const override { return schema_; }
  Table sample(std::size_t n, Rng& rng) const override;
  double mean_loglik(const Table& table) const override;
  std::unique_ptr<Oracle> refit(const Table& table, std::uint64_t seed) const override;

  // exact joint entropy by enumeration (feasible for small networks)
  double exact_entropy() const;
  std::size_t joint_states() const;

  int node_count() const { return static_cast<int>(nodes_.size()); }
  const Mat& cpt(int node) const { return nodes_[node].cpt; }

 private:
  struct Node {
    std::string name;
    int arity = 0;
    std::vector<int> parents;
    Mat cpt;  // [parent configurations, arity]
  };
  std::vector<Node> nodes_;
  std::vector<int> order_;  // topological
  Schema schema_;

  long config_index(const Node& node, const std::vector<int>& state) const;
  BnOracle() = default;
};

// kind: "grid" | "gridr" | "ring" | "bif:<path>"
std::unique_ptr<Oracle> make_oracle(const std::string& kind, std::uint64_t seed);

}  // namespace tabsyn
