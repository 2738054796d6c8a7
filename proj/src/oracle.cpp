#include "tabsyn/oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tabsyn {

namespace {

constexpr double kTwoPi = 6.283185307179586477;
constexpr double kZeroProbSentinel = -1e9;

Schema gmm_schema() {
  Schema s;
  s.columns.push_back({"x0", ColKind::continuous, {}, false});
  s.columns.push_back({"x1", ColKind::continuous, {}, false});
  return s;
}

Mat table_to_points(const Table& table) {
  if (table.schema().columns.size() != 2 ||
      table.schema().columns[0].kind != ColKind::continuous ||
      table.schema().columns[1].kind != ColKind::continuous)
    throw std::invalid_argument("gmm oracle: table must have two continuous columns");
  Mat x(table.rows(), 2);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    x(r, 0) = table.num(r, 0);
    x(r, 1) = table.num(r, 1);
  }
  return x;
}

// seeded k-means++ with restarts; returns centers of the best run
Mat kmeans(const Mat& x, int k, Rng& rng, int restarts = 10, int iters = 25) {
  const Eigen::Index n = x.rows();
  Mat best_centers;
  double best_inertia = std::numeric_limits<double>::infinity();
  for (int run = 0; run < restarts; ++run) {
    Mat centers(k, x.cols());
    Vec d2 = Vec::Constant(n, std::numeric_limits<double>::infinity());
    centers.row(0) = x.row(rng.uniform_index(static_cast<std::size_t>(n)));
    for (int c = 1; c < k; ++c) {
      for (Eigen::Index i = 0; i < n; ++i)
        d2(i) = std::min(d2(i), (x.row(i) - centers.row(c - 1)).squaredNorm());
      double total = d2.sum();
      double u = rng.uniform() * total;
      Eigen::Index pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        u -= d2(i);
        if (u <= 0.0) {
          pick = i;
          break;
        }
      }
      centers.row(c) = x.row(pick);
    }
    std::vector<int> assign(n, 0);
    for (int it = 0; it < iters; ++it) {
      bool moved = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        int bi = 0;
        double bd = (x.row(i) - centers.row(0)).squaredNorm();
        for (int c = 1; c < k; ++c) {
          const double d = (x.row(i) - centers.row(c)).squaredNorm();
          if (d < bd) {
            bd = d;
            bi = c;
          }
        }
        if (assign[i] != bi) {
          assign[i] = bi;
          moved = true;
        }
      }
      Mat sums = Mat::Zero(k, x.cols());
      std::vector<long> cnt(k, 0);
      for (Eigen::Index i = 0; i < n; ++i) {
        sums.row(assign[i]) += x.row(i);
        ++cnt[assign[i]];
      }
      for (int c = 0; c < k; ++c)
        if (cnt[c] > 0) centers.row(c) = sums.row(c) / static_cast<double>(cnt[c]);
      if (!moved && it > 0) break;
    }
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      inertia += (x.row(i) - centers.row(assign[i])).squaredNorm();
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best_centers = centers;
    }
  }
  return best_centers;
}

}  // namespace

GmmOracle::GmmOracle(Mat means, std::vector<Eigen::Matrix2d> covs, Vec weights)
    : means_(std::move(means)), covs_(std::move(covs)), weights_(std::move(weights)),
      schema_(gmm_schema()) {
  if (means_.rows() != static_cast<Eigen::Index>(covs_.size()) ||
      means_.rows() != weights_.size() || means_.cols() != 2)
    throw std::invalid_argument("GmmOracle: inconsistent component shapes");
  const double wsum = weights_.sum();
  if (std::abs(wsum - 1.0) > 1e-9) weights_ /= wsum;
  precompute();
}

void GmmOracle::precompute() {
  const int k = components();
  chol_.resize(k);
  inv_.resize(k);
  log_norm_.resize(k);
  log_weights_.resize(k);
  for (int c = 0; c < k; ++c) {
    Eigen::LLT<Eigen::Matrix2d> llt(covs_[c]);
    if (llt.info() != Eigen::Success)
      throw numeric_error("GmmOracle: covariance is not positive definite");
    chol_[c] = llt.matrixL();
    inv_[c] = covs_[c].inverse();
    const double det = covs_[c].determinant();
    log_norm_(c) = -std::log(kTwoPi) - 0.5 * std::log(det);
    log_weights_(c) = weights_(c) > 0.0 ? std::log(weights_(c)) : -1e300;
  }
}

Table GmmOracle::sample(std::size_t n, Rng& rng) const {
  Table out(schema_);
  out.add_rows(n);
  std::span<const double> w(weights_.data(), static_cast<std::size_t>(weights_.size()));
  for (std::size_t r = 0; r < n; ++r) {
    const int c = static_cast<int>(rng.categorical(w));
    Eigen::Vector2d z(rng.normal(), rng.normal());
    const Eigen::Vector2d x = means_.row(c).transpose() + chol_[c] * z;
    out.set_num(r, 0, x(0));
    out.set_num(r, 1, x(1));
  }
  return out;
}

double GmmOracle::mean_loglik(const Table& table) const {
  const Mat x = table_to_points(table);
  if (x.rows() == 0) throw std::invalid_argument("mean_loglik: empty table");
  const int k = components();
  double total = 0.0;
  std::vector<double> lp(k);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (int c = 0; c < k; ++c) {
      const Eigen::Vector2d d = x.row(r).transpose() - means_.row(c).transpose();
      lp[c] = log_weights_(c) + log_norm_(c) - 0.5 * d.dot(inv_[c] * d);
    }
    total += std::max(logsumexp(lp), kZeroProbSentinel);
  }
  return total / static_cast<double>(x.rows());
}

// EM with the oracle's component count; means initialized by seeded
// k-means++ restarts, covariances full with a small ridge.
std::unique_ptr<Oracle> GmmOracle::refit(const Table& table, std::uint64_t seed) const {
  const Mat x = table_to_points(table);
  const Eigen::Index n = x.rows();
  if (n == 0) throw std::invalid_argument("gmm refit: empty table");
  const int k = components();
  Rng rng(seed);

  Mat means = kmeans(x, k, rng);
  std::vector<Eigen::Matrix2d> covs(k);
  const Eigen::RowVector2d data_mean = x.colwise().mean();
  Eigen::Matrix2d data_cov = Eigen::Matrix2d::Zero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector2d d = (x.row(i) - data_mean).transpose();
    data_cov += d * d.transpose();
  }
  data_cov /= static_cast<double>(n);
  for (int c = 0; c < k; ++c) covs[c] = data_cov / k + 1e-6 * Eigen::Matrix2d::Identity();
  Vec w = Vec::Constant(k, 1.0 / k);

  Mat resp(n, k);
  std::vector<Eigen::Matrix2d> inv(k);
  Vec log_norm(k);
  double prev = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 100; ++iter) {
    for (int c = 0; c < k; ++c) {
      inv[c] = covs[c].inverse();
      log_norm(c) = -std::log(kTwoPi) - 0.5 * std::log(covs[c].determinant());
    }
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const Eigen::Vector2d d = x.row(i).transpose() - means.row(c).transpose();
        const double lp = (w(c) > 0 ? std::log(w(c)) : -1e300) + log_norm(c) -
                          0.5 * d.dot(inv[c] * d);
        resp(i, c) = lp;
        mx = std::max(mx, lp);
      }
      double z = 0.0;
      for (int c = 0; c < k; ++c) {
        resp(i, c) = std::exp(resp(i, c) - mx);
        z += resp(i, c);
      }
      resp.row(i) /= z;
      ll += mx + std::log(z);
    }
    ll /= static_cast<double>(n);
    if (std::isfinite(prev) && std::abs(ll - prev) < 1e-6) break;
    prev = ll;

    for (int c = 0; c < k; ++c) {
      const double nk = resp.col(c).sum();
      if (nk < 1e-10) {
        w(c) = 0.0;
        continue;
      }
      const Eigen::RowVector2d mu = (resp.col(c).transpose() * x) / nk;
      Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Vector2d d = (x.row(i) - mu).transpose();
        cov += resp(i, c) * d * d.transpose();
      }
      cov /= nk;
      means.row(c) = mu;
      covs[c] = cov + 1e-6 * Eigen::Matrix2d::Identity();
      w(c) = nk / static_cast<double>(n);
    }
  }
  const double wsum = w.sum();
  for (int c = 0; c < k; ++c) w(c) = std::max(w(c) / wsum, 1e-300);
  return std::make_unique<GmmOracle>(std::move(means), std::move(covs), std::move(w));
}

std::unique_ptr<GmmOracle> make_grid_oracle() {
  Mat means(25, 2);
  int r = 0;
  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j) means.row(r++) << 2.0 * i, 2.0 * j;
  // component covariance 0.05 I reproduces the benchmark's Identity L_syn
  std::vector<Eigen::Matrix2d> covs(25, 0.05 * Eigen::Matrix2d::Identity());
  return std::make_unique<GmmOracle>(std::move(means), std::move(covs),
                                     Vec::Constant(25, 1.0 / 25.0));
}

std::unique_ptr<GmmOracle> make_gridr_oracle(std::uint64_t seed) {
  Rng rng(seed);
  Mat means(25, 2);
  int r = 0;
  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j) {
      means.row(r) << 2.0 * i + rng.uniform(-0.2, 0.2), 2.0 * j + rng.uniform(-0.2, 0.2);
      ++r;
    }
  std::vector<Eigen::Matrix2d> covs(25, 0.05 * Eigen::Matrix2d::Identity());
  return std::make_unique<GmmOracle>(std::move(means), std::move(covs),
                                     Vec::Constant(25, 1.0 / 25.0));
}

std::unique_ptr<GmmOracle> make_ring_oracle() {
  Mat means(8, 2);
  for (int i = 0; i < 8; ++i) {
    const double a = kTwoPi * i / 8.0;
    means.row(i) << 2.0 * std::cos(a), 2.0 * std::sin(a);
  }
  std::vector<Eigen::Matrix2d> covs(8, 0.04 * Eigen::Matrix2d::Identity());
  return std::make_unique<GmmOracle>(std::move(means), std::move(covs),
                                     Vec::Constant(8, 1.0 / 8.0));
}

BnOracle::BnOracle(const BifDocument& doc) {
  nodes_.resize(doc.variables.size());
  for (std::size_t i = 0; i < doc.variables.size(); ++i) {
    nodes_[i].name = doc.variables[i].name;
    nodes_[i].arity = doc.variables[i].arity;
  }
  for (const BifProbability& p : doc.probabilities) {
    Node& node = nodes_[doc.variable_index(p.child)];
    long n_cfg = 1;
    for (const std::string& parent : p.parents) {
      node.parents.push_back(doc.variable_index(parent));
      n_cfg *= nodes_[node.parents.back()].arity;
    }
    node.cpt.resize(n_cfg, node.arity);
    for (long c = 0; c < n_cfg; ++c)
      for (int k = 0; k < node.arity; ++k) node.cpt(c, k) = p.rows[c][k];
  }

  // Kahn topological order
  std::vector<int> indeg(nodes_.size(), 0);
  std::vector<std::vector<int>> children(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    for (int p : nodes_[i].parents) {
      children[p].push_back(static_cast<int>(i));
      ++indeg[i];
    }
  std::vector<int> queue;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (indeg[i] == 0) queue.push_back(static_cast<int>(i));
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int u = queue[head];
    order_.push_back(u);
    for (int v : children[u])
      if (--indeg[v] == 0) queue.push_back(v);
  }
  if (order_.size() != nodes_.size())
    throw parse_error("bif: the network contains a cycle");

  for (const Node& n : nodes_) {
    Column c;
    c.name = n.name;
    c.kind = ColKind::discrete;
    c.categories = doc.variables[doc.variable_index(n.name)].categories;
    schema_.columns.push_back(std::move(c));
  }
}

long BnOracle::config_index(const Node& node, const std::vector<int>& state) const {
  long idx = 0;
  for (int p : node.parents) idx = idx * nodes_[p].arity + state[p];
  return idx;
}

Table BnOracle::sample(std::size_t n, Rng& rng) const {
  Table out(schema_);
  out.add_rows(n);
  std::vector<int> state(nodes_.size());
  for (std::size_t r = 0; r < n; ++r) {
    for (int u : order_) {
      const Node& node = nodes_[u];
      const long cfg = config_index(node, state);
      std::span<const double> row(node.cpt.row(cfg).data(),
                                  static_cast<std::size_t>(node.arity));
      state[u] = static_cast<int>(rng.categorical(row));
    }
    for (std::size_t c = 0; c < nodes_.size(); ++c) out.set_cat(r, c, state[c]);
  }
  return out;
}

double BnOracle::mean_loglik(const Table& table) const {
  if (table.rows() == 0) throw std::invalid_argument("mean_loglik: empty table");
  if (table.schema().columns.size() != nodes_.size())
    throw std::invalid_argument("mean_loglik: column count mismatch");
  double total = 0.0;
  std::vector<int> state(nodes_.size());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < nodes_.size(); ++c) {
      state[c] = table.cat(r, c);
      if (state[c] < 0 || state[c] >= nodes_[c].arity)
        throw std::invalid_argument("mean_loglik: category out of range in column '" +
                                    nodes_[c].name + "'");
    }
    for (std::size_t c = 0; c < nodes_.size(); ++c) {
      const double p = nodes_[c].cpt(config_index(nodes_[c], state), state[c]);
      total += p > 0.0 ? std::log(p) : kZeroProbSentinel;
    }
  }
  return total / static_cast<double>(table.rows());
}

// Smoothed maximum-likelihood CPTs on the same graph.
std::unique_ptr<Oracle> BnOracle::refit(const Table& table, std::uint64_t) const {
  if (table.schema().columns.size() != nodes_.size())
    throw std::invalid_argument("refit: column count mismatch");
  constexpr double kSmoothing = 0.1;
  auto out = std::unique_ptr<BnOracle>(new BnOracle());
  out->nodes_ = nodes_;
  out->order_ = order_;
  out->schema_ = schema_;
  std::vector<int> state(nodes_.size());
  for (std::size_t c = 0; c < nodes_.size(); ++c) out->nodes_[c].cpt.setZero();
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < nodes_.size(); ++c) state[c] = table.cat(r, c);
    for (std::size_t c = 0; c < nodes_.size(); ++c)
      out->nodes_[c].cpt(config_index(nodes_[c], state), state[c]) += 1.0;
  }
  for (std::size_t c = 0; c < nodes_.size(); ++c) {
    Mat& cpt = out->nodes_[c].cpt;
    for (Eigen::Index cfg = 0; cfg < cpt.rows(); ++cfg) {
      const double total = cpt.row(cfg).sum() + kSmoothing * cpt.cols();
      for (Eigen::Index k = 0; k < cpt.cols(); ++k)
        cpt(cfg, k) = (cpt(cfg, k) + kSmoothing) / total;
    }
  }
  return out;
}

std::size_t BnOracle::joint_states() const {
  std::size_t states = 1;
  for (const Node& n : nodes_) {
    if (states > (1u << 22)) return states;
    states *= static_cast<std::size_t>(n.arity);
  }
  return states;
}

double BnOracle::exact_entropy() const {
  if (joint_states() > (1u << 22))
    throw std::invalid_argument("exact_entropy: state space too large to enumerate");
  std::vector<int> state(nodes_.size(), 0);
  double h = 0.0;
  while (true) {
    double logp = 0.0;
    bool zero = false;
    for (std::size_t c = 0; c < nodes_.size() && !zero; ++c) {
      const double p = nodes_[c].cpt(config_index(nodes_[c], state), state[c]);
      if (p <= 0.0)
        zero = true;
      else
        logp += std::log(p);
    }
    if (!zero) h -= std::exp(logp) * logp;
    int i = static_cast<int>(state.size()) - 1;
    for (; i >= 0; --i) {
      if (++state[i] < nodes_[i].arity) break;
      state[i] = 0;
    }
    if (i < 0) break;
  }
  return h;
}

std::unique_ptr<Oracle> make_oracle(const std::string& kind, std::uint64_t seed) {
  if (kind == "grid") return make_grid_oracle();
  if (kind == "gridr") return make_gridr_oracle(seed);
  if (kind == "ring") return make_ring_oracle();
  if (kind.rfind("bif:", 0) == 0) return std::make_unique<BnOracle>(load_bif(kind.substr(4)));
  throw std::invalid_argument("unknown oracle kind '" + kind +
                              "' (expected grid|gridr|ring|bif:PATH)");
}

}  // namespace tabsyn
