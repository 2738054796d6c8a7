#include "tabsyn/transform.hpp"

#include "tabsyn/common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tabsyn {

namespace {

constexpr double kPhiFloor = 1e-6;       // stddev floor for degenerate columns
constexpr double kPruneThreshold = 0.005;

double mean_of(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double var_of(std::span<const double> xs, double mean) {
  double s = 0.0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return s / static_cast<double>(xs.size());
}

std::vector<double> quantile_means(std::span<const double> xs, int k) {
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out(k);
  for (int i = 0; i < k; ++i) {
    const std::size_t idx = static_cast<std::size_t>(
        (static_cast<double>(i) + 0.5) / k * static_cast<double>(sorted.size()));
    out[i] = sorted[std::min(idx, sorted.size() - 1)];
  }
  return out;
}

ContinuousTransform degenerate_transform(double value) {
  ContinuousTransform t;
  t.eta = {value};
  t.phi = {kPhiFloor};
  t.weight = {1.0};
  return t;
}

}  // namespace

NormKind norm_kind_from_string(const std::string& s) {
  if (s == "vgm") return NormKind::vgm;
  if (s == "gmm5") return NormKind::gmm5;
  if (s == "gmm10") return NormKind::gmm10;
  if (s == "minmax") return NormKind::minmax;
  throw parse_error("unknown normalization kind '" + s + "'");
}

std::string norm_kind_name(NormKind k) {
  switch (k) {
    case NormKind::vgm: return "vgm";
    case NormKind::gmm5: return "gmm5";
    case NormKind::gmm10: return "gmm10";
    case NormKind::minmax: return "minmax";
  }
  return "vgm";
}

std::vector<double> ContinuousTransform::mode_probs(double value) const {
  std::vector<double> lp(eta.size());
  for (std::size_t k = 0; k < eta.size(); ++k)
    lp[k] = std::log(weight[k]) + log_normal_pdf(value, eta[k], phi[k]);
  const double mx = *std::max_element(lp.begin(), lp.end());
  double sum = 0.0;
  for (double& v : lp) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : lp) v /= sum;
  return lp;
}

std::pair<double, int> ContinuousTransform::encode(double value, Rng& rng) const {
  if (!std::isfinite(value)) throw numeric_error("encode: non-finite continuous value");
  const std::vector<double> rho = mode_probs(value);
  const int k = static_cast<int>(rng.categorical(rho));
  const double alpha = std::clamp((value - eta[k]) / (4.0 * phi[k]), -1.0, 1.0);
  return {alpha, k};
}

double ContinuousTransform::decode(double alpha, int mode) const {
  return alpha * 4.0 * phi[mode] + eta[mode];
}

namespace {

// Posterior state of the one-dimensional variational Bayesian mixture:
// Dirichlet on weights, Normal-Gamma on (mean, precision) per component.
struct VbState {
  std::vector<double> alpha, beta, m, a, b;
  int K() const { return static_cast<int>(alpha.size()); }
  void erase(int k) {
    alpha.erase(alpha.begin() + k);
    beta.erase(beta.begin() + k);
    m.erase(m.begin() + k);
    a.erase(a.begin() + k);
    b.erase(b.begin() + k);
  }
};

struct VbPriors {
  double alpha0 = 1e-3;
  double beta0 = 1.0;
  double m0 = 0.0;
  double a0 = 1.0;
  double b0 = 1.0;
};

// Coordinate-ascent VB until the per-sample bound moves less than tol.
// Returns the total ELBO of the final state.
double vb_run(std::span<const double> values, const VbPriors& pr, VbState& st,
              int max_iters, double tol) {
  constexpr double kLog2Pi = 1.8378770664093454836;
  const double n = static_cast<double>(values.size());
  const int K = st.K();
  Mat resp(values.size(), K);
  std::vector<double> elogpi(K), eloglam(K);
  double elbo = -std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < max_iters; ++iter) {
    const double alpha_sum = std::accumulate(st.alpha.begin(), st.alpha.end(), 0.0);
    const double dg_alpha_sum = digamma(alpha_sum);
    for (int k = 0; k < K; ++k) {
      elogpi[k] = digamma(st.alpha[k]) - dg_alpha_sum;
      eloglam[k] = digamma(st.a[k]) - std::log(st.b[k]);
    }
    double sum_log_z = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < K; ++k) {
        const double d = values[i] - st.m[k];
        const double lq = elogpi[k] + 0.5 * eloglam[k] - 0.5 * kLog2Pi -
                          0.5 * (1.0 / st.beta[k] + (st.a[k] / st.b[k]) * d * d);
        resp(static_cast<Eigen::Index>(i), k) = lq;
        mx = std::max(mx, lq);
      }
      double z = 0.0;
      for (int k = 0; k < K; ++k) {
        double& r = resp(static_cast<Eigen::Index>(i), k);
        r = std::exp(r - mx);
        z += r;
      }
      for (int k = 0; k < K; ++k) resp(static_cast<Eigen::Index>(i), k) /= z;
      sum_log_z += mx + std::log(z);
    }

    // ELBO = sum log Z - KL(q(pi)||p(pi)) - sum_k KL(q(mu_k, lambda_k)||prior)
    double kl = std::lgamma(alpha_sum) - std::lgamma(K * pr.alpha0);
    for (int k = 0; k < K; ++k)
      kl += -std::lgamma(st.alpha[k]) + std::lgamma(pr.alpha0) +
            (st.alpha[k] - pr.alpha0) * (digamma(st.alpha[k]) - dg_alpha_sum);
    for (int k = 0; k < K; ++k) {
      const double elam = st.a[k] / st.b[k];
      kl += 0.5 * std::log(st.beta[k] / pr.beta0) + 0.5 * pr.beta0 / st.beta[k] +
            0.5 * pr.beta0 * elam * (st.m[k] - pr.m0) * (st.m[k] - pr.m0) - 0.5;
      kl += pr.a0 * (std::log(st.b[k]) - std::log(pr.b0)) + std::lgamma(pr.a0) -
            std::lgamma(st.a[k]) + (st.a[k] - pr.a0) * digamma(st.a[k]) +
            st.a[k] * (pr.b0 - st.b[k]) / st.b[k];
    }
    const double new_elbo = sum_log_z - kl;
    const bool converged = std::isfinite(elbo) && std::abs(new_elbo - elbo) / n < tol;
    elbo = new_elbo;
    if (converged) break;

    for (int k = 0; k < K; ++k) {
      double nk = 0.0, sx = 0.0;
      for (std::size_t i = 0; i < values.size(); ++i) {
        nk += resp(static_cast<Eigen::Index>(i), k);
        sx += resp(static_cast<Eigen::Index>(i), k) * values[i];
      }
      nk = std::max(nk, 1e-10);
      const double xbar = sx / nk;
      double sk = 0.0;
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double d = values[i] - xbar;
        sk += resp(static_cast<Eigen::Index>(i), k) * d * d;
      }
      sk /= nk;
      st.alpha[k] = pr.alpha0 + nk;
      st.beta[k] = pr.beta0 + nk;
      st.m[k] = (pr.beta0 * pr.m0 + sx) / st.beta[k];
      st.a[k] = pr.a0 + 0.5 * nk;
      st.b[k] = pr.b0 + 0.5 * (nk * sk + pr.beta0 * nk * (xbar - pr.m0) * (xbar - pr.m0) /
                                             (pr.beta0 + nk));
    }
  }
  return elbo;
}

}  // namespace

// Variational Gaussian mixture in one dimension. Coordinate-ascent VB by
// itself plateaus with several near-identical components sharing one data
// mode, so the mode count is settled by greedy component removal: drop the
// weakest component and keep the removal whenever the re-converged bound
// does not decrease (the Dirichlet and Normal-Gamma KL terms make removing a
// duplicate strictly favorable, while removing a needed mode collapses the
// likelihood term). Surviving components below the weight threshold are
// pruned and the retained weights renormalized.
ContinuousTransform fit_vgm(std::span<const double> values, int max_modes) {
  if (values.empty()) throw std::invalid_argument("fit_vgm: empty column");
  if (max_modes < 1) throw std::invalid_argument("fit_vgm: max_modes must be >= 1");

  const double n = static_cast<double>(values.size());
  const double m0 = mean_of(values);
  const double var0 = var_of(values, m0);
  if (var0 < 1e-12 || values.size() < 2) return degenerate_transform(m0);

  const int K = max_modes;
  VbPriors pr;
  pr.m0 = m0;
  pr.b0 = var0;  // E[precision] = a0/b0 = 1/var0

  VbState st;
  st.alpha.assign(K, pr.alpha0 + n / K);
  st.beta.assign(K, pr.beta0 + n / K);
  st.m = quantile_means(values, K);
  st.a.assign(K, pr.a0 + n / (2.0 * K));
  st.b.resize(K);
  const double init_var = std::max(var0, 1e-10);
  for (int k = 0; k < K; ++k) st.b[k] = st.a[k] * init_var;

  double elbo = vb_run(values, pr, st, 100, 1e-3);
  while (st.K() > 1) {
    int weakest = 0;
    for (int k = 1; k < st.K(); ++k)
      if (st.alpha[k] < st.alpha[weakest]) weakest = k;
    VbState trial = st;
    trial.erase(weakest);
    const double trial_elbo = vb_run(values, pr, trial, 100, 1e-3);
    if (trial_elbo >= elbo - 1e-9 * std::abs(elbo)) {
      st = std::move(trial);
      elbo = trial_elbo;
    } else {
      break;
    }
  }

  ContinuousTransform t;
  const double alpha_sum = std::accumulate(st.alpha.begin(), st.alpha.end(), 0.0);
  for (int k = 0; k < st.K(); ++k) {
    const double w = st.alpha[k] / alpha_sum;
    if (w < kPruneThreshold) continue;
    t.eta.push_back(st.m[k]);
    t.phi.push_back(std::max(std::sqrt(st.b[k] / st.a[k]), kPhiFloor));
    t.weight.push_back(w);
  }
  if (t.eta.empty()) return degenerate_transform(m0);
  const double wsum = std::accumulate(t.weight.begin(), t.weight.end(), 0.0);
  for (double& w : t.weight) w /= wsum;
  return t;
}

// Plain EM with a fixed number of modes; empty components keep their
// parameters and a vanishing weight (no pruning).
ContinuousTransform fit_gmm(std::span<const double> values, int modes) {
  if (values.empty()) throw std::invalid_argument("fit_gmm: empty column");
  if (modes < 1) throw std::invalid_argument("fit_gmm: modes must be >= 1");
  const double n = static_cast<double>(values.size());
  const double mean0 = mean_of(values);
  const double var0 = var_of(values, mean0);
  if (var0 < 1e-12 || values.size() < 2) {
    ContinuousTransform t = degenerate_transform(mean0);
    while (t.modes() < modes) {
      t.eta.push_back(mean0);
      t.phi.push_back(kPhiFloor);
      t.weight.push_back(0.0);
    }
    return t;
  }

  const int K = modes;
  std::vector<double> mu = quantile_means(values, K);
  std::vector<double> var(K, std::max(var0 / (K * K), 1e-10));
  std::vector<double> w(K, 1.0 / K);
  Mat resp(values.size(), K);
  double prev = -std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < 200; ++iter) {
    double ll = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < K; ++k) {
        const double lp = (w[k] > 0 ? std::log(w[k]) : -1e300) +
                          log_normal_pdf(values[i], mu[k], std::sqrt(var[k]));
        resp(static_cast<Eigen::Index>(i), k) = lp;
        mx = std::max(mx, lp);
      }
      double z = 0.0;
      for (int k = 0; k < K; ++k) {
        double& r = resp(static_cast<Eigen::Index>(i), k);
        r = std::exp(r - mx);
        z += r;
      }
      for (int k = 0; k < K; ++k) resp(static_cast<Eigen::Index>(i), k) /= z;
      ll += mx + std::log(z);
    }
    ll /= n;
    if (std::isfinite(prev) && std::abs(ll - prev) < 1e-6) break;
    prev = ll;
    for (int k = 0; k < K; ++k) {
      double nk = 0.0, sx = 0.0;
      for (std::size_t i = 0; i < values.size(); ++i) {
        nk += resp(static_cast<Eigen::Index>(i), k);
        sx += resp(static_cast<Eigen::Index>(i), k) * values[i];
      }
      if (nk < 1e-10) {
        w[k] = 0.0;
        continue;
      }
      mu[k] = sx / nk;
      double sv = 0.0;
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double d = values[i] - mu[k];
        sv += resp(static_cast<Eigen::Index>(i), k) * d * d;
      }
      var[k] = std::max(sv / nk, 1e-12);
      w[k] = nk / n;
    }
  }

  ContinuousTransform t;
  t.eta = mu;
  for (int k = 0; k < K; ++k) t.phi.push_back(std::max(std::sqrt(var[k]), kPhiFloor));
  t.weight = w;
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : t.weight) x /= wsum;
  return t;
}

// Single pseudo-mode mapping [min, max] onto alpha in [-1, 1].
ContinuousTransform fit_minmax(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("fit_minmax: empty column");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  ContinuousTransform t;
  t.eta = {0.5 * (lo + hi)};
  t.phi = {std::max((hi - lo) / 8.0, kPhiFloor)};
  t.weight = {1.0};
  return t;
}

ContinuousTransform fit_continuous(std::span<const double> values, NormKind kind,
                                   int vgm_max_modes) {
  switch (kind) {
    case NormKind::vgm: return fit_vgm(values, vgm_max_modes);
    case NormKind::gmm5: return fit_gmm(values, 5);
    case NormKind::gmm10: return fit_gmm(values, 10);
    case NormKind::minmax: return fit_minmax(values);
  }
  throw std::invalid_argument("fit_continuous: bad kind");
}

RowCodec RowCodec::fit(const Table& table, NormKind kind, int vgm_max_modes) {
  if (table.rows() == 0) throw std::invalid_argument("RowCodec::fit: empty table");
  RowCodec codec;
  codec.schema_ = table.schema();
  const std::size_t ncols = codec.schema_.columns.size();
  codec.cont_.resize(ncols);
  codec.disc_.resize(ncols);
  for (std::size_t c = 0; c < ncols; ++c) {
    if (codec.schema_.columns[c].kind == ColKind::continuous) {
      codec.cont_[c] = fit_continuous(table.num_column(c), kind, vgm_max_modes);
      codec.cont_[c].column = static_cast<int>(c);
    } else {
      DiscreteTransform& d = codec.disc_[c];
      d.column = static_cast<int>(c);
      d.cardinality = static_cast<int>(codec.schema_.columns[c].categories.size());
      if (d.cardinality == 0)
        throw std::invalid_argument("RowCodec::fit: discrete column '" +
                                    codec.schema_.columns[c].name + "' has no categories");
      d.counts.assign(d.cardinality, 0);
      for (std::size_t r = 0; r < table.rows(); ++r) ++d.counts[table.cat(r, c)];
    }
  }
  codec.rebuild_layout();
  return codec;
}

void RowCodec::rebuild_layout() {
  blocks_.clear();
  cond_offsets_.assign(schema_.columns.size(), -1);
  width_ = 0;
  cond_width_ = 0;
  for (std::size_t c = 0; c < schema_.columns.size(); ++c) {
    Block b;
    b.column = static_cast<int>(c);
    b.continuous = schema_.columns[c].kind == ColKind::continuous;
    b.offset = width_;
    if (b.continuous) {
      b.width = 1 + cont_[c].modes();
    } else {
      b.width = disc_[c].cardinality;
      cond_offsets_[c] = cond_width_;
      cond_width_ += b.width;
    }
    width_ += b.width;
    blocks_.push_back(b);
  }
}

const RowCodec::Block& RowCodec::block_for_column(int column) const {
  return blocks_.at(static_cast<std::size_t>(column));
}

const ContinuousTransform& RowCodec::continuous_transform(int column) const {
  if (schema_.columns.at(column).kind != ColKind::continuous)
    throw std::invalid_argument("column is not continuous");
  return cont_[column];
}

const DiscreteTransform& RowCodec::discrete_transform(int column) const {
  if (schema_.columns.at(column).kind != ColKind::discrete)
    throw std::invalid_argument("column is not discrete");
  return disc_[column];
}

int RowCodec::cond_offset(int column) const {
  const int off = cond_offsets_.at(static_cast<std::size_t>(column));
  if (off < 0) throw std::invalid_argument("cond_offset: column is not discrete");
  return off;
}

void RowCodec::encode_row(const Table& table, std::size_t row, double* out, Rng& rng) const {
  for (const Block& b : blocks_) {
    double* dst = out + b.offset;
    std::fill(dst, dst + b.width, 0.0);
    if (b.continuous) {
      const auto [alpha, mode] = cont_[b.column].encode(table.num(row, b.column), rng);
      dst[0] = alpha;
      dst[1 + mode] = 1.0;
    } else {
      const int cat = table.cat(row, b.column);
      if (cat < 0 || cat >= b.width)
        throw std::invalid_argument("encode_row: category index out of range in column '" +
                                    schema_.columns[b.column].name + "'");
      dst[cat] = 1.0;
    }
  }
}

Mat RowCodec::encode_table(const Table& table, Rng& rng) const {
  Mat out(table.rows(), width_);
  for (std::size_t r = 0; r < table.rows(); ++r) encode_row(table, r, out.row(r).data(), rng);
  return out;
}

Table RowCodec::decode_matrix(const Mat& rows) const {
  if (rows.cols() != width_)
    throw std::invalid_argument("decode_matrix: width mismatch (got " +
                                std::to_string(rows.cols()) + ", expected " +
                                std::to_string(width_) + ")");
  Table out(schema_);
  out.add_rows(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (const Block& b : blocks_) {
      if (b.continuous) {
        int mode = 0;
        rows.row(r).segment(b.offset + 1, b.width - 1).maxCoeff(&mode);
        const double alpha = std::clamp(rows(r, b.offset), -1.0, 1.0);
        out.set_num(r, b.column, cont_[b.column].decode(alpha, mode));
      } else {
        int cat = 0;
        rows.row(r).segment(b.offset, b.width).maxCoeff(&cat);
        out.set_cat(r, b.column, cat);
      }
    }
  }
  return out;
}

using nlohmann::json;

nlohmann::json RowCodec::to_json() const {
  json j;
  j["columns"] = json::array();
  for (std::size_t c = 0; c < schema_.columns.size(); ++c) {
    json jc;
    if (schema_.columns[c].kind == ColKind::continuous) {
      jc["kind"] = "continuous";
      jc["eta"] = cont_[c].eta;
      jc["phi"] = cont_[c].phi;
      jc["weight"] = cont_[c].weight;
    } else {
      jc["kind"] = "discrete";
      jc["counts"] = disc_[c].counts;
    }
    j["columns"].push_back(std::move(jc));
  }
  return j;
}

RowCodec RowCodec::from_json(const nlohmann::json& j, const Schema& schema) {
  RowCodec codec;
  codec.schema_ = schema;
  const auto& cols = j.at("columns");
  if (cols.size() != schema.columns.size())
    throw parse_error("codec: column count mismatch with schema");
  codec.cont_.resize(schema.columns.size());
  codec.disc_.resize(schema.columns.size());
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    const auto& jc = cols[c];
    if (jc.at("kind") == "continuous") {
      ContinuousTransform& t = codec.cont_[c];
      t.column = static_cast<int>(c);
      t.eta = jc.at("eta").get<std::vector<double>>();
      t.phi = jc.at("phi").get<std::vector<double>>();
      t.weight = jc.at("weight").get<std::vector<double>>();
    } else {
      DiscreteTransform& d = codec.disc_[c];
      d.column = static_cast<int>(c);
      d.counts = jc.at("counts").get<std::vector<long>>();
      d.cardinality = static_cast<int>(d.counts.size());
    }
  }
  codec.rebuild_layout();
  return codec;
}

}  // namespace tabsyn
