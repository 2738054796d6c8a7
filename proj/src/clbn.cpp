#include "tabsyn/clbn.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tabsyn {

namespace {

constexpr double kSmoothing = 0.1;

}  // namespace

int ChowLiuModel::cell_of(const Table& table, std::size_t row, int col) const {
  if (schema_.columns[col].kind == ColKind::discrete) return table.cat(row, col);
  const auto& edges = bin_edges_[col];
  const double v = table.num(row, col);
  // edges has bins+1 entries; clamp into [0, bins-1]
  const auto it = std::upper_bound(edges.begin() + 1, edges.end() - 1, v);
  return static_cast<int>(it - edges.begin()) - 1;
}

double ChowLiuModel::decode_cell(int col, int cell, Rng& rng) const {
  const auto& edges = bin_edges_[col];
  return rng.uniform(edges[cell], edges[cell + 1]);
}

ChowLiuModel ChowLiuModel::fit(const Table& table, int bins) {
  if (table.rows() == 0) throw std::invalid_argument("chow-liu: empty table");
  if (bins < 1) throw std::invalid_argument("chow-liu: bins must be >= 1");
  ChowLiuModel m;
  m.schema_ = table.schema();
  m.bins_ = bins;
  const int ncols = static_cast<int>(m.schema_.columns.size());
  const double n = static_cast<double>(table.rows());

  m.bin_edges_.resize(ncols);
  m.arity_.resize(ncols);
  for (int c = 0; c < ncols; ++c) {
    if (m.schema_.columns[c].kind == ColKind::discrete) {
      m.arity_[c] = static_cast<int>(m.schema_.columns[c].categories.size());
    } else {
      const auto& col = table.num_column(c);
      const auto [lo_it, hi_it] = std::minmax_element(col.begin(), col.end());
      double lo = *lo_it, hi = *hi_it;
      if (hi <= lo) hi = lo + 1e-9;
      auto& edges = m.bin_edges_[c];
      edges.resize(bins + 1);
      for (int b = 0; b <= bins; ++b) edges[b] = lo + (hi - lo) * b / bins;
      m.arity_[c] = bins;
    }
  }

  // discretized view
  std::vector<std::vector<int>> cells(ncols, std::vector<int>(table.rows()));
  for (int c = 0; c < ncols; ++c)
    for (std::size_t r = 0; r < table.rows(); ++r) cells[c][r] = m.cell_of(table, r, c);

  // pairwise mutual information from smoothed joint counts
  Mat mi = Mat::Zero(ncols, ncols);
  for (int a = 0; a < ncols; ++a) {
    for (int b = a + 1; b < ncols; ++b) {
      Mat joint = Mat::Constant(m.arity_[a], m.arity_[b], kSmoothing);
      for (std::size_t r = 0; r < table.rows(); ++r) joint(cells[a][r], cells[b][r]) += 1.0;
      joint /= joint.sum();
      const Vec pa = joint.rowwise().sum();
      const Vec pb = joint.colwise().sum();
      double v = 0.0;
      for (int i = 0; i < m.arity_[a]; ++i)
        for (int j = 0; j < m.arity_[b]; ++j)
          if (joint(i, j) > 0.0) v += joint(i, j) * std::log(joint(i, j) / (pa(i) * pb(j)));
      mi(a, b) = mi(b, a) = v;
    }
  }

  // maximum-weight spanning tree (Prim from column 0)
  m.parents_.assign(ncols, -1);
  m.order_.clear();
  std::vector<bool> in_tree(ncols, false);
  std::vector<double> best_w(ncols, -1.0);
  std::vector<int> best_p(ncols, -1);
  in_tree[0] = true;
  m.order_.push_back(0);
  for (int c = 1; c < ncols; ++c) {
    best_w[c] = mi(0, c);
    best_p[c] = 0;
  }
  for (int step = 1; step < ncols; ++step) {
    int pick = -1;
    for (int c = 0; c < ncols; ++c)
      if (!in_tree[c] && (pick < 0 || best_w[c] > best_w[pick])) pick = c;
    in_tree[pick] = true;
    m.parents_[pick] = best_p[pick];
    m.order_.push_back(pick);
    for (int c = 0; c < ncols; ++c)
      if (!in_tree[c] && mi(pick, c) > best_w[c]) {
        best_w[c] = mi(pick, c);
        best_p[c] = pick;
      }
  }

  // conditional tables along the tree edges
  m.cond_.resize(ncols);
  for (int c : m.order_) {
    const int p = m.parents_[c];
    if (p < 0) {
      Mat marg = Mat::Constant(1, m.arity_[c], kSmoothing);
      for (std::size_t r = 0; r < table.rows(); ++r) marg(0, cells[c][r]) += 1.0;
      marg /= marg.sum();
      m.cond_[c] = marg;
    } else {
      Mat counts = Mat::Constant(m.arity_[p], m.arity_[c], kSmoothing);
      for (std::size_t r = 0; r < table.rows(); ++r) counts(cells[p][r], cells[c][r]) += 1.0;
      for (int i = 0; i < m.arity_[p]; ++i) counts.row(i) /= counts.row(i).sum();
      m.cond_[c] = counts;
    }
  }
  (void)n;
  return m;
}

Table ChowLiuModel::sample(std::size_t n, Rng& rng) const {
  Table out(schema_);
  out.add_rows(n);
  const int ncols = static_cast<int>(schema_.columns.size());
  std::vector<int> cell(ncols);
  for (std::size_t r = 0; r < n; ++r) {
    for (int c : order_) {
      const int p = parents_[c];
      const int row = p < 0 ? 0 : cell[p];
      std::span<const double> dist(cond_[c].row(row).data(),
                                   static_cast<std::size_t>(arity_[c]));
      cell[c] = static_cast<int>(rng.categorical(dist));
    }
    for (int c = 0; c < ncols; ++c) {
      if (schema_.columns[c].kind == ColKind::discrete)
        out.set_cat(r, c, cell[c]);
      else
        out.set_num(r, c, decode_cell(c, cell[c], rng));
    }
  }
  return out;
}

double ChowLiuModel::mean_loglik(const Table& table) const {
  if (table.rows() == 0) throw std::invalid_argument("mean_loglik: empty table");
  const int ncols = static_cast<int>(schema_.columns.size());
  double total = 0.0;
  std::vector<int> cell(ncols);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (int c = 0; c < ncols; ++c) cell[c] = cell_of(table, r, c);
    for (int c = 0; c < ncols; ++c) {
      const int p = parents_[c];
      total += std::log(cond_[c](p < 0 ? 0 : cell[p], cell[c]));
      if (schema_.columns[c].kind == ColKind::continuous) {
        const auto& edges = bin_edges_[c];
        total -= std::log(edges[cell[c] + 1] - edges[cell[c]]);
      }
    }
  }
  return total / static_cast<double>(table.rows());
}

std::vector<std::pair<int, int>> ChowLiuModel::undirected_edges() const {
  std::vector<std::pair<int, int>> edges;
  for (int c = 0; c < static_cast<int>(parents_.size()); ++c)
    if (parents_[c] >= 0)
      edges.emplace_back(std::min(c, parents_[c]), std::max(c, parents_[c]));
  std::sort(edges.begin(), edges.end());
  return edges;
}

using nlohmann::json;

nlohmann::json ChowLiuModel::to_json() const {
  json j;
  j["bins"] = bins_;
  j["parents"] = parents_;
  j["order"] = order_;
  j["arity"] = arity_;
  j["bin_edges"] = bin_edges_;
  j["cond"] = json::array();
  for (const Mat& c : cond_) {
    json jm;
    jm["rows"] = c.rows();
    jm["cols"] = c.cols();
    jm["data"] = std::vector<double>(c.data(), c.data() + c.size());
    j["cond"].push_back(std::move(jm));
  }
  return j;
}

ChowLiuModel ChowLiuModel::from_json(const nlohmann::json& j, const Schema& schema) {
  ChowLiuModel m;
  m.schema_ = schema;
  m.bins_ = j.at("bins").get<int>();
  m.parents_ = j.at("parents").get<std::vector<int>>();
  m.order_ = j.at("order").get<std::vector<int>>();
  m.arity_ = j.at("arity").get<std::vector<int>>();
  m.bin_edges_ = j.at("bin_edges").get<std::vector<std::vector<double>>>();
  for (const auto& jm : j.at("cond")) {
    Mat c(jm.at("rows").get<Eigen::Index>(), jm.at("cols").get<Eigen::Index>());
    const auto data = jm.at("data").get<std::vector<double>>();
    std::copy(data.begin(), data.end(), c.data());
    m.cond_.push_back(std::move(c));
  }
  return m;
}

}  // namespace tabsyn
