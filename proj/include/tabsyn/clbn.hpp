#pragma once

#include "tabsyn/rng.hpp"
#include "tabsyn/schema.hpp"

#include <nlohmann/json_fwd.hpp>

#include <vector>

namespace tabsyn {

// Chow-Liu tree baseline: continuous columns are discretized into
// equal-width bins, the maximum-mutual-information spanning tree is learned
// from smoothed joint counts, and sampling de-discretizes by a uniform draw
// within the bin.
class ChowLiuModel {
 public:
  static ChowLiuModel fit(const Table& table, int bins = 15);

  Table sample(std::size_t n, Rng& rng) const;

  // mean log-density of a table under the model (bin mass times the
  // within-bin uniform density for continuous columns)
  double mean_loglik(const Table& table) const;

  const Schema& schema() const { return schema_; }
  int parent_of(int column) const { return parents_[column]; }  // -1 at the root
  std::vector<std::pair<int, int>> undirected_edges() const;

  nlohmann::json to_json() const;
  static ChowLiuModel from_json(const nlohmann::json& j, const Schema& schema);

 private:
  Schema schema_;
  int bins_ = 15;
  std::vector<std::vector<double>> bin_edges_;  // per column; empty for discrete
  std::vector<int> arity_;                      // bins or category count
  std::vector<int> parents_;
  std::vector<int> order_;                      // root-first traversal
  std::vector<Mat> cond_;                       // [parent arity, arity]; root: [1, arity]

  int cell_of(const Table& table, std::size_t row, int col) const;
  double decode_cell(int col, int cell, Rng& rng) const;
};

}  // namespace tabsyn
