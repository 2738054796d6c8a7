#pragma once

#include "tabsyn/rng.hpp"
#include "tabsyn/schema.hpp"

#include <nlohmann/json_fwd.hpp>

#include <span>
#include <vector>

namespace tabsyn {

enum class NormKind { vgm, gmm5, gmm10, minmax };

NormKind norm_kind_from_string(const std::string& s);
std::string norm_kind_name(NormKind k);

// Fitted per-column normalizer: value <-> (alpha, mode one-hot). Retained
// modes only; weights renormalized to sum to 1.
struct ContinuousTransform {
  int column = -1;
  std::vector<double> eta;     // mode means
  std::vector<double> phi;     // mode standard deviations (> 0)
  std::vector<double> weight;  // sums to 1

  int modes() const { return static_cast<int>(eta.size()); }

  // normalized mode-assignment probabilities rho_k for a value
  std::vector<double> mode_probs(double value) const;

  // samples a mode from rho and returns (alpha clipped to [-1, 1], mode)
  std::pair<double, int> encode(double value, Rng& rng) const;

  double decode(double alpha, int mode) const;
};

ContinuousTransform fit_vgm(std::span<const double> values, int max_modes = 10);
ContinuousTransform fit_gmm(std::span<const double> values, int modes);  // plain EM, no pruning
ContinuousTransform fit_minmax(std::span<const double> values);
ContinuousTransform fit_continuous(std::span<const double> values, NormKind kind,
                                   int vgm_max_modes = 10);

struct DiscreteTransform {
  int column = -1;
  int cardinality = 0;
  std::vector<long> counts;  // per category, from the training table
};

// Whole-schema encoder to the concatenated row representation: per
// continuous column [alpha, beta one-hot], per discrete column a one-hot,
// blocks in schema column order.
class RowCodec {
 public:
  struct Block {
    int column = -1;
    bool continuous = false;
    int offset = 0;
    int width = 0;  // continuous: 1 + modes; discrete: cardinality
  };

  static RowCodec fit(const Table& table, NormKind kind, int vgm_max_modes = 10);

  int width() const { return width_; }
  int cond_width() const { return cond_width_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  const Block& block_for_column(int column) const;
  const ContinuousTransform& continuous_transform(int column) const;
  const DiscreteTransform& discrete_transform(int column) const;
  const Schema& schema() const { return schema_; }

  // offset of a discrete column's mask inside the cond vector
  int cond_offset(int column) const;

  Mat encode_table(const Table& table, Rng& rng) const;  // hard one-hot rows
  void encode_row(const Table& table, std::size_t row, double* out, Rng& rng) const;
  Table decode_matrix(const Mat& rows) const;  // argmax per one-hot block

  nlohmann::json to_json() const;
  static RowCodec from_json(const nlohmann::json& j, const Schema& schema);

 private:
  Schema schema_;
  std::vector<ContinuousTransform> cont_;  // parallel to schema columns (unused slots empty)
  std::vector<DiscreteTransform> disc_;
  std::vector<Block> blocks_;
  std::vector<int> cond_offsets_;  // per schema column; -1 for continuous
  int width_ = 0;
  int cond_width_ = 0;
  void rebuild_layout();
};

}  // namespace tabsyn
