#pragma once

#include "tabsyn/rng.hpp"
#include "tabsyn/transform.hpp"

#include <optional>
#include <vector>

namespace tabsyn {

enum class CondMode { log_freq, raw_freq, none };

CondMode cond_mode_from_string(const std::string& s);
std::string cond_mode_name(CondMode m);

// The imposed condition: schema column i* and category k* within it.
struct MaskSelection {
  int column = -1;    // schema column index
  int category = -1;  // k*
};

// Per-category row lists for Uniform(T_train | cond) and the category
// counts behind both sampling PMFs. Immutable after construction.
class CategoryIndex {
 public:
  CategoryIndex() = default;
  CategoryIndex(const Table& table);

  const std::vector<std::size_t>& rows_with(int column, int category) const;
  long count(int column, int category) const;
  const std::vector<int>& discrete_columns() const { return discrete_cols_; }

 private:
  std::vector<int> discrete_cols_;
  std::vector<std::vector<std::vector<std::size_t>>> rows_;  // per schema col
  std::vector<std::vector<long>> counts_;
};

// Builds cond vectors and draws (i*, k*) pairs for training and generation.
class CondSampler {
 public:
  CondSampler() = default;
  CondSampler(const RowCodec& codec, CondMode mode);

  CondMode mode() const { return mode_; }
  int cond_width() const { return mode_ == CondMode::none ? 0 : codec_->cond_width(); }
  bool active() const { return cond_width() > 0; }

  // training-by-sampling: uniform column, category from log(1 + count)
  // (raw counts under the raw_freq ablation)
  std::optional<MaskSelection> sample_training(Rng& rng) const;

  // generation: uniform column, category from raw empirical frequency
  std::optional<MaskSelection> sample_generation(Rng& rng) const;

  // cond = m_1 + ... + m_Nd with a single 1 at (i*, k*)
  void write_cond(const MaskSelection& sel, double* out) const;
  Vec cond_vector(const MaskSelection& sel) const;

  MaskSelection selection_for(const std::string& column_name,
                              const std::string& category) const;

 private:
  const RowCodec* codec_ = nullptr;
  CondMode mode_ = CondMode::log_freq;
  std::vector<int> discrete_cols_;
  std::vector<std::vector<double>> log_freq_;  // log(1 + count)
  std::vector<std::vector<double>> raw_freq_;

  std::optional<MaskSelection> draw(Rng& rng,
                                    const std::vector<std::vector<double>>& pmf) const;
};

// uniform draw over rows carrying the selected category
std::size_t sample_real_row(const CategoryIndex& index, const MaskSelection& sel, Rng& rng);

}  // namespace tabsyn
