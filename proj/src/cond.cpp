#include "tabsyn/cond.hpp"

#include <cmath>

namespace tabsyn {

CondMode cond_mode_from_string(const std::string& s) {
  if (s == "logfreq" || s == "log_freq") return CondMode::log_freq;
  if (s == "rawfreq" || s == "raw_freq") return CondMode::raw_freq;
  if (s == "none") return CondMode::none;
  throw parse_error("unknown condition mode '" + s + "'");
}

std::string cond_mode_name(CondMode m) {
  switch (m) {
    case CondMode::log_freq: return "logfreq";
    case CondMode::raw_freq: return "rawfreq";
    case CondMode::none: return "none";
  }
  return "logfreq";
}

CategoryIndex::CategoryIndex(const Table& table) {
  const Schema& s = table.schema();
  rows_.resize(s.columns.size());
  counts_.resize(s.columns.size());
  discrete_cols_ = s.discrete_columns();
  for (int c : discrete_cols_) {
    const std::size_t arity = s.columns[c].categories.size();
    rows_[c].resize(arity);
    counts_[c].assign(arity, 0);
    for (std::size_t r = 0; r < table.rows(); ++r) {
      const int k = table.cat(r, c);
      rows_[c][k].push_back(r);
      ++counts_[c][k];
    }
  }
}

const std::vector<std::size_t>& CategoryIndex::rows_with(int column, int category) const {
  if (column < 0 || column >= static_cast<int>(rows_.size()) || rows_[column].empty())
    throw std::invalid_argument("CategoryIndex: column is not an indexed discrete column");
  return rows_[column].at(static_cast<std::size_t>(category));
}

long CategoryIndex::count(int column, int category) const {
  if (column < 0 || column >= static_cast<int>(counts_.size()) || counts_[column].empty())
    throw std::invalid_argument("CategoryIndex: column is not an indexed discrete column");
  return counts_[column].at(static_cast<std::size_t>(category));
}

CondSampler::CondSampler(const RowCodec& codec, CondMode mode) : codec_(&codec), mode_(mode) {
  if (mode_ == CondMode::none) return;
  discrete_cols_ = codec.schema().discrete_columns();
  for (int c : discrete_cols_) {
    const DiscreteTransform& d = codec.discrete_transform(c);
    std::vector<double> lf(d.counts.size()), rf(d.counts.size());
    for (std::size_t k = 0; k < d.counts.size(); ++k) {
      lf[k] = std::log1p(static_cast<double>(d.counts[k]));
      rf[k] = static_cast<double>(d.counts[k]);
    }
    log_freq_.push_back(std::move(lf));
    raw_freq_.push_back(std::move(rf));
  }
}

std::optional<MaskSelection> CondSampler::draw(
    Rng& rng, const std::vector<std::vector<double>>& pmf) const {
  if (!active()) return std::nullopt;
  const std::size_t pick = rng.uniform_index(discrete_cols_.size());
  const int column = discrete_cols_[pick];
  const int category = static_cast<int>(rng.categorical(pmf[pick]));
  return MaskSelection{column, category};
}

std::optional<MaskSelection> CondSampler::sample_training(Rng& rng) const {
  return draw(rng, mode_ == CondMode::raw_freq ? raw_freq_ : log_freq_);
}

std::optional<MaskSelection> CondSampler::sample_generation(Rng& rng) const {
  return draw(rng, raw_freq_);
}

void CondSampler::write_cond(const MaskSelection& sel, double* out) const {
  std::fill(out, out + cond_width(), 0.0);
  out[codec_->cond_offset(sel.column) + sel.category] = 1.0;
}

Vec CondSampler::cond_vector(const MaskSelection& sel) const {
  Vec v = Vec::Zero(cond_width());
  write_cond(sel, v.data());
  return v;
}

MaskSelection CondSampler::selection_for(const std::string& column_name,
                                         const std::string& category) const {
  if (mode_ == CondMode::none)
    throw std::invalid_argument("fixed conditions require a conditional model");
  const Schema& s = codec_->schema();
  for (int c : discrete_cols_) {
    if (s.columns[c].name != column_name) continue;
    const int k = s.columns[c].category_index(category);
    if (k < 0)
      throw std::invalid_argument("unknown category '" + category + "' in column '" +
                                  column_name + "'");
    return {c, k};
  }
  throw std::invalid_argument("no discrete column named '" + column_name + "'");
}

std::size_t sample_real_row(const CategoryIndex& index, const MaskSelection& sel, Rng& rng) {
  const auto& rows = index.rows_with(sel.column, sel.category);
  if (rows.empty())
    throw std::invalid_argument("sample_real_row: category has no rows in the training table");
  return rows[rng.uniform_index(rows.size())];
}

}  // namespace tabsyn
