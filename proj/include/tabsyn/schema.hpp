#pragma once

#include "tabsyn/common.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace tabsyn {

enum class ColKind { continuous, discrete };
enum class TaskKind { none, classification, regression };

// Predictor requested by a dataset's schema for the ML-efficacy metric.
// kind: decision_tree (param = max depth), logistic, linear, mlp (param = hidden width)
struct PredictorSpec {
  std::string kind;
  int param = 0;
};

struct Column {
  std::string name;
  ColKind kind = ColKind::continuous;
  std::vector<std::string> categories;  // discrete only
  bool target = false;

  int category_index(const std::string& cat) const;
};

struct Schema {
  std::vector<Column> columns;
  TaskKind task = TaskKind::none;
  std::vector<std::string> metrics;
  std::vector<PredictorSpec> predictors;

  int target_index() const;  // -1 when absent
  std::vector<int> discrete_columns() const;
  std::vector<int> continuous_columns() const;
  void validate() const;
};

Schema load_schema(const std::string& path);
void save_schema(const Schema& schema, const std::string& path);
std::string schema_to_json(const Schema& schema);
Schema schema_from_json(const std::string& text);

// Column-store table. Continuous cells are doubles, discrete cells are
// indices into the column's category list.
class Table {
 public:
  Table() = default;
  explicit Table(Schema schema);

  const Schema& schema() const { return schema_; }
  Schema& schema() { return schema_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return schema_.columns.size(); }

  double num(std::size_t row, std::size_t col) const { return num_[col][row]; }
  int cat(std::size_t row, std::size_t col) const { return cat_[col][row]; }
  void set_num(std::size_t row, std::size_t col, double v) { num_[col][row] = v; }
  void set_cat(std::size_t row, std::size_t col, int v) { cat_[col][row] = v; }

  const std::vector<double>& num_column(std::size_t col) const { return num_[col]; }
  const std::vector<int>& cat_column(std::size_t col) const { return cat_[col]; }

  void add_rows(std::size_t n);
  void append_row_from(const Table& src, std::size_t src_row);

  Table select_rows(const std::vector<std::size_t>& row_ids) const;
  Table shuffled(class Rng& rng) const;

 private:
  Schema schema_;
  std::size_t rows_ = 0;
  std::vector<std::vector<double>> num_;  // per column; empty for discrete
  std::vector<std::vector<int>> cat_;     // per column; empty for continuous
};

}  // namespace tabsyn
