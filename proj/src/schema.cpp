#include "tabsyn/schema.hpp"

#include "tabsyn/rng.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <numeric>
#include <sstream>

namespace tabsyn {

using nlohmann::json;

int Column::category_index(const std::string& cat) const {
  for (std::size_t i = 0; i < categories.size(); ++i)
    if (categories[i] == cat) return static_cast<int>(i);
  return -1;
}

int Schema::target_index() const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].target) return static_cast<int>(i);
  return -1;
}

std::vector<int> Schema::discrete_columns() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].kind == ColKind::discrete) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> Schema::continuous_columns() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].kind == ColKind::continuous) out.push_back(static_cast<int>(i));
  return out;
}

void Schema::validate() const {
  if (columns.empty()) throw parse_error("schema: no columns");
  int targets = 0;
  for (const Column& c : columns) {
    if (c.name.empty()) throw parse_error("schema: column with empty name");
    if (c.target) {
      ++targets;
      if (c.kind == ColKind::discrete && task == TaskKind::regression)
        throw parse_error("schema: discrete target for a regression task");
    }
  }
  if (targets > 1) throw parse_error("schema: more than one target column");
  if (task != TaskKind::none && targets != 1)
    throw parse_error("schema: task declared but no target column");
}

namespace {

TaskKind parse_task(const std::string& s) {
  if (s == "classification") return TaskKind::classification;
  if (s == "regression") return TaskKind::regression;
  if (s == "none" || s.empty()) return TaskKind::none;
  throw parse_error("schema: unknown task '" + s + "'");
}

std::string task_name(TaskKind t) {
  switch (t) {
    case TaskKind::classification: return "classification";
    case TaskKind::regression: return "regression";
    default: return "none";
  }
}

}  // namespace

Schema schema_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw parse_error(std::string("schema: invalid JSON: ") + e.what());
  }
  Schema s;
  if (!j.contains("columns") || !j["columns"].is_array())
    throw parse_error("schema: missing 'columns' array");
  for (const auto& jc : j["columns"]) {
    Column c;
    c.name = jc.at("name").get<std::string>();
    const std::string kind = jc.at("kind").get<std::string>();
    if (kind == "continuous")
      c.kind = ColKind::continuous;
    else if (kind == "discrete")
      c.kind = ColKind::discrete;
    else
      throw parse_error("schema: column '" + c.name + "' has unknown kind '" + kind + "'");
    if (jc.contains("categories"))
      c.categories = jc["categories"].get<std::vector<std::string>>();
    if (c.kind == ColKind::continuous && !c.categories.empty())
      throw parse_error("schema: continuous column '" + c.name + "' lists categories");
    c.target = jc.value("target", false);
    s.columns.push_back(std::move(c));
  }
  s.task = parse_task(j.value("task", std::string("none")));
  if (j.contains("metrics")) s.metrics = j["metrics"].get<std::vector<std::string>>();
  if (j.contains("predictors")) {
    for (const auto& jp : j["predictors"]) {
      PredictorSpec p;
      p.kind = jp.at("kind").get<std::string>();
      p.param = jp.value("param", 0);
      s.predictors.push_back(std::move(p));
    }
  }
  s.validate();
  return s;
}

std::string schema_to_json(const Schema& s) {
  json j;
  j["columns"] = json::array();
  for (const Column& c : s.columns) {
    json jc;
    jc["name"] = c.name;
    jc["kind"] = c.kind == ColKind::continuous ? "continuous" : "discrete";
    if (!c.categories.empty()) jc["categories"] = c.categories;
    if (c.target) jc["target"] = true;
    j["columns"].push_back(std::move(jc));
  }
  if (s.task != TaskKind::none) j["task"] = task_name(s.task);
  if (!s.metrics.empty()) j["metrics"] = s.metrics;
  if (!s.predictors.empty()) {
    j["predictors"] = json::array();
    for (const PredictorSpec& p : s.predictors) {
      json jp;
      jp["kind"] = p.kind;
      if (p.param != 0) jp["param"] = p.param;
      j["predictors"].push_back(std::move(jp));
    }
  }
  return j.dump(2);
}

Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open schema file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return schema_from_json(ss.str());
}

void save_schema(const Schema& schema, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write schema file: " + path);
  out << schema_to_json(schema) << "\n";
}

Table::Table(Schema schema) : schema_(std::move(schema)) {
  num_.resize(schema_.columns.size());
  cat_.resize(schema_.columns.size());
}

void Table::add_rows(std::size_t n) {
  for (std::size_t c = 0; c < schema_.columns.size(); ++c) {
    if (schema_.columns[c].kind == ColKind::continuous)
      num_[c].resize(rows_ + n, 0.0);
    else
      cat_[c].resize(rows_ + n, 0);
  }
  rows_ += n;
}

void Table::append_row_from(const Table& src, std::size_t src_row) {
  const std::size_t r = rows_;
  add_rows(1);
  for (std::size_t c = 0; c < schema_.columns.size(); ++c) {
    if (schema_.columns[c].kind == ColKind::continuous)
      num_[c][r] = src.num(src_row, c);
    else
      cat_[c][r] = src.cat(src_row, c);
  }
}

Table Table::select_rows(const std::vector<std::size_t>& row_ids) const {
  Table out(schema_);
  out.add_rows(row_ids.size());
  for (std::size_t i = 0; i < row_ids.size(); ++i) {
    for (std::size_t c = 0; c < schema_.columns.size(); ++c) {
      if (schema_.columns[c].kind == ColKind::continuous)
        out.num_[c][i] = num_[c][row_ids[i]];
      else
        out.cat_[c][i] = cat_[c][row_ids[i]];
    }
  }
  return out;
}

Table Table::shuffled(Rng& rng) const {
  std::vector<std::size_t> ids(rows_);
  std::iota(ids.begin(), ids.end(), 0);
  for (std::size_t i = ids.size(); i > 1; --i)
    std::swap(ids[i - 1], ids[rng.uniform_index(i)]);
  return select_rows(ids);
}

}  // namespace tabsyn
