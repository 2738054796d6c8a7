#pragma once

#include "tabsyn/schema.hpp"

#include <string>

namespace tabsyn {

// Strict RFC-4180-subset reader: header required and validated against the
// schema, continuous cells must parse as floats, no missing values. When a
// discrete column's schema category list is empty, categories are registered
// in first-appearance order (the returned table's schema carries them).
Table load_csv(const std::string& path, const Schema& schema);

void save_csv(const Table& table, const std::string& path);

}  // namespace tabsyn
