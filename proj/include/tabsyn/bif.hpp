#pragma once

#include "tabsyn/common.hpp"

#include <string>
#include <vector>

namespace tabsyn {

// Document model for the BIF subset used by the Bayesian-network oracles:
// network / variable / probability blocks, discrete variables only.

struct BifVariable {
  std::string name;
  int arity = 0;
  std::vector<std::string> categories;
};

struct BifProbability {
  std::string child;
  std::vector<std::string> parents;
  // one row of child-arity probabilities per parent configuration, in
  // canonical order (first parent varies slowest); a root has a single row
  std::vector<std::vector<double>> rows;
};

struct BifDocument {
  std::string network_name;
  std::vector<BifVariable> variables;
  std::vector<BifProbability> probabilities;

  int variable_index(const std::string& name) const;
};

// Parse errors carry line/column positions.
BifDocument parse_bif(const std::string& text);
BifDocument load_bif(const std::string& path);
std::string serialize_bif(const BifDocument& doc);

}  // namespace tabsyn
