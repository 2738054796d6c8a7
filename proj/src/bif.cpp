#include "tabsyn/bif.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tabsyn {

namespace {

struct Token {
  enum Kind { Word, Number, Punct, End } kind = End;
  std::string text;
  double number = 0.0;
  int line = 0, col = 0;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) {}

  Token next() {
    skip_ws_and_comments();
    Token t;
    t.line = line_;
    t.col = col_;
    if (pos_ >= text_.size()) return t;
    const char c = text_[pos_];
    if (std::strchr("{}()[]|,;", c)) {
      t.kind = Token::Punct;
      t.text = std::string(1, c);
      advance();
      return t;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
      std::string num;
      while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
             !std::strchr("{}()[]|,;", text_[pos_])) {
        num.push_back(text_[pos_]);
        advance();
      }
      try {
        std::size_t used = 0;
        t.number = std::stod(num, &used);
        if (used == num.size()) {
          t.kind = Token::Number;
          t.text = num;
          return t;
        }
      } catch (...) {
      }
      t.kind = Token::Word;  // e.g. category names that start with a digit
      t.text = num;
      return t;
    }
    t.kind = Token::Word;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
           !std::strchr("{}()[]|,;", text_[pos_])) {
      t.text.push_back(text_[pos_]);
      advance();
    }
    return t;
  }

 private:
  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_ws_and_comments() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;
};

[[noreturn]] void fail(const Token& at, const std::string& msg) {
  throw parse_error("bif: line " + std::to_string(at.line) + ", col " +
                    std::to_string(at.col) + ": " + msg);
}

class Parser {
 public:
  explicit Parser(const std::string& text) : lex_(text) { bump(); }

  BifDocument parse() {
    BifDocument doc;
    while (cur_.kind != Token::End) {
      if (cur_.kind == Token::Word && cur_.text == "network") {
        bump();
        if (cur_.kind == Token::Word) {
          doc.network_name = cur_.text;
          bump();
        }
        skip_block();
      } else if (cur_.kind == Token::Word && cur_.text == "variable") {
        doc.variables.push_back(parse_variable());
      } else if (cur_.kind == Token::Word && cur_.text == "probability") {
        doc.probabilities.push_back(parse_probability(doc));
      } else {
        fail(cur_, "expected 'network', 'variable' or 'probability', got '" + cur_.text + "'");
      }
    }
    validate(doc);
    return doc;
  }

 private:
  void bump() { cur_ = lex_.next(); }

  void expect_punct(const char* p) {
    if (cur_.kind != Token::Punct || cur_.text != p)
      fail(cur_, std::string("expected '") + p + "', got '" + cur_.text + "'");
    bump();
  }

  std::string expect_word() {
    if (cur_.kind != Token::Word && cur_.kind != Token::Number)
      fail(cur_, "expected a name, got '" + cur_.text + "'");
    std::string w = cur_.text;
    bump();
    return w;
  }

  double expect_number() {
    if (cur_.kind != Token::Number) fail(cur_, "expected a number, got '" + cur_.text + "'");
    const double v = cur_.number;
    bump();
    return v;
  }

  void skip_block() {
    expect_punct("{");
    int depth = 1;
    while (depth > 0) {
      if (cur_.kind == Token::End) fail(cur_, "unterminated block");
      if (cur_.kind == Token::Punct && cur_.text == "{") ++depth;
      if (cur_.kind == Token::Punct && cur_.text == "}") --depth;
      bump();
    }
  }

  void skip_statement() {  // 'property ... ;'
    while (!(cur_.kind == Token::Punct && cur_.text == ";")) {
      if (cur_.kind == Token::End) fail(cur_, "unterminated statement");
      bump();
    }
    bump();
  }

  BifVariable parse_variable() {
    bump();  // 'variable'
    BifVariable v;
    v.name = expect_word();
    expect_punct("{");
    while (!(cur_.kind == Token::Punct && cur_.text == "}")) {
      if (cur_.kind == Token::Word && cur_.text == "type") {
        bump();
        const Token at = cur_;
        if (expect_word() != "discrete") fail(at, "only discrete variables are supported");
        expect_punct("[");
        v.arity = static_cast<int>(expect_number());
        expect_punct("]");
        expect_punct("{");
        while (!(cur_.kind == Token::Punct && cur_.text == "}")) {
          v.categories.push_back(expect_word());
          if (cur_.kind == Token::Punct && cur_.text == ",") bump();
        }
        bump();  // '}'
        if (cur_.kind == Token::Punct && cur_.text == ";") bump();
      } else if (cur_.kind == Token::Word && cur_.text == "property") {
        skip_statement();
      } else {
        fail(cur_, "unexpected token '" + cur_.text + "' in variable block");
      }
    }
    bump();  // '}'
    if (static_cast<int>(v.categories.size()) != v.arity)
      throw parse_error("bif: variable '" + v.name + "' declares arity " +
                        std::to_string(v.arity) + " but lists " +
                        std::to_string(v.categories.size()) + " categories");
    return v;
  }

  BifProbability parse_probability(const BifDocument& doc) {
    const Token start = cur_;
    bump();  // 'probability'
    expect_punct("(");
    BifProbability p;
    p.child = expect_word();
    if (cur_.kind == Token::Punct && cur_.text == "|") {
      bump();
      while (!(cur_.kind == Token::Punct && cur_.text == ")")) {
        p.parents.push_back(expect_word());
        if (cur_.kind == Token::Punct && cur_.text == ",") bump();
      }
    }
    expect_punct(")");

    const int child_idx = doc.variable_index(p.child);
    if (child_idx < 0) fail(start, "probability block for undeclared variable '" + p.child + "'");
    const BifVariable& child = doc.variables[child_idx];
    std::vector<const BifVariable*> parents;
    long n_cfg = 1;
    for (const std::string& name : p.parents) {
      const int idx = doc.variable_index(name);
      if (idx < 0) fail(start, "undeclared parent '" + name + "' for '" + p.child + "'");
      parents.push_back(&doc.variables[idx]);
      n_cfg *= parents.back()->arity;
    }
    p.rows.assign(static_cast<std::size_t>(n_cfg), {});

    expect_punct("{");
    while (!(cur_.kind == Token::Punct && cur_.text == "}")) {
      if (cur_.kind == Token::Word && cur_.text == "table") {
        bump();
        if (!p.parents.empty()) fail(cur_, "'table' rows are only valid for root variables");
        std::vector<double> row;
        while (!(cur_.kind == Token::Punct && cur_.text == ";")) {
          row.push_back(expect_number());
          if (cur_.kind == Token::Punct && cur_.text == ",") bump();
        }
        bump();  // ';'
        p.rows[0] = std::move(row);
      } else if (cur_.kind == Token::Punct && cur_.text == "(") {
        const Token at = cur_;
        bump();
        std::vector<std::string> cfg;
        while (!(cur_.kind == Token::Punct && cur_.text == ")")) {
          cfg.push_back(expect_word());
          if (cur_.kind == Token::Punct && cur_.text == ",") bump();
        }
        bump();  // ')'
        if (cfg.size() != parents.size())
          fail(at, "configuration lists " + std::to_string(cfg.size()) + " values, expected " +
                       std::to_string(parents.size()));
        long idx = 0;
        for (std::size_t i = 0; i < cfg.size(); ++i) {
          int ci = -1;
          for (int k = 0; k < parents[i]->arity; ++k)
            if (parents[i]->categories[k] == cfg[i]) ci = k;
          if (ci < 0)
            fail(at, "'" + cfg[i] + "' is not a category of parent '" + parents[i]->name + "'");
          idx = idx * parents[i]->arity + ci;
        }
        if (!p.rows[idx].empty()) fail(at, "duplicate configuration for '" + p.child + "'");
        std::vector<double> row;
        while (!(cur_.kind == Token::Punct && cur_.text == ";")) {
          row.push_back(expect_number());
          if (cur_.kind == Token::Punct && cur_.text == ",") bump();
        }
        bump();  // ';'
        p.rows[idx] = std::move(row);
      } else if (cur_.kind == Token::Word && cur_.text == "property") {
        skip_statement();
      } else {
        fail(cur_, "unexpected token '" + cur_.text + "' in probability block");
      }
    }
    bump();  // '}'

    for (std::size_t i = 0; i < p.rows.size(); ++i) {
      if (p.rows[i].empty())
        fail(start, "missing configuration row " + std::to_string(i) + " for '" + p.child +
                        "' (expected " + std::to_string(n_cfg) + " rows)");
      if (static_cast<int>(p.rows[i].size()) != child.arity)
        fail(start, "row for '" + p.child + "' has " + std::to_string(p.rows[i].size()) +
                        " entries, expected " + std::to_string(child.arity));
      double sum = 0.0;
      for (double v : p.rows[i]) {
        if (v < 0.0) fail(start, "negative probability for '" + p.child + "'");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-6)
        fail(start, "row for '" + p.child + "' sums to " + std::to_string(sum));
    }
    return p;
  }

  static void validate(const BifDocument& doc) {
    if (doc.variables.empty()) throw parse_error("bif: no variables declared");
    std::vector<bool> seen(doc.variables.size(), false);
    for (const BifProbability& p : doc.probabilities) {
      const int idx = doc.variable_index(p.child);
      if (seen[idx]) throw parse_error("bif: duplicate probability block for '" + p.child + "'");
      seen[idx] = true;
    }
    for (std::size_t i = 0; i < doc.variables.size(); ++i)
      if (!seen[i])
        throw parse_error("bif: variable '" + doc.variables[i].name +
                          "' has no probability block");
  }

  Lexer lex_;
  Token cur_;
};

}  // namespace

int BifDocument::variable_index(const std::string& name) const {
  for (std::size_t i = 0; i < variables.size(); ++i)
    if (variables[i].name == name) return static_cast<int>(i);
  return -1;
}

BifDocument parse_bif(const std::string& text) { return Parser(text).parse(); }

BifDocument load_bif(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open bif file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_bif(ss.str());
}

std::string serialize_bif(const BifDocument& doc) {
  std::ostringstream out;
  out.precision(17);
  out << "network " << (doc.network_name.empty() ? "unknown" : doc.network_name) << " {\n}\n";
  for (const BifVariable& v : doc.variables) {
    out << "variable " << v.name << " {\n  type discrete [ " << v.arity << " ] { ";
    for (int k = 0; k < v.arity; ++k) out << (k ? ", " : "") << v.categories[k];
    out << " };\n}\n";
  }
  for (const BifProbability& p : doc.probabilities) {
    out << "probability ( " << p.child;
    if (!p.parents.empty()) {
      out << " | ";
      for (std::size_t i = 0; i < p.parents.size(); ++i)
        out << (i ? ", " : "") << p.parents[i];
    }
    out << " ) {\n";
    if (p.parents.empty()) {
      out << "  table ";
      for (std::size_t k = 0; k < p.rows[0].size(); ++k)
        out << (k ? ", " : "") << p.rows[0][k];
      out << ";\n";
    } else {
      std::vector<const BifVariable*> parents;
      for (const std::string& name : p.parents)
        parents.push_back(&doc.variables[doc.variable_index(name)]);
      std::vector<int> cfg(parents.size(), 0);
      for (const std::vector<double>& row : p.rows) {
        out << "  (";
        for (std::size_t i = 0; i < parents.size(); ++i)
          out << (i ? ", " : "") << parents[i]->categories[cfg[i]];
        out << ") ";
        for (std::size_t k = 0; k < row.size(); ++k) out << (k ? ", " : "") << row[k];
        out << ";\n";
        for (int i = static_cast<int>(cfg.size()) - 1; i >= 0; --i) {
          if (++cfg[i] < parents[i]->arity) break;
          cfg[i] = 0;
        }
      }
    }
    out << "}\n";
  }
  return out.str();
}

}  // namespace tabsyn
