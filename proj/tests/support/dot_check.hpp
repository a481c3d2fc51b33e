#pragma once
// Recursive-descent checker for the DOT language subset: graph header,
// node, edge and attribute statements, attribute lists, identifiers,
// numerals and quoted strings. Throws std::runtime_error on a syntax error.
// Edges must name declared nodes, which is stricter than DOT itself.

#include <cctype>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace dotcheck {

struct Graph {
  bool directed = false;
  std::set<std::string> nodes;
  std::vector<std::pair<std::string, std::string>> edges;
  std::map<std::string, std::map<std::string, std::string>> node_attrs;
};

class Parser {
 public:
  explicit Parser(std::string text) : s_(std::move(text)) {}

  Graph parse() {
    Graph g;
    std::string kw = keyword();
    if (kw == "strict") kw = keyword();
    if (kw != "digraph" && kw != "graph") fail("expected graph or digraph");
    g.directed = kw == "digraph";
    skip();
    if (peek() != '{') id();
    expect('{');
    while (true) {
      skip();
      if (peek() == '}') break;
      statement(g);
      skip();
      if (peek() == ';') ++pos_;
    }
    expect('}');
    skip();
    if (pos_ != s_.size()) fail("trailing text");
    for (const auto& [a, b] : g.edges)
      if (!g.nodes.count(a) || !g.nodes.count(b)) fail("edge to undeclared node");
    return g;
  }

 private:
  [[noreturn]] void fail(const std::string& why) {
    throw std::runtime_error("DOT offset " + std::to_string(pos_) + ": " + why);
  }
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void skip() {
    while (pos_ < s_.size()) {
      if (std::isspace(static_cast<unsigned char>(s_[pos_]))) {
        ++pos_;
      } else if (s_.compare(pos_, 2, "//") == 0) {
        pos_ = s_.find('\n', pos_);
        if (pos_ == std::string::npos) pos_ = s_.size();
      } else if (s_.compare(pos_, 2, "/*") == 0) {
        const auto end = s_.find("*/", pos_ + 2);
        if (end == std::string::npos) fail("unterminated comment");
        pos_ = end + 2;
      } else {
        break;
      }
    }
  }
  void expect(char c) {
    skip();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  std::string keyword() {
    skip();
    std::string out;
    while (std::isalpha(static_cast<unsigned char>(peek()))) out += s_[pos_++];
    return out;
  }
  std::string id() {
    skip();
    const char c = peek();
    std::string out;
    if (c == '"') {
      ++pos_;
      while (true) {
        if (pos_ >= s_.size()) fail("unterminated string");
        const char d = s_[pos_++];
        if (d == '"') break;
        if (d == '\\' && pos_ < s_.size()) {
          out += d;
          out += s_[pos_++];
          continue;
        }
        out += d;
      }
      return out;
    }
    const auto word = [](unsigned char x) { return std::isalnum(x) || x == '_' || x >= 0x80; };
    if (word(static_cast<unsigned char>(c)) && !std::isdigit(static_cast<unsigned char>(c))) {
      while (word(static_cast<unsigned char>(peek()))) out += s_[pos_++];
      return out;
    }
    if (c == '-' || c == '.' || std::isdigit(static_cast<unsigned char>(c))) {
      if (c == '-') out += s_[pos_++];
      bool dot = false, digit = false;
      while (std::isdigit(static_cast<unsigned char>(peek())) || (peek() == '.' && !dot)) {
        dot = dot || peek() == '.';
        digit = digit || peek() != '.';
        out += s_[pos_++];
      }
      if (!digit) fail("malformed numeral");
      return out;
    }
    fail("expected an identifier");
  }
  std::map<std::string, std::string> attr_lists() {
    std::map<std::string, std::string> out;
    skip();
    while (peek() == '[') {
      ++pos_;
      while (true) {
        skip();
        if (peek() == ']') {
          ++pos_;
          break;
        }
        const std::string k = id();
        expect('=');
        out[k] = id();
        skip();
        if (peek() == ',' || peek() == ';') ++pos_;
      }
      skip();
    }
    return out;
  }
  void statement(Graph& g) {
    const std::size_t start = pos_;
    const std::string first = id();
    if (first == "graph" || first == "node" || first == "edge") {
      skip();
      if (peek() == '[') {
        attr_lists();
        return;
      }
      pos_ = start;
    }
    skip();
    if (peek() == '=') {
      ++pos_;
      id();
      return;
    }
    std::vector<std::string> chain = {first};
    while (true) {
      skip();
      if (s_.compare(pos_, 2, g.directed ? "->" : "--") != 0) break;
      pos_ += 2;
      chain.push_back(id());
    }
    const auto attrs = attr_lists();
    if (chain.size() == 1) {
      g.nodes.insert(first);
      g.node_attrs[first] = attrs;
    } else {
      for (std::size_t i = 0; i + 1 < chain.size(); ++i) g.edges.emplace_back(chain[i], chain[i + 1]);
    }
  }

  std::string s_;
  std::size_t pos_ = 0;
};

inline Graph parse(const std::string& text) { return Parser(text).parse(); }

}  // namespace dotcheck
