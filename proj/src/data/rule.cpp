#include <algorithm>
#include <cctype>

#include "cxr/dataset.hpp"
#include "cxr/error.hpp"

namespace cxr {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

class RuleParser {
 public:
  RuleParser(std::string_view text, const FindingCatalog& catalog, std::vector<Rule::Node>& nodes)
      : text_(text), catalog_(catalog), nodes_(nodes) {}

  std::size_t parse() {
    const std::size_t root = parse_or();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(text_.substr(pos_)) + "'");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw DataError("rule '" + std::string(text_) + "' at column " + std::to_string(pos_ + 1) +
                    ": " + why);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept_symbol(std::string_view sym) {
    skip_space();
    if (text_.substr(pos_, sym.size()) == sym) {
      pos_ += sym.size();
      return true;
    }
    return false;
  }

  bool accept_keyword(std::string_view kw) {
    skip_space();
    const std::size_t n = kw.size();
    if (pos_ + n > text_.size() || lower(text_.substr(pos_, n)) != lower(kw)) return false;
    if (pos_ + n < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_ + n])) ||
                                    text_[pos_ + n] == '_'))
      return false;
    pos_ += n;
    return true;
  }

  std::size_t push(Rule::Node node) {
    nodes_.push_back(node);
    return nodes_.size() - 1;
  }

  std::size_t parse_or() {
    std::size_t lhs = parse_and();
    while (accept_symbol("||") || accept_keyword("or"))
      lhs = push({Rule::Node::Op::Or, 0, lhs, parse_and()});
    return lhs;
  }

  std::size_t parse_and() {
    std::size_t lhs = parse_not();
    while (accept_symbol("&&") || accept_keyword("and"))
      lhs = push({Rule::Node::Op::And, 0, lhs, parse_not()});
    return lhs;
  }

  std::size_t parse_not() {
    if (accept_keyword("not") || accept_symbol("!"))
      return push({Rule::Node::Op::Not, 0, parse_not(), 0});
    return parse_atom();
  }

  std::size_t parse_atom() {
    skip_space();
    if (accept_symbol("(")) {
      const std::size_t inner = parse_or();
      if (!accept_symbol(")")) fail("missing ')'");
      return inner;
    }
    if (pos_ >= text_.size()) fail("expected a finding");
    std::string name;
    if (text_[pos_] == '"') {
      const auto close = text_.find('"', pos_ + 1);
      if (close == std::string_view::npos) fail("unterminated quote");
      name = std::string(text_.substr(pos_ + 1, close - pos_ - 1));
      pos_ = close + 1;
      return push({Rule::Node::Op::Finding, resolve(name, true), 0, 0});
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    if (pos_ == start) fail("expected a finding");
    name = std::string(text_.substr(start, pos_ - start));
    return push({Rule::Node::Op::Finding, resolve(name, false), 0, 0});
  }

  std::size_t resolve(const std::string& name, bool quoted) {
    if (quoted) {
      if (auto idx = catalog_.index_of(name)) return *idx;
      fail("unknown finding \"" + name + "\"");
    }
    const std::string lname = lower(name);
    if (lname.rfind("finding_", 0) == 0) {
      const std::string digits = lname.substr(8);
      if (!digits.empty() && std::all_of(digits.begin(), digits.end(), ::isdigit)) {
        const std::size_t idx = std::stoul(digits);
        if (idx < catalog_.size()) return idx;
        fail("finding index " + digits + " out of range");
      }
    }
    for (std::size_t i = 0; i < catalog_.size(); ++i) {
      std::string candidate = lower(catalog_.name(i));
      std::replace(candidate.begin(), candidate.end(), ' ', '_');
      if (candidate == lname) return i;
    }
    fail("unknown finding '" + name + "'");
  }

  std::string_view text_;
  const FindingCatalog& catalog_;
  std::vector<Rule::Node>& nodes_;
  std::size_t pos_ = 0;
};

}  // namespace

Rule Rule::parse(std::string_view text, const FindingCatalog& catalog) {
  Rule rule;
  rule.text_ = std::string(text);
  RuleParser parser(text, catalog, rule.nodes_);
  rule.root_ = parser.parse();
  return rule;
}

bool Rule::eval(std::size_t node, const std::array<bool, kFindingCount>& truths) const {
  const Node& n = nodes_[node];
  switch (n.op) {
    case Node::Op::Finding:
      return truths[n.finding];
    case Node::Op::Not:
      return !eval(n.lhs, truths);
    case Node::Op::And:
      return eval(n.lhs, truths) && eval(n.rhs, truths);
    case Node::Op::Or:
      return eval(n.lhs, truths) || eval(n.rhs, truths);
  }
  return false;
}

bool Rule::evaluate(const std::array<bool, kFindingCount>& truths) const {
  return eval(root_, truths);
}

std::vector<std::size_t> Rule::findings() const {
  std::vector<std::size_t> out;
  for (const auto& n : nodes_)
    if (n.op == Node::Op::Finding) out.push_back(n.finding);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace cxr
