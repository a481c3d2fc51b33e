#include "cxr/tree.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "cxr/error.hpp"

namespace cxr {
namespace {

using u128 = unsigned __int128;

// Sum over children of (neg^2 + pos^2) / size, kept as an exact fraction.
// Larger means purer children.
struct Purity {
  u128 num = 0;
  u128 den = 1;

  bool greater_than(const Purity& o) const { return num * o.den > o.num * den; }
};

Purity purity(std::size_t ln, std::size_t lp, std::size_t rn, std::size_t rp) {
  const u128 l = ln + lp, r = rn + rp;
  const u128 ls = u128(ln) * ln + u128(lp) * lp;
  const u128 rs = u128(rn) * rn + u128(rp) * rp;
  return {ls * r + rs * l, l * r};
}

double decrease_of(std::size_t ln, std::size_t lp, std::size_t rn, std::size_t rp) {
  const double n = static_cast<double>(ln + lp + rn + rp);
  const double l = static_cast<double>(ln + lp), r = static_cast<double>(rn + rp);
  return gini(ln + rn, lp + rp) - (l / n) * gini(ln, lp) - (r / n) * gini(rn, rp);
}

double midpoint(double a, double b) {
  const double m = a + (b - a) / 2.0;
  return m < b ? m : a;
}

bool leaf_prediction(std::size_t neg, std::size_t pos, LeafTie tie) {
  if (pos != neg) return pos > neg;
  return tie == LeafTie::Positive;
}

TreeNode make_leaf(std::size_t neg, std::size_t pos, std::size_t depth, LeafTie tie) {
  TreeNode node;
  node.leaf = true;
  node.negatives = neg;
  node.positives = pos;
  node.predicted = leaf_prediction(neg, pos, tie);
  node.probability = neg + pos ? static_cast<double>(pos) / static_cast<double>(neg + pos) : 0.0;
  node.depth = depth;
  return node;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string dot_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

void SampleSet::add(std::span<const double> features, int label) {
  if (feature_count == 0 && labels.empty()) feature_count = features.size();
  if (features.size() != feature_count)
    throw ShapeError("sample has " + std::to_string(features.size()) + " features, expected " +
                     std::to_string(feature_count));
  if (label != 0 && label != 1) throw DataError("labels must be 0 or 1");
  values.insert(values.end(), features.begin(), features.end());
  labels.push_back(label);
}

double gini(std::size_t negatives, std::size_t positives) {
  const std::size_t n = negatives + positives;
  if (n == 0) throw NumericError("gini of an empty node is undefined");
  const double p0 = static_cast<double>(negatives) / static_cast<double>(n);
  const double p1 = static_cast<double>(positives) / static_cast<double>(n);
  return 1.0 - p0 * p0 - p1 * p1;
}

std::optional<Split> best_split(const SampleSet& samples, std::span<const std::size_t> rows,
                                std::span<const std::size_t> features, double min_decrease,
                                std::size_t min_leaf) {
  if (rows.size() < 2) return std::nullopt;
  min_leaf = std::max<std::size_t>(min_leaf, 1);
  std::size_t total_pos = 0;
  for (std::size_t r : rows) total_pos += static_cast<std::size_t>(samples.labels[r]);
  const std::size_t total_neg = rows.size() - total_pos;
  if (total_pos == 0 || total_neg == 0) return std::nullopt;

  std::vector<std::size_t> feats(features.begin(), features.end());
  std::sort(feats.begin(), feats.end());
  feats.erase(std::unique(feats.begin(), feats.end()), feats.end());

  std::optional<Split> best;
  Purity best_purity;
  std::size_t bl[4] = {};  // counts of the best candidate
  std::vector<std::size_t> order(rows.begin(), rows.end());
  for (std::size_t f : feats) {
    if (f >= samples.feature_count) throw ShapeError("split feature out of range");
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return samples.value(a, f) < samples.value(b, f);
    });
    std::size_t ln = 0, lp = 0;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      ++(samples.labels[order[i]] ? lp : ln);
      const double a = samples.value(order[i], f), b = samples.value(order[i + 1], f);
      if (!(a < b)) continue;
      const std::size_t left = i + 1, right = order.size() - left;
      if (left < min_leaf || right < min_leaf) continue;
      const Purity p = purity(ln, lp, total_neg - ln, total_pos - lp);
      if (!best || p.greater_than(best_purity)) {
        best = Split{f, midpoint(a, b), 0.0};
        best_purity = p;
        bl[0] = ln, bl[1] = lp, bl[2] = total_neg - ln, bl[3] = total_pos - lp;
      }
    }
  }
  if (!best) return std::nullopt;
  // Strict improvement, decided exactly: purity * n > neg^2 + pos^2.
  const u128 parent = u128(total_neg) * total_neg + u128(total_pos) * total_pos;
  if (!(best_purity.num * rows.size() > parent * best_purity.den)) return std::nullopt;
  best->decrease = decrease_of(bl[0], bl[1], bl[2], bl[3]);
  if (best->decrease < min_decrease) return std::nullopt;
  return best;
}

DecisionTree DecisionTree::fit(const SampleSet& samples, const TreeParams& params) {
  if (samples.size() == 0) throw DataError("cannot fit a tree on an empty sample set");
  if (samples.values.size() != samples.size() * samples.feature_count)
    throw ShapeError("sample set values do not match its row count");
  DecisionTree tree;
  tree.feature_count_ = samples.feature_count;
  std::vector<std::size_t> rows(samples.size());
  std::iota(rows.begin(), rows.end(), 0);
  std::vector<std::size_t> features(samples.feature_count);
  std::iota(features.begin(), features.end(), 0);
  tree.grow(samples, rows, 0, params, features);
  return tree;
}

std::size_t DecisionTree::grow(const SampleSet& samples, std::vector<std::size_t>& rows,
                               std::size_t depth, const TreeParams& params,
                               const std::vector<std::size_t>& features) {
  std::size_t pos = 0;
  for (std::size_t r : rows) pos += static_cast<std::size_t>(samples.labels[r]);
  const std::size_t neg = rows.size() - pos;
  const std::size_t index = nodes_.size();
  nodes_.push_back(make_leaf(neg, pos, depth, params.leaf_tie));

  if (depth >= params.max_depth) return index;
  const auto split =
      best_split(samples, rows, features, params.min_decrease, params.min_samples_leaf);
  if (!split) return index;

  std::vector<std::size_t> left, right;
  for (std::size_t r : rows)
    (samples.value(r, split->feature) <= split->threshold ? left : right).push_back(r);
  rows.clear();
  rows.shrink_to_fit();

  const std::size_t l = grow(samples, left, depth + 1, params, features);
  const std::size_t r = grow(samples, right, depth + 1, params, features);
  TreeNode& node = nodes_[index];
  node.leaf = false;
  node.predicted = false;  // only leaves carry a class; matches the text form
  node.feature = split->feature;
  node.threshold = split->threshold;
  node.left = l;
  node.right = r;
  return index;
}

DecisionTree DecisionTree::single_leaf(std::size_t negatives, std::size_t positives,
                                       std::size_t feature_count, LeafTie tie) {
  if (negatives + positives == 0) throw DataError("leaf needs at least one sample");
  DecisionTree tree;
  tree.feature_count_ = feature_count;
  tree.nodes_.push_back(make_leaf(negatives, positives, 0, tie));
  return tree;
}

TreePrediction DecisionTree::predict(std::span<const double> features,
                                     const std::vector<std::string>* names) const {
  if (features.size() != feature_count_)
    throw ShapeError("tree expects " + std::to_string(feature_count_) + " features, got " +
                     std::to_string(features.size()));
  TreePrediction out;
  std::size_t i = 0;
  while (!nodes_[i].leaf) {
    const TreeNode& n = nodes_[i];
    PathStep step;
    step.node = i;
    step.feature = n.feature;
    if (names && n.feature < names->size()) step.feature_name = (*names)[n.feature];
    step.threshold = n.threshold;
    step.value = features[n.feature];
    step.went_left = step.value <= n.threshold;
    out.path.steps.push_back(step);
    i = step.went_left ? n.left : n.right;
  }
  out.positive = nodes_[i].predicted;
  out.probability = nodes_[i].probability;
  out.path.leaf = i;
  out.path.predicted = out.positive;
  out.path.probability = out.probability;
  return out;
}

std::optional<std::size_t> replay(const DecisionTree& tree, const DecisionPath& path,
                                  std::span<const double> features) {
  const auto& nodes = tree.nodes();
  std::size_t i = 0;
  for (const PathStep& step : path.steps) {
    if (i != step.node || nodes[i].leaf) return std::nullopt;
    if (step.feature >= features.size() || nodes[i].feature != step.feature ||
        nodes[i].threshold != step.threshold)
      return std::nullopt;
    const bool left = features[step.feature] <= step.threshold;
    if (left != step.went_left) return std::nullopt;
    i = left ? nodes[i].left : nodes[i].right;
  }
  if (!nodes[i].leaf || i != path.leaf) return std::nullopt;
  return i;
}

std::string DecisionPath::to_text() const {
  std::ostringstream out;
  for (const PathStep& s : steps) {
    const std::string name =
        s.feature_name.empty() ? "feature " + std::to_string(s.feature) : s.feature_name;
    out << name << " = " << short_num(s.value) << (s.went_left ? " <= " : " > ")
        << short_num(s.threshold) << "  -> " << (s.went_left ? "left" : "right") << '\n';
  }
  out << "leaf " << leaf << ": " << (predicted ? "positive" : "negative")
      << " (probability " << short_num(probability) << ")\n";
  return out.str();
}

std::size_t DecisionTree::depth() const {
  std::size_t d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

std::vector<std::size_t> DecisionTree::split_features() const {
  std::vector<std::size_t> out;
  for (const auto& n : nodes_)
    if (!n.leaf) out.push_back(n.feature);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t DecisionTree::split_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return !n.leaf; }));
}

// Text form, one node per line in preorder:
//   cxr-tree 1
//   features <d>
//   nodes <n>
//   <i> split <feature> <threshold> <left> <right> <neg> <pos> <depth>
//   <i> leaf <predicted 0|1> <neg> <pos> <depth>
std::string DecisionTree::to_text() const {
  std::ostringstream out;
  out << "cxr-tree 1\nfeatures " << feature_count_ << "\nnodes " << nodes_.size() << '\n';
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const TreeNode& n = nodes_[i];
    if (n.leaf)
      out << i << " leaf " << (n.predicted ? 1 : 0) << ' ' << n.negatives << ' ' << n.positives
          << ' ' << n.depth << '\n';
    else
      out << i << " split " << n.feature << ' ' << num(n.threshold) << ' ' << n.left << ' '
          << n.right << ' ' << n.negatives << ' ' << n.positives << ' ' << n.depth << '\n';
  }
  return out.str();
}

DecisionTree DecisionTree::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  const auto fail = [&](const std::string& why) {
    return DataError("tree line " + std::to_string(line_no) + ": " + why);
  };
  const auto next = [&]() -> std::istringstream {
    if (!std::getline(in, line)) {
      ++line_no;
      throw fail("unexpected end of text");
    }
    ++line_no;
    return std::istringstream(line);
  };

  DecisionTree tree;
  std::string word;
  std::size_t count = 0;
  if (next().str() != "cxr-tree 1") throw fail("expected 'cxr-tree 1'");
  if (auto s = next(); !(s >> word >> tree.feature_count_) || word != "features")
    throw fail("expected 'features <count>'");
  if (auto s = next(); !(s >> word >> count) || word != "nodes" || count == 0)
    throw fail("expected 'nodes <count>'");
  for (std::size_t i = 0; i < count; ++i) {
    auto s = next();
    std::size_t index = 0;
    std::string kind;
    TreeNode n;
    if (!(s >> index >> kind) || index != i) throw fail("expected node " + std::to_string(i));
    if (kind == "leaf") {
      int predicted = 0;
      if (!(s >> predicted >> n.negatives >> n.positives >> n.depth) ||
          (predicted != 0 && predicted != 1))
        throw fail("malformed leaf");
      n.leaf = true;
      n.predicted = predicted == 1;
    } else if (kind == "split") {
      std::string threshold;
      if (!(s >> n.feature >> threshold >> n.left >> n.right >> n.negatives >> n.positives >>
            n.depth))
        throw fail("malformed split");
      try {
        std::size_t used = 0;
        n.threshold = std::stod(threshold, &used);
        if (used != threshold.size()) throw std::invalid_argument(threshold);
      } catch (const std::exception&) {
        throw fail("bad threshold '" + threshold + "'");
      }
      n.leaf = false;
      if (n.feature >= tree.feature_count_) throw fail("feature index out of range");
      if (n.left <= i || n.right <= i || n.left >= count || n.right >= count)
        throw fail("child index out of range");
    } else {
      throw fail("unknown node kind '" + kind + "'");
    }
    if (s >> word) throw fail("trailing text '" + word + "'");
    const std::size_t total = n.negatives + n.positives;
    n.probability = total ? static_cast<double>(n.positives) / static_cast<double>(total) : 0.0;
    tree.nodes_.push_back(n);
  }
  return tree;
}

std::string DecisionTree::to_dot(const std::vector<std::string>& names) const {
  std::ostringstream out;
  out << "digraph DecisionTree {\n"
      << "  node [shape=box, style=\"rounded,filled\", fontname=\"Helvetica\"];\n"
      << "  edge [fontname=\"Helvetica\"];\n";
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const TreeNode& n = nodes_[i];
    const std::string counts = "samples = " + std::to_string(n.negatives + n.positives) +
                               "\\nvalue = [" + std::to_string(n.negatives) + ", " +
                               std::to_string(n.positives) + "]";
    out << "  n" << i << " [label=\"";
    if (n.leaf) {
      out << counts << "\\nclass = " << (n.predicted ? "positive" : "negative")
          << "\\np = " << short_num(n.probability) << "\", fillcolor=\""
          << (n.predicted ? "#f4c7c3" : "#c6dbef") << "\"];\n";
    } else {
      const std::string name =
          n.feature < names.size() ? names[n.feature] : "feature " + std::to_string(n.feature);
      out << dot_escape(name) << " ≤ " << short_num(n.threshold) << "\\n"
          << counts << "\", fillcolor=\"#ffffff\"];\n";
    }
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const TreeNode& n = nodes_[i];
    if (n.leaf) continue;
    out << "  n" << i << " -> n" << n.left << " [label=\"yes\"];\n";
    out << "  n" << i << " -> n" << n.right << " [label=\"no\"];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace cxr
