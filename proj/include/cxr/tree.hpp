#pragma once
// CART decision trees over finding probabilities, with Gini impurity.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cxr {

// Feature rows plus binary labels. Row-major values, n x feature_count.
struct SampleSet {
  std::size_t feature_count = 0;
  std::vector<double> values;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  double value(std::size_t row, std::size_t feature) const {
    return values[row * feature_count + feature];
  }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * feature_count, feature_count};
  }
  void add(std::span<const double> features, int label);
};

// 1 - p0^2 - p1^2. Throws NumericError when both counts are zero.
double gini(std::size_t negatives, std::size_t positives);

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;  // left: value <= threshold
  double decrease = 0.0;   // parent gini - size-weighted child gini
};

// Exhaustive scan over midpoints of consecutive distinct values of each
// allowed feature, restricted to splits leaving at least min_leaf rows per
// side. The maximal decrease wins; exact ties go to the lower feature index,
// then the lower threshold. None unless the best decrease is positive and
// at least min_decrease.
std::optional<Split> best_split(const SampleSet& samples, std::span<const std::size_t> rows,
                                std::span<const std::size_t> features, double min_decrease,
                                std::size_t min_leaf = 1);

enum class LeafTie { Negative, Positive };

struct TreeParams {
  std::size_t max_depth = 4;
  std::size_t min_samples_leaf = 5;
  double min_decrease = 1e-4;
  LeafTie leaf_tie = LeafTie::Negative;
};

struct TreeNode {
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0.0;
  std::size_t left = 0;  // node indices, internal nodes only
  std::size_t right = 0;
  std::size_t negatives = 0;  // training rows reaching the node
  std::size_t positives = 0;
  bool predicted = false;
  double probability = 0.0;  // positives / (negatives + positives)
  std::size_t depth = 0;

  bool operator==(const TreeNode&) const = default;
};

struct PathStep {
  std::size_t node = 0;
  std::size_t feature = 0;
  std::string feature_name;
  double threshold = 0.0;
  double value = 0.0;
  bool went_left = false;  // value <= threshold
};

struct DecisionPath {
  std::vector<PathStep> steps;
  std::size_t leaf = 0;
  bool predicted = false;
  double probability = 0.0;

  std::string to_text() const;
};

struct TreePrediction {
  bool positive = false;
  double probability = 0.0;
  DecisionPath path;
};

class DecisionTree {
 public:
  // Throws DataError on empty input.
  static DecisionTree fit(const SampleSet& samples, const TreeParams& params = {});
  // Leaf with the given counts; mostly for tests and tools.
  static DecisionTree single_leaf(std::size_t negatives, std::size_t positives,
                                  std::size_t feature_count, LeafTie tie = LeafTie::Negative);

  TreePrediction predict(std::span<const double> features,
                         const std::vector<std::string>* names = nullptr) const;

  std::size_t feature_count() const { return feature_count_; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& root() const { return nodes_.front(); }
  std::size_t depth() const;
  // Features used by internal nodes, sorted, unique.
  std::vector<std::size_t> split_features() const;
  std::size_t split_count() const;

  std::string to_text() const;
  static DecisionTree parse(std::string_view text);
  // Internal nodes read "<name> ≤ <threshold>"; leaves show counts and class.
  std::string to_dot(const std::vector<std::string>& names) const;

  bool operator==(const DecisionTree&) const = default;

 private:
  std::size_t grow(const SampleSet& samples, std::vector<std::size_t>& rows, std::size_t depth,
                   const TreeParams& params, const std::vector<std::size_t>& features);
  std::size_t feature_count_ = 0;
  std::vector<TreeNode> nodes_;  // preorder, root at 0
};

// Follows the path's branch decisions against `features`; returns the leaf
// reached, or nullopt when a recorded decision no longer holds.
std::optional<std::size_t> replay(const DecisionTree& tree, const DecisionPath& path,
                                  std::span<const double> features);

}  // namespace cxr
