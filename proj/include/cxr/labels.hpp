#pragma once
// Finding catalog, annotation marks and their training targets.

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cxr {

inline constexpr std::size_t kFindingCount = 14;

// Finding probabilities in catalog order; the interface between the stages.
using FindingVector = std::array<double, kFindingCount>;

// Schema text: one finding per line, either "name" or "name < parent name".
// '#' starts a comment. Parents may be declared before or after children.
// The hierarchy must be a forest over exactly kFindingCount findings.
class FindingCatalog {
 public:
  // Throws DataError naming the offending line.
  static FindingCatalog parse(std::string_view text);
  static FindingCatalog load(const std::filesystem::path& path);
  static const FindingCatalog& default_catalog();

  std::string to_text() const;

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<std::size_t> parent(std::size_t i) const { return parents_.at(i); }
  std::optional<std::size_t> index_of(std::string_view name) const;

  std::size_t root_count() const;
  std::size_t child_count() const { return size() - root_count(); }

  bool operator==(const FindingCatalog&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<std::optional<std::size_t>> parents_;
};

extern const std::string_view kDefaultSchemaText;

enum class LabelMark { Positive, Negative, Uncertain, Blank };

std::string_view mark_name(LabelMark mark);

// CSV cell encoding: "1.0" / "0.0" / "-1.0" / "".
std::string mark_to_cell(LabelMark mark);
// Accepts 1, 1.0, 0, 0.0, -1, -1.0 (ASCII or U+2212 minus) and blank.
// Returns nullopt on anything else.
std::optional<LabelMark> mark_from_cell(std::string_view cell);

enum class UncertaintyPolicy {
  MapToHalf,  // U becomes target 0.5 and counts half to each side of the balance
  Ignore,     // U is treated like a blank: masked and excluded from the balance
};

std::string_view policy_name(UncertaintyPolicy policy);
UncertaintyPolicy parse_policy(std::string_view name);

struct TargetValue {
  double target = 0.0;
  bool masked = false;

  bool operator==(const TargetValue&) const = default;
};

TargetValue mark_to_target(LabelMark mark, UncertaintyPolicy policy = UncertaintyPolicy::MapToHalf);

struct MarkCounts {
  std::size_t positive = 0;
  std::size_t negative = 0;
  std::size_t uncertain = 0;
  std::size_t blank = 0;

  void add(LabelMark mark);
};

struct ClassWeight {
  double positive = 1.0;
  double negative = 1.0;
};

struct BalanceWeights {
  std::vector<ClassWeight> weights;
  // One line per finding whose weight had to be clamped.
  std::vector<std::string> warnings;
};

inline constexpr double kDefaultMaxClassWeight = 100.0;

// Effective masses m+ = P + U/2, m- = N + U/2 (U dropped under Ignore);
// w+ = m/(2 m+), w- = m/(2 m-) so that w+ m+ = w- m-. A side with zero mass
// gets max_weight and a warning; a finding with no mass at all keeps unit
// weights and a warning.
BalanceWeights compute_balance_weights(std::span<const MarkCounts> counts,
                                       UncertaintyPolicy policy = UncertaintyPolicy::MapToHalf,
                                       double max_weight = kDefaultMaxClassWeight,
                                       const std::vector<std::string>* names = nullptr);

struct HierarchyViolation {
  std::size_t child = 0;
  std::size_t parent = 0;
  double child_probability = 0.0;
  double parent_probability = 0.0;
};

// Reporting only: children predicted more likely than their parent.
std::vector<HierarchyViolation> hierarchy_violations(const FindingCatalog& catalog,
                                                     std::span<const double> probabilities,
                                                     double tolerance = 0.0);

}  // namespace cxr
