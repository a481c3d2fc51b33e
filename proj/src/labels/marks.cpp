#include <sstream>

#include "cxr/error.hpp"
#include "cxr/labels.hpp"

namespace cxr {

std::string_view mark_name(LabelMark mark) {
  switch (mark) {
    case LabelMark::Positive:
      return "P";
    case LabelMark::Negative:
      return "N";
    case LabelMark::Uncertain:
      return "U";
    case LabelMark::Blank:
      return "blank";
  }
  return "?";
}

std::string mark_to_cell(LabelMark mark) {
  switch (mark) {
    case LabelMark::Positive:
      return "1.0";
    case LabelMark::Negative:
      return "0.0";
    case LabelMark::Uncertain:
      return "-1.0";
    case LabelMark::Blank:
      return "";
  }
  return "";
}

std::optional<LabelMark> mark_from_cell(std::string_view cell) {
  while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
  while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r'))
    cell.remove_suffix(1);
  if (cell.empty()) return LabelMark::Blank;
  std::string s(cell);
  // U+2212 MINUS SIGN
  if (s.rfind("\xE2\x88\x92", 0) == 0) s = "-" + s.substr(3);
  if (s == "1" || s == "1.0") return LabelMark::Positive;
  if (s == "0" || s == "0.0" || s == "-0.0") return LabelMark::Negative;
  if (s == "-1" || s == "-1.0") return LabelMark::Uncertain;
  return std::nullopt;
}

std::string_view policy_name(UncertaintyPolicy policy) {
  return policy == UncertaintyPolicy::MapToHalf ? "map_to_half" : "ignore";
}

UncertaintyPolicy parse_policy(std::string_view name) {
  if (name == "map_to_half") return UncertaintyPolicy::MapToHalf;
  if (name == "ignore") return UncertaintyPolicy::Ignore;
  throw UsageError("unknown uncertainty policy '" + std::string(name) +
                   "' (expected map_to_half|ignore)");
}

TargetValue mark_to_target(LabelMark mark, UncertaintyPolicy policy) {
  switch (mark) {
    case LabelMark::Positive:
      return {1.0, false};
    case LabelMark::Negative:
      return {0.0, false};
    case LabelMark::Uncertain:
      if (policy == UncertaintyPolicy::MapToHalf) return {0.5, false};
      return {0.0, true};
    case LabelMark::Blank:
      return {0.0, true};
  }
  return {0.0, true};
}

void MarkCounts::add(LabelMark mark) {
  switch (mark) {
    case LabelMark::Positive:
      ++positive;
      break;
    case LabelMark::Negative:
      ++negative;
      break;
    case LabelMark::Uncertain:
      ++uncertain;
      break;
    case LabelMark::Blank:
      ++blank;
      break;
  }
}

BalanceWeights compute_balance_weights(std::span<const MarkCounts> counts, UncertaintyPolicy policy,
                                       double max_weight, const std::vector<std::string>* names) {
  if (!(max_weight > 0.0)) throw UsageError("max class weight must be positive");
  BalanceWeights out;
  out.weights.reserve(counts.size());
  for (std::size_t f = 0; f < counts.size(); ++f) {
    const MarkCounts& c = counts[f];
    const double half_u =
        policy == UncertaintyPolicy::MapToHalf ? 0.5 * static_cast<double>(c.uncertain) : 0.0;
    const double m_pos = static_cast<double>(c.positive) + half_u;
    const double m_neg = static_cast<double>(c.negative) + half_u;
    const double m = m_pos + m_neg;
    ClassWeight w;
    const auto label = [&] {
      return names != nullptr && f < names->size() ? "'" + (*names)[f] + "'"
                                                   : "#" + std::to_string(f);
    };
    if (m == 0.0) {
      out.warnings.push_back("finding " + label() +
                             " has no unmasked marks; using unit weights");
    } else {
      w.positive = m_pos > 0.0 ? m / (2.0 * m_pos) : max_weight;
      w.negative = m_neg > 0.0 ? m / (2.0 * m_neg) : max_weight;
      if (m_pos == 0.0 || m_neg == 0.0) {
        std::ostringstream msg;
        msg << "finding " << label() << " weight clamped to " << max_weight
            << " (positive mass " << m_pos << ", negative mass " << m_neg << ")";
        out.warnings.push_back(msg.str());
      }
    }
    out.weights.push_back(w);
  }
  return out;
}

}  // namespace cxr
