#include <fstream>
#include <map>
#include <sstream>

#include "cxr/error.hpp"
#include "cxr/labels.hpp"

namespace cxr {

const std::string_view kDefaultSchemaText = R"(# Default finding catalog: 14 observations, 8 top-level and 6 children.
# Format: "name" or "name < parent".
No Finding
Enlarged Cardiomediastinum
Cardiomegaly < Enlarged Cardiomediastinum
Lung Opacity
Lung Lesion < Lung Opacity
Edema < Lung Opacity
Consolidation < Lung Opacity
Pneumonia < Consolidation
Atelectasis < Lung Opacity
Pneumothorax
Pleural Effusion
Pleural Other
Fracture
Support Devices
)";

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

FindingCatalog FindingCatalog::parse(std::string_view text) {
  struct Entry {
    std::string name;
    std::string parent;
    std::size_t line;
  };
  std::vector<Entry> entries;
  std::map<std::string, std::size_t> index;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    Entry e{line, {}, line_no};
    if (const auto lt = line.find('<'); lt != std::string::npos) {
      e.name = trim(line.substr(0, lt));
      e.parent = trim(line.substr(lt + 1));
      if (e.parent.empty())
        throw DataError("schema line " + std::to_string(line_no) + ": missing parent after '<'");
    }
    if (e.name.empty())
      throw DataError("schema line " + std::to_string(line_no) + ": empty finding name");
    if (!index.emplace(e.name, entries.size()).second)
      throw DataError("schema line " + std::to_string(line_no) + ": duplicate finding '" + e.name +
                      "'");
    entries.push_back(std::move(e));
  }
  if (entries.size() != kFindingCount)
    throw DataError("schema lists " + std::to_string(entries.size()) + " findings, expected " +
                    std::to_string(kFindingCount) +
                    (entries.empty() ? std::string()
                                     : " (last entry on line " +
                                           std::to_string(entries.back().line) + ")"));

  FindingCatalog catalog;
  for (const auto& e : entries) {
    catalog.names_.push_back(e.name);
    if (e.parent.empty()) {
      catalog.parents_.push_back(std::nullopt);
      continue;
    }
    const auto it = index.find(e.parent);
    if (it == index.end())
      throw DataError("schema line " + std::to_string(e.line) + ": unknown parent '" + e.parent +
                      "'");
    catalog.parents_.push_back(it->second);
  }
  // A walk longer than the catalog means the parent links loop.
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    std::size_t steps = 0;
    for (auto cur = catalog.parents_[i]; cur; cur = catalog.parents_[*cur])
      if (++steps > catalog.size())
        throw DataError("schema line " + std::to_string(entries[i].line) + ": finding '" +
                        entries[i].name + "' is part of a parent cycle");
  }
  return catalog;
}

FindingCatalog FindingCatalog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse(buf.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

const FindingCatalog& FindingCatalog::default_catalog() {
  static const FindingCatalog catalog = parse(kDefaultSchemaText);
  return catalog;
}

std::string FindingCatalog::to_text() const {
  std::string out;
  for (std::size_t i = 0; i < size(); ++i) {
    out += names_[i];
    if (parents_[i]) out += " < " + names_[*parents_[i]];
    out += '\n';
  }
  return out;
}

std::optional<std::size_t> FindingCatalog::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  return std::nullopt;
}

std::size_t FindingCatalog::root_count() const {
  std::size_t n = 0;
  for (const auto& p : parents_)
    if (!p) ++n;
  return n;
}

std::vector<HierarchyViolation> hierarchy_violations(const FindingCatalog& catalog,
                                                     std::span<const double> probabilities,
                                                     double tolerance) {
  if (probabilities.size() != catalog.size())
    throw ShapeError("hierarchy check: expected " + std::to_string(catalog.size()) +
                     " probabilities, got " + std::to_string(probabilities.size()));
  std::vector<HierarchyViolation> out;
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    const auto p = catalog.parent(i);
    if (p && probabilities[i] > probabilities[*p] + tolerance)
      out.push_back({i, *p, probabilities[i], probabilities[*p]});
  }
  return out;
}

}  // namespace cxr
