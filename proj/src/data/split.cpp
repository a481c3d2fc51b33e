#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "cxr/dataset.hpp"
#include "cxr/error.hpp"
#include "cxr/rng.hpp"

namespace cxr {
namespace {

std::size_t train_count(std::size_t total, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0))
    throw UsageError("split ratio must lie strictly between 0 and 1, got " + std::to_string(ratio));
  // The epsilon keeps products like 0.35 * 10 = 3.4999999999999996 on the
  // tie, which then rounds toward train.
  const auto n = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(total) + 0.5 + 1e-9));
  if (n == 0 || n >= total)
    throw DataError("split ratio " + std::to_string(ratio) + " over " + std::to_string(total) +
                    " units leaves one side empty");
  return n;
}

SplitPlan split_units(std::vector<std::string> units, SplitMode mode, double ratio,
                      std::uint64_t seed) {
  const std::size_t n_train = train_count(units.size(), ratio);
  Rng rng(seed);
  rng.shuffle(std::span<std::string>(units));
  SplitPlan plan;
  plan.mode = mode;
  plan.seed = seed;
  plan.ratio = ratio;
  plan.train.assign(units.begin(), units.begin() + static_cast<std::ptrdiff_t>(n_train));
  plan.test.assign(units.begin() + static_cast<std::ptrdiff_t>(n_train), units.end());
  std::sort(plan.train.begin(), plan.train.end());
  std::sort(plan.test.begin(), plan.test.end());
  return plan;
}

bool contains(const std::vector<std::string>& sorted, const std::string& key) {
  return std::binary_search(sorted.begin(), sorted.end(), key);
}

}  // namespace

std::vector<std::string> patients_of(const std::vector<Study>& studies) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& s : studies)
    if (seen.insert(s.patient_id).second) out.push_back(s.patient_id);
  return out;
}

SplitPlan patient_split(const std::vector<Study>& studies, double ratio, std::uint64_t seed) {
  auto patients = patients_of(studies);
  if (patients.size() < 2)
    throw DataError("patient split needs at least 2 distinct patients, got " +
                    std::to_string(patients.size()));
  // Shuffle from a canonical order so the plan does not depend on row order.
  std::sort(patients.begin(), patients.end());
  return split_units(std::move(patients), SplitMode::Patient, ratio, seed);
}

SplitPlan leaky_image_split(const std::vector<Study>& studies, double ratio, std::uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto& s : studies) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw DataError("image-level split needs unique study ids");
  if (ids.size() < 2) throw DataError("image-level split needs at least 2 studies");
  return split_units(std::move(ids), SplitMode::LeakyImage, ratio, seed);
}

bool SplitPlan::in_train(const Study& s) const {
  return contains(train, mode == SplitMode::Patient ? s.patient_id : s.id);
}

bool SplitPlan::in_test(const Study& s) const {
  return contains(test, mode == SplitMode::Patient ? s.patient_id : s.id);
}

std::vector<Study> select_train(const std::vector<Study>& studies, const SplitPlan& plan) {
  std::vector<Study> out;
  for (const auto& s : studies)
    if (plan.in_train(s)) out.push_back(s);
  return out;
}

std::vector<Study> select_test(const std::vector<Study>& studies, const SplitPlan& plan) {
  std::vector<Study> out;
  for (const auto& s : studies)
    if (plan.in_test(s)) out.push_back(s);
  return out;
}

std::string SplitPlan::to_text() const {
  std::ostringstream out;
  out << "# split manifest\n";
  out << "mode " << (mode == SplitMode::Patient ? "patient" : "leaky-image") << '\n';
  out << "seed " << seed << '\n';
  out << "ratio " << std::setprecision(17) << ratio << '\n';
  for (const auto& id : train) out << "train " << id << '\n';
  for (const auto& id : test) out << "test " << id << '\n';
  return out.str();
}

SplitPlan SplitPlan::parse(std::string_view text) {
  SplitPlan plan;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos)
      throw DataError("split manifest line " + std::to_string(line_no) + ": expected 'key value'");
    const std::string key = line.substr(0, sp), value = line.substr(sp + 1);
    try {
      if (key == "mode") {
        if (value == "patient")
          plan.mode = SplitMode::Patient;
        else if (value == "leaky-image")
          plan.mode = SplitMode::LeakyImage;
        else
          throw DataError("unknown mode '" + value + "'");
      } else if (key == "seed") {
        plan.seed = std::stoull(value);
      } else if (key == "ratio") {
        plan.ratio = std::stod(value);
      } else if (key == "train") {
        plan.train.push_back(value);
      } else if (key == "test") {
        plan.test.push_back(value);
      } else {
        throw DataError("unknown key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw DataError("split manifest line " + std::to_string(line_no) + ": bad value '" + value +
                      "'");
    } catch (const DataError& e) {
      throw DataError("split manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::sort(plan.train.begin(), plan.train.end());
  std::sort(plan.test.begin(), plan.test.end());
  return plan;
}

}  // namespace cxr
