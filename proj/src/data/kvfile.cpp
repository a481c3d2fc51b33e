#include "cxr/kvfile.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "cxr/error.hpp"

namespace cxr {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string section_of(const std::string& key) {
  const auto dot = key.rfind('.');
  return dot == std::string::npos ? std::string() : key.substr(0, dot);
}

}  // namespace

KeyValueFile KeyValueFile::parse(std::string_view text, std::string_view origin) {
  KeyValueFile kv;
  kv.origin_ = std::string(origin);
  std::istringstream in{std::string(text)};
  std::string raw, section;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto fail = [&](const std::string& why) {
      return DataError(kv.origin_ + " line " + std::to_string(line_no) + ": " + why);
    };
    if (line.front() == '[') {
      if (line.back() != ']') throw fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw fail("empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw fail("expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw fail("empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (kv.entries_.count(full)) throw fail("duplicate key '" + full + "'");
    kv.entries_[full] = {trim(line.substr(eq + 1)), line_no};
    kv.order_.push_back(full);
  }
  return kv;
}

bool KeyValueFile::has(std::string_view key) const { return entries_.find(key) != entries_.end(); }

std::optional<std::string> KeyValueFile::get(std::string_view key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second.value;
}

std::string KeyValueFile::get_or(std::string_view key, std::string_view fallback) const {
  auto v = get(key);
  return v ? *v : std::string(fallback);
}

void KeyValueFile::bad_value(std::string_view key, const std::string& why) const {
  const auto it = entries_.find(key);
  const std::size_t line = it == entries_.end() ? 0 : it->second.line;
  throw DataError(origin_ + (line ? " line " + std::to_string(line) : std::string()) + ": " +
                  std::string(key) + ": " + why);
}

double KeyValueFile::get_double(std::string_view key, double fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size())
    bad_value(key, "expected a number, got '" + *v + "'");
  return out;
}

std::int64_t KeyValueFile::get_int(std::string_view key, std::int64_t fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size())
    bad_value(key, "expected an integer, got '" + *v + "'");
  return out;
}

std::uint64_t KeyValueFile::get_uint(std::string_view key, std::uint64_t fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size())
    bad_value(key, "expected a non-negative integer, got '" + *v + "'");
  return out;
}

bool KeyValueFile::get_bool(std::string_view key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  bad_value(key, "expected true/false, got '" + *v + "'");
}

void KeyValueFile::set(std::string_view key, std::string value) {
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    entries_[std::string(key)] = {std::move(value), 0};
    order_.emplace_back(key);
  } else {
    it->second = {std::move(value), 0};
  }
}

std::size_t KeyValueFile::line_of(std::string_view key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? 0 : it->second.line;
}

std::vector<std::string> KeyValueFile::sections() const {
  std::vector<std::string> out;
  for (const auto& k : order_) {
    const std::string s = section_of(k);
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  }
  return out;
}

std::vector<std::string> KeyValueFile::keys_in(std::string_view section) const {
  std::vector<std::string> out;
  for (const auto& k : order_)
    if (section_of(k) == section) out.push_back(k);
  return out;
}

std::string KeyValueFile::to_text() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& section : sections()) {
    if (!section.empty()) out << (first ? "" : "\n") << '[' << section << "]\n";
    first = false;
    for (const auto& key : keys_in(section)) {
      const std::string leaf = section.empty() ? key : key.substr(section.size() + 1);
      out << leaf << " = " << entries_.at(key).value << '\n';
    }
  }
  return out.str();
}

}  // namespace cxr
