#pragma once
// Sectioned key-value text, the format of run configs and synthetic specs.
//
//   # comment
//   [section]
//   key = value      # trailing comments allowed
//
// Keys before any section header belong to section "". Lookups use
// "section.key". Values keep inner whitespace; quotes are not interpreted.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cxr {

class KeyValueFile {
 public:
  struct Entry {
    std::string value;
    std::size_t line = 0;  // 0 for programmatic sets
  };

  // Throws DataError naming the line for malformed input or duplicate keys.
  static KeyValueFile parse(std::string_view text, std::string_view origin = "config");

  bool has(std::string_view key) const;
  std::optional<std::string> get(std::string_view key) const;
  std::string get_or(std::string_view key, std::string_view fallback) const;
  // Typed getters throw DataError "<origin> line N: key: ..." on bad values.
  double get_double(std::string_view key, double fallback) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
  std::uint64_t get_uint(std::string_view key, std::uint64_t fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;

  void set(std::string_view key, std::string value);
  // 0 when absent or set programmatically.
  std::size_t line_of(std::string_view key) const;

  // Section names in first-appearance order.
  std::vector<std::string> sections() const;
  // Keys of one section ("section.key" form) in file order.
  std::vector<std::string> keys_in(std::string_view section) const;

  std::string to_text() const;
  const std::string& origin() const { return origin_; }

 private:
  [[noreturn]] void bad_value(std::string_view key, const std::string& why) const;

  std::string origin_;
  std::map<std::string, Entry, std::less<>> entries_;
  std::vector<std::string> order_;
};

}  // namespace cxr
