#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace diagcap {

struct IntRange {
  std::int64_t min = 0;
  std::int64_t max = 0;

  bool empty() const { return min > max; }
  bool operator==(const IntRange&) const = default;
};

/// `key = value` text with `#` comments. Keys are unique; every lookup is
/// recorded so that leftover (unknown) keys can be reported by name.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text, std::string origin = "<config>");
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_fraction(const std::string& key, double fallback) const;  // [0, 1]
  double get_double(const std::string& key, double fallback) const;
  IntRange get_range(const std::string& key, IntRange fallback) const;  // "lo..hi" or "n"

  /// Throws Error naming the first key that was never read.
  void reject_unused() const;

  const std::string& origin() const { return origin_; }

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  [[noreturn]] void bad(const std::string& key, const std::string& why) const;

  std::string origin_;
  std::map<std::string, Entry> entries_;
  mutable std::set<std::string> used_;
};

}  // namespace diagcap
