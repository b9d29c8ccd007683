#include "diagcap/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "diagcap/diagram.hpp"

namespace diagcap {

namespace {

std::string_view trim(std::string_view s) {
  auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

}  // namespace

KeyValues KeyValues::parse(std::string_view text, std::string origin) {
  KeyValues kv;
  kv.origin_ = std::move(origin);
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    auto raw = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    ++line_no;
    auto line = trim(raw);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));
    if (!line.empty()) {
      auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw Error(kv.origin_ + ":" + std::to_string(line_no) + ": expected 'key = value', got '" +
                    std::string(line) + "'");
      std::string key(trim(line.substr(0, eq)));
      std::string value(trim(line.substr(eq + 1)));
      if (key.empty()) throw Error(kv.origin_ + ":" + std::to_string(line_no) + ": empty key");
      if (kv.entries_.count(key))
        throw Error(kv.origin_ + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
      kv.entries_[key] = {std::move(value), line_no};
    }
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

void KeyValues::bad(const std::string& key, const std::string& why) const {
  auto it = entries_.find(key);
  std::string where = origin_;
  if (it != entries_.end()) where += ":" + std::to_string(it->second.line);
  throw Error(where + ": bad value for key '" + key + "': " + why);
}

std::optional<std::string> KeyValues::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  used_.insert(key);
  return it->second.value;
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

std::int64_t KeyValues::get_int(const std::string& key, std::int64_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  auto n = parse_number<std::int64_t>(*v);
  if (!n) bad(key, "expected an integer, got '" + *v + "'");
  return *n;
}

std::uint64_t KeyValues::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  auto n = parse_number<std::uint64_t>(*v);
  if (!n) bad(key, "expected an unsigned 64-bit integer, got '" + *v + "'");
  return *n;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  auto n = parse_number<double>(*v);
  if (!n) bad(key, "expected a number, got '" + *v + "'");
  return *n;
}

double KeyValues::get_fraction(const std::string& key, double fallback) const {
  double x = get_double(key, fallback);
  if (!(x >= 0.0 && x <= 1.0)) bad(key, "expected a fraction in [0, 1]");
  return x;
}

IntRange KeyValues::get_range(const std::string& key, IntRange fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::string_view s = *v;
  auto dots = s.find("..");
  IntRange r;
  if (dots == std::string_view::npos) {
    auto n = parse_number<std::int64_t>(trim(s));
    if (!n) bad(key, "expected 'lo..hi' or an integer, got '" + *v + "'");
    r = {*n, *n};
  } else {
    auto lo = parse_number<std::int64_t>(trim(s.substr(0, dots)));
    auto hi = parse_number<std::int64_t>(trim(s.substr(dots + 2)));
    if (!lo || !hi) bad(key, "expected 'lo..hi', got '" + *v + "'");
    r = {*lo, *hi};
  }
  if (r.empty()) bad(key, "empty range '" + *v + "'");
  return r;
}

void KeyValues::reject_unused() const {
  for (const auto& [key, entry] : entries_)
    if (!used_.count(key))
      throw Error(origin_ + ":" + std::to_string(entry.line) + ": unknown key '" + key + "'");
}

}  // namespace diagcap
