#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "polsar/core/error.hpp"

namespace polsar {

/// Flat `key = value` text with `#` comments. Keys keep file order when
/// written back.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text, const std::string& context = "config") {
    KeyValueConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw DataError(context + ":" + std::to_string(lineno) + ": expected key = value");
      auto key = trim(line.substr(0, eq));
      if (key.empty()) throw DataError(context + ":" + std::to_string(lineno) + ": empty key");
      cfg.set(key, trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  static KeyValueConfig load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse(ss.str(), path.string());
  }

  void set(const std::string& key, std::string value) {
    if (!values_.count(key)) order_.push_back(key);
    values_[key] = std::move(value);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw DataError("config is missing required key '" + key + "'");
    return it->second;
  }
  std::string str(const std::string& key, const std::string& fallback) const {
    return has(key) ? str(key) : fallback;
  }

  template <class N>
  N number(const std::string& key) const {
    const auto s = str(key);
    N v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
      throw DataError("config key '" + key + "': cannot parse number '" + s + "'");
    return v;
  }
  template <class N>
  N number(const std::string& key, N fallback) const {
    return has(key) ? number<N>(key) : fallback;
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto s = str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw DataError("config key '" + key + "': expected a boolean, got '" + s + "'");
  }

  template <class N>
  std::vector<N> list(const std::string& key) const {
    std::vector<N> out;
    std::string s = str(key);
    for (auto& ch : s)
      if (ch == ',') ch = ' ';
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) {
      N v{};
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc{} || p != tok.data() + tok.size())
        throw DataError("config key '" + key + "': cannot parse list element '" + tok + "'");
      out.push_back(v);
    }
    return out;
  }

  std::string to_text() const {
    std::ostringstream os;
    for (const auto& k : order_) os << k << " = " << values_.at(k) << '\n';
    return os.str();
  }

  const std::vector<std::string>& keys() const { return order_; }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

}  // namespace polsar
