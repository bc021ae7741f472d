#pragma once

// Flat key-value configuration.
//
//   # comment
//   key = value
//   policies = [d-gfq, r-gfq]
//
// Values are strings, numbers, booleans (true/false) or bracketed,
// comma-separated lists. Keys are unique; a repeated key is an error.

#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "omcs/error.hpp"

namespace omcs {

class Config {
 public:
  static Config parse(std::istream& in) {
    Config c;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
      ++no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError("config line " + std::to_string(no) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ParseError("config line " + std::to_string(no) + ": empty key");
      if (!c.values_.emplace(key, value).second)
        throw ParseError("config line " + std::to_string(no) + ": duplicate key '" + key + "'");
      c.order_.push_back(key);
    }
    return c;
  }

  static Config parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config " + path);
    return parse(in);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  void set(const std::string& key, const std::string& value) {
    if (!has(key)) order_.push_back(key);
    values_[key] = value;
  }

  std::string str(const std::string& key, const std::string& fallback) const {
    return has(key) ? unquote(values_.at(key)) : fallback;
  }
  std::string str(const std::string& key) const { return unquote(require(key)); }

  double num(const std::string& key, double fallback) const { return has(key) ? to_double(key, values_.at(key)) : fallback; }
  double num(const std::string& key) const { return to_double(key, require(key)); }

  long integer(const std::string& key, long fallback) const { return has(key) ? to_long(key, values_.at(key)) : fallback; }
  long integer(const std::string& key) const { return to_long(key, require(key)); }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = values_.at(key);
    if (v == "true") return true;
    if (v == "false") return false;
    throw ParseError("config key '" + key + "': expected true or false, got '" + v + "'");
  }

  std::vector<std::string> list(const std::string& key, const std::vector<std::string>& fallback = {}) const {
    if (!has(key)) return fallback;
    std::string v = values_.at(key);
    if (v.size() >= 2 && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
    std::vector<std::string> out;
    std::istringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(unquote(item));
    }
    return out;
  }

  std::vector<double> num_list(const std::string& key, const std::vector<double>& fallback = {}) const {
    if (!has(key)) return fallback;
    std::vector<double> out;
    for (const auto& s : list(key)) out.push_back(to_double(key, s));
    return out;
  }

  // Canonical text form, in first-seen key order.
  std::string dump() const {
    std::ostringstream os;
    for (const auto& k : order_) os << k << " = " << values_.at(k) << '\n';
    return os.str();
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }
  static std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
  }
  const std::string& require(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ParseError("config is missing required key '" + key + "'");
    return it->second;
  }
  static double to_double(const std::string& key, const std::string& v) {
    std::istringstream in(v);
    double d;
    in >> d;
    if (in.fail() || !in.eof()) throw ParseError("config key '" + key + "': expected a number, got '" + v + "'");
    return d;
  }
  static long to_long(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d != static_cast<double>(static_cast<long>(d)))
      throw ParseError("config key '" + key + "': expected an integer, got '" + v + "'");
    return static_cast<long>(d);
  }

  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

}  // namespace omcs
