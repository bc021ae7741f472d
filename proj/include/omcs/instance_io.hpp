#pragma once

// JSON-lines instance files.
//
//   {"B": 5, "K": 3, "theta": [2, 4, 8], "quotas": [1, 0, 0]}   <- header, quotas optional
//   {"v": 2.0, "labels": [1, 3]}                                   <- one line per arrival
//
// Arrival order is line order. Class indices are 1-based. Blank lines are
// ignored.

#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>

#include <json.hpp>

#include "omcs/error.hpp"
#include "omcs/model.hpp"

namespace omcs {

struct InstanceFile {
  Instance instance;
  std::optional<GfqSpec> quotas;
};

namespace detail {

inline nlohmann::json parse_line(const std::string& line, std::size_t line_no) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
  }
}

inline ProblemParams parse_header(const nlohmann::json& h, std::optional<GfqSpec>& quotas) {
  if (!h.is_object() || !h.contains("B") || !h.contains("K") || !h.contains("theta"))
    throw ParseError("line 1: header must be an object with B, K and theta");
  ProblemParams p;
  try {
    p.budget = h.at("B").get<int>();
    p.num_classes = h.at("K").get<int>();
    p.theta = h.at("theta").get<std::vector<double>>();
    if (h.contains("quotas")) quotas = GfqSpec{h.at("quotas").get<std::vector<int>>()};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("line 1: bad header field: ") + e.what());
  }
  p.validate();
  if (quotas) quotas->validate(p);
  return p;
}

}  // namespace detail

inline InstanceFile read_instance(std::istream& in) {
  InstanceFile out;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = detail::parse_line(line, line_no);
    if (!have_header) {
      out.instance.params = detail::parse_header(j, out.quotas);
      have_header = true;
      continue;
    }
    const std::size_t index = out.instance.agents.size();
    const auto where = "line " + std::to_string(line_no) + " (agent " + std::to_string(index) + ")";
    Agent a;
    try {
      a.value = j.at("v").get<double>();
      a.labels = j.at("labels").get<std::vector<ClassId>>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
    const auto sorted = normalize_labels(a.labels);
    if (sorted.size() != a.labels.size()) throw InvariantError(where + ": duplicate labels");
    a.labels = sorted;
    try {
      validate_agent(a, out.instance.params, index);
    } catch (const InvariantError& e) {
      throw InvariantError(where + ": " + e.what());
    }
    out.instance.agents.push_back(std::move(a));
  }
  if (!have_header) throw ParseError("missing header line");
  return out;
}

inline InstanceFile read_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return read_instance(in);
}

inline void write_instance(std::ostream& out, const Instance& instance,
                           const std::optional<GfqSpec>& quotas = std::nullopt) {
  nlohmann::json h;
  h["B"] = instance.params.budget;
  h["K"] = instance.params.num_classes;
  h["theta"] = instance.params.theta;
  if (quotas) h["quotas"] = quotas->quotas;
  out << h.dump() << '\n';
  for (const Agent& a : instance.agents) {
    nlohmann::json r;
    r["v"] = a.value;
    r["labels"] = a.labels;
    out << r.dump() << '\n';
  }
}

inline void write_instance_file(const std::string& path, const Instance& instance,
                                const std::optional<GfqSpec>& quotas = std::nullopt) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  write_instance(out, instance, quotas);
}

}  // namespace omcs
