#pragma once

// Cluster-style CSV traces to instances.
//
// Expected layout: a header row naming the columns, one request per row.
// The label column holds one or more 1-based class ids separated by ';' or
// '|'. An optional value column is mapped through v' = scale * v + offset
// and clamped into [1, min theta over the labels]; without a value column,
// values are drawn uniformly from that range. An optional units column
// splits a request for n units into n unit requests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "omcs/error.hpp"
#include "omcs/model.hpp"
#include "omcs/rng.hpp"

namespace omcs {

struct ColumnMap {
  std::string label = "class";
  std::optional<std::string> value;
  std::optional<std::string> units;
  double scale = 1.0;
  double offset = 0.0;
  bool skip_bad = false;
  std::uint64_t seed = 0;  // for drawn values
};

struct TraceReport {
  std::size_t rows = 0;
  std::size_t agents = 0;
  std::size_t clamped = 0;
  std::size_t split_rows = 0;
  std::vector<std::size_t> bad_rows;  // 1-based data row numbers
};

struct TraceResult {
  Instance instance;
  TraceReport report;
};

namespace detail {

// Splits one CSV record; double quotes may wrap fields and "" escapes a quote.
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> to_number(const std::string& s) {
  const std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  std::istringstream in(t);
  double v;
  in >> v;
  if (in.fail() || !in.eof() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

inline TraceResult ingest_trace(std::istream& in, const ColumnMap& cols, const ProblemParams& params) {
  params.validate();
  TraceResult res;
  res.instance.params = params;
  std::string line;
  if (!std::getline(in, line)) return res;  // empty file: empty instance

  const auto header = detail::split_csv(line);
  auto find = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (detail::trim(header[i]) == name) return i;
    throw ParseError("trace has no column named '" + name + "'");
  };
  const std::size_t label_col = find(cols.label);
  const std::optional<std::size_t> value_col = cols.value ? std::optional(find(*cols.value)) : std::nullopt;
  const std::optional<std::size_t> units_col = cols.units ? std::optional(find(*cols.units)) : std::nullopt;

  Rng rng(derive_seed(cols.seed, 0x74726163ULL));
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty() || detail::trim(line) == "\r") continue;
    ++row;
    const auto f = detail::split_csv(line);
    auto field = [&](std::size_t i) -> std::string { return i < f.size() ? f[i] : std::string(); };

    std::vector<ClassId> labels;
    bool ok = true;
    {
      std::string tok;
      std::string raw = field(label_col);
      std::replace(raw.begin(), raw.end(), '|', ';');
      std::istringstream ls(raw);
      while (std::getline(ls, tok, ';')) {
        const auto n = detail::to_number(tok);
        if (!n || *n != std::floor(*n) || *n < 1 || *n > params.num_classes) {
          ok = false;
          break;
        }
        labels.push_back(static_cast<ClassId>(*n));
      }
      labels = normalize_labels(labels);
      if (labels.empty()) ok = false;
    }
    long units = 1;
    if (ok && units_col) {
      const auto n = detail::to_number(field(*units_col));
      if (!n || *n < 1 || *n != std::floor(*n)) ok = false;
      else units = static_cast<long>(*n);
    }
    std::optional<double> raw_value;
    if (ok && value_col) {
      raw_value = detail::to_number(field(*value_col));
      if (!raw_value) ok = false;
    }
    if (!ok) {
      res.report.bad_rows.push_back(row);
      continue;
    }
    double cap = kInf;
    for (ClassId j : labels) cap = std::min(cap, params.theta_of(j));
    double v;
    if (raw_value) {
      v = cols.scale * *raw_value + cols.offset;
      if (v < 1.0 || v > cap) {
        v = std::clamp(v, 1.0, cap);
        ++res.report.clamped;
      }
    } else {
      v = 1.0 + uniform01(rng) * (cap - 1.0);
    }
    if (units > 1) ++res.report.split_rows;
    for (long u = 0; u < units; ++u) res.instance.agents.push_back(Agent{v, labels});
  }
  res.report.rows = row;
  res.report.agents = res.instance.size();
  if (!res.report.bad_rows.empty() && !cols.skip_bad) {
    std::ostringstream os;
    os << res.report.bad_rows.size() << " unmappable trace rows:";
    for (std::size_t i = 0; i < std::min<std::size_t>(res.report.bad_rows.size(), 20); ++i)
      os << ' ' << res.report.bad_rows[i];
    if (res.report.bad_rows.size() > 20) os << " ...";
    throw ParseError(os.str());
  }
  return res;
}

inline TraceResult ingest_trace_file(const std::string& path, const ColumnMap& cols, const ProblemParams& params) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return ingest_trace(in, cols, params);
}

}  // namespace omcs
