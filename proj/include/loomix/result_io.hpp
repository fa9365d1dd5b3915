#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "loomix/errors.hpp"

namespace loomix {

/// One result row: a design-point key (strings) plus named statistics.
struct ResultRow {
  std::map<std::string, std::string> key;
  std::map<std::string, double> stats;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::vector<std::string> failures;
  std::map<std::string, std::string> config_echo;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline bool is_timing_key(const std::string& k) {
  return k.find("runtime") != std::string::npos ||
         k.find("seconds") != std::string::npos;
}

}  // namespace detail

/// JSON schema: {config_echo, results: [row...], failures: [...], versions,
/// seed}. Timing statistics are the only non-reproducible fields; strip them
/// with include_timing = false to get byte-identical output for a given seed.
inline std::string to_json(const ResultTable& table, bool include_timing = true) {
  nlohmann::ordered_json doc;
  doc["config_echo"] = table.config_echo;
  doc["results"] = nlohmann::ordered_json::array();
  for (const auto& row : table.rows) {
    nlohmann::ordered_json r;
    for (const auto& [k, v] : row.key) r[k] = v;
    for (const auto& [k, v] : row.stats) {
      if (!include_timing && detail::is_timing_key(k)) continue;
      r[k] = v;
    }
    doc["results"].push_back(std::move(r));
  }
  doc["failures"] = table.failures;
  doc["versions"] = {{"loomix", "0.1.0"},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                   std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)}};
  doc["seed"] = table.seed;
  return doc.dump(2) + "\n";
}

/// CSV: key columns first (union, sorted), then stat columns (union, sorted).
inline std::string to_csv(const ResultTable& table, bool include_timing = true) {
  std::set<std::string> key_cols, stat_cols;
  for (const auto& row : table.rows) {
    for (const auto& [k, v] : row.key) key_cols.insert(k);
    for (const auto& [k, v] : row.stats) {
      if (!include_timing && detail::is_timing_key(k)) continue;
      stat_cols.insert(k);
    }
  }
  std::string out;
  bool first = true;
  for (const auto& k : key_cols) {
    out += (first ? "" : ",") + k;
    first = false;
  }
  for (const auto& k : stat_cols) {
    out += (first ? "" : ",") + k;
    first = false;
  }
  out += "\n";
  for (const auto& row : table.rows) {
    first = true;
    for (const auto& k : key_cols) {
      const auto it = row.key.find(k);
      out += (first ? "" : ",") + (it == row.key.end() ? "" : it->second);
      first = false;
    }
    for (const auto& k : stat_cols) {
      const auto it = row.stats.find(k);
      out += first ? "" : ",";
      if (it != row.stats.end()) out += detail::format_double(it->second);
      first = false;
    }
    out += "\n";
  }
  return out;
}

inline void write_result(const ResultTable& table, const std::string& path,
                         const std::string& format,
                         bool include_timing = true) {
  std::string body;
  if (format == "json") {
    body = to_json(table, include_timing);
  } else if (format == "csv") {
    body = to_csv(table, include_timing);
  } else {
    throw ConfigError("unknown output format '" + format + "'");
  }
  if (path.empty() || path == "-") {
    std::cout << body;
    return;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << body;
}

}  // namespace loomix
