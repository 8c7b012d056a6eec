#pragma once

// Run outputs: CSV tables with a header row and 17 significant digits, JSON
// summaries, and the per-run manifest. Everything except the manifest is a
// pure function of (config bytes, seed), so reruns are byte-identical.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "densctl/error.hpp"
#include "densctl/grid.hpp"

namespace densctl {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot write " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_double(values[i]);
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

inline std::vector<std::string> coordinate_header(const Grid& g) {
  std::vector<std::string> h;
  for (int k = 0; k < g.dim(); ++k) h.push_back("x" + std::to_string(k + 1));
  return h;
}

/// Node coordinates followed by one column per field.
inline void write_fields_csv(const std::filesystem::path& path, const Grid& g, const std::vector<std::string>& names,
                             const std::vector<const Eigen::VectorXd*>& columns) {
  std::vector<std::string> header = coordinate_header(g);
  header.insert(header.end(), names.begin(), names.end());
  CsvWriter csv(path, header);
  std::vector<double> row;
  for (std::size_t i = 0; i < g.size(); ++i) {
    row.clear();
    for (int k = 0; k < g.dim(); ++k) row.push_back(g.coordinate(i, k));
    for (const Eigen::VectorXd* c : columns) row.push_back((*c)[static_cast<Eigen::Index>(i)]);
    csv.row(row);
  }
}

/// JSON with doubles written at full precision; non-finite values become null.
inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunManifest {
  std::string config_hash;
  std::string tool_version;
  std::uint64_t seed = 0;
  std::string command;
  std::string started;
  std::string finished;
  std::vector<std::string> outputs;

  nlohmann::json to_json() const {
    return {{"config_hash", config_hash}, {"tool_version", tool_version}, {"seed", seed},       {"command", command},
            {"started", started},         {"finished", finished},         {"outputs", outputs}};
  }
};

}  // namespace densctl
