#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dra/duality.hpp"
#include "dra/montecarlo.hpp"

namespace dra {

/// FNV-1a 64-bit content hash, hex-encoded; recorded in run manifests.
std::uint64_t fnv1a64(const std::string& data);
std::string fnv1a64_hex(const std::string& data);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& data);

/// Shortest round-trip decimal formatting (deterministic across runs).
std::string format_double(double v);

// CSV serialization; every schema starts with a '# <name>.csv v1' comment.
std::string chi_curve_csv(const ChiCurve& curve);
ChiCurve chi_curve_from_csv(const std::string& text);
std::string rate_table_csv(const std::vector<RateResult>& rows);
std::string sim_csv(const std::vector<DownsideEstimate>& rows);
std::string slope_csv(const std::vector<SlopeReport>& rows);

/// One manifest per CLI run: command, inputs, parameters, and the hash of
/// every written output.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::string parameters_json = "{}";
  std::uint64_t seed = 0;
  std::string version;
  std::string started_at, finished_at;  // ISO-8601 UTC
  std::vector<std::pair<std::string, std::string>> outputs;  // path, hash

  void add_output(const std::string& path, const std::string& content);
  std::string to_json() const;
};

std::string iso8601_now();

}  // namespace dra
