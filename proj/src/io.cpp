#include "dra/io.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "dra/errors.hpp"

namespace dra {

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string fnv1a64_hex(const std::string& data) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(data)));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << data;
  if (!out) throw ConfigError("short write: " + path);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    double back;
    std::sscanf(buf, "%lf", &back);
    if (back == v) break;
  }
  return buf;
}

std::string chi_curve_csv(const ChiCurve& curve) {
  std::ostringstream os;
  os << "# chi.csv v1\n";
  os << "# source=" << curve.source
     << " convexity_certified=" << (curve.convexity_certified ? "true" : "false")
     << "\n";
  os << "gamma,chi,chi_prime,source\n";
  for (size_t i = 0; i < curve.gammas.size(); ++i) {
    const std::string& src = i < curve.chi_prime_source.size()
                                 ? curve.chi_prime_source[i]
                                 : curve.source;
    os << format_double(curve.gammas[i]) << ',' << format_double(curve.chi[i])
       << ',' << format_double(curve.chi_prime[i]) << ',' << src << '\n';
  }
  return os.str();
}

ChiCurve chi_curve_from_csv(const std::string& text) {
  ChiCurve curve;
  curve.source = "external-csv";
  std::istringstream in(text);
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.find("convexity_certified=true") != std::string::npos)
        curve.convexity_certified = true;
      continue;
    }
    if (!saw_header) {
      if (line != "gamma,chi,chi_prime,source")
        throw ConfigError("chi.csv: unexpected header '" + line + "'");
      saw_header = true;
      continue;
    }
    std::istringstream row(line);
    std::string cell;
    double vals[3];
    for (int k = 0; k < 3; ++k) {
      if (!std::getline(row, cell, ','))
        throw ConfigError("chi.csv: short row '" + line + "'");
      vals[k] = std::stod(cell);
    }
    std::getline(row, cell, ',');
    curve.gammas.push_back(vals[0]);
    curve.chi.push_back(vals[1]);
    curve.chi_prime.push_back(vals[2]);
    curve.chi_prime_source.push_back(cell);
  }
  if (!saw_header) throw ConfigError("chi.csv: missing header row");
  // The certified flag must survive a round trip only if it still holds.
  if (curve.convexity_certified) {
    ChiCurve check = curve;
    certify_convexity(&check);
    curve.convexity_certified = check.convexity_certified;
    curve.certification_note = check.certification_note;
  }
  return curve;
}

std::string rate_table_csv(const std::vector<RateResult>& rows) {
  std::ostringstream os;
  os << "# rate.csv v1\n";
  os << "kappa,I,J,gamma_star,branch\n";
  for (const RateResult& r : rows) {
    os << format_double(r.kappa) << ',' << format_double(r.I) << ','
       << format_double(r.J) << ',' << format_double(r.gamma_star) << ','
       << branch_name(r.branch) << '\n';
  }
  return os.str();
}

std::string sim_csv(const std::vector<DownsideEstimate>& rows) {
  std::ostringstream os;
  os << "# sim.csv v1\n";
  os << "T,kappa,p_hat,ci_low,ci_high,n_paths,measure,clamp_count\n";
  for (const DownsideEstimate& e : rows) {
    os << format_double(e.T) << ',' << format_double(e.kappa) << ','
       << format_double(e.p_hat) << ',' << format_double(e.ci_low) << ','
       << format_double(e.ci_high) << ',' << e.n_paths << ',' << e.measure
       << ',' << e.boundary_clamp_count << '\n';
  }
  return os.str();
}

std::string slope_csv(const std::vector<SlopeReport>& rows) {
  std::ostringstream os;
  os << "# slope.csv v1\n";
  os << "kappa,slope,stderr,J_ref,rel_gap\n";
  for (const SlopeReport& r : rows) {
    os << format_double(r.kappa) << ',' << format_double(r.slope) << ','
       << format_double(r.stderr_) << ',' << format_double(r.j_ref) << ','
       << format_double(r.rel_gap) << '\n';
  }
  return os.str();
}

void RunManifest::add_output(const std::string& path,
                             const std::string& content) {
  outputs.emplace_back(path, fnv1a64_hex(content));
}

std::string RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config_path;
  j["parameters"] = nlohmann::json::parse(parameters_json);
  j["seed"] = seed;
  j["version"] = version;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  j["outputs"] = nlohmann::json::array();
  for (const auto& [path, hash] : outputs)
    j["outputs"].push_back({{"path", path}, {"fnv1a64", hash}});
  return j.dump(2) + "\n";
}

std::string iso8601_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace dra
