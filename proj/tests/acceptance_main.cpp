// Acceptance suite runner: one pass/fail line per criterion, exit 0 only
// when every criterion passes. argv[1] = config directory.

#include <iostream>
#include <string>

#include "dra/acceptance.hpp"

int main(int argc, char** argv) {
  dra::AcceptanceOptions opts;
  if (argc > 1) opts.config_dir = argv[1];
  opts.fast = false;
  for (int i = 2; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--fast") opts.fast = true;
    if (arg == "--verbose") opts.verbose = true;
  }

  const auto results = dra::run_acceptance(opts);
  for (const auto& r : results)
    std::cout << dra::format_result_line(r) << "\n";
  const bool ok = dra::all_passed(results);
  std::cout << (ok ? "ALL CRITERIA PASSED" : "CRITERIA FAILED") << "\n";
  return ok ? 0 : 1;
}
