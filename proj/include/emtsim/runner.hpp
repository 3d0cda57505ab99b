#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace emtsim {

/// Resolved command-line request. case_selector holds 1-3 entries from
/// {"1","2","3"}; netlist_path is the user-circuit alternative.
struct RunManifest {
  std::vector<std::string> case_selectors;
  std::optional<std::string> netlist_path;
  std::optional<double> dt_override;
  std::optional<double> duration_override;
  std::string out_dir = ".";
  std::optional<std::string> spectrum_probe;
  bool structured = false;  // JSON report instead of text
};

inline constexpr int kExitPass = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitMetricFail = 2;

/// Executes the manifest: simulates, writes per-probe CSVs, the report file
/// and optional spectrum CSV into out_dir, and logs a summary to `log`.
/// Returns kExitPass when every expected metric passes, kExitMetricFail when
/// any fails, kExitError on unusable input or simulation failure.
int run(const RunManifest& manifest, std::ostream& log);

}  // namespace emtsim
