#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "emtsim/netlist.hpp"
#include "emtsim/runner.hpp"

namespace {

// Numeric flag with SI suffixes, e.g. --dt 4u.
std::optional<double> si_flag(const std::string& text, const char* flag) {
  if (text.empty()) return std::nullopt;
  const auto value = emtsim::parse_si_number(text);
  if (!value || *value <= 0.0)
    throw std::invalid_argument(std::string(flag) + " must be a positive " +
                                "number, got '" + text + "'");
  return value;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "emtsim: fixed-timestep electromagnetic transient solver with "
      "built-in capacitor-switching studies"};

  std::vector<std::string> cases;
  std::string netlist, dt_text, duration_text, spectrum, format = "text";
  const char* env_out = std::getenv("EMTSIM_OUT");
  std::string out_dir = env_out ? env_out : ".";

  app.add_option("--case", cases, "study to run: 1, 2, 3 or all (repeatable)")
      ->check(CLI::IsMember({"1", "2", "3", "all"}));
  app.add_option("--netlist", netlist,
                 "simulate a netlist file instead of a built-in study");
  app.add_option("--dt", dt_text,
                 "timestep override in seconds, SI suffixes accepted (4u)");
  app.add_option("--duration", duration_text,
                 "simulated span override in seconds, SI suffixes accepted");
  app.add_option("--out", out_dir,
                 "output directory (default: $EMTSIM_OUT, else .)");
  app.add_option("--spectrum", spectrum,
                 "also emit a full-record spectrum CSV for this probe");
  app.add_option("--format", format, "report format: text or structured")
      ->check(CLI::IsMember({"text", "structured"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? emtsim::kExitPass : emtsim::kExitError;
  }

  emtsim::RunManifest manifest;
  manifest.case_selectors = cases;
  if (!netlist.empty()) manifest.netlist_path = netlist;
  manifest.out_dir = out_dir;
  if (!spectrum.empty()) manifest.spectrum_probe = spectrum;
  manifest.structured = format == "structured";
  try {
    manifest.dt_override = si_flag(dt_text, "--dt");
    manifest.duration_override = si_flag(duration_text, "--duration");
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return emtsim::kExitError;
  }

  return emtsim::run(manifest, std::cout);
}
