#include "emtsim/runner.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "emtsim/analysis.hpp"
#include "emtsim/engine.hpp"
#include "emtsim/netlist.hpp"
#include "emtsim/report.hpp"
#include "emtsim/studies.hpp"
#include "emtsim/text.hpp"

namespace emtsim {

namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

CaseDefinition load_user_circuit(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read netlist '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();

  CaseDefinition def;
  def.netlist = parse_netlist(buffer.str());
  const auto diagnostics = validate(def.netlist);
  if (!diagnostics.empty()) {
    std::string msg = "netlist '" + path + "' is invalid:";
    for (const Diagnostic& d : diagnostics) msg += "\n  " + d.message;
    throw std::runtime_error(msg);
  }
  def.name = fs::path(path).stem().string();
  def.title = "user circuit from " + path;
  return def;
}

std::vector<CaseDefinition> resolve_jobs(const RunManifest& manifest) {
  if (manifest.netlist_path)
    return {load_user_circuit(*manifest.netlist_path)};

  std::vector<std::string> selectors = manifest.case_selectors;
  if (selectors.empty()) selectors = {"all"};
  std::vector<CaseDefinition> jobs;
  auto want = [&](const std::string& id) {
    for (const std::string& s : selectors)
      if (s == id || s == "all") return true;
    return false;
  };
  if (want("1")) jobs.push_back(build_case1());
  if (want("2")) jobs.push_back(build_case2());
  if (want("3")) jobs.push_back(build_case3());
  for (const std::string& s : selectors)
    if (s != "1" && s != "2" && s != "3" && s != "all")
      throw std::invalid_argument("unknown case selector '" + s +
                                  "' (expected 1, 2, 3 or all)");
  return jobs;
}

}  // namespace

int run(const RunManifest& manifest, std::ostream& log) {
  try {
    if (manifest.dt_override && *manifest.dt_override <= 0.0)
      throw std::invalid_argument("dt override must be positive");
    if (manifest.duration_override && *manifest.duration_override <= 0.0)
      throw std::invalid_argument("duration override must be positive");

    std::vector<CaseDefinition> jobs = resolve_jobs(manifest);
    const fs::path out_dir = manifest.out_dir.empty() ? "." : manifest.out_dir;
    fs::create_directories(out_dir);

    bool any_metric_fail = false;
    for (CaseDefinition& def : jobs) {
      if (manifest.dt_override) {
        def.sim.dt = *manifest.dt_override;
        def.notes.push_back("override: dt = " + format_number(def.sim.dt) + " s");
      }
      if (manifest.duration_override) {
        def.sim.duration = *manifest.duration_override;
        def.notes.push_back("override: duration = " +
                            format_number(def.sim.duration) + " s");
      }

      std::vector<Waveform> waveforms = simulate(def.netlist, def.sim);
      const ValidationReport report = evaluate(def, waveforms);

      for (const Waveform& w : waveforms)
        write_file(out_dir / (def.name + "_" + w.label + ".csv"),
                   render_waveform_csv(w));

      if (manifest.spectrum_probe) {
        const Waveform* probed = nullptr;
        for (const Waveform& w : waveforms)
          if (w.label == *manifest.spectrum_probe) probed = &w;
        if (!probed)
          throw std::invalid_argument("no probe labelled '" +
                                      *manifest.spectrum_probe + "'");
        const double extent = double(probed->samples.size() - 1) * probed->dt;
        const Spectrum s = spectrum(*probed, {0.0, extent}, false);
        write_file(out_dir / (def.name + "_" + probed->label + "_spectrum.csv"),
                   render_spectrum_csv(s));
      }

      const std::string rendered = manifest.structured
                                       ? render_report_json(report)
                                       : render_report_text(report);
      write_file(out_dir / (def.name + (manifest.structured ? "_report.json"
                                                            : "_report.txt")),
                 rendered);
      log << rendered;
      if (!report.all_pass) any_metric_fail = true;
    }
    return any_metric_fail ? kExitMetricFail : kExitPass;
  } catch (const std::exception& err) {
    log << "error: " << err.what() << "\n";
    return kExitError;
  }
}

}  // namespace emtsim
