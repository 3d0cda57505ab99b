#include "emtsim/report.hpp"

#include <json.hpp>
#include <sstream>
#include <vector>

#include "emtsim/text.hpp"

namespace emtsim {

namespace {

using ordered_json = nlohmann::ordered_json;

// Left-aligned fixed-width table; column widths fit the widest cell.
struct TextTable {
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }

  void render(std::ostream& os, const char* indent = "  ") const {
    std::vector<std::size_t> width;
    for (const auto& row : rows) {
      if (width.size() < row.size()) width.resize(row.size(), 0);
      for (std::size_t c = 0; c < row.size(); ++c)
        width[c] = std::max(width[c], row[c].size());
    }
    for (const auto& row : rows) {
      os << indent;
      for (std::size_t c = 0; c < row.size(); ++c) {
        os << row[c];
        if (c + 1 < row.size())
          os << std::string(width[c] - row[c].size() + 2, ' ');
      }
      os << "\n";
    }
  }
};

std::string opt_display(const std::optional<double>& v) {
  return v ? format_display(*v) : std::string("-");
}

std::string signed_pct(double v) {
  std::string s = format_display(v);
  if (v >= 0.0) s.insert(s.begin(), '+');
  return s + "%";
}

const char* metric_kind_name(MetricKind k) {
  switch (k) {
    case MetricKind::PeakPu: return "peak_pu";
    case MetricKind::PeakAbs: return "peak_abs";
    case MetricKind::DominantFreq: return "dominant_freq";
    case MetricKind::Magnification: return "magnification";
    case MetricKind::Mean: return "mean";
    case MetricKind::RipplePkPk: return "ripple_pkpk";
    case MetricKind::RippleDominant: return "ripple_dominant";
    case MetricKind::MeanPower: return "mean_power";
  }
  return "?";
}

const char* stress_kind_name(EquipmentRating::StressKind k) {
  switch (k) {
    case EquipmentRating::StressKind::PeakVoltage: return "peak_voltage";
    case EquipmentRating::StressKind::PeakCurrent: return "peak_current";
    case EquipmentRating::StressKind::Energy: return "energy";
    case EquipmentRating::StressKind::DcPeak: return "dc_peak";
  }
  return "?";
}

const char* tolerance_kind_name(Tolerance::Kind k) {
  switch (k) {
    case Tolerance::Kind::Relative: return "relative";
    case Tolerance::Kind::Absolute: return "absolute";
    case Tolerance::Kind::Range: return "range";
    case Tolerance::Kind::AtLeast: return "at_least";
    case Tolerance::Kind::NearAnyOf: return "near_any_of";
  }
  return "?";
}

ordered_json json_or_null(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

std::string render_report_text(const ValidationReport& report) {
  std::ostringstream os;
  os << "validation report: " << report.case_name << "\n";
  os << report.title << "\n\n";

  TextTable metrics;
  metrics.add({"metric", "computed", "analytic", "reference", "unit", "bound",
               "verdict"});
  for (const ValidationRow& r : report.rows)
    metrics.add({r.name, format_display(r.computed), opt_display(r.analytic),
                 format_display(r.reference), r.unit, r.tolerance,
                 r.pass ? "pass" : "FAIL"});
  metrics.render(os);

  if (report.stress) {
    os << "\nequipment stress vs. ratings (negative margin = rating exceeded):\n";
    TextTable stress;
    stress.add({"equipment", "rating", "stress", "sim peak", "margin",
                "dielectric", "unit"});
    for (const StressRow& r : report.stress->rows)
      stress.add({r.label, format_display(r.rating),
                  opt_display(r.given_stress), opt_display(r.sim_stress),
                  signed_pct(r.margin_pct), opt_display(r.dielectric_multiple),
                  r.unit});
    stress.render(os);
  }

  if (!report.notes.empty()) {
    os << "\n";
    for (const std::string& note : report.notes) os << note << "\n";
  }

  std::size_t passed = 0;
  for (const ValidationRow& r : report.rows) passed += r.pass ? 1 : 0;
  os << "\nresult: " << (report.all_pass ? "PASS" : "FAIL") << " (" << passed
     << "/" << report.rows.size() << " metrics in bounds)\n";
  return os.str();
}

std::string render_report_json(const ValidationReport& report) {
  ordered_json doc;
  doc["case"] = report.case_name;
  doc["title"] = report.title;
  doc["all_pass"] = report.all_pass;
  doc["metrics"] = ordered_json::array();
  for (const ValidationRow& r : report.rows) {
    ordered_json row;
    row["name"] = r.name;
    row["computed"] = r.computed;
    row["analytic"] = json_or_null(r.analytic);
    row["reference"] = r.reference;
    row["unit"] = r.unit;
    row["bound"] = r.tolerance;
    row["pass"] = r.pass;
    doc["metrics"].push_back(std::move(row));
  }
  if (report.stress) {
    doc["stress"] = ordered_json::array();
    for (const StressRow& r : report.stress->rows) {
      ordered_json row;
      row["equipment"] = r.label;
      row["rating"] = r.rating;
      row["given_stress"] = json_or_null(r.given_stress);
      row["sim_stress"] = json_or_null(r.sim_stress);
      row["margin_pct"] = r.margin_pct;
      row["dielectric_multiple"] = json_or_null(r.dielectric_multiple);
      row["unit"] = r.unit;
      doc["stress"].push_back(std::move(row));
    }
  }
  doc["notes"] = report.notes;
  return doc.dump(2) + "\n";
}

std::string render_manifest_json(const CaseDefinition& def) {
  ordered_json doc;
  doc["name"] = def.name;
  doc["title"] = def.title;
  doc["netlist"] = def.name + ".ckt";
  doc["sim"] = {{"dt", def.sim.dt},
                {"duration", def.sim.duration},
                {"record_decimation", def.sim.record_decimation}};
  doc["event_time"] = def.event_time;
  doc["pu_bases"] = ordered_json::object();
  for (const auto& [label, base] : def.pu_bases) doc["pu_bases"][label] = base;

  doc["expected"] = ordered_json::array();
  for (const ExpectedMetric& m : def.expected) {
    ordered_json row;
    row["name"] = m.name;
    row["kind"] = metric_kind_name(m.kind);
    row["probe"] = m.probe;
    if (!m.probe2.empty()) row["probe2"] = m.probe2;
    row["reference"] = m.target;
    row["analytic"] = json_or_null(m.analytic);
    ordered_json tol;
    tol["kind"] = tolerance_kind_name(m.tolerance.kind);
    switch (m.tolerance.kind) {
      case Tolerance::Kind::Relative:
      case Tolerance::Kind::Absolute:
        tol["value"] = m.tolerance.value;
        break;
      case Tolerance::Kind::Range:
        tol["lo"] = m.tolerance.lo;
        tol["hi"] = m.tolerance.hi;
        break;
      case Tolerance::Kind::AtLeast:
        tol["lo"] = m.tolerance.lo;
        break;
      case Tolerance::Kind::NearAnyOf:
        tol["anchors"] = m.tolerance.anchors;
        tol["value"] = m.tolerance.value;
        break;
    }
    row["tolerance"] = std::move(tol);
    if (m.window_end > m.window_start)
      row["window"] = {{"start", m.window_start}, {"end", m.window_end}};
    if (m.kind == MetricKind::DominantFreq)
      row["band"] = {{"lo", m.band_lo}, {"hi", m.band_hi}};
    row["unit"] = m.unit;
    doc["expected"].push_back(std::move(row));
  }

  doc["ratings"] = ordered_json::array();
  for (const EquipmentRating& r : def.ratings) {
    ordered_json row;
    row["equipment"] = r.label;
    row["rating"] = r.rating_value;
    row["kind"] = stress_kind_name(r.stress_kind);
    if (!r.stress_probe.empty()) row["probe"] = r.stress_probe;
    row["given_stress"] = json_or_null(r.given_stress);
    if (r.rating_overshoot) row["rating_overshoot"] = *r.rating_overshoot;
    row["unit"] = r.unit;
    doc["ratings"].push_back(std::move(row));
  }

  ordered_json res;
  res["f_n_hz"] = def.resonance.f_n;
  res["zeta"] = def.resonance.zeta;
  res["q_factor"] = def.resonance.q_factor;
  res["i_peak_a"] = def.resonance.i_peak;
  if (def.resonance.tuning_ratio)
    res["tuning_ratio"] = *def.resonance.tuning_ratio;
  doc["resonance"] = std::move(res);
  doc["notes"] = def.notes;
  return doc.dump(2) + "\n";
}

std::string render_waveform_csv(const Waveform& w) {
  std::ostringstream os;
  os << "time_s," << w.label << "\n";
  for (std::size_t k = 0; k < w.samples.size(); ++k)
    os << format_number(w.time_of(k)) << "," << format_number(w.samples[k])
       << "\n";
  return os.str();
}

std::string render_spectrum_csv(const Spectrum& s) {
  std::ostringstream os;
  os << "frequency_hz,magnitude\n";
  for (std::size_t k = 0; k < s.size(); ++k)
    os << format_number(s.frequency_of(k)) << "," << format_number(s.magnitudes[k])
       << "\n";
  return os.str();
}

}  // namespace emtsim
