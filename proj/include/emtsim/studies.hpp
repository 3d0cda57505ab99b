#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emtsim/engine.hpp"
#include "emtsim/netlist.hpp"
#include "emtsim/oracle.hpp"
#include "emtsim/waveform.hpp"

namespace emtsim {

enum class CaseId { Case1, Case2, Case3 };

struct Tolerance {
  enum class Kind {
    Relative,   // |x - target| <= value * |target|
    Absolute,   // |x - target| <= value
    Range,      // lo <= x <= hi
    AtLeast,    // x >= lo
    NearAnyOf,  // min over anchors of |x - anchor| <= value
  };
  Kind kind = Kind::Relative;
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> anchors;

  static Tolerance relative(double v) { return {Kind::Relative, v, 0, 0, {}}; }
  static Tolerance absolute(double v) { return {Kind::Absolute, v, 0, 0, {}}; }
  static Tolerance range(double lo, double hi) { return {Kind::Range, 0, lo, hi, {}}; }
  static Tolerance at_least(double lo) { return {Kind::AtLeast, 0, lo, 0, {}}; }
  static Tolerance near_any_of(std::vector<double> anchors, double v) {
    return {Kind::NearAnyOf, v, 0, 0, std::move(anchors)};
  }

  bool passes(double x, double target) const;
  std::string describe(double target) const;
};

enum class MetricKind {
  PeakPu,          // max |v| / pu_base of probe
  PeakAbs,         // max |v| of probe
  DominantFreq,    // dominant_frequency of probe slice in band
  Magnification,   // peak_pu(probe2) / peak_pu(probe)
  Mean,            // slice mean of probe
  RipplePkPk,      // ripple_metrics(probe, window).pk_pk
  RippleDominant,  // ripple_metrics(probe, window).dominant_hz
  MeanPower,       // mean of probe * probe2 over window
};

/// One validation row: how to compute a quantity from the probe waveforms
/// and what to compare it against. target is the reference value the study
/// is validated against; analytic carries the closed-form prediction when
/// one exists.
struct ExpectedMetric {
  std::string name;
  MetricKind kind = MetricKind::PeakPu;
  std::string probe;
  std::string probe2;  // second operand for Magnification / MeanPower
  double target = 0.0;
  std::optional<double> analytic;
  Tolerance tolerance;
  double window_start = 0.0;  // for windowed kinds
  double window_end = 0.0;
  double band_lo = 100.0;  // for frequency kinds
  double band_hi = 2000.0;
  std::string unit;
};

struct EquipmentRating {
  enum class StressKind { PeakVoltage, PeakCurrent, Energy, DcPeak };
  std::string label;
  double rating_value = 0.0;
  StressKind stress_kind = StressKind::PeakVoltage;
  std::string stress_probe;  // empty when the study has no probe for it
  /// Reference stress level the margin arithmetic is validated against.
  /// When absent, the probe-derived value is the stress.
  std::optional<double> given_stress;
  /// Continuous rating as a multiple of rating_value, e.g. a rating that is
  /// itself 110% of rated peak carries 1.10; enables the dielectric-stress
  /// multiple (stress / rated_peak)^2.
  std::optional<double> rating_overshoot;
  std::string unit;
};

struct CaseDefinition {
  CaseId id = CaseId::Case1;
  std::string name;   // "case1" — file stems, report headers
  std::string title;  // one-line description
  Netlist netlist;
  SimConfig sim;
  std::map<std::string, double> pu_bases;  // probe label -> peak L-N base
  std::vector<ExpectedMetric> expected;
  std::vector<EquipmentRating> ratings;
  double event_time = 0.0;  // switching instant driving the study
  oracle::ResonanceSummary resonance;
  std::vector<std::string> notes;  // analytic context lines for the report
};

/// Utility capacitor bank energization: three-phase source behind its
/// short-circuit equivalent, per-phase switch closing at the first phase-a
/// voltage peak, grounded-wye bank.
CaseDefinition build_case1();

/// Voltage magnification: the bank-energization network of case 1 coupled
/// through a delta/grounded-wye transformer to a low-voltage bus with a
/// power-factor-correction bank and resistive load. The utility bank switch
/// fires at a later phase-a peak so the network is settled first.
CaseDefinition build_case2();

enum class Case3Order {
  VfdEnergization,   // bank in service from t=0, rectifier closes at 50 ms
  BankEnergization,  // rectifier in service from t=0, bank closes at 50 ms
};

/// Rectifier interaction: the case 2 network plus a six-pulse diode bridge
/// behind per-phase filter inductors, DC-link capacitor and resistive DC
/// load. Default order is VFD energization with the bank already in
/// service; the alternative order carries no validation targets.
CaseDefinition build_case3(Case3Order order = Case3Order::VfdEnergization);

struct ValidationRow {
  std::string name;
  double computed = 0.0;
  std::optional<double> analytic;
  double reference = 0.0;
  std::string tolerance;
  std::string unit;
  bool pass = false;
};

struct StressRow {
  std::string label;
  double rating = 0.0;
  std::optional<double> given_stress;
  std::optional<double> sim_stress;
  double margin_pct = 0.0;  // signed, (rating - stress)/rating * 100
  std::optional<double> dielectric_multiple;
  std::string unit;
};

struct StressReport {
  std::vector<StressRow> rows;
};

struct ValidationReport {
  std::string case_name;
  std::string title;
  std::vector<ValidationRow> rows;
  std::optional<StressReport> stress;
  std::vector<std::string> notes;
  bool all_pass = true;
};

/// Computes every expected metric from already-simulated waveforms
/// (pu bases are attached to the waveforms by label first).
ValidationReport evaluate(const CaseDefinition& def,
                          std::vector<Waveform>& waveforms);

/// simulate + evaluate + stress.
ValidationReport run_validation(const CaseDefinition& def);

/// Margin and dielectric arithmetic per rating row. Rows whose rating has a
/// given_stress use it for the margin; the probe-derived stress (when a
/// probe is named) is reported alongside.
StressReport stress_analysis(const std::vector<EquipmentRating>& ratings,
                             const std::vector<Waveform>& waveforms);

/// Copy of the netlist without the labelled element (for ablation and
/// robustness tests).
Netlist without_element(const Netlist& netlist, std::string_view label);

}  // namespace emtsim
