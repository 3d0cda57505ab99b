#pragma once

#include <optional>

#include "emtsim/waveform.hpp"

namespace emtsim::oracle {

/// Thevenin equivalent of a utility source specified by fault level.
struct SourceEquivalent {
  double z_s = 0.0;  // ohms
  double l_s = 0.0;  // henries
  double r_s = 0.0;  // ohms
};

struct DampingQ {
  double zeta = 0.0;
  double q_factor = 0.0;
};

/// Scalar summary of a series-RLC energization study.
struct ResonanceSummary {
  double f_n = 0.0;      // hertz
  double zeta = 0.0;
  double q_factor = 0.0;
  double i_peak = 0.0;   // amperes
  std::optional<double> tuning_ratio;
};

/// z = v_ll^2 / s_sc, split into R and L by the X/R ratio at f_sys.
/// v_ll is RMS line-to-line volts, s_sc the three-phase short-circuit VA.
SourceEquivalent source_equivalent(double v_ll, double s_sc, double x_over_r,
                                   double f_sys);

/// Per-phase wye capacitance of a three-phase bank rated q vars at v_ll:
/// c = q / (v_ll^2 * omega).
double bank_capacitance(double q, double v_ll, double f_sys);

/// f = 1 / (2*pi*sqrt(l*c)).
double natural_frequency(double l, double c);

/// Equivalent fault-level form f = f_sys * sqrt(s_sc / q_c); agrees with
/// natural_frequency within 0.5% for consistent inputs.
double alt_natural_frequency(double f_sys, double s_sc, double q_c);

/// Worst-case energization inrush peak i = v_m * sqrt(c/l), v_m peak
/// line-to-neutral volts.
double peak_inrush(double v_m, double l, double c);

/// Series-RLC damping ratio zeta = (r/2)*sqrt(c/l) and quality factor
/// q = (1/r)*sqrt(l/c); 2*zeta*q == 1 identically.
DampingQ damping_and_q(double r, double l, double c);

/// Ideal (no overlap, no ripple) six-pulse rectifier output,
/// v_dc = (3*sqrt(2)/pi) * v_ll.
double ideal_dc_voltage(double v_ll);

/// High-accuracy reference solution of the series RLC energization problem:
/// source v_m*sin(2*pi*f_sys*t + phase) switched onto R-L-C in series at
/// close_time with zero initial state. Returns the capacitor voltage sampled
/// at t = k*dt_sample, k in [0, n_samples); samples before close_time are 0.
///
/// Integrates the exact state equations with classical fixed-step RK4 at an
/// internal step <= dt_sample/50 and verifies its own convergence by
/// comparing against a half-step rerun (agreement < 1e-8 of peak). This is
/// deliberately a different method from the simulation engine so agreement
/// between the two is independent evidence.
///
/// Throws std::invalid_argument when the circuit is not underdamped
/// (zeta >= 1, outside the validated scope) or when the self-check fails.
Waveform reference_rlc_waveform(double r, double l, double c, double v_m,
                                double f_sys, double close_time,
                                double dt_sample, std::size_t n_samples,
                                double phase = 0.0);

}  // namespace emtsim::oracle
