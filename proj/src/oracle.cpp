#include "emtsim/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace emtsim::oracle {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

SourceEquivalent source_equivalent(double v_ll, double s_sc, double x_over_r,
                                   double f_sys) {
  const double omega = kTwoPi * f_sys;
  SourceEquivalent eq;
  eq.z_s = v_ll * v_ll / s_sc;
  eq.l_s = (eq.z_s / omega) * (x_over_r / std::sqrt(1.0 + x_over_r * x_over_r));
  eq.r_s = omega * eq.l_s / x_over_r;
  return eq;
}

double bank_capacitance(double q, double v_ll, double f_sys) {
  return q / (v_ll * v_ll * kTwoPi * f_sys);
}

double natural_frequency(double l, double c) {
  return 1.0 / (kTwoPi * std::sqrt(l * c));
}

double alt_natural_frequency(double f_sys, double s_sc, double q_c) {
  return f_sys * std::sqrt(s_sc / q_c);
}

double peak_inrush(double v_m, double l, double c) {
  return v_m * std::sqrt(c / l);
}

DampingQ damping_and_q(double r, double l, double c) {
  const double surge = std::sqrt(l / c);  // characteristic impedance
  return {r / (2.0 * surge), surge / r};
}

double ideal_dc_voltage(double v_ll) {
  return 3.0 * std::numbers::sqrt2 / std::numbers::pi * v_ll;
}

namespace {

// One classical RK4 step of the series-RLC state equations
//   l * di/dt = e(t) - r*i - vc      c * dvc/dt = i
struct RlcSystem {
  double r, l, c, v_m, omega, phase;

  double source(double t) const { return v_m * std::sin(omega * t + phase); }

  void derivatives(double t, double vc, double i, double& dvc, double& di) const {
    dvc = i / c;
    di = (source(t) - r * i - vc) / l;
  }

  void rk4_step(double t, double h, double& vc, double& i) const {
    double k1v, k1i, k2v, k2i, k3v, k3i, k4v, k4i;
    derivatives(t, vc, i, k1v, k1i);
    derivatives(t + h / 2, vc + h / 2 * k1v, i + h / 2 * k1i, k2v, k2i);
    derivatives(t + h / 2, vc + h / 2 * k2v, i + h / 2 * k2i, k3v, k3i);
    derivatives(t + h, vc + h * k3v, i + h * k3i, k4v, k4i);
    vc += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
    i += h / 6 * (k1i + 2 * k2i + 2 * k3i + k4i);
  }
};

// Integrates from close_time with zero state, sampling the capacitor
// voltage on the absolute grid k*dt_sample. substeps partitions each
// inter-sample interval (and the lead-in from close_time to the first grid
// point after it) into equal RK4 steps.
std::vector<double> integrate(const RlcSystem& sys, double close_time,
                              double dt_sample, std::size_t n_samples,
                              int substeps) {
  std::vector<double> out(n_samples, 0.0);
  double vc = 0.0, i = 0.0;
  double t = close_time;
  bool started = false;
  for (std::size_t k = 0; k < n_samples; ++k) {
    const double t_k = double(k) * dt_sample;
    if (t_k < close_time) continue;  // switch still open, state is zero
    if (!started) {
      started = true;
      t = close_time;
    }
    const double span = t_k - t;
    if (span > 0.0) {
      const double h = span / double(substeps);
      for (int s = 0; s < substeps; ++s) sys.rk4_step(t + s * h, h, vc, i);
    }
    t = t_k;
    out[k] = vc;
  }
  return out;
}

}  // namespace

Waveform reference_rlc_waveform(double r, double l, double c, double v_m,
                                double f_sys, double close_time,
                                double dt_sample, std::size_t n_samples,
                                double phase) {
  if (!(r > 0) || !(l > 0) || !(c > 0) || !(dt_sample > 0) || n_samples < 2)
    throw std::invalid_argument("reference_rlc_waveform: non-positive parameters");
  const double zeta = damping_and_q(r, l, c).zeta;
  if (zeta >= 1.0)
    throw std::invalid_argument(
        "reference_rlc_waveform: not underdamped (zeta >= 1), outside "
        "validated scope");

  const RlcSystem sys{r, l, c, v_m, kTwoPi * f_sys, phase};
  const int substeps = 50;  // internal step = dt_sample/50
  std::vector<double> coarse = integrate(sys, close_time, dt_sample, n_samples, substeps);
  std::vector<double> fine = integrate(sys, close_time, dt_sample, n_samples, 2 * substeps);

  double peak = 0.0, diff = 0.0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    peak = std::max(peak, std::abs(fine[k]));
    diff = std::max(diff, std::abs(fine[k] - coarse[k]));
  }
  if (peak > 0.0 && diff > 1e-8 * peak)
    throw std::invalid_argument(
        "reference_rlc_waveform: convergence self-check failed");

  Waveform w;
  w.label = "reference_rlc";
  w.dt = dt_sample;
  w.unit = Unit::Volts;
  w.samples = std::move(fine);
  return w;
}

}  // namespace emtsim::oracle
