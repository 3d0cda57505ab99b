#include "emtsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace emtsim {

namespace {

struct Slice {
  std::size_t first = 0;
  std::size_t count = 0;
};

// Samples k with window.start <= k*dt <= window.end, with half-ulp slack so
// windows specified at exact sample times are inclusive.
Slice slice_of(const Waveform& w, TimeRange window) {
  if (w.dt <= 0.0 || w.samples.size() < 2)
    throw std::invalid_argument("waveform needs dt > 0 and >= 2 samples");
  if (window.end <= window.start)
    throw std::invalid_argument("window end must exceed start");
  const double eps = 0.5 * w.dt;
  const double extent = w.dt * double(w.samples.size() - 1);
  if (window.start < -eps || window.end > extent + eps)
    throw std::invalid_argument("window outside waveform extent");
  auto first = std::size_t(std::ceil(std::max(0.0, window.start) / w.dt - 1e-9));
  auto last = std::size_t(std::floor(window.end / w.dt + 1e-9));
  last = std::min(last, w.samples.size() - 1);
  if (last < first) throw std::invalid_argument("window holds no samples");
  return {first, last - first + 1};
}

}  // namespace

Spectrum spectrum(const Waveform& w, TimeRange window, bool detrend) {
  const Slice s = slice_of(w, window);
  const std::size_t n = s.count;
  if (n < 8) throw std::invalid_argument("spectrum window too short (< 8 samples)");

  double mean = 0.0;
  if (detrend) {
    for (std::size_t k = 0; k < n; ++k) mean += w.samples[s.first + k];
    mean /= double(n);
  }

  // Naive DFT driven by a table of the n-th roots of unity; the index
  // (bin * sample) mod n is tracked incrementally so every twiddle factor
  // is an exact table entry.
  std::vector<std::complex<double>> roots(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double angle = -2.0 * std::numbers::pi * double(j) / double(n);
    roots[j] = {std::cos(angle), std::sin(angle)};
  }

  const std::size_t bins = n / 2 + 1;
  Spectrum out;
  out.bin_width = 1.0 / (w.dt * double(n));
  out.window_start = w.dt * double(s.first);
  out.window_end = w.dt * double(s.first + n - 1);
  out.magnitudes.resize(bins);
  for (std::size_t bin = 0; bin < bins; ++bin) {
    std::complex<double> acc = 0.0;
    std::size_t idx = 0;
    for (std::size_t k = 0; k < n; ++k) {
      acc += (w.samples[s.first + k] - mean) * roots[idx];
      idx += bin;
      if (idx >= n) idx -= n;
    }
    const bool edge = bin == 0 || (n % 2 == 0 && bin == n / 2);
    out.magnitudes[bin] = std::abs(acc) * (edge ? 1.0 : 2.0) / double(n);
  }
  return out;
}

double dominant_frequency(const Spectrum& s, FrequencyBand band) {
  if (s.size() < 3 || s.bin_width <= 0.0)
    throw std::invalid_argument("spectrum too small");
  if (band.hi <= band.lo) throw std::invalid_argument("empty frequency band");
  auto lo = std::size_t(std::ceil(band.lo / s.bin_width - 1e-9));
  auto hi_f = std::floor(band.hi / s.bin_width + 1e-9);
  if (hi_f < 0) throw std::invalid_argument("band below spectrum range");
  auto hi = std::min(std::size_t(hi_f), s.size() - 1);
  if (hi < lo + 2)
    throw std::invalid_argument("band narrower than 3 spectrum bins");

  std::size_t best = lo;
  for (std::size_t k = lo; k <= hi; ++k)
    if (s.magnitudes[k] > s.magnitudes[best]) best = k;

  // Parabolic refinement on log magnitude; a decaying or leaked tone has a
  // near-Gaussian main lobe there, so the vertex lands within ~1/4 bin.
  double f = s.frequency_of(best);
  if (best > 0 && best + 1 < s.size()) {
    const double a = s.magnitudes[best - 1];
    const double b = s.magnitudes[best];
    const double c = s.magnitudes[best + 1];
    if (a > 0.0 && b > 0.0 && c > 0.0) {
      const double la = std::log(a), lb = std::log(b), lc = std::log(c);
      const double denom = la - 2.0 * lb + lc;
      if (denom < 0.0) {
        const double shift = 0.5 * (la - lc) / denom;
        if (std::abs(shift) <= 1.0) f += shift * s.bin_width;
      }
    }
  }
  return f;
}

PeakMetrics peak_metrics(const Waveform& w) {
  if (w.samples.empty()) throw std::invalid_argument("empty waveform");
  PeakMetrics m;
  std::size_t at = 0;
  for (std::size_t k = 0; k < w.samples.size(); ++k) {
    const double a = std::abs(w.samples[k]);
    if (a > m.peak_abs) {
      m.peak_abs = a;
      at = k;
    }
  }
  m.time_of_peak = w.time_of(at);
  if (w.pu_base) m.peak_pu = m.peak_abs / *w.pu_base;
  return m;
}

RippleMetrics ripple_metrics(const Waveform& w, TimeRange steady_window) {
  if (steady_window.end - steady_window.start < 0.1 - 1e-9)
    throw std::invalid_argument(
        "ripple window must span at least 100 ms (10 cycles of the 100 Hz "
        "analysis band floor)");
  const Slice s = slice_of(w, steady_window);
  RippleMetrics m;
  double lo = w.samples[s.first], hi = lo, sum = 0.0;
  for (std::size_t k = 0; k < s.count; ++k) {
    const double v = w.samples[s.first + k];
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
  }
  m.mean = sum / double(s.count);
  m.pk_pk = hi - lo;
  m.pct = m.mean != 0.0 ? m.pk_pk / m.mean : 0.0;
  if (m.pk_pk > 0.0) {
    const Spectrum spec = spectrum(w, steady_window, /*detrend=*/true);
    m.dominant_hz = dominant_frequency(spec, {100.0, 2000.0});
  }
  return m;
}

double rms(const Waveform& w, TimeRange window) {
  const Slice s = slice_of(w, window);
  double acc = 0.0;
  for (std::size_t k = 0; k < s.count; ++k) {
    const double v = w.samples[s.first + k];
    acc += v * v;
  }
  return std::sqrt(acc / double(s.count));
}

double magnification_factor(double mv_peak_pu, double lv_peak_pu) {
  if (!(mv_peak_pu > 0.0) || !(lv_peak_pu > 0.0))
    throw std::invalid_argument("magnification_factor needs positive peaks");
  return lv_peak_pu / mv_peak_pu;
}

}  // namespace emtsim
