#pragma once

#include <optional>

#include "emtsim/waveform.hpp"

namespace emtsim {

/// One-sided amplitude spectrum. magnitudes[k] estimates the amplitude of a
/// sinusoid at k*bin_width: |X_k|*2/N for interior bins, |X_k|/N for the DC
/// and Nyquist bins. Parseval under this normalization:
///   sum(x^2) = N * (A_0^2 + A_nyq^2 + sum_interior(A_k^2)/2).
struct Spectrum {
  double bin_width = 0.0;     // hertz
  double window_start = 0.0;  // seconds
  double window_end = 0.0;    // seconds
  std::vector<double> magnitudes;

  double frequency_of(std::size_t bin) const { return bin_width * double(bin); }
  std::size_t size() const { return magnitudes.size(); }
};

struct TimeRange {
  double start = 0.0;
  double end = 0.0;
};

struct FrequencyBand {
  double lo = 0.0;
  double hi = 0.0;
};

/// Rectangular-window DFT magnitude of the slice of w inside the window.
/// detrend subtracts the slice mean first (for ripple on a DC offset).
/// Resolution is 1/(window length): a <=12 Hz bin needs >=83.3 ms of data.
/// Throws std::invalid_argument when the window leaves the waveform extent
/// or holds fewer than 8 samples.
Spectrum spectrum(const Waveform& w, TimeRange window, bool detrend);

/// Frequency of the strongest component inside the band: the max-magnitude
/// bin refined by parabolic interpolation on log magnitude of its
/// neighbours. Accurate to about bin_width/4 on single tones. Throws
/// std::invalid_argument when the band covers fewer than 3 bins.
double dominant_frequency(const Spectrum& s, FrequencyBand band);

struct PeakMetrics {
  double peak_abs = 0.0;            // max |sample|
  double time_of_peak = 0.0;        // first attainment
  std::optional<double> peak_pu;    // present when the waveform has a base
};

PeakMetrics peak_metrics(const Waveform& w);

struct RippleMetrics {
  double mean = 0.0;
  double pk_pk = 0.0;
  double pct = 0.0;         // pk_pk / mean
  double dominant_hz = 0.0; // of the detrended slice, band 100-2000 Hz
};

/// Steady-state statistics of a DC bus slice. The window must be at least
/// 100 ms long (10 cycles of the 100 Hz analysis band floor) so the ripple
/// spectrum is resolvable. Throws std::invalid_argument otherwise.
RippleMetrics ripple_metrics(const Waveform& w, TimeRange steady_window);

/// RMS of the slice; helper for steady-state per-unit checks.
double rms(const Waveform& w, TimeRange window);

/// lv_peak_pu / mv_peak_pu.
double magnification_factor(double mv_peak_pu, double lv_peak_pu);

}  // namespace emtsim
