#pragma once

#include <optional>
#include <string>
#include <vector>

namespace emtsim {

enum class Unit { Volts, Amperes };

/// Uniformly sampled signal. samples[k] is the value at t = k * dt relative
/// to the start of the simulation; dt here is the recording interval, which
/// may be a multiple of the engine step.
struct Waveform {
  std::string label;
  double dt = 0.0;
  Unit unit = Unit::Volts;
  std::optional<double> pu_base;  // per-unit reference, when meaningful
  std::vector<double> samples;

  double time_of(std::size_t index) const { return dt * double(index); }
  std::size_t size() const { return samples.size(); }
};

}  // namespace emtsim
