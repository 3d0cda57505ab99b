#pragma once

#include <Eigen/Dense>
#include <Eigen/LU>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "emtsim/netlist.hpp"
#include "emtsim/waveform.hpp"

namespace emtsim {

struct SimConfig {
  double dt = 2e-6;             // seconds
  double duration = 0.2;        // seconds
  int record_decimation = 1;    // store every n-th step
  int diode_iteration_cap = 50;
};

/// Raised when a step cannot complete: diode conduction chatter past the
/// iteration cap, or a numerically singular system.
struct EngineError : std::runtime_error {
  EngineError(std::string what, double t, std::vector<std::string> elements = {})
      : std::runtime_error(std::move(what)), time(t),
        elements(std::move(elements)) {}
  double time;                        // simulation time of the failure
  std::vector<std::string> elements;  // offending diodes/nodes when known
};

/// Dense nodal/MNA matrix for a given switch and diode state, exposed for
/// structural tests. Row/column order: node voltages 1..n-1 in node order,
/// then one branch current per source and per transformer in element order.
/// switch_states and diode_states are indexed by the element's position
/// among elements of its own kind (netlist order).
Eigen::MatrixXd assemble_system(const Netlist& netlist, double dt,
                                const std::vector<bool>& switch_states,
                                const std::vector<bool>& diode_states);

/// Fixed-step trapezoidal simulator.
///
/// Construction solves the t = 0 snapshot: capacitors held at their initial
/// voltages (as ideal sources, which also yields their initial currents),
/// inductors fixed at their initial currents (as current sources), switch
/// states taken at t = 0, diode states iterated to consistency. Each step()
/// then advances one dt.
///
/// Switch semantics: a switch is closed during the step [t, t+dt) iff
/// close_time <= t (and t < open_time), so an event lands on the first step
/// boundary at or after its scheduled time; close_time <= 0 starts closed.
///
/// Diode handling per step: solve, flip every diode whose state is
/// inconsistent (on with reverse current, or off with forward bias beyond
/// its drop), re-factorize and re-solve until self-consistent; past
/// diode_iteration_cap flips, throws EngineError naming the oscillating set.
class Simulator {
 public:
  Simulator(const Netlist& netlist, const SimConfig& config);
  ~Simulator();
  Simulator(Simulator&&) noexcept;
  Simulator& operator=(Simulator&&) noexcept;

  void step();

  double time() const;
  double node_voltage(NodeId node) const;
  /// v(n+) - v(n-) across the element (primary winding for transformers).
  double element_voltage(std::string_view label) const;
  /// Branch current, positive n+ -> n- (primary current for transformers).
  double element_current(std::string_view label) const;
  bool diode_on(std::string_view label) const;
  bool switch_closed(std::string_view label) const;

  const Netlist& netlist() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Runs the full configured duration and returns one waveform per probe,
/// sampled every record_decimation-th step starting at t = 0; length is
/// floor(duration/dt)/record_decimation + 1. Deterministic: identical
/// inputs give bit-identical outputs.
std::vector<Waveform> simulate(const Netlist& netlist, const SimConfig& config);

}  // namespace emtsim
