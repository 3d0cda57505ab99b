#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace emtsim {

/// Node index into the nodal system. Node 0 is the ground/reference node
/// and always exists.
using NodeId = int;
inline constexpr NodeId kGround = 0;

struct Resistor {
  double ohms = 0.0;
};

struct Inductor {
  double henries = 0.0;
  double initial_current = 0.0;  // amperes node+ -> node- at t = 0
};

struct Capacitor {
  double farads = 0.0;
  double initial_voltage = 0.0;  // volts across n+ -> n- at t = 0
};

/// Ideal sinusoidal voltage source, v(t) = amplitude * sin(2*pi*f*t + phase).
/// Amplitude is peak volts line-to-neutral; no internal impedance.
struct SinusoidalSource {
  double amplitude = 0.0;  // volts, peak
  double frequency = 0.0;  // hertz
  double phase = 0.0;      // radians
};

/// Time-controlled switch. Closed while close_time <= t (< open_time when
/// present). Events are quantized to step boundaries by the engine.
struct TimedSwitch {
  double close_time = 0.0;
  std::optional<double> open_time;
};

/// Diode with finite on-resistance and off-conductance so the nodal matrix
/// stays non-singular in every conduction state.
struct IdealDiode {
  double on_resistance = 1e-3;    // ohms
  double off_conductance = 1e-9;  // siemens
  double forward_drop = 0.0;      // volts
};

/// Ideal two-winding transformer: v(p+,p-) = ratio * v(s+,s-) and
/// i_secondary = -ratio * i_primary.
struct IdealTransformer {
  double ratio = 1.0;
};

using Device = std::variant<Resistor, Inductor, Capacitor, SinusoidalSource,
                            TimedSwitch, IdealDiode, IdealTransformer>;

enum class ElementKind {
  Resistor,
  Inductor,
  Capacitor,
  Source,
  Switch,
  Diode,
  Transformer,
};

struct Element {
  std::string label;
  // Terminals [n+, n-] for two-terminal devices; transformers use all four
  // as [p+, p-, s+, s-].
  std::array<NodeId, 4> nodes{0, 0, 0, 0};
  Device device;

  ElementKind kind() const;
  bool is_four_terminal() const { return kind() == ElementKind::Transformer; }
  int terminal_count() const { return is_four_terminal() ? 4 : 2; }
};

struct Probe {
  enum class Kind { NodeVoltage, BranchCurrent, Differential };
  std::string label;
  Kind kind = Kind::NodeVoltage;
  NodeId node_pos = 0;
  NodeId node_neg = 0;
  std::string element;  // for BranchCurrent
};

struct Diagnostic {
  std::string message;
};

/// Immutable-after-construction circuit description. Node ids are created
/// implicitly by use; node_count() is 1 + the highest referenced id.
class Netlist {
 public:
  Netlist() = default;

  void add(Element element);
  void add_probe(Probe probe);

  const std::vector<Element>& elements() const { return elements_; }
  const std::vector<Probe>& probes() const { return probes_; }
  int node_count() const { return node_count_; }

  const Element* find(std::string_view label) const;

  // Convenience constructors used by the case builders.
  void add_resistor(std::string label, NodeId a, NodeId b, double ohms);
  void add_inductor(std::string label, NodeId a, NodeId b, double henries);
  void add_capacitor(std::string label, NodeId a, NodeId b, double farads,
                     double initial_voltage = 0.0);
  void add_source(std::string label, NodeId a, NodeId b, double amplitude,
                  double frequency, double phase);
  void add_switch(std::string label, NodeId a, NodeId b, double close_time,
                  std::optional<double> open_time = std::nullopt);
  void add_diode(std::string label, NodeId anode, NodeId cathode,
                 double ron = 1e-3, double goff = 1e-9, double vf = 0.0);
  void add_transformer(std::string label, NodeId p_pos, NodeId p_neg,
                       NodeId s_pos, NodeId s_neg, double ratio);

  /// Re-seeds a capacitor's t=0 voltage (used by study builders after a
  /// steady-state pre-solve). Throws if the label is not a capacitor.
  void set_capacitor_initial(std::string_view label, double volts);
  void set_inductor_initial(std::string_view label, double amperes);

 private:
  std::vector<Element> elements_;
  std::vector<Probe> probes_;
  int node_count_ = 1;
};

/// Structural checks. An empty result guarantees the stepping matrix cannot
/// be structurally singular in any switch state (off-conductances provide
/// leakage paths). The t=0 snapshot treats inductors as current sources, so
/// a bus reaching ground only through inductors is still indeterminate
/// there; the engine reports that case when the simulator is built.
std::vector<Diagnostic> validate(const Netlist& netlist);

struct ParseError : std::runtime_error {
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line(line) {}
  int line;
};

/// Parses the line-oriented netlist format. Numeric literals accept the SI
/// suffixes u, m, k, M. Throws ParseError with a line number on bad input.
Netlist parse_netlist(std::string_view text);

/// Canonical text form; parse_netlist(serialize_netlist(n)) reproduces n
/// exactly, and serializing a parsed canonical file reproduces its bytes.
std::string serialize_netlist(const Netlist& netlist);

/// Parses one numeric literal with optional SI suffix (u, m, k, M).
/// Used for netlist fields and CLI arguments like "--dt 4u".
std::optional<double> parse_si_number(std::string_view token);

}  // namespace emtsim
