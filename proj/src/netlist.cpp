#include "emtsim/netlist.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <set>
#include <sstream>
#include <utility>

#include "emtsim/text.hpp"

namespace emtsim {

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string format_display(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

ElementKind Element::kind() const {
  struct Visitor {
    ElementKind operator()(const Resistor&) const { return ElementKind::Resistor; }
    ElementKind operator()(const Inductor&) const { return ElementKind::Inductor; }
    ElementKind operator()(const Capacitor&) const { return ElementKind::Capacitor; }
    ElementKind operator()(const SinusoidalSource&) const { return ElementKind::Source; }
    ElementKind operator()(const TimedSwitch&) const { return ElementKind::Switch; }
    ElementKind operator()(const IdealDiode&) const { return ElementKind::Diode; }
    ElementKind operator()(const IdealTransformer&) const { return ElementKind::Transformer; }
  };
  return std::visit(Visitor{}, device);
}

void Netlist::add(Element element) {
  for (int i = 0; i < element.terminal_count(); ++i)
    node_count_ = std::max(node_count_, element.nodes[std::size_t(i)] + 1);
  elements_.push_back(std::move(element));
}

void Netlist::add_probe(Probe probe) {
  node_count_ = std::max({node_count_, probe.node_pos + 1, probe.node_neg + 1});
  probes_.push_back(std::move(probe));
}

const Element* Netlist::find(std::string_view label) const {
  for (const Element& e : elements_)
    if (e.label == label) return &e;
  return nullptr;
}

void Netlist::add_resistor(std::string label, NodeId a, NodeId b, double ohms) {
  add({std::move(label), {a, b, 0, 0}, Resistor{ohms}});
}

void Netlist::add_inductor(std::string label, NodeId a, NodeId b, double henries) {
  add({std::move(label), {a, b, 0, 0}, Inductor{henries}});
}

void Netlist::add_capacitor(std::string label, NodeId a, NodeId b, double farads,
                            double initial_voltage) {
  add({std::move(label), {a, b, 0, 0}, Capacitor{farads, initial_voltage}});
}

void Netlist::add_source(std::string label, NodeId a, NodeId b, double amplitude,
                         double frequency, double phase) {
  add({std::move(label), {a, b, 0, 0}, SinusoidalSource{amplitude, frequency, phase}});
}

void Netlist::add_switch(std::string label, NodeId a, NodeId b, double close_time,
                         std::optional<double> open_time) {
  add({std::move(label), {a, b, 0, 0}, TimedSwitch{close_time, open_time}});
}

void Netlist::add_diode(std::string label, NodeId anode, NodeId cathode, double ron,
                        double goff, double vf) {
  add({std::move(label), {anode, cathode, 0, 0}, IdealDiode{ron, goff, vf}});
}

void Netlist::add_transformer(std::string label, NodeId p_pos, NodeId p_neg,
                              NodeId s_pos, NodeId s_neg, double ratio) {
  add({std::move(label), {p_pos, p_neg, s_pos, s_neg}, IdealTransformer{ratio}});
}

void Netlist::set_capacitor_initial(std::string_view label, double volts) {
  for (Element& e : elements_) {
    if (e.label != label) continue;
    if (auto* c = std::get_if<Capacitor>(&e.device)) {
      c->initial_voltage = volts;
      return;
    }
    throw std::invalid_argument("'" + std::string(label) + "' is not a capacitor");
  }
  throw std::invalid_argument("no element labelled '" + std::string(label) + "'");
}

void Netlist::set_inductor_initial(std::string_view label, double amperes) {
  for (Element& e : elements_) {
    if (e.label != label) continue;
    if (auto* l = std::get_if<Inductor>(&e.device)) {
      l->initial_current = amperes;
      return;
    }
    throw std::invalid_argument("'" + std::string(label) + "' is not an inductor");
  }
  throw std::invalid_argument("no element labelled '" + std::string(label) + "'");
}

// ---------------------------------------------------------------------------
// Validation

namespace {

// Union-find over node ids for the ground-path check.
class NodeGroups {
 public:
  explicit NodeGroups(int n) : parent_(std::size_t(n)) {
    for (int i = 0; i < n; ++i) parent_[std::size_t(i)] = i;
  }
  int find(int x) {
    while (parent_[std::size_t(x)] != x) {
      parent_[std::size_t(x)] = parent_[std::size_t(parent_[std::size_t(x)])];
      x = parent_[std::size_t(x)];
    }
    return x;
  }
  void unite(int a, int b) { parent_[std::size_t(find(a))] = find(b); }

 private:
  std::vector<int> parent_;
};

void check_positive(std::vector<Diagnostic>& out, const std::string& label,
                    const char* field, double value) {
  if (!(value > 0.0))
    out.push_back({"element '" + label + "': " + field + " must be > 0, got " +
                   format_number(value)});
}

}  // namespace

std::vector<Diagnostic> validate(const Netlist& netlist) {
  std::vector<Diagnostic> out;
  const int n = netlist.node_count();

  std::set<std::string> seen;
  for (const Element& e : netlist.elements()) {
    if (!seen.insert(e.label).second)
      out.push_back({"duplicate element label '" + e.label + "'"});
    for (int i = 0; i < e.terminal_count(); ++i) {
      NodeId id = e.nodes[std::size_t(i)];
      if (id < 0 || id >= n)
        out.push_back({"element '" + e.label + "': terminal " + std::to_string(i) +
                       " references node " + std::to_string(id) +
                       " outside [0, " + std::to_string(n) + ")"});
    }
  }

  for (const Element& e : netlist.elements()) {
    const std::string& l = e.label;
    if (auto* r = std::get_if<Resistor>(&e.device)) {
      check_positive(out, l, "resistance", r->ohms);
    } else if (auto* ind = std::get_if<Inductor>(&e.device)) {
      check_positive(out, l, "inductance", ind->henries);
    } else if (auto* c = std::get_if<Capacitor>(&e.device)) {
      check_positive(out, l, "capacitance", c->farads);
    } else if (auto* s = std::get_if<SinusoidalSource>(&e.device)) {
      check_positive(out, l, "amplitude", s->amplitude);
      check_positive(out, l, "frequency", s->frequency);
    } else if (auto* sw = std::get_if<TimedSwitch>(&e.device)) {
      if (sw->open_time && !(*sw->open_time > sw->close_time))
        out.push_back({"element '" + l + "': open time must exceed close time"});
    } else if (auto* d = std::get_if<IdealDiode>(&e.device)) {
      check_positive(out, l, "on resistance", d->on_resistance);
      check_positive(out, l, "off conductance", d->off_conductance);
      if (d->forward_drop < 0.0)
        out.push_back({"element '" + l + "': forward drop must be >= 0"});
    } else if (auto* x = std::get_if<IdealTransformer>(&e.device)) {
      check_positive(out, l, "ratio", x->ratio);
    }
  }

  // Ground-path check. Capacitors are open at DC and do not count as a
  // conductive edge; switches and diodes do (the engine gives their open/off
  // states a leakage conductance). Transformer windings conduct within a
  // winding pair only: an ideal transformer carries no galvanic path between
  // primary and secondary.
  NodeGroups groups(n);
  std::vector<bool> referenced(std::size_t(n), false);
  referenced[0] = true;
  auto touch = [&](NodeId id) {
    if (id >= 0 && id < n) referenced[std::size_t(id)] = true;
  };
  auto connect = [&](NodeId a, NodeId b) {
    if (a >= 0 && a < n && b >= 0 && b < n) groups.unite(a, b);
  };
  for (const Element& e : netlist.elements()) {
    for (int i = 0; i < e.terminal_count(); ++i) touch(e.nodes[std::size_t(i)]);
    switch (e.kind()) {
      case ElementKind::Resistor:
      case ElementKind::Inductor:
      case ElementKind::Source:
      case ElementKind::Switch:
      case ElementKind::Diode:
        connect(e.nodes[0], e.nodes[1]);
        break;
      case ElementKind::Transformer:
        connect(e.nodes[0], e.nodes[1]);
        connect(e.nodes[2], e.nodes[3]);
        break;
      case ElementKind::Capacitor:
        break;
    }
  }
  // Probes register their nodes too (node_count counts them), so a probed
  // node with no element attached must be flagged here or the engine would
  // build a matrix with an unconstrained row.
  for (const Probe& p : netlist.probes()) {
    if (p.kind == Probe::Kind::NodeVoltage) touch(p.node_pos);
    if (p.kind == Probe::Kind::Differential) {
      touch(p.node_pos);
      touch(p.node_neg);
    }
  }
  for (int id = 1; id < n; ++id) {
    if (!referenced[std::size_t(id)]) {
      // A gap in the node numbering still gets a matrix row, which no
      // equation would constrain.
      out.push_back({"node " + std::to_string(id) +
                     " appears in no element or probe (node ids run to " +
                     std::to_string(n - 1) + ")"});
      continue;
    }
    if (groups.find(id) != groups.find(kGround))
      out.push_back({"node " + std::to_string(id) +
                     " has no conductive path to ground (node 0)"});
  }

  for (const Probe& p : netlist.probes()) {
    switch (p.kind) {
      case Probe::Kind::NodeVoltage:
        if (p.node_pos < 0 || p.node_pos >= n)
          out.push_back({"probe '" + p.label + "' references unknown node " +
                         std::to_string(p.node_pos)});
        break;
      case Probe::Kind::Differential:
        if (p.node_pos < 0 || p.node_pos >= n || p.node_neg < 0 || p.node_neg >= n)
          out.push_back({"probe '" + p.label + "' references an unknown node"});
        break;
      case Probe::Kind::BranchCurrent:
        if (!netlist.find(p.element))
          out.push_back({"probe '" + p.label + "' references unknown element '" +
                         p.element + "'"});
        break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

std::optional<double> parse_si_number(std::string_view token) {
  if (token.empty()) return std::nullopt;
  double scale = 1.0;
  char last = token.back();
  switch (last) {
    case 'u': scale = 1e-6; break;
    case 'm': scale = 1e-3; break;
    case 'k': scale = 1e3; break;
    case 'M': scale = 1e6; break;
    default: break;
  }
  if (scale != 1.0) token.remove_suffix(1);
  if (token.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) return std::nullopt;
  return value * scale;
}

namespace {

bool has_si_suffix(std::string_view token) {
  if (token.empty()) return false;
  char last = token.back();
  return last == 'u' || last == 'm' || last == 'k' || last == 'M';
}

std::vector<std::string_view> split_tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

struct LineParser {
  int line_no;
  std::vector<std::string_view> tokens;
  std::size_t next = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(line_no, what);
  }

  std::string_view take(const char* what) {
    if (next >= tokens.size()) fail(std::string("missing ") + what);
    return tokens[next++];
  }

  NodeId take_node(const char* what) {
    std::string_view t = take(what);
    int id = -1;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), id);
    if (ec != std::errc{} || ptr != t.data() + t.size() || id < 0)
      fail(std::string(what) + " must be a non-negative node id, got '" +
           std::string(t) + "'");
    return id;
  }

  double take_value(const char* what, bool allow_suffix = true) {
    std::string_view t = take(what);
    return parse_value(t, what, allow_suffix);
  }

  double parse_value(std::string_view t, const std::string& what,
                     bool allow_suffix) const {
    if (!allow_suffix && has_si_suffix(t))
      fail("unit suffix not allowed on dimensionless field " + what + ": '" +
           std::string(t) + "'");
    auto v = parse_si_number(t);
    if (!v) fail("bad numeric value for " + what + ": '" + std::string(t) + "'");
    return *v;
  }

  // Remaining tokens must all be key=value pairs.
  std::vector<std::pair<std::string_view, std::string_view>> take_keyvals() {
    std::vector<std::pair<std::string_view, std::string_view>> out;
    while (next < tokens.size()) {
      std::string_view t = tokens[next++];
      std::size_t eq = t.find('=');
      if (eq == std::string_view::npos || eq == 0 || eq + 1 == t.size())
        fail("expected key=value, got '" + std::string(t) + "'");
      out.emplace_back(t.substr(0, eq), t.substr(eq + 1));
    }
    return out;
  }
};

Probe parse_probe(LineParser& p) {
  Probe probe;
  probe.label = std::string(p.take("probe label"));
  std::string_view spec = p.take("probe target");
  if (p.next != p.tokens.size()) p.fail("unexpected trailing tokens after probe");
  std::size_t open = spec.find('(');
  if (open == std::string_view::npos || spec.back() != ')')
    p.fail("probe target must look like V(n), I(label) or VD(n+,n-)");
  std::string_view fn = spec.substr(0, open);
  std::string_view args = spec.substr(open + 1, spec.size() - open - 2);
  auto parse_node_arg = [&](std::string_view t) {
    int id = -1;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), id);
    if (ec != std::errc{} || ptr != t.data() + t.size() || id < 0)
      p.fail("bad node id in probe target: '" + std::string(t) + "'");
    return id;
  };
  if (fn == "V") {
    probe.kind = Probe::Kind::NodeVoltage;
    probe.node_pos = parse_node_arg(args);
  } else if (fn == "I") {
    probe.kind = Probe::Kind::BranchCurrent;
    if (args.empty()) p.fail("I() probe needs an element label");
    probe.element = std::string(args);
  } else if (fn == "VD") {
    probe.kind = Probe::Kind::Differential;
    std::size_t comma = args.find(',');
    if (comma == std::string_view::npos)
      p.fail("VD probe needs two node ids separated by a comma");
    probe.node_pos = parse_node_arg(args.substr(0, comma));
    probe.node_neg = parse_node_arg(args.substr(comma + 1));
  } else {
    p.fail("unknown probe kind '" + std::string(fn) + "'");
  }
  return probe;
}

}  // namespace

Netlist parse_netlist(std::string_view text) {
  Netlist netlist;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    if (std::size_t hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    LineParser p{line_no, split_tokens(line), 0};
    if (p.tokens.empty()) continue;

    std::string_view kind = p.take("element kind");
    if (kind == "PROBE") {
      netlist.add_probe(parse_probe(p));
      continue;
    }

    Element e;
    e.label = std::string(p.take("label"));
    e.nodes[0] = p.take_node("node+");
    e.nodes[1] = p.take_node("node-");

    if (kind == "R") {
      e.device = Resistor{p.take_value("resistance")};
    } else if (kind == "L") {
      Inductor l{p.take_value("inductance"), 0.0};
      for (auto [key, val] : p.take_keyvals()) {
        if (key == "ic") l.initial_current = p.parse_value(val, "ic", true);
        else p.fail("unknown key '" + std::string(key) + "' for L");
      }
      e.device = l;
    } else if (kind == "C") {
      Capacitor c{p.take_value("capacitance"), 0.0};
      for (auto [key, val] : p.take_keyvals()) {
        if (key == "ic") c.initial_voltage = p.parse_value(val, "ic", true);
        else p.fail("unknown key '" + std::string(key) + "' for C");
      }
      e.device = c;
    } else if (kind == "VS") {
      SinusoidalSource s{p.take_value("amplitude"), 0.0, 0.0};
      bool have_f = false;
      for (auto [key, val] : p.take_keyvals()) {
        if (key == "f") { s.frequency = p.parse_value(val, "f", true); have_f = true; }
        else if (key == "phase") s.phase = p.parse_value(val, "phase", false);
        else p.fail("unknown key '" + std::string(key) + "' for VS");
      }
      if (!have_f) p.fail("VS requires f=<hertz>");
      e.device = s;
    } else if (kind == "SW") {
      TimedSwitch sw{p.take_value("close time"), std::nullopt};
      for (auto [key, val] : p.take_keyvals()) {
        if (key == "topen") sw.open_time = p.parse_value(val, "topen", true);
        else p.fail("unknown key '" + std::string(key) + "' for SW");
      }
      e.device = sw;
    } else if (kind == "D") {
      IdealDiode d;
      d.on_resistance = p.take_value("on resistance");
      for (auto [key, val] : p.take_keyvals()) {
        if (key == "goff") d.off_conductance = p.parse_value(val, "goff", true);
        else if (key == "vf") d.forward_drop = p.parse_value(val, "vf", true);
        else p.fail("unknown key '" + std::string(key) + "' for D");
      }
      e.device = d;
    } else if (kind == "XF") {
      e.nodes[2] = p.take_node("node2+");
      e.nodes[3] = p.take_node("node2-");
      e.device = IdealTransformer{p.take_value("ratio", false)};
    } else {
      p.fail("unknown element kind '" + std::string(kind) + "'");
    }
    if (p.next != p.tokens.size()) p.fail("unexpected trailing tokens");
    netlist.add(std::move(e));
  }
  return netlist;
}

// ---------------------------------------------------------------------------
// Serialization (canonical form; no SI suffixes, single-space separators)

std::string serialize_netlist(const Netlist& netlist) {
  std::ostringstream out;
  for (const Element& e : netlist.elements()) {
    if (auto* r = std::get_if<Resistor>(&e.device)) {
      out << "R " << e.label << ' ' << e.nodes[0] << ' ' << e.nodes[1] << ' '
          << format_number(r->ohms);
    } else if (auto* ind = std::get_if<Inductor>(&e.device)) {
      out << "L " << e.label << ' ' << e.nodes[0] << ' ' << e.nodes[1] << ' '
          << format_number(ind->henries);
      if (ind->initial_current != 0.0)
        out << " ic=" << format_number(ind->initial_current);
    } else if (auto* c = std::get_if<Capacitor>(&e.device)) {
      out << "C " << e.label << ' ' << e.nodes[0] << ' ' << e.nodes[1] << ' '
          << format_number(c->farads);
      if (c->initial_voltage != 0.0)
        out << " ic=" << format_number(c->initial_voltage);
    } else if (auto* s = std::get_if<SinusoidalSource>(&e.device)) {
      out << "VS " << e.label << ' ' << e.nodes[0] << ' ' << e.nodes[1] << ' '
          << format_number(s->amplitude) << " f=" << format_number(s->frequency)
          << " phase=" << format_number(s->phase);
    } else if (auto* sw = std::get_if<TimedSwitch>(&e.device)) {
      out << "SW " << e.label << ' ' << e.nodes[0] << ' ' << e.nodes[1] << ' '
          << format_number(sw->close_time);
      if (sw->open_time) out << " topen=" << format_number(*sw->open_time);
    } else if (auto* d = std::get_if<IdealDiode>(&e.device)) {
      out << "D " << e.label << ' ' << e.nodes[0] << ' ' << e.nodes[1] << ' '
          << format_number(d->on_resistance);
      if (d->off_conductance != 1e-9)
        out << " goff=" << format_number(d->off_conductance);
      if (d->forward_drop != 0.0) out << " vf=" << format_number(d->forward_drop);
    } else if (auto* x = std::get_if<IdealTransformer>(&e.device)) {
      out << "XF " << e.label << ' ' << e.nodes[0] << ' ' << e.nodes[1] << ' '
          << e.nodes[2] << ' ' << e.nodes[3] << ' ' << format_number(x->ratio);
    }
    out << '\n';
  }
  for (const Probe& p : netlist.probes()) {
    out << "PROBE " << p.label << ' ';
    switch (p.kind) {
      case Probe::Kind::NodeVoltage:
        out << "V(" << p.node_pos << ')';
        break;
      case Probe::Kind::BranchCurrent:
        out << "I(" << p.element << ')';
        break;
      case Probe::Kind::Differential:
        out << "VD(" << p.node_pos << ',' << p.node_neg << ')';
        break;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace emtsim
