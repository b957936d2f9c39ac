#include "sdwan/model.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_set>

namespace sdwan {

std::string_view to_string(NetworkKind kind) {
  return kind == NetworkKind::kMpls ? "mpls" : "internet";
}

std::string_view to_string(NodeRole role) { return role == NodeRole::kHub ? "hub" : "spoke"; }

std::string_view to_string(TrafficClass cls) {
  switch (cls) {
    case TrafficClass::kCritical:
      return "critical";
    case TrafficClass::kVoip:
      return "voip";
    case TrafficClass::kOffice:
      return "office";
    case TrafficClass::kBulk:
      return "bulk";
  }
  return "?";
}

std::string_view to_string(Priority priority) {
  return priority == Priority::kHigh ? "high" : "low";
}

NetworkKind parse_network_kind(std::string_view text) {
  if (text == "mpls") return NetworkKind::kMpls;
  if (text == "internet") return NetworkKind::kInternet;
  throw ValidationError("kind", "unknown network kind '" + std::string(text) + "'");
}

NodeRole parse_node_role(std::string_view text) {
  if (text == "hub") return NodeRole::kHub;
  if (text == "spoke") return NodeRole::kSpoke;
  throw ValidationError("role", "unknown node role '" + std::string(text) + "'");
}

TrafficClass parse_traffic_class(std::string_view text) {
  for (TrafficClass cls : kAllClasses) {
    if (to_string(cls) == text) return cls;
  }
  throw ValidationError("class", "unknown traffic class '" + std::string(text) + "'");
}

Priority parse_priority(std::string_view text) {
  if (text == "high") return Priority::kHigh;
  if (text == "low") return Priority::kLow;
  throw ValidationError("priority", "unknown priority '" + std::string(text) + "'");
}

Priority priority_of(TrafficClass cls) {
  return cls == TrafficClass::kCritical || cls == TrafficClass::kVoip ? Priority::kHigh
                                                                      : Priority::kLow;
}

SlaBounds default_sla(TrafficClass cls) {
  switch (cls) {
    case TrafficClass::kCritical:
      return {0.040, 0.0};
    case TrafficClass::kVoip:
      return {0.060, 0.02};
    case TrafficClass::kOffice:
      return {0.250, 0.05};
    case TrafficClass::kBulk:
      return {0.800, 0.10};
  }
  return {};
}

double SprPolicy::split(std::size_t group, std::size_t link) const {
  const SprRow& row = rows.at(group);
  for (std::size_t i = 0; i < row.links.size(); ++i) {
    if (row.links[i] == link) return row.split[i];
  }
  return 0.0;
}

const QosRule* QosPolicy::find(std::size_t group, std::size_t link) const {
  for (const QosRule& rule : rules) {
    if (rule.group == group && rule.link == link) return &rule;
  }
  return nullptr;
}

std::string estimate_flags(const AbwEstimate& estimate) {
  std::string out;
  auto add = [&out](std::string_view flag) {
    if (!out.empty()) out += '|';
    out += flag;
  };
  if (estimate.saturated) add("saturated");
  if (estimate.inconsistent) add("inconsistent");
  if (estimate.stale) add("stale");
  return out.empty() ? "ok" : out;
}

std::optional<std::size_t> Scenario::find_link(std::string_view id) const {
  for (std::size_t i = 0; i < links.size(); ++i) {
    if (links[i].id == id) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> Scenario::find_group(std::string_view id) const {
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].id == id) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> Scenario::find_port(std::string_view node,
                                               std::string_view network) const {
  for (std::size_t i = 0; i < ports.size(); ++i) {
    if (ports[i].node == node && ports[i].network == network) return i;
  }
  return std::nullopt;
}

namespace {

template <typename T, typename Key>
void require_unique(const std::vector<T>& items, Key key, const std::string& what) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string id = key(items[i]);
    if (id.empty()) {
      throw ValidationError(what + "[" + std::to_string(i) + "].id", "empty identifier");
    }
    if (!seen.insert(id).second) {
      throw ValidationError(what + "[" + std::to_string(i) + "].id",
                            "duplicate identifier '" + id + "'");
    }
  }
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0; }
bool finite_pos(double v) { return std::isfinite(v) && v > 0; }

bool is_multiple(double value, double unit) {
  const double ratio = value / unit;
  return std::abs(ratio - std::round(ratio)) < 1e-9 && ratio >= 1 - 1e-9;
}

}  // namespace

void build_bottleneck_groups(Scenario& scenario) {
  std::vector<std::vector<std::size_t>> members(scenario.ports.size());
  for (std::size_t e = 0; e < scenario.links.size(); ++e) {
    for (std::size_t p : scenario.links[e].ports) members[p].push_back(e);
  }
  for (std::size_t e = 0; e < scenario.links.size(); ++e) {
    std::set<std::size_t> group;
    for (std::size_t p : scenario.links[e].ports) {
      for (std::size_t other : members[p]) {
        if (other != e) group.insert(other);
      }
    }
    scenario.links[e].bottleneck_group.assign(group.begin(), group.end());
  }
}

Scenario validate_scenario(Scenario s) {
  require_unique(s.networks, [](const TransportNetwork& n) { return n.id; }, "networks");
  require_unique(s.nodes, [](const Node& n) { return n.id; }, "nodes");
  require_unique(s.links, [](const OverlayLink& l) { return l.id; }, "overlay_links");
  require_unique(s.groups, [](const FlowGroupInstance& g) { return g.id; }, "flow_groups");

  auto has_node = [&](const std::string& id) {
    return std::any_of(s.nodes.begin(), s.nodes.end(), [&](const Node& n) { return n.id == id; });
  };
  auto has_network = [&](const std::string& id) {
    return std::any_of(s.networks.begin(), s.networks.end(),
                       [&](const TransportNetwork& n) { return n.id == id; });
  };

  if (std::none_of(s.nodes.begin(), s.nodes.end(),
                   [](const Node& n) { return n.role == NodeRole::kHub; })) {
    throw ValidationError("nodes", "scenario needs at least one hub");
  }
  if (std::none_of(s.nodes.begin(), s.nodes.end(),
                   [](const Node& n) { return n.role == NodeRole::kSpoke; })) {
    throw ValidationError("nodes", "scenario needs at least one spoke");
  }

  std::set<std::pair<std::string, std::string>> port_keys;
  for (std::size_t i = 0; i < s.ports.size(); ++i) {
    const UnderlayPort& port = s.ports[i];
    const std::string field = "ports[" + std::to_string(i) + "]";
    if (!has_node(port.node)) throw ValidationError(field + ".node", "unknown node '" + port.node + "'");
    if (!has_network(port.network)) {
      throw ValidationError(field + ".network", "unknown network '" + port.network + "'");
    }
    if (!finite_pos(port.capacity_mbps)) throw ValidationError(field + ".capacity_mbps", "must be > 0");
    if (!port_keys.emplace(port.node, port.network).second) {
      throw ValidationError(field, "second port for (" + port.node + ", " + port.network + ")");
    }
  }

  for (std::size_t i = 0; i < s.links.size(); ++i) {
    OverlayLink& link = s.links[i];
    const std::string field = "overlay_links[" + std::to_string(i) + "]";
    if (!has_node(link.src)) throw ValidationError(field + ".src", "unknown node '" + link.src + "'");
    if (!has_node(link.dst)) throw ValidationError(field + ".dst", "unknown node '" + link.dst + "'");
    if (link.src == link.dst) throw ValidationError(field, "src and dst are the same node");
    if (!has_network(link.network)) {
      throw ValidationError(field + ".network", "unknown network '" + link.network + "'");
    }
    if (!finite_pos(link.nominal_capacity_mbps)) {
      throw ValidationError(field + ".capacity_mbps", "must be > 0");
    }
    if (!finite_nonneg(link.prop_delay_s)) throw ValidationError(field + ".prop_delay_s", "must be >= 0");
    link.ports.clear();
    for (const std::string& end : {link.src, link.dst}) {
      if (auto p = s.find_port(end, link.network)) link.ports.push_back(*p);
    }
  }
  build_bottleneck_groups(s);

  for (std::size_t i = 0; i < s.groups.size(); ++i) {
    FlowGroupInstance& g = s.groups[i];
    const std::string field = "flow_groups[" + std::to_string(i) + "]";
    if (!has_node(g.src)) throw ValidationError(field + ".src", "unknown node '" + g.src + "'");
    if (!has_node(g.dst)) throw ValidationError(field + ".dst", "unknown node '" + g.dst + "'");
    if (g.priority != priority_of(g.cls)) {
      throw ValidationError(field + ".priority", std::string("class ") + std::string(to_string(g.cls)) +
                                                     " must be " + std::string(to_string(priority_of(g.cls))) +
                                                     " priority");
    }
    if (!finite_pos(g.sla_delay_s)) throw ValidationError(field + ".sla_delay_s", "must be > 0");
    if (!(g.sla_loss >= 0 && g.sla_loss <= 1)) {
      throw ValidationError(field + ".sla_loss", "must lie in [0, 1]");
    }
    if (!finite_nonneg(g.demand_mbps)) throw ValidationError(field + ".demand_mbps", "must be >= 0");
    for (const std::string& net : g.allowed_networks) {
      if (!has_network(net)) throw ValidationError(field + ".allowed_networks", "unknown network '" + net + "'");
    }

    g.allowed_links.clear();
    for (std::size_t e = 0; e < s.links.size(); ++e) {
      const OverlayLink& link = s.links[e];
      if (link.src != g.src || link.dst != g.dst) continue;
      const bool allowed =
          g.allowed_networks.empty() ||
          std::find(g.allowed_networks.begin(), g.allowed_networks.end(), link.network) !=
              g.allowed_networks.end();
      if (allowed) g.allowed_links.push_back(e);
    }
    for (const std::string& net : g.allowed_networks) {
      const bool connected = std::any_of(g.allowed_links.begin(), g.allowed_links.end(),
                                         [&](std::size_t e) { return s.links[e].network == net; });
      if (!connected) {
        throw ValidationError(field + ".allowed_networks",
                              "no overlay link from " + g.src + " to " + g.dst + " over " + net);
      }
    }
    if (g.allowed_links.empty()) {
      throw ValidationError(field, "no overlay link from " + g.src + " to " + g.dst);
    }
  }

  std::set<std::string> profiled;
  for (std::size_t i = 0; i < s.traffic.size(); ++i) {
    const TrafficProfile& p = s.traffic[i];
    const std::string field = "traffic_profiles[" + std::to_string(i) + "]";
    if (!s.find_group(p.group)) throw ValidationError(field + ".group", "unknown flow group '" + p.group + "'");
    if (!profiled.insert(p.group).second) throw ValidationError(field + ".group", "second profile for '" + p.group + "'");
    if (!finite_nonneg(p.base_mbps)) throw ValidationError(field + ".base_mbps", "must be >= 0");
    if (!(p.diurnal_amplitude >= 0 && p.diurnal_amplitude <= 1)) {
      throw ValidationError(field + ".diurnal_amplitude", "must lie in [0, 1]");
    }
    if (!finite_pos(p.period_s)) throw ValidationError(field + ".period_s", "must be > 0");
    if (!finite_nonneg(p.noise_std)) throw ValidationError(field + ".noise_std", "must be >= 0");
  }

  for (std::size_t i = 0; i < s.cross_traffic.size(); ++i) {
    CrossTrafficProfile& c = s.cross_traffic[i];
    const std::string field = "cross_traffic[" + std::to_string(i) + "]";
    if (!s.find_port(c.node, c.network)) {
      throw ValidationError(field, "no underlay port (" + c.node + ", " + c.network + ")");
    }
    if (c.shape == CrossTrafficShape::kPiecewise) {
      if (!std::is_sorted(c.steps.begin(), c.steps.end(),
                          [](const RateStep& a, const RateStep& b) { return a.start_s < b.start_s; })) {
        throw ValidationError(field + ".steps", "steps must be sorted by start_s");
      }
      for (const RateStep& step : c.steps) {
        if (!finite_nonneg(step.rate_mbps)) throw ValidationError(field + ".steps", "rates must be >= 0");
      }
    } else {
      if (!finite_nonneg(c.base_mbps) || !finite_nonneg(c.amplitude_mbps) ||
          c.amplitude_mbps > c.base_mbps) {
        throw ValidationError(field, "sinusoid must satisfy 0 <= amplitude <= base");
      }
      if (!finite_pos(c.period_s)) throw ValidationError(field + ".period_s", "must be > 0");
    }
    if (!finite_nonneg(c.noise_std)) throw ValidationError(field + ".noise_std", "must be >= 0");
  }

  const LoopConfig& loops = s.loops;
  if (!finite_pos(loops.tick_s)) throw ValidationError("loops.tick_s", "must be > 0");
  if (!finite_pos(loops.duration_s)) throw ValidationError("loops.duration_s", "must be > 0");
  for (auto [name, value] : {std::pair{"monitor_period_s", loops.monitor_period_s},
                             std::pair{"qos_period_s", loops.qos_period_s},
                             std::pair{"spr_period_s", loops.spr_period_s}}) {
    if (!finite_pos(value) || !is_multiple(value, loops.tick_s)) {
      throw ValidationError(std::string("loops.") + name, "must be a positive multiple of tick_s");
    }
  }
  if (!is_multiple(loops.qos_period_s, loops.monitor_period_s) ||
      !is_multiple(loops.spr_period_s, loops.monitor_period_s)) {
    throw ValidationError("loops", "control periods must be multiples of the monitor period");
  }
  if (!(loops.tcp_headroom >= 1)) throw ValidationError("loops.tcp_headroom", "must be >= 1");
  if (!finite_nonneg(loops.loss_tolerance)) throw ValidationError("loops.loss_tolerance", "must be >= 0");

  if (!finite_nonneg(s.spr.alpha) || !finite_nonneg(s.spr.beta) || !finite_nonneg(s.spr.gamma)) {
    throw ValidationError("optimizer.spr", "weights must be >= 0");
  }
  if (!(s.spr.delta_x > 0 && s.spr.delta_x <= 1)) throw ValidationError("optimizer.spr.delta_x", "must lie in (0, 1]");
  if (!finite_nonneg(s.qos.alpha) || !finite_nonneg(s.qos.beta) || !finite_nonneg(s.qos.gamma)) {
    throw ValidationError("optimizer.qos", "weights must be >= 0");
  }
  if (!finite_pos(s.qos.delta_mbps)) throw ValidationError("optimizer.qos.delta_mbps", "must be > 0");
  if (!finite_pos(s.qos.z_floor_mbps)) throw ValidationError("optimizer.qos.z_floor_mbps", "must be > 0");
  if (s.queue.capacity_packets < 1) throw ValidationError("optimizer.queue.capacity_packets", "must be >= 1");
  if (!finite_pos(s.queue.packet_size_bits)) {
    throw ValidationError("optimizer.queue.packet_size_bits", "must be > 0");
  }
  if (!(s.queue.loss_target > 0 && s.queue.loss_target < 1)) {
    throw ValidationError("optimizer.queue.loss_target", "must lie in (0, 1)");
  }
  if (s.queue.smoothing_window < 1) throw ValidationError("optimizer.queue.smoothing_window", "must be >= 1");

  return s;
}

SprRow proportional_split(const Scenario& scenario, std::size_t group) {
  const FlowGroupInstance& g = scenario.groups.at(group);
  SprRow row;
  row.links = g.allowed_links;
  double total = 0;
  for (std::size_t e : row.links) total += scenario.links[e].nominal_capacity_mbps;
  for (std::size_t e : row.links) row.split.push_back(scenario.links[e].nominal_capacity_mbps / total);
  return row;
}

SprPolicy proportional_policy(const Scenario& scenario) {
  SprPolicy policy;
  for (std::size_t k = 0; k < scenario.groups.size(); ++k) {
    policy.rows.push_back(proportional_split(scenario, k));
  }
  return policy;
}

}  // namespace sdwan
