#pragma once

#include <string>
#include <vector>

#include "sdwan/model.h"

namespace sdwan::testing {

// Small scenarios for unit tests. Node "h" is the hub; spokes are added on
// demand. Groups without a traffic profile send their configured demand.
class Builder {
 public:
  Builder() {
    s_.name = "toy";
    s_.seed = 11;
    s_.nodes.push_back({"h", NodeRole::kHub});
    s_.loops.duration_s = 100;
  }

  Builder& network(const std::string& id, NetworkKind kind = NetworkKind::kInternet) {
    s_.networks.push_back({id, kind});
    return *this;
  }

  Builder& node(const std::string& id, NodeRole role = NodeRole::kSpoke) {
    s_.nodes.push_back({id, role});
    return *this;
  }

  Builder& port(const std::string& node, const std::string& net, double capacity) {
    s_.ports.push_back({node, net, capacity});
    return *this;
  }

  Builder& link(const std::string& id, const std::string& src, const std::string& dst, const std::string& net,
                double capacity, double prop = 0.01) {
    OverlayLink l;
    l.id = id;
    l.src = src;
    l.dst = dst;
    l.network = net;
    l.nominal_capacity_mbps = capacity;
    l.prop_delay_s = prop;
    s_.links.push_back(l);
    return *this;
  }

  Builder& group(const std::string& id, const std::string& src, const std::string& dst, TrafficClass cls,
                 double demand) {
    FlowGroupInstance g;
    g.id = id;
    g.src = src;
    g.dst = dst;
    g.cls = cls;
    g.priority = priority_of(cls);
    g.sla_delay_s = default_sla(cls).delay_s;
    g.sla_loss = default_sla(cls).loss;
    g.demand_mbps = demand;
    s_.groups.push_back(g);
    return *this;
  }

  Builder& cross(const std::string& node, const std::string& net, double rate) {
    CrossTrafficProfile c;
    c.node = node;
    c.network = net;
    c.steps.push_back({0, rate});
    s_.cross_traffic.push_back(c);
    return *this;
  }

  Scenario& raw() { return s_; }
  Scenario build() const { return validate_scenario(s_); }

 private:
  Scenario s_;
};

// One hub, one spoke, `capacities.size()` links on distinct networks, no ports.
inline Builder parallel_links(const std::vector<double>& capacities) {
  Builder b;
  b.node("s");
  for (std::size_t i = 0; i < capacities.size(); ++i) {
    std::string net = "n" + std::to_string(i);
    b.network(net).link("e" + std::to_string(i), "h", "s", net, capacities[i]);
  }
  return b;
}

}  // namespace sdwan::testing
