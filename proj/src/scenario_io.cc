#include "sdwan/scenario_io.h"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sdwan {

using nlohmann::json;

namespace {

// Wraps a JSON node with its path so errors can name the offending field.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {}

  bool has(const char* key) const { return node_.is_object() && node_.contains(key); }

  Reader at(const char* key) const {
    if (!has(key)) throw ValidationError(path_ + "." + key, "missing field");
    return Reader(node_.at(key), path_ + "." + key);
  }

  std::vector<Reader> items(const char* key) const {
    std::vector<Reader> out;
    if (!has(key)) return out;
    const json& arr = node_.at(key);
    if (!arr.is_array()) throw ValidationError(path_ + "." + key, "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      out.emplace_back(arr[i], path_ + "." + key + "[" + std::to_string(i) + "]");
    }
    return out;
  }

  std::string str(const char* key) const {
    Reader r = at(key);
    if (!r.node_.is_string()) throw ValidationError(r.path_, "expected a string");
    return r.node_.get<std::string>();
  }

  double num(const char* key) const {
    Reader r = at(key);
    if (!r.node_.is_number()) throw ValidationError(r.path_, "expected a number");
    return r.node_.get<double>();
  }

  double num_or(const char* key, double fallback) const { return has(key) ? num(key) : fallback; }

  std::vector<std::string> strings(const char* key) const {
    std::vector<std::string> out;
    for (const Reader& item : items(key)) {
      if (!item.node_.is_string()) throw ValidationError(item.path_, "expected a string");
      out.push_back(item.node_.get<std::string>());
    }
    return out;
  }

  template <typename Parse>
  auto parsed(const char* key, Parse parse) const {
    const std::string text = str(key);
    try {
      return parse(text);
    } catch (const ValidationError& e) {
      throw ValidationError(path_ + "." + key, e.what());
    }
  }

  const std::string& path() const { return path_; }

 private:
  const json& node_;
  std::string path_;
};

void read_optimizer(const Reader& opt, Scenario& s) {
  if (opt.has("spr")) {
    Reader r = opt.at("spr");
    s.spr.alpha = r.num_or("alpha", s.spr.alpha);
    s.spr.beta = r.num_or("beta", s.spr.beta);
    s.spr.gamma = r.num_or("gamma", s.spr.gamma);
    s.spr.delta_x = r.num_or("delta_x", s.spr.delta_x);
  }
  if (opt.has("qos")) {
    Reader r = opt.at("qos");
    s.qos.alpha = r.num_or("alpha", s.qos.alpha);
    s.qos.beta = r.num_or("beta", s.qos.beta);
    s.qos.gamma = r.num_or("gamma", s.qos.gamma);
    s.qos.delta_mbps = r.num_or("delta_mbps", s.qos.delta_mbps);
    s.qos.z_floor_mbps = r.num_or("z_floor_mbps", s.qos.z_floor_mbps);
  }
  if (opt.has("queue")) {
    Reader r = opt.at("queue");
    s.queue.capacity_packets = static_cast<int>(r.num_or("capacity_packets", s.queue.capacity_packets));
    s.queue.packet_size_bits = r.num_or("packet_size_bits", s.queue.packet_size_bits);
    s.queue.loss_target = r.num_or("loss_target", s.queue.loss_target);
    s.queue.smoothing_window = static_cast<int>(r.num_or("smoothing_window", s.queue.smoothing_window));
  }
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("$", std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("$", "expected a JSON object");
  const Reader root(doc, "$");

  Scenario s;
  if (root.has("name")) s.name = root.str("name");
  if (root.has("seed")) {
    const json& seed = doc.at("seed");
    if (!seed.is_number_unsigned()) throw ValidationError("$.seed", "expected a non-negative integer");
    s.seed = seed.get<std::uint64_t>();
  }

  for (const Reader& r : root.items("networks")) {
    s.networks.push_back({r.str("id"), r.parsed("kind", parse_network_kind)});
  }
  for (const Reader& r : root.items("nodes")) {
    s.nodes.push_back({r.str("id"), r.parsed("role", parse_node_role)});
  }
  for (const Reader& r : root.items("ports")) {
    s.ports.push_back({r.str("node"), r.str("network"), r.num("capacity_mbps")});
  }
  for (const Reader& r : root.items("overlay_links")) {
    OverlayLink link;
    link.id = r.str("id");
    link.src = r.str("src");
    link.dst = r.str("dst");
    link.network = r.str("network");
    link.nominal_capacity_mbps = r.num("capacity_mbps");
    link.prop_delay_s = r.num("prop_delay_s");
    s.links.push_back(std::move(link));
  }
  for (const Reader& r : root.items("flow_groups")) {
    FlowGroupInstance g;
    g.id = r.str("id");
    g.src = r.str("src");
    g.dst = r.str("dst");
    g.cls = r.parsed("class", parse_traffic_class);
    g.priority = r.has("priority") ? r.parsed("priority", parse_priority) : priority_of(g.cls);
    const SlaBounds sla = default_sla(g.cls);
    g.sla_delay_s = r.num_or("sla_delay_s", sla.delay_s);
    g.sla_loss = r.num_or("sla_loss", sla.loss);
    g.demand_mbps = r.num_or("demand_mbps", 0.0);
    g.allowed_networks = r.strings("allowed_networks");
    s.groups.push_back(std::move(g));
  }
  for (const Reader& r : root.items("traffic_profiles")) {
    TrafficProfile p;
    p.group = r.str("group");
    p.base_mbps = r.num("base_mbps");
    p.diurnal_amplitude = r.num_or("diurnal_amplitude", 0.0);
    p.period_s = r.num_or("period_s", p.period_s);
    p.phase_s = r.num_or("phase_s", 0.0);
    p.noise_std = r.num_or("noise_std", 0.0);
    s.traffic.push_back(std::move(p));
  }
  for (const Reader& r : root.items("cross_traffic")) {
    CrossTrafficProfile c;
    c.node = r.str("node");
    c.network = r.str("network");
    const std::string shape = r.str("shape");
    if (shape == "piecewise") {
      c.shape = CrossTrafficShape::kPiecewise;
      for (const Reader& step : r.items("steps")) {
        c.steps.push_back({step.num("start_s"), step.num("rate_mbps")});
      }
    } else if (shape == "sinusoid") {
      c.shape = CrossTrafficShape::kSinusoid;
      c.base_mbps = r.num("base_mbps");
      c.amplitude_mbps = r.num_or("amplitude_mbps", 0.0);
      c.period_s = r.num_or("period_s", c.period_s);
      c.phase_s = r.num_or("phase_s", 0.0);
    } else {
      throw ValidationError(r.path() + ".shape", "expected 'piecewise' or 'sinusoid'");
    }
    c.noise_std = r.num_or("noise_std", 0.0);
    s.cross_traffic.push_back(std::move(c));
  }
  if (root.has("optimizer")) read_optimizer(root.at("optimizer"), s);
  if (root.has("loops")) {
    Reader r = root.at("loops");
    s.loops.duration_s = r.num_or("duration_s", s.loops.duration_s);
    s.loops.tick_s = r.num_or("tick_s", s.loops.tick_s);
    s.loops.monitor_period_s = r.num_or("monitor_period_s", s.loops.monitor_period_s);
    s.loops.qos_period_s = r.num_or("qos_period_s", s.loops.qos_period_s);
    s.loops.spr_period_s = r.num_or("spr_period_s", s.loops.spr_period_s);
    s.loops.tcp_headroom = r.num_or("tcp_headroom", s.loops.tcp_headroom);
    s.loops.loss_tolerance = r.num_or("loss_tolerance", s.loops.loss_tolerance);
  }
  return validate_scenario(std::move(s));
}

std::string format_scenario(const Scenario& s) {
  json doc = json::object();
  doc["name"] = s.name;
  doc["seed"] = s.seed;
  doc["networks"] = json::array();
  for (const auto& n : s.networks) doc["networks"].push_back({{"id", n.id}, {"kind", to_string(n.kind)}});
  doc["nodes"] = json::array();
  for (const auto& n : s.nodes) doc["nodes"].push_back({{"id", n.id}, {"role", to_string(n.role)}});
  doc["ports"] = json::array();
  for (const auto& p : s.ports) {
    doc["ports"].push_back({{"node", p.node}, {"network", p.network}, {"capacity_mbps", p.capacity_mbps}});
  }
  doc["overlay_links"] = json::array();
  for (const auto& l : s.links) {
    doc["overlay_links"].push_back({{"id", l.id},
                                    {"src", l.src},
                                    {"dst", l.dst},
                                    {"network", l.network},
                                    {"capacity_mbps", l.nominal_capacity_mbps},
                                    {"prop_delay_s", l.prop_delay_s}});
  }
  doc["flow_groups"] = json::array();
  for (const auto& g : s.groups) {
    json item = {{"id", g.id},
                 {"src", g.src},
                 {"dst", g.dst},
                 {"class", to_string(g.cls)},
                 {"priority", to_string(g.priority)},
                 {"sla_delay_s", g.sla_delay_s},
                 {"sla_loss", g.sla_loss},
                 {"demand_mbps", g.demand_mbps}};
    if (!g.allowed_networks.empty()) item["allowed_networks"] = g.allowed_networks;
    doc["flow_groups"].push_back(std::move(item));
  }
  doc["traffic_profiles"] = json::array();
  for (const auto& p : s.traffic) {
    doc["traffic_profiles"].push_back({{"group", p.group},
                                       {"base_mbps", p.base_mbps},
                                       {"diurnal_amplitude", p.diurnal_amplitude},
                                       {"period_s", p.period_s},
                                       {"phase_s", p.phase_s},
                                       {"noise_std", p.noise_std}});
  }
  doc["cross_traffic"] = json::array();
  for (const auto& c : s.cross_traffic) {
    json item = {{"node", c.node}, {"network", c.network}, {"noise_std", c.noise_std}};
    if (c.shape == CrossTrafficShape::kPiecewise) {
      item["shape"] = "piecewise";
      item["steps"] = json::array();
      for (const auto& step : c.steps) {
        item["steps"].push_back({{"start_s", step.start_s}, {"rate_mbps", step.rate_mbps}});
      }
    } else {
      item["shape"] = "sinusoid";
      item["base_mbps"] = c.base_mbps;
      item["amplitude_mbps"] = c.amplitude_mbps;
      item["period_s"] = c.period_s;
      item["phase_s"] = c.phase_s;
    }
    doc["cross_traffic"].push_back(std::move(item));
  }
  doc["optimizer"] = {
      {"spr", {{"alpha", s.spr.alpha}, {"beta", s.spr.beta}, {"gamma", s.spr.gamma}, {"delta_x", s.spr.delta_x}}},
      {"qos",
       {{"alpha", s.qos.alpha},
        {"beta", s.qos.beta},
        {"gamma", s.qos.gamma},
        {"delta_mbps", s.qos.delta_mbps},
        {"z_floor_mbps", s.qos.z_floor_mbps}}},
      {"queue",
       {{"capacity_packets", s.queue.capacity_packets},
        {"packet_size_bits", s.queue.packet_size_bits},
        {"loss_target", s.queue.loss_target},
        {"smoothing_window", s.queue.smoothing_window}}}};
  doc["loops"] = {{"duration_s", s.loops.duration_s},
                  {"tick_s", s.loops.tick_s},
                  {"monitor_period_s", s.loops.monitor_period_s},
                  {"qos_period_s", s.loops.qos_period_s},
                  {"spr_period_s", s.loops.spr_period_s},
                  {"tcp_headroom", s.loops.tcp_headroom},
                  {"loss_tolerance", s.loops.loss_tolerance}};
  return doc.dump(2) + "\n";
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read scenario file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str());
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scenario file " + path.string());
  out << format_scenario(scenario);
}

}  // namespace sdwan
