#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sdwan {

enum class NetworkKind { kMpls, kInternet };
enum class NodeRole { kHub, kSpoke };
enum class TrafficClass { kCritical, kVoip, kOffice, kBulk };
enum class Priority { kHigh, kLow };

inline constexpr TrafficClass kAllClasses[] = {
    TrafficClass::kCritical, TrafficClass::kVoip, TrafficClass::kOffice, TrafficClass::kBulk};

std::string_view to_string(NetworkKind kind);
std::string_view to_string(NodeRole role);
std::string_view to_string(TrafficClass cls);
std::string_view to_string(Priority priority);

NetworkKind parse_network_kind(std::string_view text);
NodeRole parse_node_role(std::string_view text);
TrafficClass parse_traffic_class(std::string_view text);
Priority parse_priority(std::string_view text);

// Critical and VoIP are protected by strict priority, Office and Bulk share the rest.
Priority priority_of(TrafficClass cls);

struct SlaBounds {
  double delay_s = 0;
  double loss = 0;
};

// Class defaults: Critical 40 ms / 0 %, VoIP 60 ms / 2 %, Office 250 ms / 5 %, Bulk 800 ms / 10 %.
SlaBounds default_sla(TrafficClass cls);

struct TransportNetwork {
  std::string id;
  NetworkKind kind = NetworkKind::kMpls;
  bool operator==(const TransportNetwork&) const = default;
};

struct Node {
  std::string id;
  NodeRole role = NodeRole::kSpoke;
  bool operator==(const Node&) const = default;
};

// Access line of one node on one transport network. Every overlay link that
// terminates on the port competes for its capacity inside the WAN.
struct UnderlayPort {
  std::string node;
  std::string network;
  double capacity_mbps = 0;
  bool operator==(const UnderlayPort&) const = default;
};

struct OverlayLink {
  std::string id;
  std::string src;
  std::string dst;
  std::string network;
  double nominal_capacity_mbps = 0;
  double prop_delay_s = 0;

  // Derived by validate_scenario.
  std::vector<std::size_t> ports;             // indices into Scenario::ports
  std::vector<std::size_t> bottleneck_group;  // F(e): other links sharing a port, sorted

  bool operator==(const OverlayLink&) const = default;
};

struct FlowGroupInstance {
  std::string id;
  std::string src;
  std::string dst;
  TrafficClass cls = TrafficClass::kBulk;
  Priority priority = Priority::kLow;
  double sla_delay_s = 0;
  double sla_loss = 0;
  double demand_mbps = 0;
  // Empty means every network that has a link for the OD pair.
  std::vector<std::string> allowed_networks;

  // Derived by validate_scenario: E_k, sorted link indices.
  std::vector<std::size_t> allowed_links;

  bool operator==(const FlowGroupInstance&) const = default;
};

struct LinkMeasurement {
  std::size_t link = 0;
  double interval_end_s = 0;
  double delay_s = 0;
  double loss = 0;
  double jitter_s = 0;
  double throughput_mbps = 0;
  // Only known inside the simulator; used to score the estimator.
  std::optional<double> true_cross_traffic_mbps;
};

struct SprRow {
  std::vector<std::size_t> links;  // allowed links E_k
  std::vector<double> split;       // x_e^k, same order as links
};

// One row per flow group, indexed like Scenario::groups.
struct SprPolicy {
  std::vector<SprRow> rows;

  double split(std::size_t group, std::size_t link) const;
};

struct QosRule {
  std::size_t group = 0;
  std::size_t link = 0;
  double rate_mbps = 0;
  double wfq_weight = 0;
  std::optional<double> shaper_mbps;  // never set for high priority groups
};

struct QosPolicy {
  std::vector<QosRule> rules;
  // false: every group, high priority included, shares one WFQ by weight.
  bool strict_priority = true;

  const QosRule* find(std::size_t group, std::size_t link) const;
};

struct AbwEstimate {
  std::size_t link = 0;
  double rho = 0;
  double cross_traffic_mbps = 0;
  double safe_abw_mbps = 0;
  double theta = 1;
  bool saturated = false;
  bool inconsistent = false;
  bool stale = false;
};

std::string estimate_flags(const AbwEstimate& estimate);

struct TrafficProfile {
  std::string group;
  double base_mbps = 0;
  double diurnal_amplitude = 0;
  double period_s = 1200;
  double phase_s = 0;
  double noise_std = 0;
  bool operator==(const TrafficProfile&) const = default;
};

struct RateStep {
  double start_s = 0;
  double rate_mbps = 0;
  bool operator==(const RateStep&) const = default;
};

enum class CrossTrafficShape { kPiecewise, kSinusoid };

struct CrossTrafficProfile {
  std::string node;
  std::string network;
  CrossTrafficShape shape = CrossTrafficShape::kPiecewise;
  std::vector<RateStep> steps;  // piecewise constant, sorted by start
  double base_mbps = 0;         // sinusoid
  double amplitude_mbps = 0;
  double period_s = 600;
  double phase_s = 0;
  double noise_std = 0;  // relative, applied per tick
  bool operator==(const CrossTrafficProfile&) const = default;
};

struct LoopConfig {
  double duration_s = 1200;
  double tick_s = 1;
  double monitor_period_s = 10;
  double qos_period_s = 10;
  double spr_period_s = 100;
  double tcp_headroom = 1.25;
  // Measured losses at or below this fraction count as zero when checking SLAs.
  double loss_tolerance = 1e-4;
  bool operator==(const LoopConfig&) const = default;
};

struct SprWeights {
  double alpha = 1000;
  double beta = 10;
  double gamma = 0.1;
  double delta_x = 0.05;
  bool operator==(const SprWeights&) const = default;
};

struct QosWeights {
  double alpha = 10;
  double beta = 1;
  double gamma = 0.1;
  double delta_mbps = 0.25;
  double z_floor_mbps = 1e-3;
  bool operator==(const QosWeights&) const = default;
};

struct QueueConfig {
  int capacity_packets = 100;
  double packet_size_bits = 12000;
  double loss_target = 1e-5;  // drives the theta calibration
  int smoothing_window = 3;
  bool operator==(const QueueConfig&) const = default;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 1;
  std::vector<TransportNetwork> networks;
  std::vector<Node> nodes;
  std::vector<UnderlayPort> ports;
  std::vector<OverlayLink> links;
  std::vector<FlowGroupInstance> groups;
  std::vector<TrafficProfile> traffic;  // optional, at most one per group
  std::vector<CrossTrafficProfile> cross_traffic;
  SprWeights spr;
  QosWeights qos;
  QueueConfig queue;
  LoopConfig loops;

  bool operator==(const Scenario&) const = default;

  std::optional<std::size_t> find_link(std::string_view id) const;
  std::optional<std::size_t> find_group(std::string_view id) const;
  std::optional<std::size_t> find_port(std::string_view node, std::string_view network) const;
};

class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Checks every invariant of the domain types and fills the derived fields
// (port membership, F(e), E_k). Throws ValidationError on the first violation.
Scenario validate_scenario(Scenario scenario);

// F(e) for every link: links that share at least one underlay port with e.
void build_bottleneck_groups(Scenario& scenario);

// Split proportional to nominal capacity over E_k.
SprRow proportional_split(const Scenario& scenario, std::size_t group);
SprPolicy proportional_policy(const Scenario& scenario);

}  // namespace sdwan
