#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "sdwan/model.h"
#include "sdwan/qos.h"
#include "sdwan/sabe.h"

namespace sdwan {

enum class SprMode { kAtns, kMlu };
enum class QosMode { kFixedWeights, kLocalSearch, kDistributed, kOracle };

std::string_view to_string(SprMode mode);
std::string_view to_string(QosMode mode);
SprMode parse_spr_mode(std::string_view text);
QosMode parse_qos_mode(std::string_view text);

// Oracle runs enumerate every low priority allocation, so they are limited to
// toy scenarios. Throws ValidationError when the scenario is too large.
void check_oracle_budget(const Scenario& scenario);

struct RunOptions {
  SprMode spr = SprMode::kAtns;
  QosMode qos = QosMode::kFixedWeights;
  bool sabe = false;
  std::optional<std::uint64_t> seed;  // overrides the scenario seed
};

struct SchedulerInput {
  double offered_mbps = 0;
  bool high = false;
  double wfq_weight = 0;
  std::optional<double> shaper_mbps;
};

// Admitted rate per input on one sender of `capacity_mbps`. With strict
// priority, high inputs share the capacity in proportion to their offered rate
// and low inputs share what is left by WFQ weight; otherwise everything shares
// one WFQ. Shapers cap a group and its surplus goes to the others.
std::vector<double> scheduler_model(double capacity_mbps, std::span<const SchedulerInput> inputs,
                                    bool strict_priority);

// State of one (group, link) pair during the last tick.
struct PairTick {
  double offered_mbps = 0;
  double admitted_mbps = 0;   // after the sender's scheduler
  double delivered_mbps = 0;  // after WAN loss
  double delay_s = 0;
  double loss = 0;            // fraction of offered traffic lost
};

struct LinkTick {
  double admitted_mbps = 0;
  double wan_delay_s = 0;
  double wan_loss = 0;
  double cross_traffic_mbps = 0;  // sharing the link's WAN queue(s)
};

struct ClassSla {
  TrafficClass cls = TrafficClass::kCritical;
  double loss_sat_pct = 0;
  double delay_sat_pct = 0;
  double mean_loss_pct = 0;
  double mean_delay_s = 0;
  int intervals = 0;
};

// One row per traffic class in kAllClasses order.
struct SlaReport {
  std::vector<ClassSla> classes;
  const ClassSla& at(TrafficClass cls) const;
};

struct GroupInterval {
  double interval_end_s = 0;
  std::size_t group = 0;
  double offered_mbps = 0;
  double delivered_mbps = 0;
  double delay_s = 0;
  double loss = 0;
  bool delay_ok = false;
  bool loss_ok = false;
};

struct EstimateRecord {
  double interval_end_s = 0;
  AbwEstimate estimate;
};

struct RunResult {
  SlaReport report;
  std::vector<GroupInterval> intervals;
  std::vector<LinkMeasurement> measurements;  // with ground-truth cross-traffic
  std::vector<EstimateRecord> estimates;      // controller view, computed even with SABE off
};

// Flow-level closed-loop simulator. One instance is one run; it is not
// thread-safe but shares nothing with other instances.
class Simulator {
 public:
  Simulator(const Scenario& scenario, RunOptions options);

  // Advances one tick with the current policies.
  void step();
  // Closes the current monitoring interval: link measurements, SLA records.
  std::vector<LinkMeasurement> monitor();
  // Full closed loop over the scenario horizon.
  RunResult run();

  void set_spr_policy(SprPolicy policy);
  void set_qos_policy(QosPolicy policy);
  const SprPolicy& spr_policy() const { return spr_; }
  const QosPolicy& qos_policy() const { return qos_; }

  double now_s() const { return now_s_; }
  std::size_t pair_index(std::size_t group, std::size_t link) const;
  const std::vector<PairTick>& pair_ticks() const { return pair_tick_; }
  const std::vector<LinkTick>& link_ticks() const { return link_tick_; }
  const std::vector<GroupInterval>& group_intervals() const { return intervals_; }

 private:
  struct PairAccumulator {
    double offered = 0, delivered = 0, weighted_delay = 0;
    double delay_sum = 0, loss_sum = 0;
    int ticks = 0;
  };
  struct LinkAccumulator {
    double delay = 0, delay_sq = 0, loss = 0, admitted = 0, cross = 0;
    int ticks = 0;
  };

  double group_demand(std::size_t group);
  double cross_traffic(std::size_t profile);
  void apply_policies();
  void control(const std::vector<LinkMeasurement>& measurements, bool initial);
  QosSnapshot qos_snapshot(std::span<const double> demand_mbps,
                           std::span<const double> capacity_mbps) const;

  const Scenario& scenario_;
  RunOptions options_;
  SabeConfig sabe_cfg_;
  SabeEstimator controller_view_;
  SabeEstimator local_view_;

  std::vector<std::size_t> pair_offset_;            // first pair of each group
  std::vector<std::vector<std::size_t>> link_pairs_;  // pairs carried by each link
  std::vector<std::size_t> pair_group_, pair_link_;
  std::vector<std::vector<std::size_t>> port_links_;
  std::vector<std::optional<std::size_t>> port_cross_;  // cross-traffic profile per port

  std::vector<std::mt19937_64> group_rng_;
  std::vector<std::mt19937_64> cross_rng_;

  SprPolicy spr_;
  QosPolicy qos_;
  std::vector<double> split_;          // per pair
  std::vector<SchedulerInput> sched_;  // per pair, offered filled each tick

  double now_s_ = 0;
  std::vector<double> delivered_prev_;  // per group, for the congestion-control cap
  std::vector<PairTick> pair_tick_;
  std::vector<LinkTick> link_tick_;

  std::vector<PairAccumulator> pair_acc_;
  std::vector<LinkAccumulator> link_acc_;
  std::vector<double> group_offered_interval_;  // last closed interval, per group
  std::vector<double> group_offered_spr_;       // sum since the last SPR run
  int spr_intervals_ = 0;
  std::vector<double> group_peak_;              // for the fixed-weights baseline
  std::vector<double> pair_delay_last_, pair_loss_last_;
  std::vector<GroupInterval> intervals_;
};

RunResult run_scenario(const Scenario& scenario, const RunOptions& options);

}  // namespace sdwan
