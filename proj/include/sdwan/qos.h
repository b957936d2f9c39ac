#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "sdwan/model.h"

namespace sdwan {

// One (group, link) pair of the QoS problem.
struct QosDemand {
  std::size_t group = 0;
  std::size_t link = 0;
  double demand_mbps = 0;  // d = b_k * x_e^k
  double delay_s = 0;      // last measured, frozen during one optimization
  double loss = 0;
};

struct QosSnapshot {
  std::vector<QosDemand> pairs;        // strictly sorted by (group, link)
  std::vector<double> capacity_mbps;   // per link: theta*C_e, or C~_e with SABE
};

void validate(const Scenario& scenario, const QosSnapshot& snapshot);

struct QosSolution {
  std::vector<double> rate_mbps;          // z, aligned with snapshot pairs
  std::vector<double> rem_capacity_mbps;  // per link
  std::vector<double> rejected_mbps;      // h
  std::vector<double> delay_slack_s;      // y
  std::vector<double> loss_slack;         // v
  double objective = 0;
  int iterations = 0;                     // accepted low-priority grants
  std::vector<double> objective_trace;    // total objective after each grant
};

// alpha h - beta d log(max(z, z_floor)) + gamma (y + v) z
double qos_objective_term(const QosDemand& pair, double rate_mbps, const FlowGroupInstance& group,
                          const QosWeights& weights);

double qos_objective(const Scenario& scenario, const QosSnapshot& snapshot,
                     std::span<const double> rate_mbps, const QosWeights& weights);

// High priority pairs get min(d, c * d / sum of high demand sharing the
// bottleneck); low priority pairs start at zero.
QosSolution allocate_high_priority(const Scenario& scenario, const QosSnapshot& snapshot);

// Called after every accepted grant with the index of the pair that grew.
using QosGrantObserver = std::function<void(const QosSolution&, std::size_t pair)>;

// Repeatedly grants delta to the low priority pair with the largest objective
// term, among links whose whole bottleneck still has delta to spare. Stops when
// no link has room or the chosen grant would not lower the objective.
QosSolution allocate_low_priority_local_search(const Scenario& scenario, const QosSnapshot& snapshot,
                                               const QosWeights& weights, QosSolution partial,
                                               const QosGrantObserver& observer = {});

struct QosResult {
  QosSolution solution;
  QosPolicy policy;
};

QosResult optimize_qos_centralized(const Scenario& scenario, const QosSnapshot& snapshot,
                                   const QosWeights& weights);

// Each access router runs the same search over the groups it sends and the
// links it terminates, seeing only the bottleneck sharing among those links and
// its own capacity view. `capacity_by_node[n]` is node n's per-link capacity.
QosResult optimize_qos_distributed(const Scenario& scenario, const QosSnapshot& snapshot,
                                   const std::vector<std::vector<double>>& capacity_by_node,
                                   const QosWeights& weights);

// Exhaustive search over the delta grid of low priority rates, high priority
// fixed as in allocate_high_priority. Throws std::length_error when the
// instance exceeds max_points candidate allocations.
QosResult optimize_qos_oracle(const Scenario& scenario, const QosSnapshot& snapshot,
                              const QosWeights& weights, std::size_t max_points = 20'000'000);

// WFQ weight = z normalized over the link's low priority pairs, shaper = z.
// High priority pairs carry their rate but no weight and no shaper.
QosPolicy derive_qos_policy(const Scenario& scenario, const QosSnapshot& snapshot,
                            std::span<const double> rate_mbps);

// Fixed weights from traffic peaks (the snapshot demands): w = peak / (D_k C_e),
// normalized per link over every group; no shapers, no strict priority.
QosPolicy fixed_weights(const Scenario& scenario, const QosSnapshot& peaks);

// Rates the fixed weights would induce on the snapshot: weighted max-min
// filling of each bottleneck, capped at demand.
std::vector<double> fixed_weights_allocation(const Scenario& scenario, const QosSnapshot& snapshot);

// Weighted progressive filling. Each member i grows at speed weight[i] until it
// reaches demand[i] or one of its constraints runs out of capacity. Members with
// zero weight receive nothing.
struct FillConstraint {
  std::vector<std::size_t> members;
  double capacity = 0;
};
std::vector<double> weighted_fill(std::span<const double> demand, std::span<const double> weight,
                                  std::span<const FillConstraint> constraints);

}  // namespace sdwan
