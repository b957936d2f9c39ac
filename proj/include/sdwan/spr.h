#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sdwan/model.h"

namespace sdwan {

struct LinkResponse {
  double delay_s = 0;
  double loss = 0;
};

// d_e(x), l_e(x): what traffic on link e experiences when the splits put
// `controlled_mbps` of SD-WAN traffic into e's bottleneck (e and F(e)).
class LinkResponseModel {
 public:
  virtual ~LinkResponseModel() = default;
  virtual LinkResponse respond(std::size_t link, double controlled_mbps) const = 0;
};

// Last measured values, independent of the split.
class MeasuredResponse final : public LinkResponseModel {
 public:
  explicit MeasuredResponse(std::vector<LinkResponse> per_link) : per_link_(std::move(per_link)) {}
  LinkResponse respond(std::size_t link, double controlled_mbps) const override;

 private:
  std::vector<LinkResponse> per_link_;
};

// M/M/1/K prediction at the load implied by the split plus the cross-traffic
// believed to share the bottleneck.
class QueueingResponse final : public LinkResponseModel {
 public:
  QueueingResponse(const Scenario& scenario, std::vector<double> cross_traffic_mbps);
  LinkResponse respond(std::size_t link, double controlled_mbps) const override;

 private:
  const Scenario& scenario_;
  std::vector<double> cross_traffic_mbps_;
};

struct SprSnapshot {
  std::vector<double> demand_mbps;    // b_k, per group
  std::vector<double> capacity_mbps;  // per link: C_e, or C~_e with SABE
};

struct SprEvaluation {
  double objective = 0;
  double lu = 0;
  std::vector<double> delay_slack;  // u_k
  std::vector<double> loss_slack;   // v_k
};

// Objective of a split policy:
//   alpha * sum_k (u_k + v_k) + beta * LU + gamma * sum_{k, e: x>0} (d_e + l_e)
// LU is the worst ratio of bottleneck load to capacity; u_k and v_k are the
// worst SLA overshoots over the links group k actually uses.
SprEvaluation spr_objective(const Scenario& scenario, const SprPolicy& policy,
                            const SprSnapshot& snapshot, const LinkResponseModel& model,
                            const SprWeights& weights);

struct SprSolution {
  SprPolicy policy;
  double objective = 0;
  double lu = 0;
  std::vector<double> delay_slack;
  std::vector<double> loss_slack;
  int iterations = 0;
  std::vector<double> objective_trace;  // objective after each accepted move
};

// Best-improvement local search over moves of delta_x of one group's traffic
// from one allowed link to another. Stops when no move strictly improves.
SprSolution optimize_spr_local_search(const Scenario& scenario, const SprSnapshot& snapshot,
                                      const LinkResponseModel& model, const SprWeights& weights,
                                      const SprPolicy& initial);

// Device-level rule: split proportionally to nominal capacity over the allowed
// links that currently meet the group's SLA, or over all of them if none does.
// `measurements` holds at most one entry per link; links without one are eligible.
SprRow device_spr_split(const Scenario& scenario, std::size_t group,
                        std::span<const LinkMeasurement> measurements, double loss_tolerance = 0);

// Bottleneck load per link: traffic of the policy on e and every link of F(e).
std::vector<double> bottleneck_loads(const Scenario& scenario, const SprPolicy& policy,
                                     std::span<const double> demand_mbps);

}  // namespace sdwan
