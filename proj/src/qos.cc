#include "sdwan/qos.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <tuple>

namespace sdwan {

namespace {

// Slack for repeated subtraction of a non-dyadic delta from a capacity.
constexpr double kCapacityEps = 1e-9;

// The part of the problem one optimizer instance sees.
struct Scope {
  std::vector<std::size_t> pairs;               // owned pair indices, ascending
  std::vector<std::vector<std::size_t>> shared; // per link: F(e) + e within scope, empty outside
  std::vector<double> capacity_mbps;
};

Scope full_scope(const Scenario& scenario, const QosSnapshot& snapshot) {
  Scope s;
  for (std::size_t p = 0; p < snapshot.pairs.size(); ++p) s.pairs.push_back(p);
  s.shared.resize(scenario.links.size());
  for (std::size_t e = 0; e < scenario.links.size(); ++e) {
    s.shared[e].push_back(e);
    for (std::size_t f : scenario.links[e].bottleneck_group) s.shared[e].push_back(f);
  }
  s.capacity_mbps = snapshot.capacity_mbps;
  return s;
}

Scope local_scope(const Scenario& scenario, const QosSnapshot& snapshot, const std::string& node,
                  std::vector<double> capacity_mbps) {
  Scope s;
  const std::size_t n = scenario.links.size();
  std::vector<bool> local(n, false);
  for (std::size_t e = 0; e < n; ++e) {
    local[e] = scenario.links[e].src == node || scenario.links[e].dst == node;
  }
  s.shared.resize(n);
  for (std::size_t e = 0; e < n; ++e) {
    if (!local[e]) continue;
    s.shared[e].push_back(e);
    for (std::size_t f : scenario.links[e].bottleneck_group) {
      if (local[f]) s.shared[e].push_back(f);
    }
  }
  for (std::size_t p = 0; p < snapshot.pairs.size(); ++p) {
    if (scenario.groups[snapshot.pairs[p].group].src == node) s.pairs.push_back(p);
  }
  s.capacity_mbps = std::move(capacity_mbps);
  return s;
}

const FlowGroupInstance& group_of(const Scenario& scenario, const QosDemand& pair) {
  return scenario.groups[pair.group];
}

bool is_high(const Scenario& scenario, const QosDemand& pair) {
  return group_of(scenario, pair).priority == Priority::kHigh;
}

QosSolution empty_solution(const Scenario& scenario, const QosSnapshot& snapshot) {
  QosSolution sol;
  const std::size_t m = snapshot.pairs.size();
  sol.rate_mbps.assign(m, 0.0);
  sol.rejected_mbps.resize(m);
  sol.delay_slack_s.resize(m);
  sol.loss_slack.resize(m);
  for (std::size_t p = 0; p < m; ++p) {
    const QosDemand& d = snapshot.pairs[p];
    const FlowGroupInstance& g = group_of(scenario, d);
    sol.delay_slack_s[p] = std::max(0.0, d.delay_s - g.sla_delay_s);
    sol.loss_slack[p] = std::max(0.0, d.loss - g.sla_loss);
  }
  sol.rem_capacity_mbps.assign(scenario.links.size(), 0.0);
  return sol;
}

void finish(const Scenario& scenario, const QosSnapshot& snapshot, const QosWeights& weights,
            QosSolution& sol) {
  for (std::size_t p = 0; p < snapshot.pairs.size(); ++p) {
    sol.rejected_mbps[p] = std::max(0.0, snapshot.pairs[p].demand_mbps - sol.rate_mbps[p]);
  }
  sol.objective = qos_objective(scenario, snapshot, sol.rate_mbps, weights);
}

void run_high(const Scenario& scenario, const QosSnapshot& snapshot, const Scope& scope,
              QosSolution& sol) {
  for (std::size_t e = 0; e < scope.shared.size(); ++e) {
    if (scope.shared[e].empty()) continue;
    sol.rem_capacity_mbps[e] = scope.capacity_mbps[e];
  }
  std::vector<double> high_demand_on(scenario.links.size(), 0.0);
  for (std::size_t p : scope.pairs) {
    const QosDemand& d = snapshot.pairs[p];
    if (is_high(scenario, d)) high_demand_on[d.link] += d.demand_mbps;
  }

  // Link by link, then group by group.
  std::vector<std::size_t> order;
  for (std::size_t p : scope.pairs) {
    if (is_high(scenario, snapshot.pairs[p])) order.push_back(p);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return snapshot.pairs[a].link < snapshot.pairs[b].link;
  });

  for (std::size_t p : order) {
    const QosDemand& d = snapshot.pairs[p];
    const std::vector<std::size_t>& shared = scope.shared[d.link];
    double competing = 0;
    double bottleneck = std::numeric_limits<double>::infinity();
    double room = std::numeric_limits<double>::infinity();
    for (std::size_t f : shared) {
      competing += high_demand_on[f];
      bottleneck = std::min(bottleneck, scope.capacity_mbps[f]);
      room = std::min(room, sol.rem_capacity_mbps[f]);
    }
    double z = 0;
    if (competing > 0) z = std::min(d.demand_mbps, bottleneck * d.demand_mbps / competing);
    // Only binds when bottleneck sharing is not transitive.
    z = std::max(0.0, std::min(z, room));
    sol.rate_mbps[p] = z;
    for (std::size_t f : shared) sol.rem_capacity_mbps[f] -= z;
  }
}

void run_low(const Scenario& scenario, const QosSnapshot& snapshot, const Scope& scope,
             const QosWeights& weights, QosSolution& sol, double& total,
             const QosGrantObserver& observer) {
  std::vector<std::size_t> candidates;
  for (std::size_t p : scope.pairs) {
    const QosDemand& d = snapshot.pairs[p];
    if (!is_high(scenario, d) && d.demand_mbps > 0) candidates.push_back(p);
  }
  const double delta = weights.delta_mbps;
  auto has_room = [&](std::size_t e) {
    for (std::size_t f : scope.shared[e]) {
      if (sol.rem_capacity_mbps[f] < delta - kCapacityEps) return false;
    }
    return true;
  };

  for (;;) {
    std::size_t chosen = snapshot.pairs.size();
    double chosen_term = -std::numeric_limits<double>::infinity();
    for (std::size_t p : candidates) {
      const QosDemand& d = snapshot.pairs[p];
      if (!has_room(d.link)) continue;
      const double term = qos_objective_term(d, sol.rate_mbps[p], group_of(scenario, d), weights);
      if (term > chosen_term) {
        chosen_term = term;
        chosen = p;
      }
    }
    if (chosen == snapshot.pairs.size()) break;  // no spare bandwidth anywhere

    const QosDemand& d = snapshot.pairs[chosen];
    const double next = sol.rate_mbps[chosen] + delta;
    const double next_term = qos_objective_term(d, next, group_of(scenario, d), weights);
    if (!(next_term < chosen_term)) break;

    sol.rate_mbps[chosen] = next;
    for (std::size_t f : scope.shared[d.link]) sol.rem_capacity_mbps[f] -= delta;
    total += next_term - chosen_term;
    ++sol.iterations;
    sol.objective_trace.push_back(total);
    if (observer) observer(sol, chosen);
  }
}

}  // namespace

void validate(const Scenario& scenario, const QosSnapshot& snapshot) {
  if (snapshot.capacity_mbps.size() != scenario.links.size()) {
    throw std::invalid_argument("snapshot needs one capacity per overlay link");
  }
  for (double c : snapshot.capacity_mbps) {
    if (!(c >= 0)) throw std::invalid_argument("capacities must be >= 0");
  }
  for (std::size_t p = 0; p < snapshot.pairs.size(); ++p) {
    const QosDemand& d = snapshot.pairs[p];
    if (d.group >= scenario.groups.size() || d.link >= scenario.links.size()) {
      throw std::invalid_argument("snapshot pair refers to an unknown group or link");
    }
    const auto& allowed = scenario.groups[d.group].allowed_links;
    if (!std::binary_search(allowed.begin(), allowed.end(), d.link)) {
      throw std::invalid_argument("link " + scenario.links[d.link].id + " is not allowed for group " +
                                  scenario.groups[d.group].id);
    }
    if (!(d.demand_mbps >= 0) || !(d.delay_s >= 0) || !(d.loss >= 0 && d.loss <= 1)) {
      throw std::invalid_argument("snapshot demand, delay and loss must be nonnegative, loss <= 1");
    }
    if (p > 0) {
      const QosDemand& prev = snapshot.pairs[p - 1];
      if (std::tie(prev.group, prev.link) >= std::tie(d.group, d.link)) {
        throw std::invalid_argument("snapshot pairs must be unique and sorted by (group, link)");
      }
    }
  }
}

double qos_objective_term(const QosDemand& pair, double rate_mbps, const FlowGroupInstance& group,
                          const QosWeights& weights) {
  const double rejected = std::max(0.0, pair.demand_mbps - rate_mbps);
  const double slack = std::max(0.0, pair.delay_s - group.sla_delay_s) +
                       std::max(0.0, pair.loss - group.sla_loss);
  double fairness = 0;
  if (pair.demand_mbps > 0) {
    fairness = pair.demand_mbps * std::log(std::max(rate_mbps, weights.z_floor_mbps));
  }
  return weights.alpha * rejected - weights.beta * fairness + weights.gamma * slack * rate_mbps;
}

double qos_objective(const Scenario& scenario, const QosSnapshot& snapshot,
                     std::span<const double> rate_mbps, const QosWeights& weights) {
  double total = 0;
  for (std::size_t p = 0; p < snapshot.pairs.size(); ++p) {
    const QosDemand& d = snapshot.pairs[p];
    total += qos_objective_term(d, rate_mbps[p], group_of(scenario, d), weights);
  }
  return total;
}

QosSolution allocate_high_priority(const Scenario& scenario, const QosSnapshot& snapshot) {
  validate(scenario, snapshot);
  QosSolution sol = empty_solution(scenario, snapshot);
  run_high(scenario, snapshot, full_scope(scenario, snapshot), sol);
  finish(scenario, snapshot, scenario.qos, sol);
  sol.objective_trace = {sol.objective};
  return sol;
}

QosSolution allocate_low_priority_local_search(const Scenario& scenario, const QosSnapshot& snapshot,
                                               const QosWeights& weights, QosSolution partial,
                                               const QosGrantObserver& observer) {
  validate(scenario, snapshot);
  if (!(weights.delta_mbps > 0)) throw std::invalid_argument("delta must be > 0");
  if (partial.rate_mbps.size() != snapshot.pairs.size() ||
      partial.rem_capacity_mbps.size() != scenario.links.size()) {
    throw std::invalid_argument("partial solution does not match the snapshot");
  }
  double total = qos_objective(scenario, snapshot, partial.rate_mbps, weights);
  partial.objective_trace = {total};
  partial.iterations = 0;
  run_low(scenario, snapshot, full_scope(scenario, snapshot), weights, partial, total, observer);
  finish(scenario, snapshot, weights, partial);
  return partial;
}

QosResult optimize_qos_centralized(const Scenario& scenario, const QosSnapshot& snapshot,
                                   const QosWeights& weights) {
  QosResult out;
  out.solution = allocate_low_priority_local_search(
      scenario, snapshot, weights, allocate_high_priority(scenario, snapshot));
  out.policy = derive_qos_policy(scenario, snapshot, out.solution.rate_mbps);
  return out;
}

QosResult optimize_qos_distributed(const Scenario& scenario, const QosSnapshot& snapshot,
                                   const std::vector<std::vector<double>>& capacity_by_node,
                                   const QosWeights& weights) {
  validate(scenario, snapshot);
  if (!(weights.delta_mbps > 0)) throw std::invalid_argument("delta must be > 0");
  if (capacity_by_node.size() != scenario.nodes.size()) {
    throw std::invalid_argument("need one capacity view per node");
  }
  QosSolution sol = empty_solution(scenario, snapshot);
  std::vector<double> rem(scenario.links.size(), 0.0);
  double total = qos_objective(scenario, snapshot, sol.rate_mbps, weights);
  sol.objective_trace = {total};

  for (std::size_t n = 0; n < scenario.nodes.size(); ++n) {
    if (capacity_by_node[n].size() != scenario.links.size()) {
      throw std::invalid_argument("capacity view of node " + scenario.nodes[n].id + " has wrong size");
    }
    const std::string& node = scenario.nodes[n].id;
    const Scope scope = local_scope(scenario, snapshot, node, capacity_by_node[n]);
    if (scope.pairs.empty()) continue;
    // Routers share nothing: each starts from its own capacity view.
    QosSolution local = sol;
    run_high(scenario, snapshot, scope, local);
    total = qos_objective(scenario, snapshot, local.rate_mbps, weights);
    run_low(scenario, snapshot, scope, weights, local, total, {});
    for (std::size_t p : scope.pairs) sol.rate_mbps[p] = local.rate_mbps[p];
    for (std::size_t e = 0; e < scenario.links.size(); ++e) {
      if (scenario.links[e].src == node) rem[e] = local.rem_capacity_mbps[e];
    }
    sol.iterations = local.iterations;
    sol.objective_trace = std::move(local.objective_trace);
  }
  sol.rem_capacity_mbps = std::move(rem);
  finish(scenario, snapshot, weights, sol);

  QosResult out;
  out.policy = derive_qos_policy(scenario, snapshot, sol.rate_mbps);
  out.solution = std::move(sol);
  return out;
}

QosResult optimize_qos_oracle(const Scenario& scenario, const QosSnapshot& snapshot,
                              const QosWeights& weights, std::size_t max_points) {
  if (!(weights.delta_mbps > 0)) throw std::invalid_argument("delta must be > 0");
  QosSolution base = allocate_high_priority(scenario, snapshot);
  const Scope scope = full_scope(scenario, snapshot);

  std::vector<std::size_t> free_pairs;
  for (std::size_t p = 0; p < snapshot.pairs.size(); ++p) {
    const QosDemand& d = snapshot.pairs[p];
    // Zero-demand pairs only pay for rate, so zero is optimal for them.
    if (!is_high(scenario, d) && d.demand_mbps > 0) free_pairs.push_back(p);
  }
  const double delta = weights.delta_mbps;

  std::vector<double> rem = base.rem_capacity_mbps;
  std::vector<double> z = base.rate_mbps;
  std::vector<double> best_z = z;
  double best = std::numeric_limits<double>::infinity();
  std::size_t points = 0;
  const double fixed = qos_objective(scenario, snapshot, z, weights);
  double fixed_free = 0;
  for (std::size_t p : free_pairs) {
    fixed_free += qos_objective_term(snapshot.pairs[p], 0.0, group_of(scenario, snapshot.pairs[p]), weights);
  }
  const double base_other = fixed - fixed_free;

  // Depth-first over free pairs; partial sums carry the objective.
  std::function<void(std::size_t, double)> visit = [&](std::size_t i, double partial) {
    if (i == free_pairs.size()) {
      if (++points > max_points) throw std::length_error("oracle budget exceeded");
      if (partial < best) {
        best = partial;
        best_z = z;
      }
      return;
    }
    const std::size_t p = free_pairs[i];
    const QosDemand& d = snapshot.pairs[p];
    const FlowGroupInstance& g = group_of(scenario, d);
    double room = std::numeric_limits<double>::infinity();
    for (std::size_t f : scope.shared[d.link]) room = std::min(room, rem[f]);
    const long steps = room < 0 ? 0 : static_cast<long>(std::floor(room / delta + kCapacityEps));
    for (long s = 0; s <= steps; ++s) {
      const double rate = s * delta;
      z[p] = rate;
      for (std::size_t f : scope.shared[d.link]) rem[f] -= rate;
      visit(i + 1, partial + qos_objective_term(d, rate, g, weights));
      for (std::size_t f : scope.shared[d.link]) rem[f] += rate;
    }
    z[p] = 0;
  };
  visit(0, base_other);

  QosSolution sol = empty_solution(scenario, snapshot);
  sol.rate_mbps = best_z;
  for (std::size_t e = 0; e < scenario.links.size(); ++e) {
    sol.rem_capacity_mbps[e] = scope.capacity_mbps[e];
  }
  for (std::size_t p = 0; p < snapshot.pairs.size(); ++p) {
    for (std::size_t f : scope.shared[snapshot.pairs[p].link]) sol.rem_capacity_mbps[f] -= best_z[p];
  }
  finish(scenario, snapshot, weights, sol);
  sol.objective_trace = {sol.objective};

  QosResult out;
  out.policy = derive_qos_policy(scenario, snapshot, sol.rate_mbps);
  out.solution = std::move(sol);
  return out;
}

QosPolicy derive_qos_policy(const Scenario& scenario, const QosSnapshot& snapshot,
                            std::span<const double> rate_mbps) {
  std::vector<double> low_total(scenario.links.size(), 0.0);
  for (std::size_t p = 0; p < snapshot.pairs.size(); ++p) {
    if (!is_high(scenario, snapshot.pairs[p])) low_total[snapshot.pairs[p].link] += rate_mbps[p];
  }
  QosPolicy policy;
  for (std::size_t p = 0; p < snapshot.pairs.size(); ++p) {
    const QosDemand& d = snapshot.pairs[p];
    QosRule rule{d.group, d.link, rate_mbps[p], 0.0, std::nullopt};
    if (!is_high(scenario, d)) {
      if (low_total[d.link] > 0) rule.wfq_weight = rate_mbps[p] / low_total[d.link];
      rule.shaper_mbps = rate_mbps[p];
    }
    policy.rules.push_back(rule);
  }
  return policy;
}

namespace {

std::vector<double> raw_fixed_weights(const Scenario& scenario, const QosSnapshot& snapshot) {
  std::vector<double> w(snapshot.pairs.size());
  std::vector<double> total(scenario.links.size(), 0.0);
  for (std::size_t p = 0; p < snapshot.pairs.size(); ++p) {
    const QosDemand& d = snapshot.pairs[p];
    w[p] = d.demand_mbps / (group_of(scenario, d).sla_delay_s * scenario.links[d.link].nominal_capacity_mbps);
    total[d.link] += w[p];
  }
  for (std::size_t p = 0; p < snapshot.pairs.size(); ++p) {
    const double t = total[snapshot.pairs[p].link];
    w[p] = t > 0 ? w[p] / t : 0.0;
  }
  return w;
}

}  // namespace

QosPolicy fixed_weights(const Scenario& scenario, const QosSnapshot& peaks) {
  validate(scenario, peaks);
  const std::vector<double> w = raw_fixed_weights(scenario, peaks);
  QosPolicy policy;
  policy.strict_priority = false;
  for (std::size_t p = 0; p < peaks.pairs.size(); ++p) {
    const QosDemand& d = peaks.pairs[p];
    policy.rules.push_back({d.group, d.link, w[p] * scenario.links[d.link].nominal_capacity_mbps, w[p],
                            std::nullopt});
  }
  return policy;
}

std::vector<double> fixed_weights_allocation(const Scenario& scenario, const QosSnapshot& snapshot) {
  validate(scenario, snapshot);
  const std::vector<double> w = raw_fixed_weights(scenario, snapshot);
  const Scope scope = full_scope(scenario, snapshot);
  std::vector<std::vector<std::size_t>> on_link(scenario.links.size());
  for (std::size_t p = 0; p < snapshot.pairs.size(); ++p) on_link[snapshot.pairs[p].link].push_back(p);

  std::vector<FillConstraint> constraints;
  for (std::size_t e = 0; e < scenario.links.size(); ++e) {
    FillConstraint c;
    c.capacity = snapshot.capacity_mbps[e];
    for (std::size_t f : scope.shared[e]) c.members.insert(c.members.end(), on_link[f].begin(), on_link[f].end());
    if (!c.members.empty()) constraints.push_back(std::move(c));
  }
  std::vector<double> demand;
  for (const QosDemand& d : snapshot.pairs) demand.push_back(d.demand_mbps);
  return weighted_fill(demand, w, constraints);
}

std::vector<double> weighted_fill(std::span<const double> demand, std::span<const double> weight,
                                  std::span<const FillConstraint> constraints) {
  const std::size_t n = demand.size();
  if (weight.size() != n) throw std::invalid_argument("weighted_fill needs one weight per member");
  std::vector<double> rate(n, 0.0);
  std::vector<bool> active(n, false);
  std::size_t remaining = 0;
  for (std::size_t i = 0; i < n; ++i) {
    active[i] = weight[i] > 0 && demand[i] > 0;
    remaining += active[i];
  }
  std::vector<double> left(constraints.size());
  for (std::size_t c = 0; c < constraints.size(); ++c) {
    left[c] = constraints[c].capacity;
    for (std::size_t i : constraints[c].members) {
      if (i >= n) throw std::invalid_argument("fill constraint refers to an unknown member");
    }
  }

  while (remaining > 0) {
    // Fill level at which the next member or constraint saturates.
    double step = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i]) step = std::min(step, (demand[i] - rate[i]) / weight[i]);
    }
    std::vector<double> speed(constraints.size(), 0.0);
    for (std::size_t c = 0; c < constraints.size(); ++c) {
      for (std::size_t i : constraints[c].members) {
        if (active[i]) speed[c] += weight[i];
      }
      if (speed[c] > 0) step = std::min(step, std::max(0.0, left[c]) / speed[c]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i]) rate[i] += weight[i] * step;
    }
    for (std::size_t c = 0; c < constraints.size(); ++c) left[c] -= speed[c] * step;

    auto freeze = [&](std::size_t i) {
      if (active[i]) {
        active[i] = false;
        --remaining;
      }
    };
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i] && rate[i] >= demand[i] * (1 - 1e-12)) {
        rate[i] = demand[i];
        freeze(i);
      }
    }
    for (std::size_t c = 0; c < constraints.size(); ++c) {
      if (speed[c] > 0 && left[c] <= 1e-12 * std::max(1.0, constraints[c].capacity)) {
        for (std::size_t i : constraints[c].members) freeze(i);
      }
    }
  }
  return rate;
}

}  // namespace sdwan
