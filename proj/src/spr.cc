#include "sdwan/spr.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>

#include "sdwan/queueing.h"

namespace sdwan {

namespace {

// Splits are searched on an integer grid so that moves conserve mass exactly.
constexpr std::int64_t kUnits = 1'000'000;
// A zero safe capacity would make LU infinite; this keeps it finite but huge.
constexpr double kCapacityFloorMbps = 1e-3;
constexpr int kMaxIterations = 1'000'000;

void check_inputs(const Scenario& scenario, const SprSnapshot& snapshot) {
  if (snapshot.demand_mbps.size() != scenario.groups.size()) {
    throw std::invalid_argument("snapshot needs one demand per flow group");
  }
  if (snapshot.capacity_mbps.size() != scenario.links.size()) {
    throw std::invalid_argument("snapshot needs one capacity per overlay link");
  }
  for (double d : snapshot.demand_mbps) {
    if (!(d >= 0)) throw std::invalid_argument("demands must be >= 0");
  }
  for (double c : snapshot.capacity_mbps) {
    if (!(c >= 0)) throw std::invalid_argument("capacities must be >= 0");
  }
}

void check_policy(const Scenario& scenario, const SprPolicy& policy) {
  if (policy.rows.size() != scenario.groups.size()) {
    throw std::invalid_argument("policy needs one row per flow group");
  }
  for (std::size_t k = 0; k < policy.rows.size(); ++k) {
    const SprRow& row = policy.rows[k];
    if (row.links != scenario.groups[k].allowed_links || row.split.size() != row.links.size()) {
      throw std::invalid_argument("policy row " + scenario.groups[k].id + " does not match E_k");
    }
    double sum = 0;
    for (double x : row.split) {
      if (!(x >= 0)) throw std::invalid_argument("split ratios must be >= 0");
      sum += x;
    }
    if (std::abs(sum - 1) > 1e-9) throw std::invalid_argument("split ratios must sum to 1");
  }
}

// Largest-remainder rounding of one row onto the unit grid.
std::vector<std::int64_t> to_units(const std::vector<double>& split) {
  std::vector<std::int64_t> units(split.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < split.size(); ++i) {
    const double exact = split[i] * kUnits;
    units[i] = static_cast<std::int64_t>(std::floor(exact));
    assigned += units[i];
    remainders.emplace_back(exact - units[i], i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < kUnits; ++i, ++assigned) {
    ++units[remainders[i % remainders.size()].second];
  }
  return units;
}

// Objective evaluation over unit splits, with per-link response caching so a
// move only re-evaluates the links whose bottleneck load changed.
class Evaluator {
 public:
  Evaluator(const Scenario& scenario, const SprSnapshot& snapshot, const LinkResponseModel& model,
            const SprWeights& weights)
      : scenario_(scenario), snapshot_(snapshot), model_(model), weights_(weights) {
    const std::size_t n = scenario.links.size();
    affected_by_.resize(n);
    for (std::size_t e = 0; e < n; ++e) {
      // Load on e changes whenever traffic on e or on F(e) changes.
      affected_by_[e].push_back(e);
      for (std::size_t f : scenario.links[e].bottleneck_group) affected_by_[e].push_back(f);
    }
  }

  struct State {
    std::vector<std::vector<std::int64_t>> units;  // per group, aligned with E_k
    std::vector<double> link_load;                 // own traffic per link
    std::vector<double> bottleneck_load;           // e plus F(e)
    std::vector<LinkResponse> response;
  };

  State initial(const SprPolicy& policy) const {
    State s;
    for (const SprRow& row : policy.rows) s.units.push_back(to_units(row.split));
    rebuild(s);
    return s;
  }

  // Recomputes every derived load from the unit splits, dropping any drift
  // left behind by trial moves.
  void rebuild(State& s) const {
    s.link_load.assign(scenario_.links.size(), 0.0);
    for (std::size_t k = 0; k < s.units.size(); ++k) {
      const auto& links = scenario_.groups[k].allowed_links;
      for (std::size_t i = 0; i < links.size(); ++i) {
        s.link_load[links[i]] += share(k, s.units[k][i]);
      }
    }
    s.bottleneck_load.resize(scenario_.links.size());
    s.response.resize(scenario_.links.size());
    for (std::size_t e = 0; e < scenario_.links.size(); ++e) refresh(s, e);
  }

  // Applies a move in place; undo by applying the reverse move.
  void apply(State& s, std::size_t k, std::size_t from, std::size_t to, std::int64_t amount) const {
    const auto& links = scenario_.groups[k].allowed_links;
    s.units[k][from] -= amount;
    s.units[k][to] += amount;
    const double mbps = share(k, amount);
    s.link_load[links[from]] -= mbps;
    s.link_load[links[to]] += mbps;
    for (std::size_t e : affected_by_[links[from]]) refresh(s, e);
    for (std::size_t e : affected_by_[links[to]]) refresh(s, e);
  }

  SprEvaluation evaluate(const State& s) const {
    SprEvaluation out;
    const std::size_t n = scenario_.links.size();
    for (std::size_t e = 0; e < n; ++e) {
      const double cap = std::max(snapshot_.capacity_mbps[e], kCapacityFloorMbps);
      out.lu = std::max(out.lu, s.bottleneck_load[e] / cap);
    }
    out.delay_slack.assign(scenario_.groups.size(), 0.0);
    out.loss_slack.assign(scenario_.groups.size(), 0.0);
    double slack_sum = 0;
    double response_sum = 0;
    for (std::size_t k = 0; k < scenario_.groups.size(); ++k) {
      const FlowGroupInstance& g = scenario_.groups[k];
      for (std::size_t i = 0; i < g.allowed_links.size(); ++i) {
        if (s.units[k][i] == 0) continue;
        const LinkResponse& r = s.response[g.allowed_links[i]];
        out.delay_slack[k] = std::max(out.delay_slack[k], r.delay_s - g.sla_delay_s);
        out.loss_slack[k] = std::max(out.loss_slack[k], r.loss - g.sla_loss);
        response_sum += r.delay_s + r.loss;
      }
      slack_sum += out.delay_slack[k] + out.loss_slack[k];
    }
    out.objective = weights_.alpha * slack_sum + weights_.beta * out.lu + weights_.gamma * response_sum;
    return out;
  }

  SprPolicy policy(const State& s) const {
    SprPolicy p;
    for (std::size_t k = 0; k < s.units.size(); ++k) {
      SprRow row;
      row.links = scenario_.groups[k].allowed_links;
      for (std::int64_t u : s.units[k]) row.split.push_back(static_cast<double>(u) / kUnits);
      p.rows.push_back(std::move(row));
    }
    return p;
  }

 private:
  double share(std::size_t k, std::int64_t units) const {
    return snapshot_.demand_mbps[k] * static_cast<double>(units) / kUnits;
  }

  void refresh(State& s, std::size_t e) const {
    double load = s.link_load[e];
    for (std::size_t f : scenario_.links[e].bottleneck_group) load += s.link_load[f];
    s.bottleneck_load[e] = std::max(0.0, load);
    s.response[e] = model_.respond(e, s.bottleneck_load[e]);
  }

  const Scenario& scenario_;
  const SprSnapshot& snapshot_;
  const LinkResponseModel& model_;
  const SprWeights& weights_;
  std::vector<std::vector<std::size_t>> affected_by_;
};

}  // namespace

LinkResponse MeasuredResponse::respond(std::size_t link, double) const {
  return per_link_.at(link);
}

QueueingResponse::QueueingResponse(const Scenario& scenario, std::vector<double> cross_traffic_mbps)
    : scenario_(scenario), cross_traffic_mbps_(std::move(cross_traffic_mbps)) {
  if (cross_traffic_mbps_.size() != scenario.links.size()) {
    throw std::invalid_argument("need one cross-traffic value per overlay link");
  }
}

LinkResponse QueueingResponse::respond(std::size_t link, double controlled_mbps) const {
  const OverlayLink& l = scenario_.links.at(link);
  const double rho = (controlled_mbps + cross_traffic_mbps_[link]) / l.nominal_capacity_mbps;
  LinkResponse r{l.prop_delay_s, 0.0};
  if (rho > 0) {
    const Mm1kParams q =
        link_queue(l.nominal_capacity_mbps, scenario_.queue.capacity_packets, scenario_.queue.packet_size_bits);
    r.delay_s += mean_delay(rho, q);
    r.loss = loss_probability(rho, q.capacity_packets);
  }
  return r;
}

std::vector<double> bottleneck_loads(const Scenario& scenario, const SprPolicy& policy,
                                     std::span<const double> demand_mbps) {
  std::vector<double> own(scenario.links.size(), 0.0);
  for (std::size_t k = 0; k < policy.rows.size(); ++k) {
    const SprRow& row = policy.rows[k];
    for (std::size_t i = 0; i < row.links.size(); ++i) own[row.links[i]] += demand_mbps[k] * row.split[i];
  }
  std::vector<double> out(own);
  for (std::size_t e = 0; e < scenario.links.size(); ++e) {
    for (std::size_t f : scenario.links[e].bottleneck_group) out[e] += own[f];
  }
  return out;
}

SprEvaluation spr_objective(const Scenario& scenario, const SprPolicy& policy,
                            const SprSnapshot& snapshot, const LinkResponseModel& model,
                            const SprWeights& weights) {
  check_inputs(scenario, snapshot);
  check_policy(scenario, policy);
  const Evaluator ev(scenario, snapshot, model, weights);
  return ev.evaluate(ev.initial(policy));
}

SprSolution optimize_spr_local_search(const Scenario& scenario, const SprSnapshot& snapshot,
                                      const LinkResponseModel& model, const SprWeights& weights,
                                      const SprPolicy& initial) {
  check_inputs(scenario, snapshot);
  check_policy(scenario, initial);
  if (!(weights.delta_x > 0 && weights.delta_x <= 1)) throw std::invalid_argument("delta_x must lie in (0, 1]");
  const std::int64_t step = std::max<std::int64_t>(1, std::llround(weights.delta_x * kUnits));

  const Evaluator ev(scenario, snapshot, model, weights);
  Evaluator::State state = ev.initial(initial);
  SprEvaluation current = ev.evaluate(state);

  SprSolution sol;
  sol.objective_trace.push_back(current.objective);
  while (sol.iterations < kMaxIterations) {
    struct Move {
      std::size_t k, from, to;
      std::int64_t amount;
    };
    std::optional<Move> best;
    double best_objective = current.objective - 1e-12 * std::max(1.0, std::abs(current.objective));

    for (std::size_t k = 0; k < scenario.groups.size(); ++k) {
      const std::size_t m = scenario.groups[k].allowed_links.size();
      for (std::size_t from = 0; from < m; ++from) {
        const std::int64_t amount = std::min(step, state.units[k][from]);
        if (amount == 0) continue;
        for (std::size_t to = 0; to < m; ++to) {
          if (to == from) continue;
          ev.apply(state, k, from, to, amount);
          const double obj = ev.evaluate(state).objective;
          ev.apply(state, k, to, from, amount);
          // Strictly better only, so the first candidate in (group, link) order wins ties.
          if (obj < best_objective) {
            best_objective = obj;
            best = Move{k, from, to, amount};
          }
        }
      }
    }
    if (!best) break;
    ev.apply(state, best->k, best->from, best->to, best->amount);
    ev.rebuild(state);
    current = ev.evaluate(state);
    ++sol.iterations;
    sol.objective_trace.push_back(current.objective);
  }

  sol.policy = ev.policy(state);
  sol.objective = current.objective;
  sol.lu = current.lu;
  sol.delay_slack = std::move(current.delay_slack);
  sol.loss_slack = std::move(current.loss_slack);
  return sol;
}

SprRow device_spr_split(const Scenario& scenario, std::size_t group,
                        std::span<const LinkMeasurement> measurements, double loss_tolerance) {
  const FlowGroupInstance& g = scenario.groups.at(group);
  std::vector<const LinkMeasurement*> by_link(scenario.links.size(), nullptr);
  for (const LinkMeasurement& m : measurements) {
    if (m.link < by_link.size()) by_link[m.link] = &m;
  }

  SprRow row;
  row.links = g.allowed_links;
  row.split.assign(row.links.size(), 0.0);
  double eligible_capacity = 0;
  for (std::size_t i = 0; i < row.links.size(); ++i) {
    const LinkMeasurement* m = by_link[row.links[i]];
    const bool eligible = !m || (m->delay_s <= g.sla_delay_s && m->loss <= g.sla_loss + loss_tolerance);
    if (eligible) {
      row.split[i] = scenario.links[row.links[i]].nominal_capacity_mbps;
      eligible_capacity += row.split[i];
    }
  }
  if (eligible_capacity == 0) return proportional_split(scenario, group);
  for (double& x : row.split) x /= eligible_capacity;
  return row;
}

}  // namespace sdwan
