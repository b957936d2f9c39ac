#include "sdwan/sim.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "sdwan/queueing.h"
#include "sdwan/spr.h"

namespace sdwan {

namespace {

constexpr std::size_t kOracleMaxLinks = 2;
constexpr std::size_t kOracleMaxGroups = 4;

// Floor of the congestion-control cap, as a fraction of demand, so a group
// that was fully blocked can probe again.
constexpr double kRestartFraction = 0.1;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t kind, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(kind), static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

double noisy(double rate, double noise_std, std::mt19937_64& rng) {
  if (noise_std <= 0) return std::max(0.0, rate);
  std::normal_distribution<double> n(0.0, 1.0);
  return std::max(0.0, rate * (1 + noise_std * n(rng)));
}

double sine(double t, double period, double phase) {
  return std::sin(2 * std::numbers::pi * (t + phase) / period);
}

long ticks_in(double period_s, double tick_s) { return std::lround(period_s / tick_s); }

// Mean sojourn time of a queue at load rho; an empty queue adds nothing.
double queue_delay(double rho, double capacity_mbps, const QueueConfig& q) {
  if (!(rho > 0)) return 0;
  return mean_delay(rho, link_queue(capacity_mbps, q.capacity_packets, q.packet_size_bits));
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v) || v < 0) {
    throw std::runtime_error(std::string("simulator produced an invalid ") + what);
  }
}

}  // namespace

std::string_view to_string(SprMode mode) {
  switch (mode) {
    case SprMode::kAtns: return "atns";
    case SprMode::kMlu: return "mlu";
  }
  return "?";
}

std::string_view to_string(QosMode mode) {
  switch (mode) {
    case QosMode::kFixedWeights: return "fw";
    case QosMode::kLocalSearch: return "ls";
    case QosMode::kDistributed: return "dist";
    case QosMode::kOracle: return "oracle";
  }
  return "?";
}

SprMode parse_spr_mode(std::string_view text) {
  if (text == "atns") return SprMode::kAtns;
  if (text == "mlu") return SprMode::kMlu;
  throw ValidationError("spr", "unknown SPR mode '" + std::string(text) + "'");
}

QosMode parse_qos_mode(std::string_view text) {
  if (text == "fw" || text == "fixed-weights") return QosMode::kFixedWeights;
  if (text == "ls" || text == "centralized") return QosMode::kLocalSearch;
  if (text == "dist" || text == "distributed") return QosMode::kDistributed;
  if (text == "oracle") return QosMode::kOracle;
  throw ValidationError("qos", "unknown QoS mode '" + std::string(text) + "'");
}

void check_oracle_budget(const Scenario& scenario) {
  if (scenario.links.size() > kOracleMaxLinks || scenario.groups.size() > kOracleMaxGroups) {
    throw ValidationError("qos", "oracle mode is limited to " + std::to_string(kOracleMaxLinks) +
                                     " links and " + std::to_string(kOracleMaxGroups) +
                                     " flow groups; scenario has " + std::to_string(scenario.links.size()) +
                                     " links and " + std::to_string(scenario.groups.size()) + " groups");
  }
}

std::vector<double> scheduler_model(double capacity_mbps, std::span<const SchedulerInput> inputs,
                                    bool strict_priority) {
  const std::size_t n = inputs.size();
  std::vector<double> admitted(n, 0.0);
  auto fill = [&](auto&& selected, double capacity, bool by_offer) {
    std::vector<std::size_t> idx;
    std::vector<double> demand, weight;
    for (std::size_t i = 0; i < n; ++i) {
      if (!selected(inputs[i])) continue;
      double d = inputs[i].offered_mbps;
      if (!by_offer && inputs[i].shaper_mbps) d = std::min(d, *inputs[i].shaper_mbps);
      idx.push_back(i);
      demand.push_back(d);
      weight.push_back(by_offer ? inputs[i].offered_mbps : inputs[i].wfq_weight);
    }
    FillConstraint c;
    c.capacity = capacity;
    for (std::size_t j = 0; j < idx.size(); ++j) c.members.push_back(j);
    const std::vector<double> got = weighted_fill(demand, weight, std::span(&c, 1));
    double used = 0;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      admitted[idx[j]] = got[j];
      used += got[j];
    }
    return used;
  };

  if (!strict_priority) {
    fill([](const SchedulerInput&) { return true; }, capacity_mbps, false);
    return admitted;
  }
  const double high = fill([](const SchedulerInput& in) { return in.high; }, capacity_mbps, true);
  fill([](const SchedulerInput& in) { return !in.high; }, std::max(0.0, capacity_mbps - high), false);
  return admitted;
}

const ClassSla& SlaReport::at(TrafficClass cls) const {
  for (const ClassSla& c : classes) {
    if (c.cls == cls) return c;
  }
  throw std::out_of_range("class missing from report");
}

Simulator::Simulator(const Scenario& scenario, RunOptions options)
    : scenario_(scenario),
      options_(options),
      sabe_cfg_(sabe_config_for(scenario)),
      controller_view_(scenario, sabe_cfg_, SabeView::kController),
      local_view_(scenario, sabe_cfg_, SabeView::kLocal) {
  if (options_.qos == QosMode::kOracle) check_oracle_budget(scenario);
  const std::size_t groups = scenario.groups.size();
  const std::size_t links = scenario.links.size();

  link_pairs_.resize(links);
  for (std::size_t k = 0; k < groups; ++k) {
    pair_offset_.push_back(pair_group_.size());
    for (std::size_t e : scenario.groups[k].allowed_links) {
      link_pairs_[e].push_back(pair_group_.size());
      pair_group_.push_back(k);
      pair_link_.push_back(e);
    }
  }
  const std::size_t pairs = pair_group_.size();

  port_links_.resize(scenario.ports.size());
  for (std::size_t e = 0; e < links; ++e) {
    for (std::size_t p : scenario.links[e].ports) port_links_[p].push_back(e);
  }
  port_cross_.resize(scenario.ports.size());
  for (std::size_t i = 0; i < scenario.cross_traffic.size(); ++i) {
    const CrossTrafficProfile& c = scenario.cross_traffic[i];
    const auto port = scenario.find_port(c.node, c.network);
    if (!port) throw ValidationError("cross_traffic", "no port " + c.node + "/" + c.network);
    if (port_cross_[*port]) throw ValidationError("cross_traffic", "two profiles for port " + c.node + "/" + c.network);
    port_cross_[*port] = i;
  }

  const std::uint64_t seed = options_.seed.value_or(scenario.seed);
  for (std::size_t k = 0; k < groups; ++k) group_rng_.push_back(stream(seed, 1, k));
  for (std::size_t i = 0; i < scenario.cross_traffic.size(); ++i) cross_rng_.push_back(stream(seed, 2, i));

  split_.assign(pairs, 0.0);
  sched_.resize(pairs);
  for (std::size_t p = 0; p < pairs; ++p) sched_[p].high = scenario.groups[pair_group_[p]].priority == Priority::kHigh;
  set_spr_policy(proportional_policy(scenario));

  delivered_prev_.assign(groups, std::numeric_limits<double>::infinity());
  pair_tick_.resize(pairs);
  link_tick_.resize(links);
  pair_acc_.resize(pairs);
  link_acc_.resize(links);
  group_offered_interval_.resize(groups);
  group_offered_spr_.assign(groups, 0.0);
  group_peak_.resize(groups);
  for (std::size_t k = 0; k < groups; ++k) {
    group_offered_interval_[k] = scenario.groups[k].demand_mbps;
    group_peak_[k] = scenario.groups[k].demand_mbps;
  }
  pair_delay_last_.assign(pairs, 0.0);
  pair_loss_last_.assign(pairs, 0.0);
}

std::size_t Simulator::pair_index(std::size_t group, std::size_t link) const {
  const auto& allowed = scenario_.groups.at(group).allowed_links;
  const auto it = std::lower_bound(allowed.begin(), allowed.end(), link);
  if (it == allowed.end() || *it != link) throw std::out_of_range("link not allowed for group");
  return pair_offset_[group] + static_cast<std::size_t>(it - allowed.begin());
}

void Simulator::set_spr_policy(SprPolicy policy) {
  if (policy.rows.size() != scenario_.groups.size()) throw std::invalid_argument("policy needs one row per group");
  for (std::size_t k = 0; k < policy.rows.size(); ++k) {
    const SprRow& row = policy.rows[k];
    if (row.links != scenario_.groups[k].allowed_links || row.split.size() != row.links.size()) {
      throw std::invalid_argument("policy row does not match the group's allowed links");
    }
    for (std::size_t i = 0; i < row.links.size(); ++i) split_[pair_offset_[k] + i] = row.split[i];
  }
  spr_ = std::move(policy);
}

void Simulator::set_qos_policy(QosPolicy policy) {
  for (SchedulerInput& in : sched_) {
    in.wfq_weight = 0;
    in.shaper_mbps.reset();
  }
  for (const QosRule& r : policy.rules) {
    SchedulerInput& in = sched_[pair_index(r.group, r.link)];
    in.wfq_weight = r.wfq_weight;
    in.shaper_mbps = r.shaper_mbps;
  }
  qos_ = std::move(policy);
}

double Simulator::group_demand(std::size_t k) {
  const FlowGroupInstance& g = scenario_.groups[k];
  for (const TrafficProfile& tp : scenario_.traffic) {
    if (tp.group != g.id) continue;
    const double rate = tp.base_mbps * (1 + tp.diurnal_amplitude * sine(now_s_, tp.period_s, tp.phase_s));
    return noisy(rate, tp.noise_std, group_rng_[k]);
  }
  return g.demand_mbps;
}

double Simulator::cross_traffic(std::size_t i) {
  const CrossTrafficProfile& c = scenario_.cross_traffic[i];
  double rate = 0;
  if (c.shape == CrossTrafficShape::kPiecewise) {
    for (const RateStep& s : c.steps) {
      if (s.start_s <= now_s_) rate = s.rate_mbps;
    }
  } else {
    rate = c.base_mbps + c.amplitude_mbps * sine(now_s_, c.period_s, c.phase_s);
  }
  return noisy(rate, c.noise_std, cross_rng_[i]);
}

void Simulator::step() {
  const std::size_t groups = scenario_.groups.size();
  const std::size_t links = scenario_.links.size();
  const QueueConfig& q = scenario_.queue;

  // Offered load, throttled like a congestion-controlled source.
  for (std::size_t k = 0; k < groups; ++k) {
    const double demand = group_demand(k);
    const double cap = std::max(scenario_.loops.tcp_headroom * delivered_prev_[k], kRestartFraction * demand);
    const double offered = std::min(demand, cap);
    const auto& allowed = scenario_.groups[k].allowed_links;
    for (std::size_t i = 0; i < allowed.size(); ++i) {
      const std::size_t p = pair_offset_[k] + i;
      pair_tick_[p].offered_mbps = offered * split_[p];
      sched_[p].offered_mbps = pair_tick_[p].offered_mbps;
    }
  }

  // Sender scheduler on every overlay link.
  std::vector<double> high_admitted(links, 0.0);
  for (std::size_t e = 0; e < links; ++e) {
    std::vector<SchedulerInput> in;
    for (std::size_t p : link_pairs_[e]) in.push_back(sched_[p]);
    const std::vector<double> got = scheduler_model(scenario_.links[e].nominal_capacity_mbps, in, qos_.strict_priority);
    double total = 0;
    for (std::size_t j = 0; j < got.size(); ++j) {
      const std::size_t p = link_pairs_[e][j];
      pair_tick_[p].admitted_mbps = got[j];
      total += got[j];
      if (sched_[p].high) high_admitted[e] += got[j];
    }
    link_tick_[e] = LinkTick{total, 0, 0, 0};
  }

  // WAN queues at the underlay ports.
  const std::size_t ports = scenario_.ports.size();
  std::vector<double> port_loss(ports, 0.0), port_delay(ports, 0.0), port_cross(ports, 0.0);
  for (std::size_t pt = 0; pt < ports; ++pt) {
    if (port_cross_[pt]) port_cross[pt] = cross_traffic(*port_cross_[pt]);
    double load = port_cross[pt];
    for (std::size_t e : port_links_[pt]) load += link_tick_[e].admitted_mbps;
    const double cap = scenario_.ports[pt].capacity_mbps;
    port_loss[pt] = loss_probability(load / cap, q.capacity_packets);
    port_delay[pt] = queue_delay(load / cap, cap, q);
  }
  for (std::size_t e = 0; e < links; ++e) {
    const OverlayLink& l = scenario_.links[e];
    LinkTick& lt = link_tick_[e];
    if (l.ports.empty()) {
      const double rho = lt.admitted_mbps / l.nominal_capacity_mbps;
      lt.wan_loss = loss_probability(rho, q.capacity_packets);
      lt.wan_delay_s = queue_delay(rho, l.nominal_capacity_mbps, q);
    } else {
      double pass = 1;
      for (std::size_t pt : l.ports) {
        pass *= 1 - port_loss[pt];
        lt.wan_delay_s += port_delay[pt];
        lt.cross_traffic_mbps += port_cross[pt];
      }
      lt.wan_loss = 1 - pass;
    }
  }

  // Per pair outcome.
  std::fill(delivered_prev_.begin(), delivered_prev_.end(), 0.0);
  for (std::size_t p = 0; p < pair_tick_.size(); ++p) {
    const std::size_t e = pair_link_[p];
    const OverlayLink& l = scenario_.links[e];
    const LinkTick& lt = link_tick_[e];
    PairTick& pt = pair_tick_[p];
    // Strict priority: high traffic only queues behind itself.
    const double ahead = sched_[p].high && qos_.strict_priority ? high_admitted[e] : lt.admitted_mbps;
    const double rho = std::min(1.0, ahead / l.nominal_capacity_mbps);
    pt.delay_s = l.prop_delay_s + queue_delay(rho, l.nominal_capacity_mbps, q) + lt.wan_delay_s;
    pt.delivered_mbps = pt.admitted_mbps * (1 - lt.wan_loss);
    pt.loss = pt.offered_mbps > 0 ? 1 - pt.delivered_mbps / pt.offered_mbps : 0.0;
    check_finite(pt.delivered_mbps, "delivered rate");
    check_finite(pt.delay_s, "delay");
    delivered_prev_[pair_group_[p]] += pt.delivered_mbps;

    PairAccumulator& acc = pair_acc_[p];
    acc.offered += pt.offered_mbps;
    acc.delivered += pt.delivered_mbps;
    acc.weighted_delay += pt.delay_s * pt.offered_mbps;
    acc.delay_sum += pt.delay_s;
    acc.loss_sum += lt.wan_loss;
    ++acc.ticks;
  }
  for (std::size_t e = 0; e < links; ++e) {
    const LinkTick& lt = link_tick_[e];
    LinkAccumulator& acc = link_acc_[e];
    // Propagation is constant, so only the WAN part is accumulated.
    acc.delay += lt.wan_delay_s;
    acc.delay_sq += lt.wan_delay_s * lt.wan_delay_s;
    acc.loss += lt.wan_loss;
    acc.admitted += lt.admitted_mbps;
    acc.cross += lt.cross_traffic_mbps;
    ++acc.ticks;
  }
  now_s_ += scenario_.loops.tick_s;
}

std::vector<LinkMeasurement> Simulator::monitor() {
  std::vector<LinkMeasurement> out;
  for (std::size_t e = 0; e < scenario_.links.size(); ++e) {
    LinkAccumulator& acc = link_acc_[e];
    if (acc.ticks == 0) throw std::logic_error("monitor called before any tick");
    const double n = acc.ticks;
    LinkMeasurement m;
    m.link = e;
    m.interval_end_s = now_s_;
    const double wan_delay = acc.delay / n;
    m.delay_s = scenario_.links[e].prop_delay_s + wan_delay;
    m.loss = acc.loss / n;
    m.jitter_s = std::sqrt(std::max(0.0, acc.delay_sq / n - wan_delay * wan_delay));
    m.throughput_mbps = acc.admitted / n;
    m.true_cross_traffic_mbps = acc.cross / n;
    out.push_back(m);
    acc = {};
  }

  const double tolerance = scenario_.loops.loss_tolerance;
  for (std::size_t k = 0; k < scenario_.groups.size(); ++k) {
    const FlowGroupInstance& g = scenario_.groups[k];
    double offered = 0, delivered = 0, weighted_delay = 0;
    int ticks = 0;
    for (std::size_t i = 0; i < g.allowed_links.size(); ++i) {
      const std::size_t p = pair_offset_[k] + i;
      PairAccumulator& acc = pair_acc_[p];
      offered += acc.offered;
      delivered += acc.delivered;
      weighted_delay += acc.weighted_delay;
      ticks = acc.ticks;
      if (acc.offered > 0) {
        pair_delay_last_[p] = acc.weighted_delay / acc.offered;
        pair_loss_last_[p] = std::clamp(1 - acc.delivered / acc.offered, 0.0, 1.0);
      } else {
        pair_delay_last_[p] = acc.delay_sum / acc.ticks;
        pair_loss_last_[p] = acc.loss_sum / acc.ticks;
      }
      acc = {};
    }
    const double mean_offered = offered / ticks;
    group_offered_interval_[k] = mean_offered;
    group_offered_spr_[k] += mean_offered;
    group_peak_[k] = std::max(group_peak_[k], mean_offered);
    if (offered <= 0) continue;  // nothing to judge

    GroupInterval rec;
    rec.interval_end_s = now_s_;
    rec.group = k;
    rec.offered_mbps = mean_offered;
    rec.delivered_mbps = delivered / ticks;
    rec.delay_s = weighted_delay / offered;
    rec.loss = std::clamp(1 - delivered / offered, 0.0, 1.0);
    rec.delay_ok = rec.delay_s <= g.sla_delay_s;
    rec.loss_ok = rec.loss <= g.sla_loss + tolerance;
    intervals_.push_back(rec);
  }
  ++spr_intervals_;
  return out;
}

QosSnapshot Simulator::qos_snapshot(std::span<const double> demand_mbps,
                                    std::span<const double> capacity_mbps) const {
  QosSnapshot s;
  s.capacity_mbps.assign(capacity_mbps.begin(), capacity_mbps.end());
  for (std::size_t p = 0; p < pair_group_.size(); ++p) {
    s.pairs.push_back({pair_group_[p], pair_link_[p], demand_mbps[pair_group_[p]] * split_[p],
                       pair_delay_last_[p], pair_loss_last_[p]});
  }
  return s;
}

void Simulator::control(const std::vector<LinkMeasurement>& measurements, bool initial) {
  const std::size_t links = scenario_.links.size();
  const std::size_t groups = scenario_.groups.size();
  const LoopConfig& loops = scenario_.loops;
  const long tick_index = std::lround(now_s_ / loops.tick_s);

  std::vector<double> nominal(links), safe(links);
  for (std::size_t e = 0; e < links; ++e) {
    nominal[e] = scenario_.links[e].nominal_capacity_mbps;
    safe[e] = sabe_cfg_.theta * nominal[e];
  }
  if (!initial) {
    controller_view_.estimate_all(measurements);
    local_view_.estimate_all(measurements);
  }
  const bool use_estimates = options_.sabe && !initial;
  std::vector<double> controller_abw = safe, local_abw = safe, controller_cross(links, 0.0);
  if (use_estimates) {
    for (std::size_t e = 0; e < links; ++e) {
      controller_abw[e] = controller_view_.estimates()[e].safe_abw_mbps;
      controller_cross[e] = controller_view_.estimates()[e].cross_traffic_mbps;
      local_abw[e] = local_view_.estimates()[e].safe_abw_mbps;
    }
  }

  // Path selection.
  if (options_.spr == SprMode::kAtns) {
    if (!initial) {
      SprPolicy p;
      for (std::size_t k = 0; k < groups; ++k) {
        p.rows.push_back(device_spr_split(scenario_, k, measurements, loops.loss_tolerance));
      }
      set_spr_policy(std::move(p));
    }
  } else if (initial || tick_index % ticks_in(loops.spr_period_s, loops.tick_s) == 0) {
    SprSnapshot snap;
    for (std::size_t k = 0; k < groups; ++k) {
      snap.demand_mbps.push_back(initial ? scenario_.groups[k].demand_mbps
                                         : group_offered_spr_[k] / std::max(1, spr_intervals_));
    }
    snap.capacity_mbps = use_estimates ? controller_abw : (initial ? safe : nominal);
    const QueueingResponse model(scenario_, controller_cross);
    set_spr_policy(optimize_spr_local_search(scenario_, snap, model, scenario_.spr, spr_).policy);
    std::fill(group_offered_spr_.begin(), group_offered_spr_.end(), 0.0);
    spr_intervals_ = 0;
  }

  // Rate allocation.
  if (!initial && tick_index % ticks_in(loops.qos_period_s, loops.tick_s) != 0) return;
  std::vector<double> demand(groups);
  for (std::size_t k = 0; k < groups; ++k) {
    demand[k] = initial ? scenario_.groups[k].demand_mbps : group_offered_interval_[k];
  }
  switch (options_.qos) {
    case QosMode::kFixedWeights:
      set_qos_policy(fixed_weights(scenario_, qos_snapshot(group_peak_, nominal)));
      break;
    case QosMode::kLocalSearch:
      set_qos_policy(optimize_qos_centralized(scenario_, qos_snapshot(demand, controller_abw), scenario_.qos).policy);
      break;
    case QosMode::kOracle:
      set_qos_policy(optimize_qos_oracle(scenario_, qos_snapshot(demand, controller_abw), scenario_.qos).policy);
      break;
    case QosMode::kDistributed: {
      const std::vector<std::vector<double>> views(scenario_.nodes.size(), local_abw);
      set_qos_policy(
          optimize_qos_distributed(scenario_, qos_snapshot(demand, local_abw), views, scenario_.qos).policy);
      break;
    }
  }
}

RunResult Simulator::run() {
  const LoopConfig& loops = scenario_.loops;
  const long total = ticks_in(loops.duration_s, loops.tick_s);
  const long per_monitor = ticks_in(loops.monitor_period_s, loops.tick_s);

  RunResult result;
  control({}, true);
  for (long t = 1; t <= total; ++t) {
    step();
    if (t % per_monitor != 0) continue;
    std::vector<LinkMeasurement> m = monitor();
    control(m, false);
    for (const AbwEstimate& est : controller_view_.estimates()) result.estimates.push_back({now_s_, est});
    result.measurements.insert(result.measurements.end(), m.begin(), m.end());
  }

  result.intervals = intervals_;
  for (TrafficClass cls : kAllClasses) {
    ClassSla row;
    row.cls = cls;
    int loss_ok = 0, delay_ok = 0;
    double loss_sum = 0, delay_sum = 0;
    for (const GroupInterval& rec : intervals_) {
      if (scenario_.groups[rec.group].cls != cls) continue;
      ++row.intervals;
      loss_ok += rec.loss_ok;
      delay_ok += rec.delay_ok;
      loss_sum += rec.loss;
      delay_sum += rec.delay_s;
    }
    if (row.intervals > 0) {
      const double n = row.intervals;
      row.loss_sat_pct = 100.0 * loss_ok / n;
      row.delay_sat_pct = 100.0 * delay_ok / n;
      row.mean_loss_pct = 100.0 * loss_sum / n;
      row.mean_delay_s = delay_sum / n;
    }
    result.report.classes.push_back(row);
  }
  return result;
}

RunResult run_scenario(const Scenario& scenario, const RunOptions& options) {
  Simulator sim(scenario, options);
  return sim.run();
}

}  // namespace sdwan
