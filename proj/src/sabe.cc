#include "sdwan/sabe.h"

#include <algorithm>
#include <stdexcept>

namespace sdwan {

void validate(const SabeConfig& cfg) {
  if (!(cfg.theta > 0 && cfg.theta <= 1)) throw std::invalid_argument("theta must lie in (0, 1]");
  if (!(cfg.packet_size_bits > 0)) throw std::invalid_argument("packet size must be > 0");
  if (cfg.smoothing_window < 1) throw std::invalid_argument("smoothing window must be >= 1");
  if (cfg.queue_capacity_packets < 1) throw std::invalid_argument("queue capacity must be >= 1");
  validate(cfg.grid);
}

SabeConfig sabe_config_for(const Scenario& scenario) {
  SabeConfig cfg;
  cfg.packet_size_bits = scenario.queue.packet_size_bits;
  cfg.smoothing_window = scenario.queue.smoothing_window;
  cfg.queue_capacity_packets = scenario.queue.capacity_packets;
  cfg.theta = calibrate_theta(cfg.queue_capacity_packets, scenario.queue.loss_target, cfg.grid);
  return cfg;
}

AbwEstimate estimate_from_load(double rho, double controlled_mbps, const OverlayLink& link,
                               const SabeConfig& cfg) {
  AbwEstimate out;
  out.rho = rho;
  out.theta = cfg.theta;
  const double total_mbps = rho * link.nominal_capacity_mbps;
  out.inconsistent = controlled_mbps > total_mbps;
  out.cross_traffic_mbps = std::max(0.0, total_mbps - controlled_mbps);
  out.safe_abw_mbps = std::max(0.0, cfg.theta * link.nominal_capacity_mbps - out.cross_traffic_mbps);
  return out;
}

AbwEstimate estimate_link(const LinkMeasurement& measurement, const OverlayLink& link,
                          const SabeConfig& cfg, const LoadInverter& inverter) {
  // The queueing model covers waiting plus service time only.
  const double queueing_delay = std::max(0.0, measurement.delay_s - link.prop_delay_s);
  const double mu = service_rate_pps(link.nominal_capacity_mbps, cfg.packet_size_bits);
  const LoadInversion inv = inverter.invert(queueing_delay, measurement.loss, mu, cfg.loss_threshold);
  AbwEstimate out = estimate_from_load(inv.rho, measurement.throughput_mbps, link, cfg);
  out.link = measurement.link;
  out.saturated = inv.saturated;
  return out;
}

AbwEstimate estimate_link(const LinkMeasurement& measurement, const OverlayLink& link,
                          const SabeConfig& cfg) {
  validate(cfg);
  const LoadInverter inverter(cfg.queue_capacity_packets, cfg.grid);
  return estimate_link(measurement, link, cfg, inverter);
}

namespace {

SabeConfig checked(SabeConfig cfg) {
  validate(cfg);
  return cfg;
}

}  // namespace

SabeEstimator::SabeEstimator(const Scenario& scenario, SabeConfig cfg, SabeView view)
    : scenario_(scenario),
      cfg_(checked(cfg)),
      view_(view),
      inverter_(cfg_.queue_capacity_packets, cfg_.grid),
      smoothed_rho_(scenario.links.size()),
      estimates_(scenario.links.size()) {
  for (std::size_t e = 0; e < scenario.links.size(); ++e) {
    estimates_[e] = estimate_from_load(0.0, 0.0, scenario.links[e], cfg_);
    estimates_[e].link = e;
    estimates_[e].stale = true;
  }
}

const std::vector<AbwEstimate>& SabeEstimator::estimate_all(
    std::span<const LinkMeasurement> measurements) {
  const std::size_t n = scenario_.links.size();
  std::vector<const LinkMeasurement*> latest(n, nullptr);
  for (const LinkMeasurement& m : measurements) {
    if (m.link >= n) throw std::out_of_range("measurement for unknown link index");
    if (!latest[m.link] || latest[m.link]->interval_end_s <= m.interval_end_s) latest[m.link] = &m;
  }

  const double alpha = 2.0 / (cfg_.smoothing_window + 1.0);
  for (std::size_t e = 0; e < n; ++e) {
    const OverlayLink& link = scenario_.links[e];
    if (!latest[e]) {
      estimates_[e] = estimate_from_load(0.0, 0.0, link, cfg_);
      estimates_[e].link = e;
      estimates_[e].stale = true;
      continue;
    }
    LinkMeasurement m = *latest[e];
    if (view_ == SabeView::kController) {
      for (std::size_t other : link.bottleneck_group) {
        if (latest[other]) m.throughput_mbps += latest[other]->throughput_mbps;
      }
    }
    const AbwEstimate raw = estimate_link(m, link, cfg_, inverter_);
    std::optional<double>& rho = smoothed_rho_[e];
    rho = rho ? alpha * raw.rho + (1 - alpha) * *rho : raw.rho;

    AbwEstimate est = estimate_from_load(*rho, m.throughput_mbps, link, cfg_);
    est.link = e;
    est.saturated = raw.saturated;
    estimates_[e] = est;
  }
  return estimates_;
}

}  // namespace sdwan
