#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.h"
#include "sdwan/sabe.h"
#include "sdwan/sim.h"

using namespace sdwan;
using sdwan::testing::Builder;

namespace {

OverlayLink make_link(double capacity, double prop = 0.03) {
  OverlayLink l;
  l.id = "e";
  l.nominal_capacity_mbps = capacity;
  l.prop_delay_s = prop;
  return l;
}

// Measurement the M/M/1/K link would produce at load rho.
LinkMeasurement at_load(const OverlayLink& link, double rho, double throughput, const SabeConfig& cfg) {
  LinkMeasurement m;
  const Mm1kParams p = link_queue(link.nominal_capacity_mbps, cfg.queue_capacity_packets, cfg.packet_size_bits);
  m.delay_s = link.prop_delay_s + (rho > 0 ? mean_delay(rho, p) : 0);
  m.loss = rho > 0 ? loss_probability(rho, cfg.queue_capacity_packets) : 0;
  if (m.loss <= cfg.loss_threshold) m.loss = 0;
  m.throughput_mbps = throughput;
  return m;
}

}  // namespace

TEST_SUITE("sabe") {
  TEST_CASE("idle link keeps nearly all of theta C") {
    SabeConfig cfg;
    const OverlayLink link = make_link(25);
    LinkMeasurement m;
    m.delay_s = link.prop_delay_s;
    AbwEstimate est = estimate_link(m, link, cfg);
    CHECK(est.cross_traffic_mbps <= cfg.grid.rho_min * 25 + 1e-12);
    CHECK(est.safe_abw_mbps == doctest::Approx(cfg.theta * 25).epsilon(0.02));
    CHECK(est.saturated);
  }

  TEST_CASE("plug-through at load 0.8") {
    SabeConfig cfg;
    cfg.theta = 0.914;
    const OverlayLink link = make_link(25);
    AbwEstimate est = estimate_link(at_load(link, 0.8, 10, cfg), link, cfg);
    CHECK(est.rho == doctest::Approx(0.8).epsilon(cfg.grid.step));
    CHECK(std::abs(est.cross_traffic_mbps - 10) <= cfg.grid.step * 25 + 1e-9);
    CHECK(std::abs(est.safe_abw_mbps - 12.85) <= cfg.grid.step * 25 + 1e-9);
  }

  TEST_CASE("loss of a full queue leaves nothing") {
    SabeConfig cfg;
    const OverlayLink link = make_link(25);
    LinkMeasurement m;
    m.delay_s = link.prop_delay_s + 0.2;
    m.loss = 1.0 / 101;
    AbwEstimate est = estimate_link(m, link, cfg);
    CHECK(std::abs(est.cross_traffic_mbps - 25) <= cfg.grid.step * 25 + 1e-9);
    CHECK(est.safe_abw_mbps == 0);
  }

  TEST_CASE("more controlled traffic than inferred is clamped and flagged") {
    SabeConfig cfg;
    const OverlayLink link = make_link(10);
    AbwEstimate est = estimate_link(at_load(link, 0.3, 6, cfg), link, cfg);
    CHECK(est.cross_traffic_mbps == 0);
    CHECK(est.inconsistent);
    CHECK(estimate_flags(est).find("inconsistent") != std::string::npos);
  }

  TEST_CASE("estimate stays within [0, theta C]") {
    SabeConfig cfg;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 500; ++i) {
      const OverlayLink link = make_link(1 + 30 * u(rng), 0.05 * u(rng));
      LinkMeasurement m;
      m.delay_s = link.prop_delay_s * 2 * u(rng) + 0.1 * u(rng);
      m.loss = u(rng) < 0.5 ? 0 : 0.2 * u(rng);
      m.throughput_mbps = 20 * u(rng);
      AbwEstimate est = estimate_link(m, link, cfg);
      CHECK(est.safe_abw_mbps >= 0);
      CHECK(est.safe_abw_mbps <= cfg.theta * link.nominal_capacity_mbps + 1e-12);
      CHECK(est.cross_traffic_mbps >= 0);
    }
  }

  TEST_CASE("larger delay never raises the estimate") {
    SabeConfig cfg;
    const OverlayLink link = make_link(10);
    double prev = cfg.theta * 10;
    for (double extra = 0; extra < 0.2; extra += 0.0005) {
      LinkMeasurement m;
      m.delay_s = link.prop_delay_s + extra;
      m.throughput_mbps = 2;
      const double abw = estimate_link(m, link, cfg).safe_abw_mbps;
      CHECK(abw <= prev);
      prev = abw;
    }
  }

  TEST_CASE("config validation") {
    SabeConfig cfg;
    cfg.theta = 0;
    CHECK_THROWS(validate(cfg));
    cfg = {};
    cfg.smoothing_window = 0;
    CHECK_THROWS(validate(cfg));
    cfg = {};
    cfg.packet_size_bits = -1;
    CHECK_THROWS(validate(cfg));
  }

  TEST_CASE("scenario config calibrates theta") {
    Builder b = sdwan::testing::parallel_links({10});
    Scenario s = b.build();
    CHECK(sabe_config_for(s).theta == calibrate_theta(100, 1e-5));
  }

  TEST_CASE("estimate_all: idle, missing and congested links") {
    Scenario s = sdwan::testing::parallel_links({5, 10, 25}).build();
    SabeConfig cfg;
    SabeEstimator est(s, cfg, SabeView::kController);
    std::vector<LinkMeasurement> ms;
    for (std::size_t e = 0; e < 3; ++e) {
      LinkMeasurement m = at_load(s.links[e], e == 1 ? 0.7 : 0, 0, cfg);
      m.link = e;
      ms.push_back(m);
    }
    const auto& out = est.estimate_all(ms);
    CHECK(out[0].safe_abw_mbps == doctest::Approx(cfg.theta * 5).epsilon(0.02));
    CHECK(out[2].safe_abw_mbps == doctest::Approx(cfg.theta * 25).epsilon(0.02));
    CHECK(out[1].safe_abw_mbps == doctest::Approx(cfg.theta * 10 - 7).epsilon(0.01));

    ms.pop_back();
    const auto& later = est.estimate_all(ms);
    CHECK(later[2].stale);
    CHECK(later[2].safe_abw_mbps == cfg.theta * 25);
    CHECK_FALSE(later[1].stale);
  }

  TEST_CASE("controller view subtracts the whole bottleneck, local view only the link") {
    Builder b;
    b.node("h2", NodeRole::kHub).node("s").network("inet").port("s", "inet", 20);
    b.link("a", "h", "s", "inet", 20).link("b", "h2", "s", "inet", 20);
    Scenario s = b.build();
    SabeConfig cfg;
    // Both links see the port at 0.75 load: 6 + 4 controlled, 5 cross.
    std::vector<LinkMeasurement> ms(2);
    for (std::size_t e = 0; e < 2; ++e) {
      ms[e] = at_load(s.links[e], 0.75, e == 0 ? 6 : 4, cfg);
      ms[e].link = e;
    }
    SabeEstimator controller(s, cfg, SabeView::kController);
    SabeEstimator local(s, cfg, SabeView::kLocal);
    const double tol = cfg.grid.step * 20 + 1e-9;
    CHECK(std::abs(controller.estimate_all(ms)[0].cross_traffic_mbps - 5) <= tol);
    CHECK(std::abs(local.estimate_all(ms)[0].cross_traffic_mbps - 9) <= tol);
    CHECK(std::abs(local.estimates()[1].cross_traffic_mbps - 11) <= tol);
  }

  TEST_CASE("smoothing follows a cross-traffic step from the simulator") {
    Builder b = sdwan::testing::parallel_links({25});
    b.port("s", "n0", 25).group("g", "h", "s", TrafficClass::kBulk, 2);
    CrossTrafficProfile c;
    c.node = "s";
    c.network = "n0";
    c.steps = {{0, 0}, {100, 10}};
    b.raw().cross_traffic.push_back(c);
    b.raw().loops.duration_s = 300;
    Scenario s = b.build();

    RunResult run = run_scenario(s, {});
    SabeConfig cfg = sabe_config_for(s);
    SabeEstimator est(s, cfg, SabeView::kController);
    const double alpha = 2.0 / (cfg.smoothing_window + 1);
    const double tol = 2 * cfg.grid.step * 25;
    for (const LinkMeasurement& m : run.measurements) {
      const double xt = est.estimate_all(std::span(&m, 1))[0].cross_traffic_mbps;
      const int after = static_cast<int>(std::lround((m.interval_end_s - 100) / s.loops.monitor_period_s));
      if (after <= 0) {
        CHECK(xt <= tol + cfg.grid.rho_min * 25);
      } else if (after >= cfg.smoothing_window) {
        // Residual of an EWMA after `after` updates of a unit step.
        const double residual = std::pow(1 - alpha, after) * 10;
        CHECK(std::abs(xt - 10) <= residual + tol);
      }
    }
  }
}
