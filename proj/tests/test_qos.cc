#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.h"
#include "qos_instances.h"
#include "sdwan/qos.h"

using namespace sdwan;
using sdwan::testing::Builder;
using sdwan::testing::parallel_links;

namespace {

QosDemand pair(std::size_t group, std::size_t link, double demand, double delay = 0, double loss = 0) {
  return {group, link, demand, delay, loss};
}

// Two hubs reaching one spoke over a shared access port.
Builder two_hubs(double port_capacity) {
  Builder b;
  b.node("h2", NodeRole::kHub).node("s").network("inet").port("s", "inet", port_capacity);
  b.link("a", "h", "s", "inet", port_capacity).link("b", "h2", "s", "inet", port_capacity);
  return b;
}

// Largest load over F(e) + e, minus that link's capacity, over every link.
double worst_overshoot(const Scenario& s, const QosSnapshot& snap, const std::vector<double>& z) {
  std::vector<double> own(s.links.size(), 0.0);
  for (std::size_t p = 0; p < snap.pairs.size(); ++p) own[snap.pairs[p].link] += z[p];
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < s.links.size(); ++e) {
    double load = own[e];
    for (std::size_t f : s.links[e].bottleneck_group) load += own[f];
    worst = std::max(worst, load - snap.capacity_mbps[e]);
  }
  return worst;
}

}  // namespace

TEST_SUITE("qos") {
  TEST_CASE("objective term") {
    Scenario s = parallel_links({10}).group("g", "h", "s", TrafficClass::kOffice, 4).build();
    const FlowGroupInstance& g = s.groups[0];
    const QosWeights w;
    const QosDemand ok = pair(0, 0, 4, 0.1, 0);
    CHECK(qos_objective_term(ok, 4, g, w) == doctest::Approx(-w.beta * 4 * std::log(4.0)));
    CHECK(qos_objective_term(ok, 0, g, w) == doctest::Approx(w.alpha * 4 - w.beta * 4 * std::log(w.z_floor_mbps)));

    const QosDemand bad = pair(0, 0, 4, 0.35, 0.08);  // 0.1 s and 0.03 over the bounds
    const double at_d = qos_objective_term(bad, 4, g, w);
    const double at_2d = qos_objective_term(bad, 8, g, w);
    CHECK(at_d == doctest::Approx(-w.beta * 4 * std::log(4.0) + w.gamma * 0.13 * 4));
    CHECK(at_2d - at_d == doctest::Approx(-w.beta * 4 * std::log(2.0) + w.gamma * 0.13 * 4));
    // Zero demand pays only for rate.
    CHECK(qos_objective_term(pair(0, 0, 0, 0.35, 0), 2, g, w) == doctest::Approx(w.gamma * 0.1 * 2));
  }

  TEST_CASE("high priority below capacity is fully served") {
    Scenario s = two_hubs(10)
                     .group("c1", "h", "s", TrafficClass::kCritical, 0)
                     .group("v2", "h2", "s", TrafficClass::kVoip, 0)
                     .build();
    QosSnapshot snap{{pair(0, 0, 3), pair(1, 1, 4)}, {10, 10}};
    QosSolution sol = allocate_high_priority(s, snap);
    CHECK(sol.rate_mbps[0] == 3);
    CHECK(sol.rate_mbps[1] == 4);
    CHECK(sol.rem_capacity_mbps[0] == doctest::Approx(3));
    CHECK(sol.rem_capacity_mbps[1] == doctest::Approx(3));
  }

  TEST_CASE("two high groups of 8 on a shared 10 split 5 and 5") {
    Scenario s = two_hubs(10)
                     .group("c1", "h", "s", TrafficClass::kCritical, 0)
                     .group("c2", "h2", "s", TrafficClass::kCritical, 0)
                     .build();
    QosSnapshot snap{{pair(0, 0, 8), pair(1, 1, 8)}, {10, 10}};
    QosResult r = optimize_qos_centralized(s, snap, s.qos);
    CHECK(r.solution.rate_mbps[0] == doctest::Approx(5));
    CHECK(r.solution.rate_mbps[1] == doctest::Approx(5));
    for (const QosRule& rule : r.policy.rules) {
      CHECK_FALSE(rule.shaper_mbps.has_value());
      CHECK(rule.wfq_weight == 0);
    }
  }

  TEST_CASE("one low group stops where the log gain no longer pays for the slack") {
    Scenario s = parallel_links({10}).group("o", "h", "s", TrafficClass::kOffice, 0).build();
    QosWeights w;
    w.gamma = 1;
    w.delta_mbps = 0.5;
    // y + v = 1: 0.95 s over the 0.25 s delay bound, 5 % over the loss bound.
    QosSnapshot snap{{pair(0, 0, 6, 1.2, 0.1)}, {10}};
    QosSolution sol = allocate_low_priority_local_search(s, snap, w, allocate_high_priority(s, snap));
    // Past z = 6 a grant changes the term by -6 log((z + 0.5) / z) + 0.5, positive at z = 6.
    CHECK(sol.rate_mbps[0] == doctest::Approx(6));
    CHECK(sol.iterations == 12);
  }

  TEST_CASE("without slack a lone low group takes the whole link") {
    Scenario s = parallel_links({10}).group("o", "h", "s", TrafficClass::kOffice, 0).build();
    QosWeights w;
    w.delta_mbps = 0.5;
    QosSnapshot snap{{pair(0, 0, 6)}, {10}};
    QosSolution sol = allocate_low_priority_local_search(s, snap, w, allocate_high_priority(s, snap));
    CHECK(sol.rate_mbps[0] == doctest::Approx(10));
    CHECK(sol.rem_capacity_mbps[0] == doctest::Approx(0).epsilon(1e-9));
  }

  TEST_CASE("identical low groups on one link get exactly equal rates") {
    Scenario s = parallel_links({10})
                     .group("o1", "h", "s", TrafficClass::kOffice, 0)
                     .group("o2", "h", "s", TrafficClass::kOffice, 0)
                     .build();
    QosSnapshot snap{{pair(0, 0, 10), pair(1, 0, 10)}, {8}};
    QosResult r = optimize_qos_centralized(s, snap, s.qos);
    CHECK(r.solution.rate_mbps[0] == 4);
    CHECK(r.solution.rate_mbps[1] == 4);
    CHECK(r.policy.rules[0].wfq_weight == 0.5);
    CHECK(r.policy.rules[0].shaper_mbps == 4.0);
  }

  TEST_CASE("no room below delta leaves the high-priority solution") {
    Scenario s = parallel_links({10})
                     .group("c", "h", "s", TrafficClass::kCritical, 0)
                     .group("o", "h", "s", TrafficClass::kOffice, 0)
                     .build();
    QosSnapshot snap{{pair(0, 0, 2), pair(1, 0, 5)}, {2.1}};
    QosSolution high = allocate_high_priority(s, snap);
    QosSolution sol = allocate_low_priority_local_search(s, snap, s.qos, high);
    CHECK(sol.rate_mbps == high.rate_mbps);
    CHECK(sol.iterations == 0);
  }

  TEST_CASE("random snapshots: capacity, strict decrease, high priority served") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 100; ++trial) {
      auto [s, snap] = sdwan::testing::random_qos_instance(rng, 25);
      const QosSolution high = allocate_high_priority(s, snap);
      CHECK(worst_overshoot(s, snap, high.rate_mbps) <= 1e-9);

      // High priority is fully served when its total fits every bottleneck.
      std::vector<double> high_only(snap.pairs.size(), 0.0);
      for (std::size_t p = 0; p < snap.pairs.size(); ++p) {
        if (s.groups[snap.pairs[p].group].priority == Priority::kHigh) high_only[p] = snap.pairs[p].demand_mbps;
      }
      if (worst_overshoot(s, snap, high_only) <= 0) {
        for (std::size_t p = 0; p < snap.pairs.size(); ++p) {
          if (high_only[p] > 0) CHECK(high.rate_mbps[p] == high_only[p]);
        }
      }
      for (std::size_t p = 0; p < snap.pairs.size(); ++p) CHECK(high.rate_mbps[p] <= snap.pairs[p].demand_mbps);

      double previous = qos_objective(s, snap, high.rate_mbps, s.qos);
      int grants = 0;
      QosSolution sol = allocate_low_priority_local_search(
          s, snap, s.qos, high, [&](const QosSolution& now, std::size_t) {
            ++grants;
            CHECK(worst_overshoot(s, snap, now.rate_mbps) <= 1e-9);
            const double obj = qos_objective(s, snap, now.rate_mbps, s.qos);
            CHECK(obj < previous);
            previous = obj;
          });
      CHECK(grants == sol.iterations);
      double total_capacity = 0;
      for (double c : snap.capacity_mbps) total_capacity += c;
      CHECK(sol.iterations <= std::ceil(total_capacity / s.qos.delta_mbps));
      for (std::size_t i = 1; i < sol.objective_trace.size(); ++i) {
        CHECK(sol.objective_trace[i] < sol.objective_trace[i - 1]);
      }
      CHECK(sol.objective == doctest::Approx(qos_objective(s, snap, sol.rate_mbps, s.qos)));
      for (std::size_t p = 0; p < snap.pairs.size(); ++p) {
        CHECK(sol.rejected_mbps[p] == std::max(0.0, snap.pairs[p].demand_mbps - sol.rate_mbps[p]));
      }
    }
  }

  TEST_CASE("scaling the weights changes nothing") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 50; ++trial) {
      auto [s, snap] = sdwan::testing::random_qos_instance(rng, 10);
      const QosSolution base = optimize_qos_centralized(s, snap, s.qos).solution;
      for (double c : {0.5, 3.0, 1000.0}) {
        QosWeights w = s.qos;
        w.alpha *= c;
        w.beta *= c;
        w.gamma *= c;
        std::vector<std::size_t> order_base, order_scaled;
        allocate_low_priority_local_search(s, snap, s.qos, allocate_high_priority(s, snap),
                                           [&](const QosSolution&, std::size_t p) { order_base.push_back(p); });
        QosSolution scaled = allocate_low_priority_local_search(
            s, snap, w, allocate_high_priority(s, snap),
            [&](const QosSolution&, std::size_t p) { order_scaled.push_back(p); });
        CHECK(order_scaled == order_base);
        CHECK(scaled.rate_mbps == base.rate_mbps);
      }
    }
  }

  TEST_CASE("the exhaustive grid is never beaten") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
      auto [s, snap] = sdwan::testing::random_qos_instance(rng);
      const double ls = optimize_qos_centralized(s, snap, s.qos).solution.objective;
      const double best = optimize_qos_oracle(s, snap, s.qos).solution.objective;
      CHECK(best <= ls + 1e-9);
    }
  }

  TEST_CASE("one low pair: local search finds the grid optimum") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 30; ++trial) {
      Scenario s = parallel_links({10}).group("o", "h", "s", TrafficClass::kOffice, 0).build();
      QosWeights w = s.qos;
      w.gamma = u(rng);
      QosSnapshot snap{{pair(0, 0, 12 * u(rng), 0.25 + u(rng), 0.05 + 0.2 * u(rng))}, {1 + 9 * u(rng)}};
      const double ls = optimize_qos_centralized(s, snap, w).solution.objective;
      const double best = optimize_qos_oracle(s, snap, w).solution.objective;
      CHECK(ls == doctest::Approx(best).epsilon(1e-12));
    }
  }

  TEST_CASE("oracle refuses instances over its budget") {
    Scenario s = parallel_links({10})
                     .group("o1", "h", "s", TrafficClass::kOffice, 0)
                     .group("o2", "h", "s", TrafficClass::kBulk, 0)
                     .build();
    QosSnapshot snap{{pair(0, 0, 10), pair(1, 0, 10)}, {100}};
    CHECK_THROWS_AS(optimize_qos_oracle(s, snap, s.qos, 1000), std::length_error);
  }

  TEST_CASE("fixed weights") {
    Scenario s = parallel_links({25})
                     .group("o", "h", "s", TrafficClass::kOffice, 0)
                     .group("b", "h", "s", TrafficClass::kBulk, 0)
                     .group("c", "h", "s", TrafficClass::kCritical, 0)
                     .build();
    // Raw weights: 1 / (0.25 * 25) = 0.16, 1 / (0.8 * 25) = 0.05, 1 / (0.04 * 25) = 1.
    QosSnapshot peaks{{pair(0, 0, 1), pair(1, 0, 1), pair(2, 0, 1)}, {25}};
    QosPolicy policy = fixed_weights(s, peaks);
    CHECK_FALSE(policy.strict_priority);
    CHECK(policy.find(0, 0)->wfq_weight == doctest::Approx(0.16 / 1.21));
    CHECK(policy.find(1, 0)->wfq_weight == doctest::Approx(0.05 / 1.21));
    CHECK(policy.find(2, 0)->wfq_weight == doctest::Approx(1 / 1.21));
    CHECK(policy.find(2, 0)->wfq_weight > policy.find(0, 0)->wfq_weight);
    for (const QosRule& r : policy.rules) CHECK_FALSE(r.shaper_mbps.has_value());

    // Office at ten times the traffic outweighs Critical.
    peaks.pairs[0].demand_mbps = 10;
    policy = fixed_weights(s, peaks);
    CHECK(policy.find(0, 0)->wfq_weight > policy.find(2, 0)->wfq_weight);
  }

  TEST_CASE("weighted filling") {
    const std::vector<double> demand{10, 10, 1};
    const std::vector<double> weight{3, 1, 1};
    const std::vector<FillConstraint> one{{{0, 1, 2}, 9}};
    std::vector<double> r = weighted_fill(demand, weight, one);
    CHECK(r[2] == doctest::Approx(1));
    CHECK(r[0] == doctest::Approx(6));
    CHECK(r[1] == doctest::Approx(2));
    const std::vector<double> zero_weight{1, 0, 1};
    r = weighted_fill(demand, zero_weight, one);
    CHECK(r[1] == 0);
    CHECK(r[0] == doctest::Approx(8));
  }

  TEST_CASE("single router distributed equals centralized") {
    std::mt19937_64 rng(37);
    int compared = 0;
    for (int trial = 0; trial < 40; ++trial) {
      auto [s, snap] = sdwan::testing::random_qos_instance(rng, 10);
      if (s.nodes.size() != 2) continue;  // only the single-hub instances
      std::vector<std::vector<double>> views(s.nodes.size(), snap.capacity_mbps);
      QosResult central = optimize_qos_centralized(s, snap, s.qos);
      QosResult dist = optimize_qos_distributed(s, snap, views, s.qos);
      CHECK(dist.solution.rate_mbps == central.solution.rate_mbps);
      CHECK(dist.solution.objective == doctest::Approx(central.solution.objective));
      ++compared;
    }
    CHECK(compared > 5);
  }

  TEST_CASE("routers unaware of each other overbook a shared port") {
    Scenario s = two_hubs(10)
                     .group("o1", "h", "s", TrafficClass::kOffice, 0)
                     .group("o2", "h2", "s", TrafficClass::kOffice, 0)
                     .build();
    QosSnapshot snap{{pair(0, 0, 8), pair(1, 1, 8)}, {9.13, 9.13}};
    std::vector<std::vector<double>> views(s.nodes.size(), snap.capacity_mbps);
    QosResult dist = optimize_qos_distributed(s, snap, views, s.qos);
    CHECK(dist.solution.rate_mbps[0] + dist.solution.rate_mbps[1] > 10);

    // The controller sees both hubs on the port.
    QosResult central = optimize_qos_centralized(s, snap, s.qos);
    CHECK(central.solution.rate_mbps[0] + central.solution.rate_mbps[1] <= 9.13 + 1e-9);
  }

  TEST_CASE("snapshot validation") {
    Scenario s = parallel_links({10}).group("o", "h", "s", TrafficClass::kOffice, 0).build();
    CHECK_THROWS_AS(validate(s, QosSnapshot{{pair(0, 1, 1)}, {10}}), std::invalid_argument);
    CHECK_THROWS_AS(validate(s, QosSnapshot{{pair(0, 0, -1)}, {10}}), std::invalid_argument);
    CHECK_THROWS_AS(validate(s, QosSnapshot{{pair(0, 0, 1), pair(0, 0, 1)}, {10}}), std::invalid_argument);
    CHECK_THROWS_AS(validate(s, QosSnapshot{{pair(0, 0, 1)}, {}}), std::invalid_argument);
  }
}
