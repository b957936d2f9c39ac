#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sdwan/model.h"
#include "sdwan/queueing.h"

namespace sdwan {

struct SabeConfig {
  double theta = 0.913;
  double packet_size_bits = 12000;
  int smoothing_window = 3;
  int queue_capacity_packets = 100;
  LoadGrid grid;
  // Loss above this counts as observed WAN loss and switches to the loss curve.
  double loss_threshold = 1e-6;
};

void validate(const SabeConfig& cfg);

// Scenario queue settings with theta calibrated to the scenario loss target.
SabeConfig sabe_config_for(const Scenario& scenario);

// Which controlled traffic is subtracted from the inferred load.
//  kController: everything the SD-WAN injects into the shared bottleneck,
//               i.e. the throughput of e and of every link in F(e).
//  kLocal:      only the link's own throughput, as seen by one access router;
//               other routers' traffic then shows up as cross-traffic.
enum class SabeView { kController, kLocal };

// Available bandwidth from an already inverted load.
AbwEstimate estimate_from_load(double rho, double controlled_mbps, const OverlayLink& link,
                               const SabeConfig& cfg);

// One-shot estimate from one measurement interval (no smoothing).
AbwEstimate estimate_link(const LinkMeasurement& measurement, const OverlayLink& link,
                          const SabeConfig& cfg, const LoadInverter& inverter);
AbwEstimate estimate_link(const LinkMeasurement& measurement, const OverlayLink& link,
                          const SabeConfig& cfg);

// Periodic estimator for every link of a scenario. Keeps an exponentially
// weighted mean of the inferred load per link (alpha = 2 / (window + 1)).
class SabeEstimator {
 public:
  SabeEstimator(const Scenario& scenario, SabeConfig cfg, SabeView view);

  // Feeds the latest interval. Links without a measurement report
  // C~ = theta * C and are flagged stale.
  const std::vector<AbwEstimate>& estimate_all(std::span<const LinkMeasurement> measurements);

  const std::vector<AbwEstimate>& estimates() const { return estimates_; }
  const SabeConfig& config() const { return cfg_; }

 private:
  const Scenario& scenario_;
  SabeConfig cfg_;
  SabeView view_;
  LoadInverter inverter_;
  std::vector<std::optional<double>> smoothed_rho_;
  std::vector<AbwEstimate> estimates_;
};

}  // namespace sdwan
