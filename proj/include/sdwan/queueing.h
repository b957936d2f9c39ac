#pragma once

#include <cstddef>
#include <memory>
#include <vector>

namespace sdwan {

// Single-server queue with room for `capacity_packets` packets (waiting plus
// in service), Poisson arrivals and exponential service.
struct Mm1kParams {
  int capacity_packets = 100;
  double service_rate_pps = 1000;
};

// Service rate of a link of `capacity_mbps` carrying packets of
// `packet_size_bits`: mu = C * 1e6 / ps packets per second.
double service_rate_pps(double capacity_mbps, double packet_size_bits);

Mm1kParams link_queue(double capacity_mbps, int capacity_packets, double packet_size_bits);

// Discretized load axis searched by the inversion and the theta calibration.
struct LoadGrid {
  double rho_min = 0.01;
  double rho_max = 2.0;
  double step = 0.001;

  std::size_t size() const;
  double at(std::size_t i) const;
};

void validate(const LoadGrid& grid);

// Blocking probability (1 - rho) rho^K / (1 - rho^(K+1)), and 1/(K+1) at rho = 1.
double loss_probability(double rho, int capacity_packets);

// Mean number of packets in the system; K/2 at rho = 1.
double mean_occupancy(double rho, int capacity_packets);

// Mean sojourn time L / (lambda (1 - P)) with lambda = rho * mu. Requires rho > 0.
double mean_delay(double rho, const Mm1kParams& params);

struct LoadInversion {
  double rho = 0;
  bool saturated = false;   // argmin sits on a grid boundary
  bool loss_branch = false; // inverted from loss rather than delay
};

// Grid search for the load whose model output is closest to the measurement.
// The loss curve is used when measured_loss exceeds loss_threshold, the delay
// curve otherwise. Ties resolve toward the larger load.
LoadInversion invert_load(double measured_delay_s, double measured_loss, const Mm1kParams& params,
                          const LoadGrid& grid, double loss_threshold = 0.0);

// Largest grid load whose blocking probability stays at or below loss_target.
double calibrate_theta(int capacity_packets, double loss_target, const LoadGrid& grid = {});

// Precomputed loss and normalized delay curves for one (K, grid) pair; the
// delay curve is stored as mu * D, so one table serves every link capacity.
class LoadInverter {
 public:
  LoadInverter(int capacity_packets, LoadGrid grid);

  LoadInversion invert(double measured_delay_s, double measured_loss, double service_rate_pps,
                       double loss_threshold = 0.0) const;

  int capacity_packets() const { return capacity_packets_; }
  const LoadGrid& grid() const { return grid_; }

 private:
  int capacity_packets_;
  LoadGrid grid_;
  std::vector<double> loss_;
  std::vector<double> scaled_delay_;
};

}  // namespace sdwan
