#include "sdwan/queueing.h"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace sdwan {

namespace {

void check_capacity(int capacity_packets) {
  if (capacity_packets < 1) throw std::domain_error("queue capacity K must be >= 1");
}

void check_load(double rho) {
  if (!(rho >= 0)) throw std::domain_error("load must be >= 0, got " + std::to_string(rho));
}

// Below this distance from rho = 1 the occupancy closed form loses digits to
// cancellation, so the stationary distribution is summed directly instead.
constexpr double kNearUnitLoad = 1e-2;

double occupancy_by_summation(double log_rho, int k) {
  // p_n ~ rho^n, rescaled so the largest weight is 1.
  const double pivot = log_rho > 0 ? k : 0;
  double weight_sum = 0;
  double moment = 0;
  for (int n = 0; n <= k; ++n) {
    const double w = std::exp((n - pivot) * log_rho);
    weight_sum += w;
    moment += n * w;
  }
  return moment / weight_sum;
}

}  // namespace

double service_rate_pps(double capacity_mbps, double packet_size_bits) {
  if (!(capacity_mbps > 0) || !(packet_size_bits > 0)) {
    throw std::domain_error("capacity and packet size must be > 0");
  }
  return capacity_mbps * 1e6 / packet_size_bits;
}

Mm1kParams link_queue(double capacity_mbps, int capacity_packets, double packet_size_bits) {
  return {capacity_packets, service_rate_pps(capacity_mbps, packet_size_bits)};
}

std::size_t LoadGrid::size() const {
  return static_cast<std::size_t>(std::floor((rho_max - rho_min) / step + 1e-9)) + 1;
}

double LoadGrid::at(std::size_t i) const {
  return std::round((rho_min + static_cast<double>(i) * step) * 1e12) / 1e12;
}

void validate(const LoadGrid& grid) {
  if (!(grid.rho_min > 0 && grid.rho_min < grid.rho_max && grid.step > 0)) {
    throw std::invalid_argument("load grid needs 0 < rho_min < rho_max and step > 0");
  }
}

double loss_probability(double rho, int capacity_packets) {
  check_load(rho);
  check_capacity(capacity_packets);
  if (rho == 0) return 0;
  if (rho == 1) return 1.0 / (capacity_packets + 1);
  if (std::isinf(rho)) return 1;
  const double k = capacity_packets;
  const double a = std::log1p(rho - 1);
  if (a < 0) return std::expm1(a) * std::exp(k * a) / std::expm1((k + 1) * a);
  return std::expm1(-a) / std::expm1(-(k + 1) * a);
}

double mean_occupancy(double rho, int capacity_packets) {
  check_load(rho);
  check_capacity(capacity_packets);
  if (rho == 0) return 0;
  if (rho == 1) return capacity_packets / 2.0;
  if (std::isinf(rho)) return capacity_packets;
  const double k = capacity_packets;
  const double a = std::log1p(rho - 1);
  if (std::abs(rho - 1) < kNearUnitLoad) return occupancy_by_summation(a, capacity_packets);
  if (a < 0) return rho / (1 - rho) + (k + 1) * std::exp((k + 1) * a) / std::expm1((k + 1) * a);
  return rho / (1 - rho) - (k + 1) / std::expm1(-(k + 1) * a);
}

double mean_delay(double rho, const Mm1kParams& params) {
  if (!(rho > 0)) throw std::domain_error("mean delay needs rho > 0");
  if (!(params.service_rate_pps > 0)) throw std::domain_error("service rate must be > 0");
  const double occupancy = mean_occupancy(rho, params.capacity_packets);
  double throughput_pps;
  if (rho <= 1) {
    throughput_pps = rho * params.service_rate_pps * (1 - loss_probability(rho, params.capacity_packets));
  } else {
    // lambda (1 - P) = mu (1 - p0); for rho > 1 the empty-state probability is small and exact.
    const double k = params.capacity_packets;
    const double a = std::log1p(rho - 1);
    const double p_empty = std::exp(-k * a) * std::expm1(-a) / std::expm1(-(k + 1) * a);
    throughput_pps = params.service_rate_pps * (1 - p_empty);
  }
  return occupancy / throughput_pps;
}

LoadInverter::LoadInverter(int capacity_packets, LoadGrid grid)
    : capacity_packets_(capacity_packets), grid_(grid) {
  check_capacity(capacity_packets);
  validate(grid_);
  const std::size_t n = grid_.size();
  loss_.reserve(n);
  scaled_delay_.reserve(n);
  const Mm1kParams unit{capacity_packets, 1.0};
  for (std::size_t i = 0; i < n; ++i) {
    const double rho = grid_.at(i);
    loss_.push_back(loss_probability(rho, capacity_packets));
    scaled_delay_.push_back(mean_delay(rho, unit));
  }
}

LoadInversion LoadInverter::invert(double measured_delay_s, double measured_loss,
                                   double service_rate_pps, double loss_threshold) const {
  const bool use_loss = measured_loss > loss_threshold;
  const std::vector<double>& curve = use_loss ? loss_ : scaled_delay_;
  const double target = use_loss ? measured_loss : measured_delay_s * service_rate_pps;

  std::size_t best = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double gap = std::abs(curve[i] - target);
    if (gap <= best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  return {grid_.at(best), best == 0 || best + 1 == curve.size(), use_loss};
}

LoadInversion invert_load(double measured_delay_s, double measured_loss, const Mm1kParams& params,
                          const LoadGrid& grid, double loss_threshold) {
  return LoadInverter(params.capacity_packets, grid)
      .invert(measured_delay_s, measured_loss, params.service_rate_pps, loss_threshold);
}

double calibrate_theta(int capacity_packets, double loss_target, const LoadGrid& grid) {
  if (!(loss_target > 0 && loss_target < 1)) throw std::domain_error("loss target must lie in (0, 1)");
  check_capacity(capacity_packets);
  validate(grid);
  double theta = grid.rho_min;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double rho = grid.at(i);
    if (loss_probability(rho, capacity_packets) <= loss_target) theta = rho;
  }
  return theta;
}

}  // namespace sdwan
