#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sdwan/model.h"
#include "sdwan/qos.h"
#include "sdwan/sim.h"

namespace sdwan {

// Malformed CSV input; `line()` is 1-based and counts the header.
class CsvError : public std::runtime_error {
 public:
  CsvError(int line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Comma separated rows under a header line. Columns are looked up by name.
class CsvTable {
 public:
  CsvTable(std::string_view text, std::initializer_list<std::string_view> required);

  std::size_t size() const { return rows_.size(); }
  bool has_column(std::string_view name) const;
  int line(std::size_t row) const { return lines_[row]; }
  const std::string& text(std::size_t row, std::string_view column) const;
  double number(std::size_t row, std::string_view column) const;

 private:
  std::size_t column(std::string_view name) const;

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<int> lines_;
};

// Shortest text that reads back to the same double.
std::string format_number(double value);

std::string format_report_csv(const SlaReport& report);
// Human-readable layout: one row per class, satisfaction then averages.
std::string format_report_table(const SlaReport& report, std::string_view title);

// link,interval_end_s,delay_s,loss,jitter_s,throughput_mbps[,true_cross_traffic_mbps]
std::string format_measurements_csv(const Scenario& scenario, std::span<const LinkMeasurement> rows);
std::vector<LinkMeasurement> parse_measurements_csv(const Scenario& scenario, std::string_view text);

// link,interval_end_s,rho,cross_traffic_mbps,safe_abw_mbps,flags
std::string format_estimates_csv(const Scenario& scenario, std::span<const EstimateRecord> rows);

// interval_end_s,group,class,src,dst,offered_mbps,delivered_mbps,delay_s,loss,delay_ok,loss_ok
std::string format_intervals_csv(const Scenario& scenario, std::span<const GroupInterval> rows);

// group,link,split
std::string format_spr_policy_csv(const Scenario& scenario, const SprPolicy& policy);

// group,demand_mbps; groups not listed keep their scenario demand.
std::vector<double> parse_demands_csv(const Scenario& scenario, std::string_view text);

// group,link,demand_mbps,delay_s,loss (capacities are supplied separately)
std::string format_qos_snapshot_csv(const Scenario& scenario, const QosSnapshot& snapshot);
QosSnapshot parse_qos_snapshot_csv(const Scenario& scenario, std::string_view text,
                                   std::vector<double> capacity_mbps);

// group,link,rate_mbps,wfq_weight,shaper_mbps (empty shaper = none)
std::string format_qos_policy_csv(const Scenario& scenario, const QosPolicy& policy);

}  // namespace sdwan
