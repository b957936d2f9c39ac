#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sdwan/model.h"
#include "sdwan/sabe.h"
#include "sdwan/sim.h"

namespace sdwan {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

// Parses `args` (args[0] is the program name) and runs one subcommand.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct SweepSpec {
  std::vector<SprMode> spr;
  std::vector<QosMode> qos;
  std::vector<bool> sabe;
  std::vector<std::uint64_t> seeds;
  int jobs = 1;  // runs are independent and may execute concurrently
};

struct SweepCell {
  SprMode spr = SprMode::kAtns;
  QosMode qos = QosMode::kFixedWeights;
  bool sabe = false;
  std::uint64_t seed = 0;
  std::optional<SlaReport> report;
  std::string error;  // set when the run failed; the sweep carries on
};

// One run per (spr, qos, sabe, seed) in that nesting order. Throws
// ValidationError for an empty mode list or an oracle request the scenario
// is too large for.
std::vector<SweepCell> run_sweep(const Scenario& scenario, const SweepSpec& spec);

// spr,qos,sabe,seed,class,loss_sat_pct,delay_sat_pct,mean_loss_pct,mean_delay_s,error
std::string format_sweep_csv(const std::vector<SweepCell>& cells);
// Per-class blocks, one column per (spr, qos), cells "without / with" SABE,
// averaged over seeds.
std::string format_sweep_table(const std::vector<SweepCell>& cells);

struct TraceEstimate {
  std::vector<EstimateRecord> estimates;
  // Relative cross-traffic error over rows whose true cross-traffic is at
  // least `min_truth_fraction` of the link capacity.
  std::optional<double> mean_relative_error;
  std::optional<double> max_relative_error;
  std::size_t scored_rows = 0;
};

// Offline SABE over a measurement trace, interval by interval.
TraceEstimate estimate_trace(const Scenario& scenario, const std::vector<LinkMeasurement>& trace, SabeView view,
                             double min_truth_fraction = 0.02);

}  // namespace sdwan
