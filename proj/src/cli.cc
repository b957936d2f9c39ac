#include "sdwan/cli.h"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <thread>

#include "sdwan/qos.h"
#include "sdwan/report_io.h"
#include "sdwan/scenario_io.h"
#include "sdwan/spr.h"

namespace sdwan {

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

bool parse_on_off(const std::string& text) {
  if (text == "on") return true;
  if (text == "off") return false;
  throw ValidationError("sabe", "expected 'on' or 'off', got '" + text + "'");
}

// Feeds a trace to an estimator interval by interval; returns the final state.
const std::vector<AbwEstimate>& replay(SabeEstimator& est, const std::vector<LinkMeasurement>& trace,
                                       std::vector<EstimateRecord>* records) {
  std::vector<LinkMeasurement> sorted = trace;
  std::stable_sort(sorted.begin(), sorted.end(), [](const LinkMeasurement& a, const LinkMeasurement& b) {
    return a.interval_end_s < b.interval_end_s;
  });
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].interval_end_s == sorted[i].interval_end_s) ++j;
    const std::span<const LinkMeasurement> batch(sorted.data() + i, j - i);
    est.estimate_all(batch);
    if (records) {
      for (const LinkMeasurement& m : batch) records->push_back({m.interval_end_s, est.estimates()[m.link]});
    }
    i = j;
  }
  return est.estimates();
}

std::vector<double> theta_capacity(const Scenario& scenario) {
  const double theta = sabe_config_for(scenario).theta;
  std::vector<double> out;
  for (const OverlayLink& l : scenario.links) out.push_back(theta * l.nominal_capacity_mbps);
  return out;
}

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "table";
};

void emit(const Globals& g, const std::string& text, std::ostream& out) {
  if (g.out.empty()) {
    out << text;
  } else {
    write_file(g.out, text);
  }
}

}  // namespace

std::vector<SweepCell> run_sweep(const Scenario& scenario, const SweepSpec& spec) {
  if (spec.spr.empty() || spec.qos.empty() || spec.sabe.empty() || spec.seeds.empty()) {
    throw ValidationError("sweep", "every mode list and the seed list must be non-empty");
  }
  if (std::find(spec.qos.begin(), spec.qos.end(), QosMode::kOracle) != spec.qos.end()) {
    check_oracle_budget(scenario);
  }
  std::vector<SweepCell> cells;
  for (SprMode spr : spec.spr) {
    for (QosMode qos : spec.qos) {
      for (bool sabe : spec.sabe) {
        for (std::uint64_t seed : spec.seeds) cells.push_back({spr, qos, sabe, seed, std::nullopt, {}});
      }
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      SweepCell& c = cells[i];
      try {
        c.report = run_scenario(scenario, {c.spr, c.qos, c.sabe, c.seed}).report;
      } catch (const std::exception& e) {
        c.error = e.what();
      }
    }
  };
  const int jobs = std::clamp(spec.jobs, 1, static_cast<int>(std::max<std::size_t>(1, cells.size())));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  return cells;
}

std::string format_sweep_csv(const std::vector<SweepCell>& cells) {
  std::ostringstream out;
  out << "spr,qos,sabe,seed,class,loss_sat_pct,delay_sat_pct,mean_loss_pct,mean_delay_s,error\n";
  for (const SweepCell& c : cells) {
    const std::string head = std::string(to_string(c.spr)) + ',' + std::string(to_string(c.qos)) + ',' +
                             (c.sabe ? "on" : "off") + ',' + std::to_string(c.seed) + ',';
    if (!c.report) {
      std::string msg = c.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out << head << ",,,,," << msg << '\n';
      continue;
    }
    for (const ClassSla& s : c.report->classes) {
      out << head << to_string(s.cls) << ',' << format_number(s.loss_sat_pct) << ','
          << format_number(s.delay_sat_pct) << ',' << format_number(s.mean_loss_pct) << ','
          << format_number(s.mean_delay_s) << ",\n";
    }
  }
  return out.str();
}

std::string format_sweep_table(const std::vector<SweepCell>& cells) {
  // (spr, qos) columns in first-seen order; per column, per SABE setting, seed means.
  std::vector<std::pair<SprMode, QosMode>> columns;
  struct Sum {
    double v[4][4] = {};
    int n = 0;
  };
  std::map<std::tuple<int, int, bool>, Sum> sums;
  for (const SweepCell& c : cells) {
    const auto col = std::make_pair(c.spr, c.qos);
    if (std::find(columns.begin(), columns.end(), col) == columns.end()) columns.push_back(col);
    if (!c.report) continue;
    Sum& s = sums[{static_cast<int>(c.spr), static_cast<int>(c.qos), c.sabe}];
    for (std::size_t i = 0; i < c.report->classes.size() && i < 4; ++i) {
      const ClassSla& r = c.report->classes[i];
      s.v[0][i] += r.loss_sat_pct;
      s.v[1][i] += r.delay_sat_pct;
      s.v[2][i] += r.mean_loss_pct;
      s.v[3][i] += r.mean_delay_s;
    }
    ++s.n;
  }

  const char* titles[4] = {"Packet loss satisfaction rate (%)", "Delay satisfaction rate (%)",
                           "Average packet loss (%)", "Average delay (s)"};
  auto value = [&](SprMode spr, QosMode qos, bool sabe, int metric, int cls) -> std::string {
    const auto it = sums.find({static_cast<int>(spr), static_cast<int>(qos), sabe});
    if (it == sums.end() || it->second.n == 0) return "";
    std::ostringstream v;
    v << std::fixed << std::setprecision(metric == 3 ? 4 : 2) << it->second.v[metric][cls] / it->second.n;
    return v.str();
  };

  std::ostringstream out;
  for (int metric = 0; metric < 4; ++metric) {
    out << titles[metric] << " (without / with SABE)\n";
    out << std::left << std::setw(10) << "class";
    for (const auto& [spr, qos] : columns) {
      out << std::setw(20) << (std::string(to_string(spr)) + "-" + std::string(to_string(qos)));
    }
    out << '\n';
    for (int cls = 0; cls < 4; ++cls) {
      out << std::setw(10) << to_string(kAllClasses[cls]);
      for (const auto& [spr, qos] : columns) {
        const std::string off = value(spr, qos, false, metric, cls);
        const std::string on = value(spr, qos, true, metric, cls);
        std::string cell;
        if (!off.empty() && !on.empty()) {
          cell = off + " / " + on;
        } else {
          cell = off.empty() ? (on.empty() ? "failed" : on) : off;
        }
        out << std::setw(20) << cell;
      }
      out << '\n';
    }
    out << '\n';
  }
  return out.str();
}

TraceEstimate estimate_trace(const Scenario& scenario, const std::vector<LinkMeasurement>& trace, SabeView view,
                             double min_truth_fraction) {
  SabeEstimator est(scenario, sabe_config_for(scenario), view);
  TraceEstimate out;
  replay(est, trace, &out.estimates);

  // Match estimates to their measurement rows for scoring.
  std::vector<LinkMeasurement> sorted = trace;
  std::stable_sort(sorted.begin(), sorted.end(), [](const LinkMeasurement& a, const LinkMeasurement& b) {
    return a.interval_end_s < b.interval_end_s;
  });
  double sum = 0, worst = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const LinkMeasurement& m = sorted[i];
    if (!m.true_cross_traffic_mbps) continue;
    const double truth = *m.true_cross_traffic_mbps;
    if (truth < min_truth_fraction * scenario.links[m.link].nominal_capacity_mbps) continue;
    const double err = std::abs(out.estimates[i].estimate.cross_traffic_mbps - truth) / truth;
    sum += err;
    worst = std::max(worst, err);
    ++out.scored_rows;
  }
  if (out.scored_rows > 0) {
    out.mean_relative_error = sum / out.scored_rows;
    out.max_relative_error = worst;
  }
  return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"SD-WAN path selection and QoS policy optimization"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed (overrides the scenario seed)");
  app.add_option("--out", g.out, "Output directory (simulate, sweep) or file (other commands)");
  app.add_option("--format", g.format, "Console format")->check(CLI::IsMember({"csv", "table"}));

  std::string scenario_path;
  std::string spr_mode = "atns", qos_mode = "fw", sabe = "off";

  CLI::App* validate_cmd = app.add_subcommand("validate", "Check a scenario file");
  validate_cmd->add_option("scenario", scenario_path, "Scenario JSON")->required();

  CLI::App* simulate = app.add_subcommand("simulate", "Run one closed-loop simulation");
  simulate->add_option("scenario", scenario_path, "Scenario JSON")->required();
  simulate->add_option("--spr", spr_mode, "atns | mlu");
  simulate->add_option("--qos", qos_mode, "fw | ls | dist | oracle");
  simulate->add_option("--sabe", sabe, "on | off");

  std::vector<std::string> sweep_spr{"atns", "mlu"}, sweep_qos{"fw", "ls", "dist"}, sweep_sabe{"off", "on"};
  std::vector<std::uint64_t> seeds;
  int jobs = 1;
  CLI::App* sweep = app.add_subcommand("sweep", "Run the benchmark matrix");
  sweep->add_option("scenario", scenario_path, "Scenario JSON")->required();
  sweep->add_option("--spr", sweep_spr, "SPR modes")->delimiter(',');
  sweep->add_option("--qos", sweep_qos, "QoS modes")->delimiter(',');
  sweep->add_option("--sabe", sweep_sabe, "SABE settings")->delimiter(',');
  sweep->add_option("--seeds", seeds, "Seeds (default: --seed or the scenario seed)")->delimiter(',');
  sweep->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);

  std::string trace_path, view = "controller";
  CLI::App* estimate = app.add_subcommand("estimate", "Offline available-bandwidth estimation");
  estimate->add_option("trace", trace_path, "Measurement trace CSV")->required();
  estimate->add_option("--scenario", scenario_path, "Scenario JSON")->required();
  estimate->add_option("--view", view, "controller | local")->check(CLI::IsMember({"controller", "local"}));

  std::string demands_path, measurements_path, model = "queueing";
  CLI::App* opt_spr = app.add_subcommand("optimize-spr", "Compute split ratios");
  opt_spr->add_option("scenario", scenario_path, "Scenario JSON")->required();
  opt_spr->add_option("--demands", demands_path, "CSV group,demand_mbps");
  opt_spr->add_option("--measurements", measurements_path, "Measurement trace CSV");
  opt_spr->add_option("--sabe", sabe, "on | off");
  opt_spr->add_option("--model", model, "queueing | measured")->check(CLI::IsMember({"queueing", "measured"}));

  std::string snapshot_path, qos_opt_mode = "centralized";
  CLI::App* opt_qos = app.add_subcommand("optimize-qos", "Compute rate allocations and QoS policy");
  opt_qos->add_option("scenario", scenario_path, "Scenario JSON")->required();
  opt_qos->add_option("--snapshot", snapshot_path, "CSV group,link,demand_mbps,delay_s,loss")->required();
  opt_qos->add_option("--mode", qos_opt_mode, "centralized | distributed | fixed-weights | oracle")
      ->check(CLI::IsMember({"centralized", "distributed", "fixed-weights", "oracle"}));
  opt_qos->add_option("--sabe", sabe, "on | off");
  opt_qos->add_option("--measurements", measurements_path, "Measurement trace CSV (needed with --sabe on)");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  if (!argv_rev.empty()) argv_rev.pop_back();  // program name
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (validate_cmd->parsed()) {
      const Scenario s = load_scenario(scenario_path);
      out << "ok: " << s.nodes.size() << " nodes, " << s.links.size() << " overlay links, " << s.groups.size()
          << " flow groups\n";
      return kExitOk;
    }

    if (simulate->parsed()) {
      const Scenario s = load_scenario(scenario_path);
      RunOptions opts{parse_spr_mode(spr_mode), parse_qos_mode(qos_mode), parse_on_off(sabe), g.seed};
      if (opts.qos == QosMode::kOracle) check_oracle_budget(s);
      const RunResult r = run_scenario(s, opts);
      if (!g.out.empty()) {
        const fs::path dir(g.out);
        write_file(dir / "report.csv", format_report_csv(r.report));
        write_file(dir / "trace.csv", format_intervals_csv(s, r.intervals));
        write_file(dir / "measurements.csv", format_measurements_csv(s, r.measurements));
        write_file(dir / "estimates.csv", format_estimates_csv(s, r.estimates));
      }
      if (g.format == "csv") {
        out << format_report_csv(r.report);
      } else {
        std::ostringstream title;
        title << "spr=" << to_string(opts.spr) << " qos=" << to_string(opts.qos) << " sabe=" << sabe
              << " seed=" << opts.seed.value_or(s.seed);
        out << format_report_table(r.report, title.str());
      }
      return kExitOk;
    }

    if (sweep->parsed()) {
      const Scenario s = load_scenario(scenario_path);
      SweepSpec spec;
      // Empty tokens are dropped so that "--spr ''" reads as an empty list.
      for (const std::string& m : sweep_spr) {
        if (!m.empty()) spec.spr.push_back(parse_spr_mode(m));
      }
      for (const std::string& m : sweep_qos) {
        if (!m.empty()) spec.qos.push_back(parse_qos_mode(m));
      }
      for (const std::string& m : sweep_sabe) {
        if (!m.empty()) spec.sabe.push_back(parse_on_off(m));
      }
      spec.seeds = seeds.empty() ? std::vector<std::uint64_t>{g.seed.value_or(s.seed)} : seeds;
      spec.jobs = jobs;
      const std::vector<SweepCell> cells = run_sweep(s, spec);
      if (!g.out.empty()) {
        write_file(fs::path(g.out) / "sweep.csv", format_sweep_csv(cells));
        write_file(fs::path(g.out) / "sweep_table.txt", format_sweep_table(cells));
      }
      out << (g.format == "csv" ? format_sweep_csv(cells) : format_sweep_table(cells));
      int failed = 0;
      for (const SweepCell& c : cells) {
        if (c.report) continue;
        ++failed;
        err << "run " << to_string(c.spr) << '-' << to_string(c.qos) << " sabe=" << (c.sabe ? "on" : "off")
            << " seed=" << c.seed << " failed: " << c.error << '\n';
      }
      return failed ? kExitRuntime : kExitOk;
    }

    if (estimate->parsed()) {
      const Scenario s = load_scenario(scenario_path);
      const std::vector<LinkMeasurement> trace = parse_measurements_csv(s, read_file(trace_path));
      const TraceEstimate r =
          estimate_trace(s, trace, view == "local" ? SabeView::kLocal : SabeView::kController);
      const std::string csv = format_estimates_csv(s, r.estimates);
      std::ostream& summary = g.out.empty() ? err : out;
      emit(g, csv, out);
      if (r.mean_relative_error) {
        summary << "cross-traffic relative error: mean " << format_number(*r.mean_relative_error) << ", max "
                << format_number(*r.max_relative_error) << " over " << r.scored_rows << " rows\n";
      }
      return kExitOk;
    }

    if (opt_spr->parsed()) {
      const Scenario s = load_scenario(scenario_path);
      const bool use_sabe = parse_on_off(sabe);
      SprSnapshot snap;
      snap.demand_mbps = demands_path.empty() ? parse_demands_csv(s, "group,demand_mbps\n")
                                              : parse_demands_csv(s, read_file(demands_path));
      for (const OverlayLink& l : s.links) snap.capacity_mbps.push_back(l.nominal_capacity_mbps);
      std::vector<LinkMeasurement> trace;
      if (!measurements_path.empty()) trace = parse_measurements_csv(s, read_file(measurements_path));
      if ((use_sabe || model == "measured") && trace.empty()) {
        throw ValidationError("measurements", "--sabe on and --model measured need a measurement trace");
      }
      std::vector<double> cross(s.links.size(), 0.0);
      if (use_sabe) {
        SabeEstimator est(s, sabe_config_for(s), SabeView::kController);
        const std::vector<AbwEstimate>& latest = replay(est, trace, nullptr);
        for (std::size_t e = 0; e < s.links.size(); ++e) {
          snap.capacity_mbps[e] = latest[e].safe_abw_mbps;
          cross[e] = latest[e].cross_traffic_mbps;
        }
      }
      std::unique_ptr<LinkResponseModel> response;
      if (model == "measured") {
        std::vector<LinkResponse> per_link(s.links.size());
        std::vector<double> seen(s.links.size(), -1);
        for (std::size_t e = 0; e < s.links.size(); ++e) per_link[e] = {s.links[e].prop_delay_s, 0.0};
        for (const LinkMeasurement& m : trace) {
          if (m.interval_end_s >= seen[m.link]) {
            seen[m.link] = m.interval_end_s;
            per_link[m.link] = {m.delay_s, m.loss};
          }
        }
        response = std::make_unique<MeasuredResponse>(std::move(per_link));
      } else {
        response = std::make_unique<QueueingResponse>(s, cross);
      }
      const SprSolution sol = optimize_spr_local_search(s, snap, *response, s.spr, proportional_policy(s));
      emit(g, format_spr_policy_csv(s, sol.policy), out);
      if (!g.out.empty()) {
        out << "objective " << format_number(sol.objective) << ", max utilization " << format_number(sol.lu)
            << ", " << sol.iterations << " moves\n";
      }
      return kExitOk;
    }

    if (opt_qos->parsed()) {
      const Scenario s = load_scenario(scenario_path);
      const bool use_sabe = parse_on_off(sabe);
      if (qos_opt_mode == "oracle") check_oracle_budget(s);
      std::vector<double> capacity = theta_capacity(s);
      std::vector<double> local = capacity;
      if (use_sabe) {
        if (measurements_path.empty()) throw ValidationError("measurements", "--sabe on needs --measurements");
        const std::vector<LinkMeasurement> trace = parse_measurements_csv(s, read_file(measurements_path));
        SabeEstimator controller(s, sabe_config_for(s), SabeView::kController);
        SabeEstimator local_view(s, sabe_config_for(s), SabeView::kLocal);
        const std::vector<AbwEstimate>& c = replay(controller, trace, nullptr);
        const std::vector<AbwEstimate>& l = replay(local_view, trace, nullptr);
        for (std::size_t e = 0; e < s.links.size(); ++e) {
          capacity[e] = c[e].safe_abw_mbps;
          local[e] = l[e].safe_abw_mbps;
        }
      }
      const QosSnapshot snap = parse_qos_snapshot_csv(s, read_file(snapshot_path), capacity);
      QosPolicy policy;
      std::optional<double> objective;
      if (qos_opt_mode == "centralized") {
        const QosResult r = optimize_qos_centralized(s, snap, s.qos);
        policy = r.policy;
        objective = r.solution.objective;
      } else if (qos_opt_mode == "distributed") {
        const QosResult r = optimize_qos_distributed(
            s, snap, std::vector<std::vector<double>>(s.nodes.size(), local), s.qos);
        policy = r.policy;
        objective = r.solution.objective;
      } else if (qos_opt_mode == "oracle") {
        const QosResult r = optimize_qos_oracle(s, snap, s.qos);
        policy = r.policy;
        objective = r.solution.objective;
      } else {
        policy = fixed_weights(s, snap);
      }
      emit(g, format_qos_policy_csv(s, policy), out);
      if (!g.out.empty() && objective) out << "objective " << format_number(*objective) << '\n';
      return kExitOk;
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const CsvError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace sdwan
