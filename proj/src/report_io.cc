#include "sdwan/report_io.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <tuple>

namespace sdwan {

namespace {

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    std::string_view field = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
      field.remove_suffix(1);
    }
    out.emplace_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::size_t link_by_id(const Scenario& s, const CsvTable& t, std::size_t row, std::string_view column) {
  const std::string& id = t.text(row, column);
  const auto link = s.find_link(id);
  if (!link) throw CsvError(t.line(row), "unknown link '" + id + "'");
  return *link;
}

std::size_t group_by_id(const Scenario& s, const CsvTable& t, std::size_t row) {
  const std::string& id = t.text(row, "group");
  const auto group = s.find_group(id);
  if (!group) throw CsvError(t.line(row), "unknown flow group '" + id + "'");
  return *group;
}

}  // namespace

CsvTable::CsvTable(std::string_view text, std::initializer_list<std::string_view> required) {
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    if (line.front() == '#') continue;
    std::vector<std::string> fields = split_line(line);
    if (header_.empty()) {
      header_ = std::move(fields);
      continue;
    }
    if (fields.size() != header_.size()) {
      throw CsvError(line_no, "expected " + std::to_string(header_.size()) + " fields, found " +
                                  std::to_string(fields.size()));
    }
    rows_.push_back(std::move(fields));
    lines_.push_back(line_no);
  }
  if (header_.empty()) throw CsvError(1, "missing header line");
  for (std::string_view name : required) {
    if (!has_column(name)) throw CsvError(1, "missing column '" + std::string(name) + "'");
  }
}

bool CsvTable::has_column(std::string_view name) const {
  return std::find(header_.begin(), header_.end(), name) != header_.end();
}

std::size_t CsvTable::column(std::string_view name) const {
  const auto it = std::find(header_.begin(), header_.end(), name);
  if (it == header_.end()) throw CsvError(1, "missing column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - header_.begin());
}

const std::string& CsvTable::text(std::size_t row, std::string_view name) const {
  return rows_.at(row)[column(name)];
}

double CsvTable::number(std::size_t row, std::string_view name) const {
  const std::string& field = text(row, name);
  double value = 0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || end != field.data() + field.size() || !std::isfinite(value)) {
    throw CsvError(lines_[row], "column '" + std::string(name) + "' is not a number: '" + field + "'");
  }
  return value;
}

std::string format_number(double value) {
  if (value == 0) return "0";  // no "-0"
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ec == std::errc() ? end : buf);
}

std::string format_report_csv(const SlaReport& report) {
  std::ostringstream out;
  out << "class,loss_sat_pct,delay_sat_pct,mean_loss_pct,mean_delay_s\n";
  for (const ClassSla& c : report.classes) {
    out << to_string(c.cls) << ',' << format_number(c.loss_sat_pct) << ',' << format_number(c.delay_sat_pct)
        << ',' << format_number(c.mean_loss_pct) << ',' << format_number(c.mean_delay_s) << '\n';
  }
  return out.str();
}

std::string format_report_table(const SlaReport& report, std::string_view title) {
  std::ostringstream out;
  out << title << '\n';
  out << std::left << std::setw(10) << "class" << std::right << std::setw(12) << "loss sat %" << std::setw(13)
      << "delay sat %" << std::setw(12) << "avg loss %" << std::setw(13) << "avg delay s" << '\n';
  out << std::fixed;
  for (const ClassSla& c : report.classes) {
    out << std::left << std::setw(10) << to_string(c.cls) << std::right << std::setprecision(2) << std::setw(12)
        << c.loss_sat_pct << std::setw(13) << c.delay_sat_pct << std::setw(12) << c.mean_loss_pct
        << std::setprecision(4) << std::setw(13) << c.mean_delay_s << '\n';
  }
  return out.str();
}

std::string format_measurements_csv(const Scenario& scenario, std::span<const LinkMeasurement> rows) {
  const bool truth = std::any_of(rows.begin(), rows.end(),
                                 [](const LinkMeasurement& m) { return m.true_cross_traffic_mbps.has_value(); });
  std::ostringstream out;
  out << "link,interval_end_s,delay_s,loss,jitter_s,throughput_mbps";
  if (truth) out << ",true_cross_traffic_mbps";
  out << '\n';
  for (const LinkMeasurement& m : rows) {
    out << scenario.links.at(m.link).id << ',' << format_number(m.interval_end_s) << ','
        << format_number(m.delay_s) << ',' << format_number(m.loss) << ',' << format_number(m.jitter_s) << ','
        << format_number(m.throughput_mbps);
    if (truth) out << ',' << (m.true_cross_traffic_mbps ? format_number(*m.true_cross_traffic_mbps) : "");
    out << '\n';
  }
  return out.str();
}

std::vector<LinkMeasurement> parse_measurements_csv(const Scenario& scenario, std::string_view text) {
  const CsvTable t(text, {"link", "interval_end_s", "delay_s", "loss", "throughput_mbps"});
  const bool jitter = t.has_column("jitter_s");
  const bool truth = t.has_column("true_cross_traffic_mbps");
  std::vector<LinkMeasurement> out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    LinkMeasurement m;
    m.link = link_by_id(scenario, t, r, "link");
    m.interval_end_s = t.number(r, "interval_end_s");
    m.delay_s = t.number(r, "delay_s");
    m.loss = t.number(r, "loss");
    if (jitter) m.jitter_s = t.number(r, "jitter_s");
    m.throughput_mbps = t.number(r, "throughput_mbps");
    if (truth && !t.text(r, "true_cross_traffic_mbps").empty()) {
      m.true_cross_traffic_mbps = t.number(r, "true_cross_traffic_mbps");
    }
    if (m.delay_s < 0 || m.loss < 0 || m.loss > 1 || m.throughput_mbps < 0) {
      throw CsvError(t.line(r), "delay and throughput must be >= 0 and loss in [0, 1]");
    }
    out.push_back(m);
  }
  return out;
}

std::string format_estimates_csv(const Scenario& scenario, std::span<const EstimateRecord> rows) {
  std::ostringstream out;
  out << "link,interval_end_s,rho,cross_traffic_mbps,safe_abw_mbps,flags\n";
  for (const EstimateRecord& r : rows) {
    const AbwEstimate& e = r.estimate;
    out << scenario.links.at(e.link).id << ',' << format_number(r.interval_end_s) << ',' << format_number(e.rho)
        << ',' << format_number(e.cross_traffic_mbps) << ',' << format_number(e.safe_abw_mbps) << ','
        << estimate_flags(e) << '\n';
  }
  return out.str();
}

std::string format_intervals_csv(const Scenario& scenario, std::span<const GroupInterval> rows) {
  std::ostringstream out;
  out << "interval_end_s,group,class,src,dst,offered_mbps,delivered_mbps,delay_s,loss,delay_ok,loss_ok\n";
  for (const GroupInterval& r : rows) {
    const FlowGroupInstance& g = scenario.groups.at(r.group);
    out << format_number(r.interval_end_s) << ',' << g.id << ',' << to_string(g.cls) << ',' << g.src << ','
        << g.dst << ',' << format_number(r.offered_mbps) << ',' << format_number(r.delivered_mbps) << ','
        << format_number(r.delay_s) << ',' << format_number(r.loss) << ',' << (r.delay_ok ? 1 : 0) << ','
        << (r.loss_ok ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string format_spr_policy_csv(const Scenario& scenario, const SprPolicy& policy) {
  std::ostringstream out;
  out << "group,link,split\n";
  for (std::size_t k = 0; k < policy.rows.size(); ++k) {
    const SprRow& row = policy.rows[k];
    for (std::size_t i = 0; i < row.links.size(); ++i) {
      out << scenario.groups.at(k).id << ',' << scenario.links.at(row.links[i]).id << ','
          << format_number(row.split[i]) << '\n';
    }
  }
  return out.str();
}

std::vector<double> parse_demands_csv(const Scenario& scenario, std::string_view text) {
  const CsvTable t(text, {"group", "demand_mbps"});
  std::vector<double> out;
  for (const FlowGroupInstance& g : scenario.groups) out.push_back(g.demand_mbps);
  for (std::size_t r = 0; r < t.size(); ++r) {
    const double d = t.number(r, "demand_mbps");
    if (d < 0) throw CsvError(t.line(r), "demand must be >= 0");
    out[group_by_id(scenario, t, r)] = d;
  }
  return out;
}

std::string format_qos_snapshot_csv(const Scenario& scenario, const QosSnapshot& snapshot) {
  std::ostringstream out;
  out << "group,link,demand_mbps,delay_s,loss\n";
  for (const QosDemand& d : snapshot.pairs) {
    out << scenario.groups.at(d.group).id << ',' << scenario.links.at(d.link).id << ','
        << format_number(d.demand_mbps) << ',' << format_number(d.delay_s) << ',' << format_number(d.loss) << '\n';
  }
  return out.str();
}

QosSnapshot parse_qos_snapshot_csv(const Scenario& scenario, std::string_view text,
                                   std::vector<double> capacity_mbps) {
  const CsvTable t(text, {"group", "link", "demand_mbps", "delay_s", "loss"});
  QosSnapshot s;
  s.capacity_mbps = std::move(capacity_mbps);
  std::vector<int> lines;
  for (std::size_t r = 0; r < t.size(); ++r) {
    QosDemand d;
    d.group = group_by_id(scenario, t, r);
    d.link = link_by_id(scenario, t, r, "link");
    const auto& allowed = scenario.groups[d.group].allowed_links;
    if (!std::binary_search(allowed.begin(), allowed.end(), d.link)) {
      throw CsvError(t.line(r), "link not allowed for this group");
    }
    d.demand_mbps = t.number(r, "demand_mbps");
    d.delay_s = t.number(r, "delay_s");
    d.loss = t.number(r, "loss");
    if (d.demand_mbps < 0 || d.delay_s < 0 || d.loss < 0 || d.loss > 1) {
      throw CsvError(t.line(r), "demand and delay must be >= 0 and loss in [0, 1]");
    }
    s.pairs.push_back(d);
    lines.push_back(t.line(r));
  }
  std::vector<std::size_t> order(s.pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(s.pairs[a].group, s.pairs[a].link) < std::tie(s.pairs[b].group, s.pairs[b].link);
  });
  std::vector<QosDemand> sorted;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const QosDemand& d = s.pairs[order[i]];
    if (!sorted.empty() && sorted.back().group == d.group && sorted.back().link == d.link) {
      throw CsvError(lines[order[i]], "duplicate (group, link) pair");
    }
    sorted.push_back(d);
  }
  s.pairs = std::move(sorted);
  return s;
}

std::string format_qos_policy_csv(const Scenario& scenario, const QosPolicy& policy) {
  std::ostringstream out;
  out << "group,link,rate_mbps,wfq_weight,shaper_mbps\n";
  for (const QosRule& r : policy.rules) {
    out << scenario.groups.at(r.group).id << ',' << scenario.links.at(r.link).id << ','
        << format_number(r.rate_mbps) << ',' << format_number(r.wfq_weight) << ','
        << (r.shaper_mbps ? format_number(*r.shaper_mbps) : "") << '\n';
  }
  return out.str();
}

}  // namespace sdwan
