#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.h"
#include "sdwan/cli.h"
#include "sdwan/report_io.h"
#include "sdwan/scenario_io.h"

using namespace sdwan;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sdwan");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// Scratch directory removed on scope exit.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("sdwan_test_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
};

Scenario toy() {
  testing::Builder b;
  b.node("s").network("m", NetworkKind::kMpls).network("i").port("s", "i", 10);
  b.link("em", "h", "s", "m", 5, 0.01).link("ei", "h", "s", "i", 10, 0.03);
  b.group("c", "h", "s", TrafficClass::kCritical, 1).group("o", "h", "s", TrafficClass::kOffice, 5);
  CrossTrafficProfile c;
  c.node = "s";
  c.network = "i";
  c.steps = {{0, 3}};
  b.raw().cross_traffic.push_back(c);
  b.raw().loops.duration_s = 60;
  return b.build();
}

std::string toy_file(const Scratch& s) {
  const fs::path p = s.dir / "toy.json";
  save_scenario(toy(), p);
  return p.string();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("validate") {
    Scratch tmp("validate");
    const std::string path = toy_file(tmp);
    Outcome r = cli({"validate", path});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("2 overlay links") != std::string::npos);

    CHECK(cli({"validate", (tmp.dir / "missing.json").string()}).code == kExitRuntime);
    spit(tmp.dir / "bad.json", "{ not json");
    CHECK(cli({"validate", (tmp.dir / "bad.json").string()}).code == kExitValidation);

    Scenario broken = toy();
    broken.groups[0].sla_loss = 1.2;
    spit(tmp.dir / "broken.json", format_scenario(broken));
    r = cli({"validate", (tmp.dir / "broken.json").string()});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("sla_loss") != std::string::npos);
  }

  TEST_CASE("usage errors") {
    CHECK(cli({}).code == kExitValidation);
    CHECK(cli({"frobnicate"}).code == kExitValidation);
    CHECK(cli({"--help"}).code == kExitOk);
    Scratch tmp("usage");
    const std::string path = toy_file(tmp);
    CHECK(cli({"simulate", path, "--spr", "best"}).code == kExitValidation);
    CHECK(cli({"simulate", path, "--sabe", "maybe"}).code == kExitValidation);
    CHECK(cli({"--format", "xml", "validate", path}).code == kExitValidation);
  }

  TEST_CASE("simulate writes its files and repeats byte for byte") {
    Scratch tmp("simulate");
    const std::string path = toy_file(tmp);
    const fs::path a = tmp.dir / "a", b = tmp.dir / "b";
    Outcome r1 = cli({"--seed", "7", "--out", a.string(), "simulate", path, "--spr", "mlu", "--qos", "ls", "--sabe", "on"});
    Outcome r2 = cli({"--seed", "7", "--out", b.string(), "simulate", path, "--spr", "mlu", "--qos", "ls", "--sabe", "on"});
    REQUIRE(r1.code == kExitOk);
    REQUIRE(r2.code == kExitOk);
    CHECK(r1.out == r2.out);
    for (const char* f : {"report.csv", "trace.csv", "measurements.csv", "estimates.csv"}) {
      CHECK(fs::exists(a / f));
      CHECK(slurp(a / f) == slurp(b / f));
    }
    CHECK(slurp(a / "report.csv").rfind("class,loss_sat_pct,delay_sat_pct,mean_loss_pct,mean_delay_s\n", 0) == 0);

    Outcome csv = cli({"--format", "csv", "--seed", "7", "simulate", path, "--spr", "mlu", "--qos", "ls", "--sabe", "on"});
    CHECK(csv.out == slurp(a / "report.csv"));
  }

  TEST_CASE("sweep") {
    Scratch tmp("sweep");
    const std::string path = toy_file(tmp);
    CHECK(cli({"sweep", path, "--spr", ""}).code == kExitValidation);
    CHECK(cli({"sweep", path, "--qos", "oracle", "--spr", "atns", "--sabe", "off"}).code == kExitOk);

    // A one-cell sweep reports what simulate reports.
    Outcome one = cli({"--format", "csv", "--seed", "3", "sweep", path, "--spr", "mlu", "--qos", "dist", "--sabe", "on"});
    Outcome sim = cli({"--format", "csv", "--seed", "3", "simulate", path, "--spr", "mlu", "--qos", "dist", "--sabe", "on"});
    REQUIRE(one.code == kExitOk);
    CsvTable sweep_rows(one.out, {"class", "loss_sat_pct", "delay_sat_pct"});
    CsvTable sim_rows(sim.out, {"class", "loss_sat_pct", "delay_sat_pct"});
    REQUIRE(sweep_rows.size() == sim_rows.size());
    for (std::size_t i = 0; i < sim_rows.size(); ++i) {
      CHECK(sweep_rows.text(i, "class") == sim_rows.text(i, "class"));
      CHECK(sweep_rows.text(i, "loss_sat_pct") == sim_rows.text(i, "loss_sat_pct"));
      CHECK(sweep_rows.text(i, "delay_sat_pct") == sim_rows.text(i, "delay_sat_pct"));
    }

    const fs::path a = tmp.dir / "a", b = tmp.dir / "b";
    CHECK(cli({"--out", a.string(), "sweep", path, "--seeds", "1,2", "--jobs", "3"}).code == kExitOk);
    CHECK(cli({"--out", b.string(), "sweep", path, "--seeds", "1,2", "--jobs", "1"}).code == kExitOk);
    CHECK(slurp(a / "sweep.csv") == slurp(b / "sweep.csv"));
    CHECK(slurp(a / "sweep_table.txt") == slurp(b / "sweep_table.txt"));
    CHECK(slurp(a / "sweep_table.txt").find(" / ") != std::string::npos);
  }

  TEST_CASE("estimate") {
    Scratch tmp("estimate");
    const std::string path = toy_file(tmp);
    const fs::path run = tmp.dir / "run";
    REQUIRE(cli({"--out", run.string(), "simulate", path}).code == kExitOk);
    Outcome r = cli({"estimate", (run / "measurements.csv").string(), "--scenario", path});
    CHECK(r.code == kExitOk);
    CHECK(r.out.rfind("link,interval_end_s,rho,cross_traffic_mbps,safe_abw_mbps,flags\n", 0) == 0);
    CHECK(r.err.find("relative error: mean") != std::string::npos);

    // Loss column missing.
    spit(tmp.dir / "noloss.csv", "link,interval_end_s,delay_s,jitter_s,throughput_mbps\nem,10,0.01,0,0\n");
    r = cli({"estimate", (tmp.dir / "noloss.csv").string(), "--scenario", path});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("loss") != std::string::npos);

    spit(tmp.dir / "short.csv", "link,interval_end_s,delay_s,loss,jitter_s,throughput_mbps\nem,10,0.01,0,0,0\nem,20,0.01\n");
    r = cli({"estimate", (tmp.dir / "short.csv").string(), "--scenario", path});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("line 3") != std::string::npos);
  }

  TEST_CASE("idle trace estimates no cross-traffic") {
    Scenario s = toy();
    std::vector<LinkMeasurement> trace;
    for (int i = 1; i <= 5; ++i) {
      for (std::size_t e = 0; e < s.links.size(); ++e) {
        LinkMeasurement m;
        m.link = e;
        m.interval_end_s = 10.0 * i;
        m.delay_s = s.links[e].prop_delay_s;
        trace.push_back(m);
      }
    }
    TraceEstimate r = estimate_trace(s, parse_measurements_csv(s, format_measurements_csv(s, trace)), SabeView::kController);
    CHECK(r.estimates.size() == trace.size());
    for (const EstimateRecord& e : r.estimates) {
      CHECK(e.estimate.cross_traffic_mbps <= 0.01 * s.links[e.estimate.link].nominal_capacity_mbps + 1e-12);
    }
    CHECK_FALSE(r.mean_relative_error.has_value());
  }

  TEST_CASE("optimize-spr and optimize-qos") {
    Scratch tmp("optimize");
    const std::string path = toy_file(tmp);
    spit(tmp.dir / "demands.csv", "group,demand_mbps\nc,2\no,9\n");
    Outcome r = cli({"optimize-spr", path, "--demands", (tmp.dir / "demands.csv").string()});
    CHECK(r.code == kExitOk);
    CsvTable policy(r.out, {"group", "link", "split"});
    CHECK(policy.size() == 4);
    CHECK(policy.number(0, "split") + policy.number(1, "split") == doctest::Approx(1));
    CHECK(cli({"optimize-spr", path, "--sabe", "on"}).code == kExitValidation);

    spit(tmp.dir / "snap.csv", "group,link,demand_mbps,delay_s,loss\nc,ei,1,0.03,0\no,ei,4,0.05,0\no,em,2,0.02,0\n");
    for (const char* mode : {"centralized", "distributed", "fixed-weights", "oracle"}) {
      r = cli({"optimize-qos", path, "--snapshot", (tmp.dir / "snap.csv").string(), "--mode", mode});
      CHECK(r.code == kExitOk);
      CHECK(r.out.rfind("group,link,rate_mbps,wfq_weight,shaper_mbps\n", 0) == 0);
    }
    spit(tmp.dir / "dup.csv", "group,link,demand_mbps,delay_s,loss\nc,ei,1,0.03,0\nc,ei,1,0.03,0\n");
    CHECK(cli({"optimize-qos", path, "--snapshot", (tmp.dir / "dup.csv").string()}).code == kExitValidation);
  }
}

TEST_SUITE("report_io") {
  TEST_CASE("numbers read back exactly") {
    for (double x : {0.0, 1.0, 0.1, 1.0 / 3, 2.656203386e-6, 12345.678}) {
      CHECK(std::stod(format_number(x)) == x);
    }
    CHECK(format_number(0.0) == "0");
    CHECK(format_number(-0.0) == "0");
  }

  TEST_CASE("CSV table errors carry line numbers") {
    CHECK_THROWS_AS(CsvTable("a,b\n1,2\n", {"c"}), CsvError);
    try {
      CsvTable t("a,b\n1,2\n\n# note\n3\n", {"a"});
      FAIL("expected an error");
    } catch (const CsvError& e) {
      CHECK(e.line() == 5);
    }
    CsvTable t("a,b\n1,x\n", {"a", "b"});
    CHECK(t.number(0, "a") == 1);
    CHECK_THROWS_AS(t.number(0, "b"), CsvError);
  }

  TEST_CASE("measurement trace round trip") {
    Scenario s = toy();
    RunResult run = run_scenario(s, {});
    const std::string text = format_measurements_csv(s, run.measurements);
    const std::vector<LinkMeasurement> back = parse_measurements_csv(s, text);
    REQUIRE(back.size() == run.measurements.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].link == run.measurements[i].link);
      CHECK(back[i].delay_s == run.measurements[i].delay_s);
      CHECK(back[i].loss == run.measurements[i].loss);
      CHECK(back[i].throughput_mbps == run.measurements[i].throughput_mbps);
      CHECK(back[i].true_cross_traffic_mbps == run.measurements[i].true_cross_traffic_mbps);
    }
    CHECK(format_measurements_csv(s, back) == text);
    CHECK_THROWS_AS(parse_measurements_csv(s, "link,interval_end_s,delay_s,loss,jitter_s,throughput_mbps\nzz,1,0,0,0,0\n"),
                    CsvError);
  }

  TEST_CASE("QoS snapshot round trip") {
    Scenario s = toy();
    QosSnapshot snap{{{0, 1, 1, 0.03, 0}, {1, 0, 2, 0.02, 0}, {1, 1, 4, 0.05, 0.01}}, {5, 10}};
    const QosSnapshot back = parse_qos_snapshot_csv(s, format_qos_snapshot_csv(s, snap), snap.capacity_mbps);
    REQUIRE(back.pairs.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(back.pairs[i].group == snap.pairs[i].group);
      CHECK(back.pairs[i].link == snap.pairs[i].link);
      CHECK(back.pairs[i].demand_mbps == snap.pairs[i].demand_mbps);
      CHECK(back.pairs[i].loss == snap.pairs[i].loss);
    }
  }
}
