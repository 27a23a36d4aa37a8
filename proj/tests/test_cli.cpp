#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "heraldsim/cli.hpp"
#include "heraldsim/experiments.hpp"
#include "heraldsim/tomography.hpp"

using namespace heraldsim;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("heraldsim_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t data_rows(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ++n;
  return n - 1;
}

std::string fixture(const std::string& name) { return std::string(HERALDSIM_FIXTURES) + "/" + name; }
std::string config(const std::string& ratio) {
  return std::string(HERALDSIM_SOURCE_DIR) + "/configs/ratio_" + ratio + ".json";
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors") {
    CHECK(run({}).code == kExitUsage);
    CHECK(run({"teleport"}).code == kExitUsage);
    CHECK(run({"sweep"}).code == kExitUsage);
    CHECK(run({"sweep", "--t", "abc", "--out", scratch("bad_t").string()}).code == kExitUsage);
    CHECK(run({"simulate", "--config", config("50_50"), "--out", scratch("noseed").string()}).code == kExitUsage);
    CHECK(run({"tomo-sim", "--state", "phi+", "--out", scratch("noseed2").string()}).code == kExitUsage);
    CHECK(run({"metrics", "--out", scratch("nothing").string()}).code == kExitUsage);
  }

  TEST_CASE("help exits cleanly") {
    const Run r = run({"--help"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("reconstruct") != std::string::npos);
    CHECK(run({"sweep", "--help"}).code == kExitOk);
  }

  TEST_CASE("data errors") {
    CHECK(run({"simulate", "--config", "/nonexistent.json", "--seed", "1", "--out", scratch("missing").string()}).code ==
          kExitData);
    const fs::path dir = scratch("badcounts");
    fs::create_directories(dir);
    std::ofstream(dir / "bad.csv") << "ratio,count\nx,1\n";
    CHECK(run({"reconstruct", "--counts", (dir / "bad.csv").string(), "--out", dir.string()}).code == kExitData);
    CHECK(run({"metrics", "--c4", "0", "--c6", "1", "--eta", "0.1", "--out", dir.string()}).code == kExitData);
  }

  TEST_CASE("output directory falls back to the environment") {
    const fs::path dir = scratch("env");
    ::unsetenv("HERALDSIM_OUT");
    CHECK(run({"sweep", "--t", "0.5"}).code == kExitUsage);
    ::setenv("HERALDSIM_OUT", dir.c_str(), 1);
    const Run r = run({"sweep", "--t", "0.5", "--pairs", "3"});
    ::unsetenv("HERALDSIM_OUT");
    CHECK(r.code == kExitOk);
    CHECK(fs::exists(dir / "sweep.csv"));
  }

  TEST_CASE("sweep writes one row per transmission") {
    const fs::path dir = scratch("sweep");
    REQUIRE(run({"sweep", "--t", "0.17,0.3,0.5,0.7", "--pairs", "3", "--out", dir.string()}).code == kExitOk);
    CHECK(data_rows(dir / "sweep.csv") == 4);
    std::ifstream in(dir / "fig2_series.csv");
    const Series s = read_series(in);
    REQUIRE(s.points.size() == 4);
    CHECK(s.points[3].x == 0.7);
    CHECK(s.points[3].y > s.points[0].y);
  }

  TEST_CASE("calibrate writes the power comparison") {
    const fs::path dir = scratch("calibrate");
    REQUIRE(run({"calibrate", "--out", dir.string()}).code == kExitOk);
    CHECK(data_rows(dir / "fig3_series.csv") == 2);
    const json pc = json::parse(slurp(dir / "power_comparison.json"));
    CHECK(pc.contains("f_post_high"));
    const json cal = json::parse(slurp(dir / "calibration.json"));
    CHECK(cal.at("tau_low").get<double>() < cal.at("tau_high").get<double>());
  }

  TEST_CASE("reconstruct reports functionals with error bars") {
    const fs::path dir = scratch("reconstruct");
    const Run r = run({"reconstruct", "--counts", fixture("counts_50_50.csv"), "--optimize-local", "--mc-samples", "20",
                       "--seed", "3", "--out", dir.string()});
    REQUIRE(r.code == kExitOk);
    const json j = json::parse(slurp(dir / "reconstruction.json"));
    CHECK(j.at("converged").get<bool>());
    const double f = j.at("functionals").at("fidelity").at("value").get<double>();
    CHECK(f > 0.5);
    CHECK(f < 0.65);
    CHECK(j.at("functionals").at("fidelity").at("mc_std").get<double>() > 0.0);
    CHECK(run({"reconstruct", "--counts", fixture("counts_50_50.csv"), "--mc-samples", "20", "--out", dir.string()})
              .code == kExitUsage);

    const Run m = run({"metrics", "--rho", (dir / "reconstruction.json").string(), "--optimize-local", "--p11",
                       "3.06e-3", "--out", dir.string()});
    REQUIRE(m.code == kExitOk);
    const json mj = json::parse(slurp(dir / "metrics.json"));
    CHECK(mj.at("fidelity_post").get<double>() == doctest::Approx(f).epsilon(1e-9));
    CHECK(mj.at("fidelity_meas").get<double>() == doctest::Approx(3.06e-3 * f).epsilon(1e-9));
  }

  TEST_CASE("iteration limit reports non-convergence") {
    const fs::path dir = scratch("noconv");
    CHECK(run({"reconstruct", "--counts", fixture("counts_30_70.csv"), "--max-iterations", "1", "--out", dir.string()})
              .code == kExitNoConvergence);
  }

  TEST_CASE("tomo-sim output feeds reconstruct") {
    const fs::path dir = scratch("tomo");
    REQUIRE(run({"tomo-sim", "--state", "werner:0.8", "--events", "20000", "--seed", "4", "--ratio", "test", "--out",
                 dir.string()})
                .code == kExitOk);
    const CountTable t = ingest_counts_file((dir / "counts.csv").string());
    CHECK(t.ratio == "test");
    CHECK(t.settings().size() == 9);
    REQUIRE(run({"reconstruct", "--counts", (dir / "counts.csv").string(), "--out", dir.string()}).code == kExitOk);
    const json j = json::parse(slurp(dir / "reconstruction.json"));
    CHECK(j.at("functionals").at("fidelity").at("value").get<double>() == doctest::Approx(0.85).epsilon(0.02));
    CHECK(run({"tomo-sim", "--state", "werner:2", "--seed", "1", "--out", dir.string()}).code == kExitData);
  }

  TEST_CASE("simulate writes re-ingestible outputs") {
    const fs::path dir = scratch("simulate");
    REQUIRE(run({"simulate", "--config", config("50_50"), "--seed", "9", "--events", "3000", "--out", dir.string()})
                .code == kExitOk);
    for (const char* f : {"config.json", "number_table.csv", "counts.csv", "report.json"}) CHECK(fs::exists(dir / f));
    CHECK_NOTHROW(load_config((dir / "config.json").string()));
    std::ifstream nt(dir / "number_table.csv");
    CHECK(read_number_table(nt).total() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ingest_counts_file((dir / "counts.csv").string()).ratio == "50/50");
  }

  TEST_CASE("repeated commands produce identical bytes") {
    const std::vector<std::vector<std::string>> commands{
        {"simulate", "--config", config("30_70"), "--seed", "5", "--events", "2000"},
        {"tomo-sim", "--state", "phi+", "--seed", "5", "--events", "500"},
        {"reconstruct", "--counts", fixture("counts_17_83.csv"), "--mc-samples", "10", "--seed", "5"},
        {"sweep", "--t", "0.3,0.7", "--pairs", "4", "--tau", "0.07"},
        {"reproduce-tables", "--config", config("70_30"), "--reference", fixture("table1.csv")},
    };
    int k = 0;
    for (const auto& cmd : commands) {
      const fs::path a = scratch("det_a" + std::to_string(k));
      const fs::path b = scratch("det_b" + std::to_string(k));
      ++k;
      auto with_out = [&](const fs::path& d) {
        auto c = cmd;
        c.push_back("--out");
        c.push_back(d.string());
        return c;
      };
      REQUIRE(run(with_out(a)).code == kExitOk);
      REQUIRE(run(with_out(b)).code == kExitOk);
      for (const auto& entry : fs::directory_iterator(a)) {
        CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
      }
    }
  }
}
