#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "hebr/csv.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kBin = HEBR_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = kBin + " " + args + " > /dev/null 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::size_t count_rows(const std::string& csv_path) {
  hebr::CsvReader r(csv_path);
  std::vector<std::string> f;
  std::size_t n = 0;
  while (r.next(f)) ++n;
  return n;
}

struct Workspace {
  fs::path root;
  Workspace() {
    root = fs::temp_directory_path() / "hebr_cli_ws";
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }
  std::string p(const std::string& rel) const { return (root / rel).string(); }
};

// Desk-scale fixture: short windows so the whole pipeline runs in seconds.
void write_configs(const Workspace& ws) {
  std::ofstream gen(ws.p("gen.json"));
  gen << R"({
    "n_areas": 2, "users_per_area": 20, "n_days": 160, "rng_seed": 5,
    "theft": {"rate": 0.12, "min_exposure_lo_days": 12, "min_exposure_hi_days": 16,
               "investigation_period_days": 10, "first_checkpoint_day": 40,
               "last_checkpoint_day": 140, "second_interval_prob": 0.5,
               "rest_days_after_checkpoint": 10}
  })";
  gen.close();
  std::ofstream runcfg(ws.p("run.json"));
  runcfg << R"({
    "window_days": 30, "horizon_days": 10,
    "model": {"d_e": 6, "d_l": 3, "d_c": 3, "d_ec": 6, "d_el": 6, "d_elc": 6},
    "train": {"batch_size": 64, "max_epochs": 3, "patience": 3, "rng_seed": 9, "threads": 1}
  })";
}

}  // namespace

TEST_CASE("end-to-end command pipeline") {
  Workspace ws;
  write_configs(ws);

  REQUIRE(run("synth --config " + ws.p("gen.json") + " --out " + ws.p("data")) == 0);
  for (const char* f : {"usage.csv", "ntl.csv", "temperature.csv", "labels.csv",
                        "ground_truth.csv", "config.json"}) {
    CHECK(fs::exists(ws.root / "data" / f));
  }

  CHECK(run("diagnose --data " + ws.p("data") + " --ground-truth " +
            ws.p("data/ground_truth.csv")) == 0);

  REQUIRE(run("train --config " + ws.p("run.json") + " --data " + ws.p("data") + " --out " +
              ws.p("model")) == 0);
  CHECK(fs::exists(ws.root / "model" / "checkpoint.json"));
  CHECK(fs::exists(ws.root / "model" / "train_report.csv"));
  CHECK(fs::exists(ws.root / "model" / "config.json"));  // config echoed

  CHECK(run("eval --checkpoint " + ws.p("model/checkpoint.json") + " --data " + ws.p("data") +
            " --out " + ws.p("eval")) == 0);
  CHECK(fs::exists(ws.root / "eval" / "metrics.csv"));

  CHECK(run("score --checkpoint " + ws.p("model/checkpoint.json") + " --data " + ws.p("data") +
            " --out " + ws.p("scores") + " --top-k 7") == 0);
  CHECK(count_rows(ws.p("scores/suspects.csv")) == 7);

  // ranked by descending probability
  {
    hebr::CsvReader r(ws.p("scores/suspects.csv"));
    std::vector<std::string> f;
    double prev = 1.1;
    const auto col = r.column("probability");
    while (r.next(f)) {
      const double p = r.to_double(f[col]);
      CHECK(p <= prev + 1e-12);
      prev = p;
    }
  }

  // determinism: re-running synth yields byte-identical CSVs
  REQUIRE(run("synth --config " + ws.p("gen.json") + " --out " + ws.p("data2")) == 0);
  for (const char* f : {"usage.csv", "labels.csv"}) {
    std::ifstream a(ws.p(std::string("data/") + f), std::ios::binary);
    std::ifstream b(ws.p(std::string("data2/") + f), std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), {});
    const std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
  }
}

TEST_CASE("exit codes by failure class") {
  Workspace ws;
  write_configs(ws);
  // config errors -> 2
  std::ofstream bad(ws.p("bad.json"));
  bad << R"({"n_areas": -3})";
  bad.close();
  CHECK(run("synth --config " + ws.p("bad.json") + " --out " + ws.p("x")) == 2);
  // data errors -> 3
  CHECK(run("train --config " + ws.p("run.json") + " --data " + ws.p("nope") + " --out " +
            ws.p("y")) == 3);
}

TEST_CASE("gradcheck command passes at the documented tolerance") {
  CHECK(run("gradcheck --seed 7") == 0);
}
