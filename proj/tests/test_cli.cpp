// Drives the command line binary end to end; the binary path arrives as
// argv[1] from CMake.
#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fhmm/model.hpp"

using namespace fhmm;
namespace fs = std::filesystem;

namespace {

std::string g_cli;
fs::path g_dir;

int run(const std::string& args) {
  const std::string cmd = g_cli + " " + args + " 2>" +
                          (g_dir / "stderr.txt").string() + " >" +
                          (g_dir / "stdout.txt").string();
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

std::string q(const fs::path& p) { return p.string(); }

// Well-separated generator with a rare (1,1) joint state so that the merged
// three-class evaluation stays clean.
FhmmModel fixture_model() {
  FhmmModel m;
  m.chains[0].A.resize(2, 2);
  m.chains[1].A.resize(2, 2);
  m.chains[0].A << 0.97, 0.03, 0.30, 0.70;
  m.chains[1].A << 0.95, 0.05, 0.40, 0.60;
  m.chains[0].phi.resize(2);
  m.chains[1].phi.resize(2);
  m.chains[0].phi << 0.9, 0.1;
  m.chains[1].phi << 0.9, 0.1;
  m.feature_names = {"pm10", "wind", "visibility", "humidity"};
  m.emissions.family = EmissionFamily::LogNormalCopula;
  m.emissions.mu.resize(4, 4);
  m.emissions.sigma.resize(4, 4);
  m.emissions.mu << 3.0, 0.5, 2.2, 3.6,
                    5.0, 1.6, 1.2, 2.6,
                    4.2, -1.2, 0.6, 4.4,
                    5.4, 1.0, 0.2, 3.8;
  m.emissions.sigma.setConstant(0.2);
  m.emissions.inflated.pi0 = 0.6;
  m.emissions.inflated.theta = 2.2;
  m.emissions.inflated.eta2 = 0.04;
  m.emissions.inflated.c = 10.0;
  m.emissions.mu(0, kVisibilityDim) = 2.2;
  m.emissions.sigma(0, kVisibilityDim) = 0.2;
  m.emissions.R_global = Matrix::Identity(4, 4);
  return m;
}

fs::path fixture_model_path() {
  const fs::path p = g_dir / "truth_model.json";
  if (!fs::exists(p)) save_model(fixture_model(), p.string());
  return p;
}

fs::path fixture_data_path() {
  const fs::path p = g_dir / "sim.csv";
  if (!fs::exists(p)) {
    const int rc = run("simulate --model " + q(fixture_model_path()) +
                       " --length 3000 --seed 7 --out " + q(p));
    REQUIRE(rc == 0);
  }
  return p;
}

}  // namespace

TEST_CASE("simulate writes a labeled hourly csv") {
  const auto csv = slurp(fixture_data_path());
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  CHECK(line ==
        "timestamp,pm10,wind,visibility,humidity,label_haze,label_dust");
  std::getline(is, line);
  CHECK(line.rfind("2020-01-01T00:00:00,", 0) == 0);
  int rows = 1;
  while (std::getline(is, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3000);
}

TEST_CASE("simulate is byte-identical per seed and differs across seeds") {
  const auto a = g_dir / "sim_a.csv";
  const auto b = g_dir / "sim_b.csv";
  const auto c = g_dir / "sim_c.csv";
  const std::string base =
      "simulate --model " + q(fixture_model_path()) + " --length 200 ";
  REQUIRE(run(base + "--seed 42 --out " + q(a)) == 0);
  REQUIRE(run(base + "--seed 42 --out " + q(b)) == 0);
  REQUIRE(run(base + "--seed 43 --out " + q(c)) == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a) != slurp(c));
}

TEST_CASE("closed loop: simulate, train supervised, evaluate") {
  const auto model_out = g_dir / "trained.json";
  REQUIRE(run("train --input " + q(fixture_data_path()) +
              " --variant m2a --mode supervised --out " + q(model_out)) == 0);

  const auto eval_out = g_dir / "eval.json";
  REQUIRE(run("evaluate --model " + q(model_out) + " --input " +
              q(fixture_data_path()) + " --out " + q(eval_out)) == 0);

  const auto j = nlohmann::json::parse(slurp(eval_out));
  CHECK(j["micro_f1"].get<double>() > 0.95);
  CHECK(j["macro_f1"].get<double>() > 0.8);
  double total = 0.0;
  for (const auto& row : j["confusion"])
    for (const auto& cell : row) total += cell.get<double>();
  CHECK(total == 3000.0);
  CHECK(j["auc"]["micro"].get<double>() > 0.9);
}

TEST_CASE("decode writes one row per input and accepts tuned omega and v") {
  const auto model_out = g_dir / "trained.json";
  REQUIRE(fs::exists(model_out));
  const auto dec = g_dir / "decoded.csv";
  REQUIRE(run("decode --model " + q(model_out) + " --input " +
              q(fixture_data_path()) + " --omega 1.10 --v 16.47 " +
              "--weighting normalized --out " + q(dec)) == 0);
  const auto csv = slurp(dec);
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  CHECK(line == "timestamp,k1,k2,class_label");
  int rows = 0;
  bool saw_clear = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    ++rows;
    if (line.find(",Clear") != std::string::npos) saw_clear = true;
    // merge_to_clear is the default rule, so (1,1) never survives
    CHECK(line.find("Haze&Dust") == std::string::npos);
  }
  CHECK(rows == 3000);
  CHECK(saw_clear);
}

TEST_CASE("variant m0 stores an identity dependence matrix") {
  const auto out = g_dir / "m0.json";
  REQUIRE(run("train --input " + q(fixture_data_path()) +
              " --variant m0 --mode supervised --out " + q(out)) == 0);
  const FhmmModel m = load_model(out.string());
  CHECK((m.emissions.R_global - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("forecast emits one probability row per horizon step") {
  const auto out = g_dir / "forecast.csv";
  REQUIRE(run("forecast --model " + q(fixture_model_path()) + " --input " +
              q(fixture_data_path()) + " --horizon 6 --out " + q(out)) == 0);
  std::istringstream is(slurp(out));
  std::string line;
  std::getline(is, line);
  CHECK(line == "h,p_clear,p_haze,p_dust,p_both");
  int rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    ++rows;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    CHECK(std::stoi(cell) == rows);
    double sum = 0.0;
    while (std::getline(ls, cell, ',')) sum += std::stod(cell);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(rows == 6);
}

TEST_CASE("mi-report lists every state and feature pair") {
  const auto out = g_dir / "mi.csv";
  const auto delta = g_dir / "mi_delta.csv";
  REQUIRE(run("mi-report --input " + q(fixture_data_path()) + " --out " +
              q(out) + " --delta-out " + q(delta)) == 0);
  std::istringstream is(slurp(out));
  std::string line;
  std::getline(is, line);
  CHECK(line == "state,feature,mi,weight");
  int rows = 0;
  while (std::getline(is, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 16);
  CHECK(slurp(delta).rfind("feature,bin_lo,bin_hi,class,delta_i", 0) == 0);
}

TEST_CASE("gridsearch reports the winning corner on stdout") {
  const auto model_out = g_dir / "trained.json";
  REQUIRE(fs::exists(model_out));
  const auto out = g_dir / "grid.csv";
  REQUIRE(run("gridsearch --model " + q(model_out) + " --input " +
              q(fixture_data_path()) + " --omega-range 0.8:1.2:2 " +
              "--v-range 1:4:2 --weighting normalized --out " + q(out)) == 0);
  CHECK(slurp(g_dir / "stdout.txt").rfind("best: omega=", 0) == 0);
  std::istringstream is(slurp(out));
  std::string line;
  std::getline(is, line);
  CHECK(line == "omega,v,micro_f1,macro_f1");
  int rows = 0;
  while (std::getline(is, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 4);
}

TEST_CASE("user mistakes exit 1") {
  CHECK(run("train --input /nope.csv --out " + q(g_dir / "x.json")) == 1);
  CHECK(run("train --input " + q(fixture_data_path()) +
            " --variant bogus --out " + q(g_dir / "x.json")) == 1);
  CHECK(run("decode --model /nope.json --input " + q(fixture_data_path()) +
            " --out " + q(g_dir / "x.csv")) == 1);

  // unlabeled input cannot be evaluated
  const auto unlabeled = g_dir / "unlabeled.csv";
  {
    std::istringstream is(slurp(fixture_data_path()));
    std::ofstream out(unlabeled);
    std::string line;
    while (std::getline(is, line))
      out << line.substr(0, line.rfind(',', line.rfind(',') - 1)) << '\n';
  }
  CHECK(run("evaluate --model " + q(fixture_model_path()) + " --input " +
            q(unlabeled) + " --out " + q(g_dir / "x.json")) == 1);
}

TEST_CASE("library faults exit 2") {
  // a state with exactly one labeled sample cannot be fit
  const auto bad = g_dir / "single_sample.csv";
  {
    std::ofstream out(bad);
    out << "timestamp,pm10,wind,visibility,humidity,label_haze,label_dust\n";
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int t = 0; t < 40; ++t) {
      const int haze = t == 0 ? 1 : 0;
      char ts[32];
      std::snprintf(ts, sizeof ts, "2020-01-01T%02d:%02d:00", t / 60, t % 60);
      out << ts << ',' << std::exp(3.0 + 0.2 * n(rng)) << ','
          << std::exp(0.5 + 0.2 * n(rng)) << ','
          << std::exp(2.0 + 0.2 * n(rng)) << ','
          << std::exp(3.5 + 0.2 * n(rng)) << ',' << haze << ",0\n";
    }
  }
  CHECK(run("train --input " + q(bad) + " --mode supervised --out " +
            q(g_dir / "x.json")) == 2);
}

int main(int argc, char** argv) {
  doctest::Context ctx;
  int consumed = argc;
  if (argc > 1 && argv[1][0] != '-') {
    g_cli = argv[1];
    // hide the binary path from doctest's own option parser
    for (int i = 1; i + 1 < argc; ++i) argv[i] = argv[i + 1];
    consumed = argc - 1;
  }
  if (g_cli.empty()) {
    std::fprintf(stderr, "usage: test_cli <path-to-fhmm-binary> [doctest args]\n");
    return 1;
  }
  g_dir = fs::temp_directory_path() / "fhmm_cli_test";
  fs::create_directories(g_dir);
  ctx.applyCommandLine(consumed, argv);
  const int rc = ctx.run();
  std::error_code ec;
  fs::remove_all(g_dir, ec);
  return rc;
}
