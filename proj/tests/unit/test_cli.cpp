#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "qmfd/config.hpp"
#include "qmfd/error.hpp"
#include "qmfd/experiments.hpp"
#include "qmfd/io.hpp"

using namespace qmfd;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("qmfd_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  return p;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "qmfd");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

bool has_issue(const std::vector<ValidationIssue>& v, const std::string& field) {
  for (const auto& i : v)
    if (i.field == field) return true;
  return false;
}

}  // namespace

TEST_CASE("number formatting round-trips") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) CHECK(std::stod(format_number(x)) == x);
  CHECK(format_number(64) == "64");
  CsvTable t({"a", "b"});
  t.row(std::vector<double>{1, 0.5});
  CHECK(t.str() == "a,b\n1,0.5\n");
  CHECK_THROWS(t.row(std::vector<double>{1}));
}

TEST_CASE("binary array dump layout and round trip") {
  auto dir = scratch("array");
  Eigen::MatrixXcd m(2, 3);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = cplx(i + 0.25 * j, -j);
  write_array(dir / "m.qmfd", m);
  const std::string bytes = slurp(dir / "m.qmfd");
  REQUIRE(bytes.size() == 16 + 6 * 16);
  CHECK(bytes.substr(0, 4) == "QMFD");
  std::uint16_t version, rank;
  std::uint32_t d0, d1;
  std::memcpy(&version, bytes.data() + 4, 2);
  std::memcpy(&rank, bytes.data() + 6, 2);
  std::memcpy(&d0, bytes.data() + 8, 4);
  std::memcpy(&d1, bytes.data() + 12, 4);
  CHECK(version == 1);
  CHECK(rank == 2);
  CHECK(d0 == 2);
  CHECK(d1 == 3);
  // Row-major: the second stored value is m(0, 1).
  double re, im;
  std::memcpy(&re, bytes.data() + 32, 8);
  std::memcpy(&im, bytes.data() + 40, 8);
  CHECK(re == 0.25);
  CHECK(im == -1.0);
  auto back = read_array(dir / "m.qmfd");
  REQUIRE(back.dims == std::vector<std::uint32_t>{2, 3});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) CHECK(back.data[static_cast<std::size_t>(i * 3 + j)] == m(i, j));

  CVec v = CVec::LinSpaced(5, 0.0, 1.0);
  write_array(dir / "v.qmfd", v);
  auto bv = read_array(dir / "v.qmfd");
  CHECK(bv.dims == std::vector<std::uint32_t>{5});
  CHECK(bv.data[4] == cplx(1.0, 0.0));
  std::ofstream(dir / "bad.qmfd") << "QMFX";
  CHECK_THROWS(read_array(dir / "bad.qmfd"));
}

TEST_CASE("defaults are valid and config overlays are checked") {
  for (const auto& name : experiment_names()) {
    auto c = default_config(name);
    CHECK_MESSAGE(validate(c).empty(), name);
    auto j = to_json(c);
    ExperimentConfig d = default_config(name);
    apply_json(d, j);
    CHECK(to_json(d) == j);
  }
  CHECK_THROWS_AS(default_config("nope"), ValidationError);
  auto c = default_config("gap");
  CHECK_THROWS_AS(apply_json(c, json{{"grid", {{"n_points", 16}}}}), ValidationError);
  CHECK_THROWS_AS(apply_json(c, json{{"time", {{"dt", "small"}}}}), ValidationError);
  CHECK_THROWS_AS(apply_json(c, json{{"grid", {{"n_per_dim", 16.5}}}}), ValidationError);
  CHECK_THROWS_AS(apply_json(c, json{{"seed", -1}}), ValidationError);
  apply_json(c, json{{"potential", {{"beta", 0.1}}}, {"seed", 7}});
  CHECK(c.potential.beta == 0.1);
  CHECK(c.potential.amplitude == 40.0);
  CHECK(c.seed == 7u);
}

TEST_CASE("validation catches module preconditions") {
  auto gap = default_config("gap");
  gap.n_per_dim = 8;  // 1024^0.15 > 2
  CHECK(has_issue(validate(gap), "sweep.N_list"));
  gap = default_config("gap");
  gap.potential.beta = 0.2;
  CHECK(has_issue(validate(gap), "potential"));
  gap = default_config("gap");
  gap.N_list = {64, 16};
  CHECK(has_issue(validate(gap), "sweep.N_list"));

  auto eb = default_config("errorbounds");
  eb.fock.m = 4;
  CHECK(has_issue(validate(eb), "fock.m"));
  eb = default_config("errorbounds");
  eb.fock.M_modes = 3;
  CHECK(has_issue(validate(eb), "fock.M_modes"));

  auto k = default_config("kernels");
  k.n_per_dim = 32;
  CHECK(has_issue(validate(k), "grid.n_per_dim"));

  auto fb = default_config("fewbody");
  fb.lattice.particles = 2;
  CHECK(has_issue(validate(fb), "lattice.particles"));
  fb = default_config("fewbody");
  fb.lattice.sites_per_dim = 7;
  CHECK(has_issue(validate(fb), "lattice.sites_per_dim"));

  auto p = default_config("pairing");
  p.pairing.k = 3.0;
  CHECK(has_issue(validate(p), "pairing.k"));

  auto r = run_experiment(gap);
  CHECK(r.exit_code == 2);
  CHECK(r.summary["status"] == "invalid_config");
}

TEST_CASE("command line exit codes and precedence") {
  auto dir = scratch("flags");
  CHECK(cli({"--experiment", "nope"}) == 2);
  CHECK(cli({}) == 2);
  CHECK(cli({"--experiment", "gap", "--n-per-dim", "12"}) == 2);
  CHECK(cli({"--experiment", "gap", "--bogus-flag", "1"}) == 2);
  CHECK(cli({"--list"}) == 0);

  fs::create_directories(dir);
  std::ofstream(dir / "cfg.json") << R"({"experiment": "pairing", "pairing": {"h": 3.0, "k": 2.0, "instances": 5}})";
  CHECK(cli({"--config", (dir / "cfg.json").string(), "--pairing-k", "1.5", "--out", (dir / "p").string()}) == 0);
  auto s = read_json(dir / "p" / "summary.json");
  CHECK(s["schema_version"] == 1);
  CHECK(s["config"]["pairing"]["h"] == 3.0);
  CHECK(s["config"]["pairing"]["k"] == 1.5);
  CHECK(s["config"]["pairing"]["instances"] == 5);
  CHECK(s["metrics"]["reference_ground_energy"].get<double>() ==
        doctest::Approx(0.5 * (std::sqrt(9.0 - 2.25) - 3.0)));

  std::ofstream(dir / "bad.json") << R"({"experiment": "pairing", "pairing": {"h": "two"}})";
  CHECK(cli({"--config", (dir / "bad.json").string()}) == 2);
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(cli({"--config", (dir / "broken.json").string()}) == 2);
}

TEST_CASE("pairing run reproduces the single-mode closed form") {
  auto dir = scratch("pairing");
  CHECK(cli({"--experiment", "pairing", "--pairing-h", "2", "--pairing-k", "1", "--out", dir.string()}) == 0);
  auto s = read_json(dir / "summary.json");
  CHECK(s["status"] == "pass");
  bool seen_ground = false, seen_min = false;
  for (const auto& c : s["criteria"]) {
    if (c["name"] == "single_mode_ground_energy") {
      seen_ground = true;
      CHECK(std::abs(c["value"].get<double>() - (-0.13397)) < 1e-4);
    }
    if (c["name"] == "single_mode_min_eig") {
      seen_min = true;
      CHECK(c["value"].get<double>() >= -1e-8);
    }
  }
  CHECK(seen_ground);
  CHECK(seen_min);
  CHECK(fs::exists(dir / "pairing.csv"));
}

TEST_CASE("gap at zero amplitude passes trivially") {
  auto dir = scratch("gap0");
  CHECK(cli({"--experiment", "gap", "--amplitude", "0", "--n-per-dim", "16", "--N-list", "16,64,256", "--t-final",
             "0.05", "--out", dir.string()}) == 0);
  auto s = read_json(dir / "summary.json");
  CHECK(s["metrics"]["trivially_zero"] == true);
  CHECK(s["metrics"]["slope_defined"] == false);
  CHECK(s["metrics"]["slope"].is_null());
  const std::string csv = slurp(dir / "gap.csv");
  CHECK(csv == "N,error,resolved\n16,0,1\n64,0,1\n256,0,1\n");
}

TEST_CASE("short conservation run") {
  auto dir = scratch("conserve");
  CHECK(cli({"--experiment", "conserve", "--n-per-dim", "16", "--t-final", "0.1", "--out", dir.string()}) == 0);
  auto s = read_json(dir / "summary.json");
  for (const auto& c : s["criteria"])
    if (c["name"] == "hartree_mass_drift") CHECK(c["value"].get<double>() < 1e-10);
  auto a = read_array(dir / "conserve_final_hartree.qmfd");
  CHECK(a.dims == std::vector<std::uint32_t>{16 * 16 * 16});
}

TEST_CASE("identical config and seed give identical CSV") {
  auto a = scratch("det_a"), b = scratch("det_b");
  for (const auto& d : {a, b}) {
    CHECK(cli({"--experiment", "pairing", "--seed", "11", "--out", d.string()}) == 0);
    CHECK(cli({"--experiment", "truncated", "--t-final", "0.1", "--out", (d / "tr").string()}) == 0);
  }
  CHECK(slurp(a / "pairing.csv") == slurp(b / "pairing.csv"));
  CHECK(slurp(a / "tr" / "truncated.csv") == slurp(b / "tr" / "truncated.csv"));
  auto c = scratch("det_c");
  CHECK(cli({"--experiment", "pairing", "--seed", "12", "--out", c.string()}) == 0);
  CHECK(slurp(a / "pairing.csv") != slurp(c / "pairing.csv"));
}

TEST_CASE("failed criterion gives exit code 1 and names it") {
  auto dir = scratch("fail");
  // Strong coupling pushes the truncated flow out of the cutoff.
  ExperimentConfig c = default_config("truncated");
  c.potential.amplitude = 200.0;
  c.fock.m = 2;
  c.fock.P = 4;
  c.output = dir.string();
  auto r = run_experiment(c);
  CHECK(r.exit_code == 1);
  REQUIRE_FALSE(r.failures.empty());
  CHECK(std::find(r.failures.begin(), r.failures.end(), "leakage_bound") != r.failures.end());
  auto s = read_json(dir / "summary.json");
  CHECK(s["status"] == "fail");
  CHECK(s["exit_code"] == 1);
  CHECK(s["failures"].size() == r.failures.size());
}
