// Acceptance suite: one PASS/FAIL line per criterion, exit 0 iff all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "qmfd/experiments.hpp"
#include "qmfd/hartree.hpp"
#include "qmfd/potential.hpp"

using namespace qmfd;
namespace fs = std::filesystem;

namespace {

const fs::path kOut = fs::temp_directory_path() / "qmfd_acceptance";

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

const Criterion* find(const ExperimentResult& r, const std::string& name) {
  for (const auto& c : r.criteria)
    if (c.name == name) return &c;
  return nullptr;
}

// Runs an experiment with its defaults and requires the named checks, or all
// of them when the list is empty.
Outcome experiment(const std::string& name, const std::vector<std::string>& required = {}) {
  ExperimentConfig cfg = default_config(name);
  cfg.output = (kOut / name).string();
  ExperimentResult r = run_experiment(cfg);
  Outcome o{r.exit_code == 0 || !required.empty(), ""};
  if (r.exit_code == 2) return {false, "invalid config: " + r.summary.dump()};
  for (const auto& f : r.failures)
    if (f.rfind("numerical_error", 0) == 0) return {false, f};
  auto describe = [&](const Criterion& c) {
    o.detail += c.name + "=" + (std::isfinite(c.value) ? fmt("%.4g", c.value) : std::string("n/a")) +
                (c.pass ? "" : "(FAIL)") + " ";
  };
  if (required.empty()) {
    for (const auto& c : r.criteria) describe(c);
  } else {
    for (const auto& n : required) {
      const Criterion* c = find(r, n);
      if (!c) return {false, "missing check " + n};
      describe(*c);
      o.pass = o.pass && c->pass;
    }
  }
  return o;
}

// Expected phase for constant data: b0 (2 pi)^{-6} t with the closed-form
// b0 = (int w)^2 / 2, int w = 32 pi A R^3 / 105.
Outcome constant_data_phase() {
  const double A = 40.0, R = 2.0;
  const double mass = 32.0 * kPi * A * R * R * R / 105.0;
  const double b0 = 0.5 * mass * mass;
  auto g = make_grid(16);
  const double rho = std::pow(kTwoPi, -3);
  EvolutionProblem p;
  p.kind = EquationKind::QuinticHartree;
  p.V.profile = {A, R};
  p.V.beta = 0.15;
  p.V.N = 64;
  p.initial = Field(g, CVec::Constant(static_cast<Eigen::Index>(g->size()), std::sqrt(rho)));
  p.t_final = 1.0;
  p.dt = 1e-3;
  p.snapshot_stride = 50;
  Trajectory tr = evolve(p);
  double err = 0;
  for (std::size_t i = 0; i < tr.snapshots.size(); ++i) {
    const CVec& v = tr.snapshots[i].values;
    const double phase = std::arg(v.mean() / std::sqrt(rho));
    double expect = std::remainder(-b0 * rho * rho * tr.snapshot_times[i], kTwoPi);
    err = std::max(err, std::abs(std::remainder(phase - expect, kTwoPi)));
    err = std::max(err, (v.cwiseAbs().array() - std::sqrt(rho)).abs().maxCoeff() / std::sqrt(rho));
    err = std::max(err, (v.array() - v[0]).abs().maxCoeff() / std::sqrt(rho));
  }
  return {err <= 1e-10, "max phase error " + fmt("%.3g", err) + " (tolerance 1e-10)"};
}

Outcome sobolev() {
  ThreeBodyPotential V;
  V.profile = {1.0, 2.0};
  V.beta = 0.15;
  V.N = 64;
  const double r16 = sobolev_ratio_diagnostic(V, make_grid(16)).ratio;
  const double r32 = sobolev_ratio_diagnostic(V, make_grid(32)).ratio;
  const double rel = std::abs(r16 - r32) / r32;
  double lo = INFINITY, hi = 0;
  for (double beta : {0.05, 0.075, 0.1, 0.125, 0.15}) {
    V.beta = beta;
    if (!resolution_ok(V.N, beta, 32)) continue;
    const double r = sobolev_ratio_diagnostic(V, make_grid(32)).ratio;
    if (!std::isfinite(r) || r <= 0) return {false, "non-positive ratio at beta " + fmt("%.3g", beta)};
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  const bool pass = r32 > 0 && rel <= 0.2 && hi / lo <= 1.5;
  return {pass, "16^3 vs 32^3 relative change " + fmt("%.2e", rel) + " (<= 0.2); sweep range [" + fmt("%.4f", lo) +
                    ", " + fmt("%.4f", hi) + "], max/min " + fmt("%.3f", hi / lo) + " (<= 1.5)"};
}

struct Entry {
  int id;
  const char* title;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  fs::create_directories(kOut);
  const std::vector<Entry> entries{
      {1, "conservation suite", 60,
       [] {
         return experiment("conserve", {"hartree_mass_drift", "hartree_energy_drift_relative", "hartree_order_ratio",
                                        "nls_mass_drift", "nls_energy_drift_relative", "nls_order_ratio"});
       }},
      {2, "constant-data closed form", 5, constant_data_phase},
      {3, "Hartree to NLS rate", 600, [] { return experiment("gap"); }},
      {4, "kernel scalings", 900, [] { return experiment("kernels"); }},
      {5, "pairing-term certification", 120, [] { return experiment("pairing"); }},
      {6, "Bogoliubov purity", 60, [] { return experiment("bogoliubov"); }},
      {7, "quadratic vs quasi-free", 300, [] { return experiment("truncated"); }},
      {8, "error-bound certification", 600, [] { return experiment("errorbounds"); }},
      {9, "few-body structural identities", 1200, [] { return experiment("fewbody"); }},
      {10, "Sobolev diagnostic", 300, sobolev},
  };
  int failed = 0;
  for (const auto& e : entries) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = e.run();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= e.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s criterion %d (%s): %s[%.1f s of %.0f s]\n", pass ? "PASS" : "FAIL", e.id, e.title,
                o.detail.empty() ? "" : (o.detail + " ").c_str(), secs, e.budget_s);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(entries.size()) - failed, entries.size());
  return failed == 0 ? 0 : 1;
}
