#include "qmfd/generator.hpp"

#include <algorithm>
#include <cmath>

#include "qmfd/error.hpp"

namespace qmfd {

namespace {

// sqrt(m!/(m-a0)!) * sqrt((m-a0+c0)!/(m-a0)!) with m = N - n: the action of
// a*(u)^c0 a(u)^a0 on a condensate of m particles.
std::function<double(int)> condensate_factor(double N, int a0, int c0) {
  return [=](int n) {
    const double m = N - n;
    double f = 1.0;
    for (int i = 0; i < a0; ++i) f *= sqrt_clamped(m - i);
    for (int i = 1; i <= c0; ++i) f *= sqrt_clamped(m - a0 + i);
    return f;
  };
}

bool self_adjoint_type(const SlotPattern& p) {
  auto key = [](const SlotPattern& q) {
    std::array<int, 3> k{};
    for (std::size_t v = 0; v < 3; ++v) k[v] = 2 * q.out_open[v] + q.in_open[v];
    std::sort(k.begin(), k.end());
    return k;
  };
  return key(p) == key(p.swapped());
}

struct Builder {
  const ModeModel& model;

  Term pattern_term(const std::string& pat, cplx scale, std::function<double(int)> f) const {
    return Term{pat, model.pattern(SlotPattern::parse(pat)), std::move(f), scale};
  }
};

}  // namespace

TermList GeneratorTerms::full() const {
  TermList out = bogoliubov;
  for (const auto& r : R_sym) out.insert(out.end(), r.begin(), r.end());
  return out;
}

GeneratorTerms generator_terms(const ModeModel& model, double N) {
  if (!(N >= 1.0)) throw ValidationError("N must be at least 1");
  GeneratorTerms g;
  g.N = N;
  g.condensate_energy = model.condensate_energy();
  g.chi = (2.0 * N + 3.0) / 6.0 * g.condensate_energy;
  const Builder b{model};
  const int d = model.dim();
  const double N2 = N * N;

  // Quadratic part.
  CMat A = model.laplacian() + 0.5 * model.pattern(SlotPattern::parse("OO,FF,FF"))->dense() +
           model.pattern(SlotPattern::parse("OF,FO,FF"))->dense();
  g.bogoliubov.push_back(Term{"B one-body", dense_kernel(1, 1, d, A), nullptr, 1.0});
  Term pair{"B pairing", model.pattern(SlotPattern::parse("OF,OF,FF")), nullptr, 0.5};
  g.bogoliubov.push_back(pair);
  g.bogoliubov.push_back(pair.adjoint());

  // R0: scalar remainder and corrections to the one-body part.
  {
    const double E = g.condensate_energy;
    g.R[0].push_back(Term{"R0 scalar", dense_kernel(0, 0, d, CMat::Constant(1, 1, E)),
                          [N, N2](int n) {
                            const double x = n;
                            return ((3 * x * x + 6 * x + 2) / N - x * (x + 1) * (x + 2) / N2) / 6.0;
                          },
                          1.0});
    auto corr = condensate_factor(N, 2, 2);
    auto shifted = [corr, N2](int n) { return corr(n) / N2 - 1.0; };
    g.R[0].push_back(b.pattern_term("OO,FF,FF", 0.5, shifted));
    g.R[0].push_back(b.pattern_term("OF,FO,FF", 1.0, shifted));
  }
  // R1: linear term left over after the Hartree equation.
  {
    auto f = condensate_factor(N, 3, 2);
    g.R[1].push_back(b.pattern_term("OF,FF,FF", 1.0, [f, N, N2](int n) {
      return f(n) / N2 - sqrt_clamped(N - n);
    }));
  }
  // R2: correction to the pairing term.
  {
    auto f = condensate_factor(N, 3, 1);
    g.R[2].push_back(b.pattern_term("OF,OF,FF", 1.0, [f, N2](int n) { return f(n) / N2 - 1.0; }));
  }
  // R3: cubic terms.
  g.R[3].push_back(b.pattern_term("OF,OF,OF", 1.0 / (3 * N2), condensate_factor(N, 3, 0)));
  g.R[3].push_back(b.pattern_term("OO,OF,FF", 2.0 / N2, condensate_factor(N, 2, 1)));
  g.R[3].push_back(b.pattern_term("OF,OF,FO", 1.0 / N2, condensate_factor(N, 2, 1)));
  // R4: quartic terms.
  g.R[4].push_back(b.pattern_term("OO,OF,OF", 1.0 / N2, condensate_factor(N, 2, 0)));
  g.R[4].push_back(b.pattern_term("OO,OO,FF", 1.0 / (2 * N2), condensate_factor(N, 1, 1)));
  g.R[4].push_back(b.pattern_term("OO,OF,FO", 1.0 / N2, condensate_factor(N, 1, 1)));
  // R5 and R6.
  g.R[5].push_back(b.pattern_term("OO,OO,OF", 1.0 / N2, condensate_factor(N, 1, 0)));
  g.R[6].push_back(b.pattern_term("OO,OO,OO", 1.0 / (6 * N2), nullptr));

  for (int j = 0; j < 7; ++j)
    for (const Term& t : g.R[static_cast<std::size_t>(j)]) {
      const bool sa = t.label == "R0 scalar" || self_adjoint_type(SlotPattern::parse(t.label));
      if (sa) {
        g.R_sym[static_cast<std::size_t>(j)].push_back(t);
      } else {
        Term h = t;
        h.scale *= 0.5;
        g.R_sym[static_cast<std::size_t>(j)].push_back(h);
        g.R_sym[static_cast<std::size_t>(j)].push_back(h.adjoint());
      }
    }
  return g;
}

// ---------------------------------------------------------------- bundle

FockOperator GeneratorBundle::R_plus_adjoint(int j) const {
  const auto& r = R[static_cast<std::size_t>(j)];
  return r + r.adjoint();
}

FockOperator GeneratorBundle::full() const {
  FockOperator out = bogoliubov;
  for (int j = 0; j < 7; ++j) out = out + R_plus_adjoint(j).scaled(0.5);
  return out;
}

FockOperator GeneratorBundle::rotating(bool quadratic_only) const {
  FockOperator g = quadratic_only ? bogoliubov : full();
  return g + number_op.scaled(-mu);
}

GeneratorBundle assemble_generator(const Field& u, const ThreeBodyPotential& V, const ModeBasis& modes, int P,
                                   double N) {
  if (!u.grid || !modes.grid || u.grid->n() != modes.grid->n()) throw ValidationError("condensate and modes on different grids");
  const cplx u0 = u.values[0];
  const double rho = std::pow(kTwoPi, -1.5);
  if (std::abs(std::abs(u0) - rho) > 1e-10 || (u.values.array() - u0).abs().maxCoeff() > 1e-10 ||
      !modes.constant_condensate)
    throw UnsupportedError("generator assembly supports only the constant condensate");
  if (modes.size() > 8) throw ValidationError("at most 8 modes for dense generator assembly");
  if (P < 1 || P > 8) throw ValidationError("particle cutoff must lie in [1, 8]");

  GeneratorBundle b;
  b.N = N;
  b.beta = V.beta;
  const auto VN = V.with_N(N);
  auto model = momentum_mode_model(modes, VN);
  b.terms = generator_terms(*model, N);
  b.chi = b.terms.chi;
  b.mu = 0.5 * b.terms.condensate_energy;
  b.basis = std::make_shared<const FockBasis>(modes.size(), P);
  b.bogoliubov = assemble_sparse(b.basis, b.terms.bogoliubov);
  for (std::size_t j = 0; j < 7; ++j) b.R[j] = assemble_sparse(b.basis, b.terms.R[j]);
  b.number_op = number_operator(b.basis);
  b.kinetic_op = dGamma(b.basis, model->one_minus_laplacian());
  return b;
}

}  // namespace qmfd
