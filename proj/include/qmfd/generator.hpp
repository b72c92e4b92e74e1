#pragma once

#include <array>
#include <optional>

#include "qmfd/bogoliubov.hpp"
#include "qmfd/fock.hpp"
#include "qmfd/modes.hpp"

namespace qmfd {

// Term lists of the excitation generator  B + 1/2 sum_j (R_j + R_j^*).
// Every coefficient is a slot-pattern kernel of the mode model times a
// function of the number of excitations on the input side; the factors
// sqrt(N - n - j) are clamped at zero.
struct GeneratorTerms {
  double N = 1.0;
  double condensate_energy = 0.0;  // <u x u x u, V u x u x u>
  double chi = 0.0;                // (2N + 3)/6 * condensate_energy
  TermList bogoliubov;
  std::array<TermList, 7> R;
  // 1/2 (R_j + R_j^*), written with self-adjoint terms appearing once.
  std::array<TermList, 7> R_sym;

  TermList full() const;
};

GeneratorTerms generator_terms(const ModeModel& model, double N);

struct GeneratorBundle {
  double N = 1.0;
  double beta = 0.0;
  double chi = 0.0;
  double mu = 0.0;  // condensate rotation rate, u(t) = e^{-i mu t} u
  FockBasisPtr basis;
  GeneratorTerms terms;
  FockOperator bogoliubov;
  std::array<FockOperator, 7> R;
  FockOperator number_op;
  FockOperator kinetic_op;  // dGamma(1 - Delta)

  // R_j + R_j^*
  FockOperator R_plus_adjoint(int j) const;
  FockOperator full() const;
  // Time-independent generator in the frame rotating with the condensate.
  FockOperator rotating(bool quadratic_only) const;
};

// Constant condensate only; plane-wave modes, M <= 8 and P <= 8.
GeneratorBundle assemble_generator(const Field& u, const ThreeBodyPotential& V, const ModeBasis& modes, int P,
                                   double N);

// ---------------------------------------------------------------- certification

struct ErrorBoundRow {
  int j = 0;
  int sign = 1;
  double eta = 1.0;
  int m = 0;
  double N = 0;
  double beta = 0;
  double min_eig = 0;     // with the calibration shift C_cal m N^{4 beta - 1}
  double minimal_c = 0;   // smallest c >= 0 making the form nonnegative
  bool eta_ok = true;
};

struct ErrorBoundReport {
  std::vector<ErrorBoundRow> rows;
  double eta_threshold = 0;
  double R6_min_eig = 0;
};

// Threshold for eta given (m, N, beta) up to the calibration constant.
double eta_threshold(int m, double N, double beta, double C_cal);

ErrorBoundReport certify_error_bounds(const GeneratorBundle& bundle, int m, double eta, double C_cal = 1.0,
                                      int jobs = 1);

// ---------------------------------------------------------------- truncated dynamics

struct TruncatedSample {
  double t = 0;
  double number = 0;          // <N>
  double kinetic = 0;         // <dGamma(1 - Delta)>
  double norm = 0;
  std::vector<double> histogram;
};

struct TruncatedTrajectory {
  std::vector<TruncatedSample> samples;
  std::vector<FockVector> states;
  // Duhamel bound on the distance to the untruncated flow:
  // integral of ||1^{>M} G 1^{<=M} Phi|| dt.
  double leakage = 0;
};

enum class GeneratorChoice { Full, Quadratic, Number };

// i d/dt Phi = 1^{<=M} H~ 1^{<=M} Phi in the lab frame. The constant
// condensate makes the generator time independent in the rotating frame,
// where Krylov steps are taken; the frame phase is applied exactly.
TruncatedTrajectory evolve_truncated(const GeneratorBundle& bundle, const FockVector& Phi0, int M, double dt,
                                     double t_final, GeneratorChoice which = GeneratorChoice::Full,
                                     int record_stride = 1);

}  // namespace qmfd
