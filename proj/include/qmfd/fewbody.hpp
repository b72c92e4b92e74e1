#pragma once

#include <memory>
#include <vector>

#include "qmfd/fock.hpp"
#include "qmfd/generator.hpp"
#include "qmfd/potential.hpp"

namespace qmfd {

// Periodic cubic lattice with spacing 2 pi / L and the nearest-neighbour
// Laplacian. Vectors on the lattice use the plain l^2 inner product.
struct Lattice {
  int sites_per_dim = 4;
  CMat minus_laplacian;  // S x S, positive semidefinite

  int sites() const { return sites_per_dim * sites_per_dim * sites_per_dim; }
  double spacing() const { return kTwoPi / sites_per_dim; }
  int index(int i, int j, int k) const;
  std::array<int, 3> site(int idx) const;
  // Minimal-image displacement x_a - x_b in physical units.
  Vec3 displacement(int a, int b) const;
};

Lattice make_lattice(int sites_per_dim);

using SiteTable = std::shared_ptr<const std::vector<double>>;

// V_N(x - y, x - z) at minimal-image displacements, S^3 entries, no
// quadrature weights and no coupling constant.
SiteTable lattice_three_body_table(const Lattice& lat, const ThreeBodyPotential& V, double N_scaling);

struct FewBodyState {
  FockBasisPtr basis;  // site modes, cutoff = number of particles
  int particles = 3;
  CVec coeffs;         // the top sector only

  double norm() const { return coeffs.norm(); }
};

struct FewBodyHamiltonian {
  Lattice lattice;
  int particles = 3;
  double N_scaling = 3;
  SiteTable table;
  FockBasisPtr basis;
  SpMat H;  // on the particles-sector block

  std::size_t dim() const { return static_cast<std::size_t>(H.rows()); }
  CVec apply(const CVec& v) const { return H * v; }
  double energy(const FewBodyState& s) const;
};

inline constexpr std::size_t kFewBodyDimLimit = 3000000;

FewBodyHamiltonian build_hamiltonian(const Lattice& lat, int particles, const ThreeBodyPotential& V, double N_scaling);

FewBodyState few_body_state(const FewBodyHamiltonian& H, CVec coeffs);
// Symmetrized product state of one lattice orbital, normalized.
FewBodyState product_state(const FewBodyHamiltonian& H, const CVec& orbital);

struct FewBodyTrajectory {
  std::vector<double> times;
  std::vector<FewBodyState> states;
  double norm_drift = 0;    // max |norm - norm0|
  double energy_drift = 0;  // max |E - E0|
};

// Krylov stepping of exp(-i t H); a step whose Krylov error estimate fails
// is retried with halved substeps.
FewBodyTrajectory propagate(const FewBodyHamiltonian& H, const FewBodyState& psi0, double dt, double t_final,
                            int record_stride = 1);
CVec propagate_vector(const FewBodyHamiltonian& H, const CVec& v, double t);

// gamma(x, y) = <a_y psi, a_x psi>, trace = number of particles.
CMat reduced_density(const FewBodyState& psi);
// Same contraction for a general Fock vector, summed over its sectors.
CMat one_body_density(const FockBasis& basis, const CVec& v);

// U_N and its inverse for a normalized lattice condensate u. The excitation
// side is a Fock vector over the site modes with sectors 0..N, every sector
// orthogonal to u in each slot.
FockVector un_forward(const FewBodyState& psi, const CVec& u);
FewBodyState un_inverse(const FockVector& phi, const CVec& u, int particles);
// Gamma(Q) on every sector.
CVec project_excitations(const FockBasis& basis, const CVec& v, const CVec& u);

// Lattice quintic Hartree flow i du/dt = (-Delta + F) u with
// F(x) = 1/2 sum_{y,z} V(x,y,z) |u(y)|^2 |u(z)|^2; the phase integral of
// chi = (2N + 3)/6 <u x u x u, V u x u x u> is carried along.
struct LatticeHartreePath {
  double step = 0;
  double t0 = 0;
  std::vector<CVec> u;
  std::vector<double> chi_integral;

  std::size_t index_of(double t) const;
};

LatticeHartreePath lattice_hartree(const Lattice& lat, const SiteTable& table, double N, const CVec& u0,
                                   double t_begin, double t_end, double step);

struct GeneratorEquivalenceReport {
  std::vector<double> times;
  std::vector<double> residual;        // ||i dPhi/dt - H~ Phi|| / ||Phi||
  std::vector<double> normal_part;     // component of dPhi/dt leaving the excitation space
  std::vector<double> probe_residual;  // same with chi scaled by 1 + probe
  double max_residual = 0;
  double max_probe_residual = 0;
  double max_chi = 0;
  double stencil_step = 0;
  int refinements = 0;
};

struct GeneratorEquivalenceOptions {
  double N_scaling = 3;
  double stencil_step = 1e-3;
  double sample_spacing = 0.02;
  double chi_probe = 0.01;
  double tolerance = 1e-5;
  unsigned seed = 1;
};

GeneratorEquivalenceReport generator_equivalence_check(const Lattice& lat, const ThreeBodyPotential& V,
                                                       const CVec& u0, double t_final,
                                                       const GeneratorEquivalenceOptions& opt = {});

struct GroundState {
  double energy = 0;
  FewBodyState state;
  double residual = 0;
};

GroundState ground_state(const FewBodyHamiltonian& H, double tol = 1e-9, int max_iter = 20000);

// Largest eigenvalue of gamma / N.
double condensate_fraction(const FewBodyState& psi);

}  // namespace qmfd
