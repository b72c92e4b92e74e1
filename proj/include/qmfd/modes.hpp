#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "qmfd/bogoliubov.hpp"
#include "qmfd/fock.hpp"

namespace qmfd {

// Slot pattern of a three-body matrix element <out, V in>. For each of the
// three variables the outgoing and the incoming slot is either open (an
// excited mode index) or filled with the condensate u. Open slots are
// ordered by variable: x, then y, then z.
struct SlotPattern {
  std::array<bool, 3> out_open{}, in_open{};

  int creates() const;
  int annihilates() const;
  SlotPattern swapped() const;
  // Three comma-separated pairs, e.g. "OF,FO,FF": first letter out, second in.
  static SlotPattern parse(const std::string& s);
  std::string str() const;
  // Number of distinct assignments of this multiset of slot types to x, y, z.
  int multiplicity() const;
};

// One-body space of excitations together with the three-body coefficients
// of the condensate substitution.
class ModeModel {
 public:
  virtual ~ModeModel() = default;
  virtual int dim() const = 0;
  // -Delta compressed to the excited space.
  virtual CMat laplacian() const = 0;
  CMat one_minus_laplacian() const;
  // Kernel of the pattern with Q applied on every open slot.
  virtual KernelPtr pattern(const SlotPattern& p) const = 0;
  // Scalar <u x u x u, V u x u x u>.
  double condensate_energy() const;
};

// Plane-wave modes around the constant condensate; coefficients come from
// the torus Fourier transform of the sampled w_N.
std::shared_ptr<const ModeModel> momentum_mode_model(const ModeBasis& basis, const ThreeBodyPotential& V);

// Site basis of a finite lattice with l^2 inner product. V is the full S^3
// table V(x, y, z); u is the normalized condensate on the sites. Open slots
// are Q-projected with Q = 1 - |u><u|.
class SiteModeModel : public ModeModel {
 public:
  SiteModeModel(CMat minus_laplacian, std::shared_ptr<const std::vector<double>> V, CVec u);
  int dim() const override { return static_cast<int>(u_.size()); }
  CMat laplacian() const override;
  KernelPtr pattern(const SlotPattern& p) const override;
  const CVec& condensate() const { return u_; }

 private:
  CMat lap_;
  std::shared_ptr<const std::vector<double>> V_;
  CVec u_;
};

}  // namespace qmfd
