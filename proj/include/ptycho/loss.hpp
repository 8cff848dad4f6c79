#pragma once
#include <vector>

#include "ptycho/field.hpp"
#include "ptycho/kernels.hpp"
#include "ptycho/models.hpp"

namespace ptycho {

// Separable amplitude fitting term: sum over pixels of (sqrt(y) - sqrt(h+eps))^2.
double amplitude_loss(const RealField& y, const RealField& h, double eps = kSqrtGuard);

struct LossReport {
  double total = 0.0;
  std::vector<double> per_position;
  std::size_t iteration = 0;
};

// Minibatch loss report: per-position g_j plus the (taped-path) total.
LossReport total_loss(const ForwardModel& model, const ComplexField& object,
                      const ComplexField& probe, const std::vector<std::size_t>& batch);

struct RegistrationResult {
  std::vector<double> shift;  // recon -> truth circular shift, pixels, per axis
  double phase = 0.0;         // global phase angle removed from recon
  double scale = 0.0;         // magnitude of the optimal complex scale
  double nrmse = 0.0;
};

// Global complex scale/phase plus integer-then-subpixel translation
// (cross-correlation peak, local matrix-DFT refinement at 1/upsample px)
// minimizing ||recon_aligned - truth|| / ||truth||. Works on 2D and 3D fields.
RegistrationResult register_and_nrmse(const ComplexField& recon, const ComplexField& truth,
                                      std::size_t upsample = 100);

// Applies the registration to recon: circular subpixel shift (Fourier ramp)
// plus the global complex scale. Used by image export.
ComplexField apply_registration(const ComplexField& recon, const RegistrationResult& reg);

} // namespace ptycho
