#pragma once
#include <array>
#include <memory>
#include <optional>
#include <vector>

#include "ptycho/field.hpp"
#include "ptycho/kernels.hpp"
#include "ptycho/tape.hpp"

namespace ptycho {

enum class ModelKind { FarField, NearField, Bragg };

const char* model_kind_name(ModelKind k);

struct FarFieldGeometry {
  double lambda = 0.0;            // meters
  double detector_distance = 0.0; // meters
  double detector_pitch = 0.0;    // meters
  Shape object_shape;             // simulation box, 2D
  Shape probe_shape;              // equals detector shape
  std::vector<double> pixel_pitch; // object-plane pitch per axis, meters
  double nu = 0.0;                // shared constant background (model units)

  void validate() const;
};

struct NearFieldGeometry {
  double lambda = 0.0;
  double z = 0.0;                 // propagation distance, meters
  std::vector<double> pixel_pitch;
  Shape object_shape;             // object variable (embedded in the probe grid)
  Shape probe_shape;              // full-field grid
  double nu = 0.0;

  // W^2/(lambda z) with W the lateral grid extent; >> 1 in the near field.
  double fresnel_number() const;
  void validate() const;
};

struct BraggGeometry {
  double voxel_pitch = 0.0;        // isotropic, meters
  std::size_t projection_axis = 1; // exit beam k_f || y
  double two_theta = 0.0;          // radians
  double lambda = 0.0;
  std::vector<double> angles;      // rocking offsets, radians
  Shape box_shape;                 // full simulation box
  Shape probe_shape;               // 3D probe/patch extent
  Shape recon_shape;               // solved subvolume (loose support)
  PatchWindow recon_window;        // placement of the subvolume inside the box
  double nu = 0.0;

  // First-order rocking model: |Q| = |G_hkl| * dtheta, direction
  // perpendicular to G inside the scattering (xy) plane.
  std::array<double, 3> q_vector(std::size_t angle_idx) const;
  void validate() const;
};

// Ordered measurements: one window per j, plus the angle index for Bragg.
struct ScanPlan {
  std::vector<PatchWindow> windows;
  std::vector<std::size_t> angle_index; // empty for far/near field
  double overlap_fraction = 0.0;        // reported by the raster builder

  std::size_t size() const { return windows.size(); }
  void validate(const Shape& host) const;
};

// Eager single-position physics (also the building blocks of the taped path).
ComplexField exit_wave_far(const ComplexField& object, const ComplexField& probe,
                           const PatchWindow& w);
RealField intensity_far(const ComplexField& psi, const RealField& nu);
RealField intensity_far(const ComplexField& psi, double nu = 0.0);
RealField intensity_near(const ComplexField& psi, double z, double lambda, double nu = 0.0);
ComplexField exit_wave_bragg(const ComplexField& object3, const ComplexField& probe3,
                             const PatchWindow& w, const ComplexField& ramp, std::size_t axis);
RealField intensity_bragg(const ComplexField& psi2, double nu = 0.0);

// A forward model binds geometry, scan plan and measured data, and builds the
// taped minibatch loss for the reconstruction engines.
class ForwardModel {
public:
  virtual ~ForwardModel() = default;

  virtual ModelKind kind() const = 0;
  virtual Shape object_var_shape() const = 0;
  virtual Shape probe_var_shape() const = 0;

  // Forward intensities h_j on the tape. Marks O as the first leaf; marks P
  // as the second when solve_probe, otherwise P enters as a constant.
  virtual void build_forward(Tape& tape, const ComplexField& object, const ComplexField& probe,
                             const std::vector<std::size_t>& batch,
                             std::vector<int>& h_nodes) const = 0;

  // Taped minibatch loss: the Eq.-7 amplitude tail over build_forward's
  // intensities. Returns the terminal node id.
  int build_loss(Tape& tape, const ComplexField& object, const ComplexField& probe,
                 const std::vector<std::size_t>& batch,
                 std::vector<int>* h_nodes = nullptr) const;

  // Eager expected intensity at one scan position.
  virtual RealField predict_one(const ComplexField& object, const ComplexField& probe,
                                std::size_t j) const = 0;

  // Denominator field of the Eq.-9-style probe step size: the batch-summed
  // |S_j^* O|^2 accumulated on the probe grid.
  virtual RealField probe_step_denominator(const ComplexField& object,
                                           const std::vector<std::size_t>& batch,
                                           bool per_patch_max, double* max_out) const = 0;

  // Squared operator norm of the linear map from the exit wave to the
  // detector field under the adopted transform conventions. The loss
  // gradients carry this factor relative to the unit-normalized transforms
  // the Lipschitz step sizes are stated for, so the ePIE engine divides the
  // step sizes by it.
  virtual double gradient_scale() const = 0;

  const ScanPlan& plan() const { return plan_; }
  std::size_t positions() const { return plan_.size(); }
  const RealField& measured(std::size_t j) const { return y_.at(j); }
  const std::vector<RealField>& measured_all() const { return y_; }
  void set_measurements(std::vector<RealField> y);
  bool solve_probe = true;
  double guard_eps = kSqrtGuard;

  // h_j for each requested index, evaluated on one tape.
  std::vector<RealField> predict_batch(const ComplexField& object, const ComplexField& probe,
                                       const std::vector<std::size_t>& batch) const;

protected:
  void check_batch(const std::vector<std::size_t>& batch) const;
  ScanPlan plan_;
  std::vector<RealField> y_;
  std::vector<ComplexField> sqrt_y_; // cached in tape storage form
};

class FarFieldModel : public ForwardModel {
public:
  FarFieldModel(FarFieldGeometry geo, ScanPlan plan);
  ModelKind kind() const override { return ModelKind::FarField; }
  Shape object_var_shape() const override { return geo.object_shape; }
  Shape probe_var_shape() const override { return geo.probe_shape; }
  void build_forward(Tape&, const ComplexField&, const ComplexField&,
                     const std::vector<std::size_t>&, std::vector<int>&) const override;
  RealField predict_one(const ComplexField&, const ComplexField&, std::size_t) const override;
  RealField probe_step_denominator(const ComplexField&, const std::vector<std::size_t>&,
                                   bool, double*) const override;
  double gradient_scale() const override { return double(shape_numel(geo.probe_shape)); }
  FarFieldGeometry geo;
};

class NearFieldModel : public ForwardModel {
public:
  NearFieldModel(NearFieldGeometry geo, ScanPlan plan);
  ModelKind kind() const override { return ModelKind::NearField; }
  Shape object_var_shape() const override { return geo.object_shape; }
  Shape probe_var_shape() const override { return geo.probe_shape; }
  void build_forward(Tape&, const ComplexField&, const ComplexField&,
                     const std::vector<std::size_t>&, std::vector<int>&) const override;
  RealField predict_one(const ComplexField&, const ComplexField&, std::size_t) const override;
  RealField probe_step_denominator(const ComplexField&, const std::vector<std::size_t>&,
                                   bool, double*) const override;
  double gradient_scale() const override { return 1.0; } // unitary propagator
  NearFieldGeometry geo;

private:
  // 1 - embed(ones, w_j): the vacuum complement of the object window.
  ComplexField vacuum_complement(std::size_t j) const;
};

class BraggModel : public ForwardModel {
public:
  // The probe is supplied resampled into the object grid and is held known
  // (solve_probe defaults to false); the rocking ramps are baked per angle.
  BraggModel(BraggGeometry geo, ScanPlan plan, ComplexField probe3);
  ModelKind kind() const override { return ModelKind::Bragg; }
  Shape object_var_shape() const override { return geo.recon_shape; }
  Shape probe_var_shape() const override { return geo.probe_shape; }
  void build_forward(Tape&, const ComplexField&, const ComplexField&,
                     const std::vector<std::size_t>&, std::vector<int>&) const override;
  RealField predict_one(const ComplexField&, const ComplexField&, std::size_t) const override;
  RealField probe_step_denominator(const ComplexField&, const std::vector<std::size_t>&,
                                   bool, double*) const override;
  double gradient_scale() const override {
    Shape det;
    for (std::size_t a = 0; a < 3; ++a)
      if (a != geo.projection_axis) det.push_back(geo.probe_shape[a]);
    return double(shape_numel(det)) * double(geo.probe_shape[geo.projection_axis]);
  }
  BraggGeometry geo;
  ComplexField probe3;
  const ComplexField& ramp(std::size_t angle_idx) const { return ramps_.at(angle_idx); }

private:
  std::vector<ComplexField> ramps_;        // per angle
  std::vector<ComplexField> probe_ramped_; // probe * ramp, per angle
};

} // namespace ptycho
