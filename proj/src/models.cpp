#include "ptycho/models.hpp"

#include <cmath>
#include <numbers>

#include "ptycho/fft.hpp"

namespace ptycho {

const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::FarField: return "farfield";
    case ModelKind::NearField: return "nearfield";
    case ModelKind::Bragg: return "bragg";
  }
  return "?";
}

void FarFieldGeometry::validate() const {
  if (object_shape.size() != 2 || probe_shape.size() != 2)
    throw std::invalid_argument("farfield geometry: object and probe must be 2D");
  for (std::size_t a = 0; a < 2; ++a)
    if (probe_shape[a] > object_shape[a])
      throw std::invalid_argument("farfield geometry: probe larger than object on axis " +
                                  std::to_string(a));
  if (nu < 0.0) throw std::invalid_argument("farfield geometry: negative background");
  if (!(lambda > 0.0)) throw std::invalid_argument("farfield geometry: lambda must be > 0");
}

double NearFieldGeometry::fresnel_number() const {
  double w = double(probe_shape[0]) * pixel_pitch[0];
  for (std::size_t a = 1; a < probe_shape.size(); ++a)
    w = std::min(w, double(probe_shape[a]) * pixel_pitch[a]);
  return w * w / (lambda * std::abs(z));
}

void NearFieldGeometry::validate() const {
  if (object_shape.size() != 2 || probe_shape.size() != 2)
    throw std::invalid_argument("nearfield geometry: object and probe must be 2D");
  if (pixel_pitch.size() != 2) throw std::invalid_argument("nearfield geometry: pitch must be 2D");
  for (std::size_t a = 0; a < 2; ++a)
    if (object_shape[a] > probe_shape[a])
      throw std::invalid_argument("nearfield geometry: object larger than the probe grid");
  if (nu < 0.0) throw std::invalid_argument("nearfield geometry: negative background");
  if (!(lambda > 0.0) || !(z > 0.0))
    throw std::invalid_argument("nearfield geometry: lambda and z must be > 0");
}

std::array<double, 3> BraggGeometry::q_vector(std::size_t angle_idx) const {
  double theta = 0.5 * two_theta;
  double g_mag = 4.0 * std::numbers::pi * std::sin(theta) / lambda;
  double dtheta = angles.at(angle_idx);
  // Rotating the crystal by dtheta about z tips G_hkl; to first order the
  // deviation Q = q - G has magnitude |G| dtheta along the in-plane
  // perpendicular of G.
  return {g_mag * dtheta * std::sin(theta), g_mag * dtheta * std::cos(theta), 0.0};
}

void BraggGeometry::validate() const {
  if (box_shape.size() != 3 || probe_shape.size() != 3 || recon_shape.size() != 3)
    throw std::invalid_argument("bragg geometry: box, probe and recon volumes must be 3D");
  if (projection_axis > 2) throw std::invalid_argument("bragg geometry: projection axis");
  if (!(voxel_pitch > 0.0)) throw std::invalid_argument("bragg geometry: voxel pitch");
  if (angles.empty()) throw std::invalid_argument("bragg geometry: no rocking angles");
  check_window(box_shape, recon_window);
  for (std::size_t a = 0; a < 3; ++a)
    if (static_cast<std::size_t>(recon_window.extent[a]) != recon_shape[a])
      throw std::invalid_argument("bragg geometry: recon window does not match recon shape");
}

void ScanPlan::validate(const Shape& host) const {
  if (windows.empty()) throw std::invalid_argument("scan plan: needs at least one position");
  for (const PatchWindow& w : windows) check_window(host, w);
  if (!angle_index.empty() && angle_index.size() != windows.size())
    throw std::invalid_argument("scan plan: angle index size mismatch");
}

ComplexField exit_wave_far(const ComplexField& object, const ComplexField& probe,
                           const PatchWindow& w) {
  for (std::size_t a = 0; a < probe.ndim(); ++a)
    if (static_cast<std::size_t>(w.extent[a]) != probe.shape[a])
      throw std::invalid_argument("exit_wave_far: window extent does not match the probe");
  return hadamard(probe, extract_patch(object, w));
}

RealField intensity_far(const ComplexField& psi, const RealField& nu) {
  require_same_shape(psi.shape, nu.shape, "intensity_far");
  for (double v : nu.data)
    if (v < 0.0) throw std::invalid_argument("intensity_far: negative background");
  RealField h = modulus_sq(dft(psi));
  for (std::size_t i = 0; i < h.data.size(); ++i) h.data[i] += nu.data[i];
  return h;
}

RealField intensity_far(const ComplexField& psi, double nu) {
  if (nu < 0.0) throw std::invalid_argument("intensity_far: negative background");
  RealField h = modulus_sq(dft(psi));
  if (nu != 0.0)
    for (double& v : h.data) v += nu;
  return h;
}

RealField intensity_near(const ComplexField& psi, double z, double lambda, double nu) {
  if (nu < 0.0) throw std::invalid_argument("intensity_near: negative background");
  RealField h = modulus_sq(fresnel_propagate(psi, z, lambda));
  if (nu != 0.0)
    for (double& v : h.data) v += nu;
  return h;
}

ComplexField exit_wave_bragg(const ComplexField& object3, const ComplexField& probe3,
                             const PatchWindow& w, const ComplexField& ramp, std::size_t axis) {
  ComplexField patch = extract_patch(object3, w);
  require_same_shape(patch.shape, probe3.shape, "exit_wave_bragg");
  require_same_shape(patch.shape, ramp.shape, "exit_wave_bragg");
  return project_axis(hadamard(ramp, hadamard(probe3, patch)), axis);
}

RealField intensity_bragg(const ComplexField& psi2, double nu) {
  return intensity_far(psi2, nu);
}

void ForwardModel::set_measurements(std::vector<RealField> y) {
  if (y.size() != plan_.size())
    throw std::invalid_argument("model: measurement count does not match the scan plan");
  y_ = std::move(y);
  sqrt_y_.clear();
  sqrt_y_.reserve(y_.size());
  for (const RealField& f : y_) {
    ComplexField s(f.shape);
    for (std::size_t i = 0; i < f.data.size(); ++i) {
      if (f.data[i] < 0.0) throw std::invalid_argument("model: negative measured intensity");
      s.data[i] = cplx(std::sqrt(f.data[i]), 0.0);
    }
    sqrt_y_.push_back(std::move(s));
  }
}

void ForwardModel::check_batch(const std::vector<std::size_t>& batch) const {
  if (batch.empty()) throw std::invalid_argument("model: empty batch");
  for (std::size_t j : batch)
    if (j >= plan_.size())
      throw std::out_of_range("model: scan index " + std::to_string(j) + " out of range");
}

int ForwardModel::build_loss(Tape& tape, const ComplexField& object, const ComplexField& probe,
                             const std::vector<std::size_t>& batch,
                             std::vector<int>* h_nodes) const {
  if (sqrt_y_.size() != plan_.size())
    throw StateError("model: measurements not set");
  std::vector<int> h;
  build_forward(tape, object, probe, batch, h);
  int total = -1;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    int s = tape.guarded_sqrt_(h[b], guard_eps);
    int d = tape.sub_(s, tape.constant(sqrt_y_[batch[b]], true));
    int gj = tape.sum_(tape.modulus_sq_(d));
    total = (total < 0) ? gj : tape.add_(total, gj);
  }
  if (h_nodes) *h_nodes = std::move(h);
  return total;
}

std::vector<RealField> ForwardModel::predict_batch(const ComplexField& object,
                                                   const ComplexField& probe,
                                                   const std::vector<std::size_t>& batch) const {
  Tape tape;
  std::vector<int> h_nodes;
  build_forward(tape, object, probe, batch, h_nodes);
  std::vector<RealField> out;
  out.reserve(h_nodes.size());
  for (int id : h_nodes) {
    const ComplexField& v = tape.node(id).value;
    RealField h(v.shape);
    for (std::size_t i = 0; i < v.data.size(); ++i) h.data[i] = v.data[i].real();
    out.push_back(std::move(h));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Far field

FarFieldModel::FarFieldModel(FarFieldGeometry g, ScanPlan plan) : geo(std::move(g)) {
  geo.validate();
  plan.validate(geo.object_shape);
  for (const PatchWindow& w : plan.windows)
    for (std::size_t a = 0; a < 2; ++a)
      if (static_cast<std::size_t>(w.extent[a]) != geo.probe_shape[a])
        throw std::invalid_argument("farfield model: window extent must equal the probe shape");
  plan_ = std::move(plan);
}

void FarFieldModel::build_forward(Tape& tape, const ComplexField& object,
                                  const ComplexField& probe,
                                  const std::vector<std::size_t>& batch,
                                  std::vector<int>& h_nodes) const {
  check_batch(batch);
  require_same_shape(object.shape, geo.object_shape, "farfield model object");
  require_same_shape(probe.shape, geo.probe_shape, "farfield model probe");
  int vO = tape.var(object);
  int vP = solve_probe ? tape.var(probe) : tape.constant(probe);
  int nu_node = -1;
  if (geo.nu > 0.0)
    nu_node = tape.constant(ComplexField(geo.probe_shape, cplx(geo.nu, 0.0)), true);
  h_nodes.clear();
  for (std::size_t j : batch) {
    int patch = tape.extract_(vO, plan_.windows[j]);
    int psi = tape.hadamard_(vP, patch);
    int m = tape.modulus_sq_(tape.dft_(psi));
    h_nodes.push_back(nu_node >= 0 ? tape.add_(m, nu_node) : m);
  }
}

RealField FarFieldModel::predict_one(const ComplexField& object, const ComplexField& probe,
                                     std::size_t j) const {
  if (j >= plan_.size()) throw std::out_of_range("predict_one: scan index out of range");
  return intensity_far(exit_wave_far(object, probe, plan_.windows[j]), geo.nu);
}

RealField FarFieldModel::probe_step_denominator(const ComplexField& object,
                                                const std::vector<std::size_t>& batch,
                                                bool per_patch_max, double* max_out) const {
  check_batch(batch);
  RealField acc(geo.object_shape);
  double patch_max = 0.0;
  for (std::size_t j : batch) {
    const PatchWindow& w = plan_.windows[j];
    for (std::int64_t i = 0; i < w.extent[0]; ++i)
      for (std::int64_t k = 0; k < w.extent[1]; ++k) {
        double v = std::norm(object.at(w.offset[0] + i, w.offset[1] + k));
        acc.at(w.offset[0] + i, w.offset[1] + k) += v;
        patch_max = std::max(patch_max, v);
      }
  }
  if (max_out) {
    if (per_patch_max) {
      *max_out = patch_max;
    } else {
      double m = 0.0;
      for (double v : acc.data) m = std::max(m, v);
      *max_out = m;
    }
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Near field

NearFieldModel::NearFieldModel(NearFieldGeometry g, ScanPlan plan) : geo(std::move(g)) {
  geo.validate();
  plan.validate(geo.probe_shape); // windows place the object inside the probe grid
  for (const PatchWindow& w : plan.windows)
    for (std::size_t a = 0; a < 2; ++a)
      if (static_cast<std::size_t>(w.extent[a]) != geo.object_shape[a])
        throw std::invalid_argument("nearfield model: window extent must equal the object shape");
  plan_ = std::move(plan);
}

ComplexField NearFieldModel::vacuum_complement(std::size_t j) const {
  ComplexField ones(geo.object_shape, cplx(1.0, 0.0));
  ComplexField comp = embed_patch(ones, plan_.windows[j], geo.probe_shape);
  for (cplx& v : comp.data) v = cplx(1.0, 0.0) - v;
  comp.pitch = geo.pixel_pitch;
  return comp;
}

void NearFieldModel::build_forward(Tape& tape, const ComplexField& object,
                                   const ComplexField& probe,
                                   const std::vector<std::size_t>& batch,
                                   std::vector<int>& h_nodes) const {
  check_batch(batch);
  require_same_shape(object.shape, geo.object_shape, "nearfield model object");
  require_same_shape(probe.shape, geo.probe_shape, "nearfield model probe");
  ComplexField obj = object;
  obj.pitch = geo.pixel_pitch;
  ComplexField prb = probe;
  prb.pitch = geo.pixel_pitch;
  int vO = tape.var(std::move(obj));
  int vP = solve_probe ? tape.var(std::move(prb)) : tape.constant(std::move(prb));
  int nu_node = -1;
  if (geo.nu > 0.0)
    nu_node = tape.constant(ComplexField(geo.probe_shape, cplx(geo.nu, 0.0)), true);
  h_nodes.clear();
  for (std::size_t j : batch) {
    // transmission = vacuum outside the object window: 1 + S_j(O - 1)
    int trans = tape.add_(tape.embed_(vO, plan_.windows[j], geo.probe_shape),
                          tape.constant(vacuum_complement(j)));
    int psi = tape.hadamard_(trans, vP);
    int prop = tape.fresnel_(psi, geo.z, geo.lambda);
    int m = tape.modulus_sq_(prop);
    h_nodes.push_back(nu_node >= 0 ? tape.add_(m, nu_node) : m);
  }
}

RealField NearFieldModel::predict_one(const ComplexField& object, const ComplexField& probe,
                                      std::size_t j) const {
  if (j >= plan_.size()) throw std::out_of_range("predict_one: scan index out of range");
  ComplexField trans = vacuum_complement(j);
  ComplexField emb = embed_patch(object, plan_.windows[j], geo.probe_shape);
  for (std::size_t i = 0; i < trans.data.size(); ++i) trans.data[i] += emb.data[i];
  ComplexField psi = hadamard(trans, probe);
  psi.pitch = geo.pixel_pitch;
  return intensity_near(psi, geo.z, geo.lambda, geo.nu);
}

RealField NearFieldModel::probe_step_denominator(const ComplexField& object,
                                                 const std::vector<std::size_t>& batch,
                                                 bool per_patch_max, double* max_out) const {
  check_batch(batch);
  RealField acc(geo.probe_shape);
  double patch_max = 0.0;
  for (std::size_t j : batch) {
    const PatchWindow& w = plan_.windows[j];
    for (std::int64_t i = 0; i < w.extent[0]; ++i)
      for (std::int64_t k = 0; k < w.extent[1]; ++k) {
        double v = std::norm(object.at(i, k));
        acc.at(w.offset[0] + i, w.offset[1] + k) += v;
        patch_max = std::max(patch_max, v);
      }
  }
  if (max_out) {
    if (per_patch_max) {
      *max_out = patch_max;
    } else {
      double m = 0.0;
      for (double v : acc.data) m = std::max(m, v);
      *max_out = m;
    }
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Bragg

BraggModel::BraggModel(BraggGeometry g, ScanPlan plan, ComplexField probe)
    : geo(std::move(g)), probe3(std::move(probe)) {
  geo.validate();
  plan.validate(geo.box_shape);
  if (plan.angle_index.empty())
    plan.angle_index.assign(plan.windows.size(), 0);
  for (std::size_t j = 0; j < plan.windows.size(); ++j) {
    for (std::size_t a = 0; a < 3; ++a)
      if (static_cast<std::size_t>(plan.windows[j].extent[a]) != geo.probe_shape[a])
        throw std::invalid_argument("bragg model: window extent must equal the probe volume");
    if (plan.angle_index[j] >= geo.angles.size())
      throw std::out_of_range("bragg model: angle index out of range");
  }
  require_same_shape(probe3.shape, geo.probe_shape, "bragg model probe");
  plan_ = std::move(plan);
  solve_probe = false;
  ramps_.reserve(geo.angles.size());
  probe_ramped_.reserve(geo.angles.size());
  for (std::size_t a = 0; a < geo.angles.size(); ++a) {
    ramps_.push_back(phase_ramp(geo.probe_shape, geo.voxel_pitch, geo.q_vector(a)));
    probe_ramped_.push_back(hadamard(ramps_.back(), probe3));
  }
}

void BraggModel::build_forward(Tape& tape, const ComplexField& object,
                               const ComplexField& probe,
                               const std::vector<std::size_t>& batch,
                               std::vector<int>& h_nodes) const {
  check_batch(batch);
  require_same_shape(object.shape, geo.recon_shape, "bragg model object");
  int vO = tape.var(object);
  int box = tape.embed_(vO, geo.recon_window, geo.box_shape);
  int vP = -1;
  std::vector<int> ramp_nodes;
  if (solve_probe) {
    require_same_shape(probe.shape, geo.probe_shape, "bragg model probe");
    vP = tape.var(probe);
    ramp_nodes.resize(geo.angles.size(), -1);
  }
  int nu_node = -1;
  Shape det_shape;
  for (std::size_t a = 0; a < 3; ++a)
    if (a != geo.projection_axis) det_shape.push_back(geo.probe_shape[a]);
  if (geo.nu > 0.0) nu_node = tape.constant(ComplexField(det_shape, cplx(geo.nu, 0.0)), true);
  std::vector<int> pq_nodes(geo.angles.size(), -1);
  h_nodes.clear();
  for (std::size_t j : batch) {
    std::size_t ai = plan_.angle_index[j];
    int patch = tape.extract_(box, plan_.windows[j]);
    int excited;
    if (solve_probe) {
      if (ramp_nodes[ai] < 0) ramp_nodes[ai] = tape.constant(ramps_[ai]);
      excited = tape.hadamard_(ramp_nodes[ai], tape.hadamard_(vP, patch));
    } else {
      if (pq_nodes[ai] < 0) pq_nodes[ai] = tape.constant(probe_ramped_[ai]);
      excited = tape.hadamard_(pq_nodes[ai], patch);
    }
    int wave2d = tape.project_(excited, geo.projection_axis);
    int m = tape.modulus_sq_(tape.dft_(wave2d));
    h_nodes.push_back(nu_node >= 0 ? tape.add_(m, nu_node) : m);
  }
}

RealField BraggModel::predict_one(const ComplexField& object, const ComplexField& probe,
                                  std::size_t j) const {
  if (j >= plan_.size()) throw std::out_of_range("predict_one: scan index out of range");
  ComplexField box = embed_patch(object, geo.recon_window, geo.box_shape);
  const ComplexField& p = (probe.size() ? probe : probe3);
  ComplexField psi =
      exit_wave_bragg(box, p, plan_.windows[j], ramps_[plan_.angle_index[j]],
                      geo.projection_axis);
  return intensity_bragg(psi, geo.nu);
}

RealField BraggModel::probe_step_denominator(const ComplexField& object,
                                             const std::vector<std::size_t>& batch,
                                             bool per_patch_max, double* max_out) const {
  check_batch(batch);
  ComplexField box = embed_patch(object, geo.recon_window, geo.box_shape);
  RealField acc(geo.box_shape);
  double patch_max = 0.0;
  for (std::size_t j : batch) {
    const PatchWindow& w = plan_.windows[j];
    for (std::int64_t i = 0; i < w.extent[0]; ++i)
      for (std::int64_t k = 0; k < w.extent[1]; ++k)
        for (std::int64_t l = 0; l < w.extent[2]; ++l) {
          double v = std::norm(box.at(w.offset[0] + i, w.offset[1] + k, w.offset[2] + l));
          acc.at(w.offset[0] + i, w.offset[1] + k, w.offset[2] + l) += v;
          patch_max = std::max(patch_max, v);
        }
  }
  if (max_out) {
    if (per_patch_max) {
      *max_out = patch_max;
    } else {
      double m = 0.0;
      for (double v : acc.data) m = std::max(m, v);
      *max_out = m;
    }
  }
  return acc;
}

} // namespace ptycho
