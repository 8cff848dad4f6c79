#include "ptycho/kernels.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "ptycho/fft.hpp"

namespace ptycho {

ComplexField extract_patch(const ComplexField& host, const PatchWindow& w) {
  check_window(host.shape, w);
  Shape out_shape(w.extent.begin(), w.extent.end());
  ComplexField out(out_shape);
  out.pitch = host.pitch;
  if (host.ndim() == 2) {
    for (std::int64_t i = 0; i < w.extent[0]; ++i) {
      const cplx* src = &host.at(w.offset[0] + i, w.offset[1]);
      cplx* dst = &out.at(i, 0);
      std::copy(src, src + w.extent[1], dst);
    }
  } else if (host.ndim() == 3) {
    for (std::int64_t i = 0; i < w.extent[0]; ++i)
      for (std::int64_t j = 0; j < w.extent[1]; ++j) {
        const cplx* src = &host.at(w.offset[0] + i, w.offset[1] + j, w.offset[2]);
        cplx* dst = &out.at(i, j, 0);
        std::copy(src, src + w.extent[2], dst);
      }
  } else {
    const cplx* src = host.data.data() + w.offset[0];
    std::copy(src, src + w.extent[0], out.data.data());
  }
  return out;
}

ComplexField embed_patch(const ComplexField& patch, const PatchWindow& w,
                         const Shape& host_shape) {
  check_window(host_shape, w);
  for (std::size_t a = 0; a < host_shape.size(); ++a)
    if (static_cast<std::size_t>(w.extent[a]) != patch.shape[a])
      throw std::invalid_argument("embed_patch: patch shape does not match window extent");
  ComplexField out(host_shape);
  out.pitch = patch.pitch;
  if (out.ndim() == 2) {
    for (std::int64_t i = 0; i < w.extent[0]; ++i) {
      const cplx* src = &patch.at(i, 0);
      cplx* dst = &out.at(w.offset[0] + i, w.offset[1]);
      std::copy(src, src + w.extent[1], dst);
    }
  } else if (out.ndim() == 3) {
    for (std::int64_t i = 0; i < w.extent[0]; ++i)
      for (std::int64_t j = 0; j < w.extent[1]; ++j) {
        const cplx* src = &patch.at(i, j, 0);
        cplx* dst = &out.at(w.offset[0] + i, w.offset[1] + j, w.offset[2]);
        std::copy(src, src + w.extent[2], dst);
      }
  } else {
    std::copy(patch.data.begin(), patch.data.end(), out.data.data() + w.offset[0]);
  }
  return out;
}

ComplexField project_axis(const ComplexField& field, std::size_t axis) {
  if (field.ndim() != 3) throw std::invalid_argument("project_axis: field must be 3D");
  if (axis > 2) throw std::invalid_argument("project_axis: axis out of range");
  const std::size_t n0 = field.shape[0], n1 = field.shape[1], n2 = field.shape[2];
  Shape out_shape;
  for (std::size_t a = 0; a < 3; ++a)
    if (a != axis) out_shape.push_back(field.shape[a]);
  ComplexField out(out_shape);
  for (std::size_t i = 0; i < n0; ++i)
    for (std::size_t j = 0; j < n1; ++j)
      for (std::size_t k = 0; k < n2; ++k) {
        std::size_t oi, oj;
        if (axis == 0) { oi = j; oj = k; }
        else if (axis == 1) { oi = i; oj = k; }
        else { oi = i; oj = j; }
        out.at(oi, oj) += field.at(i, j, k);
      }
  return out;
}

ComplexField broadcast_axis(const ComplexField& field, std::size_t axis, std::size_t extent) {
  if (field.ndim() != 2) throw std::invalid_argument("broadcast_axis: field must be 2D");
  if (axis > 2) throw std::invalid_argument("broadcast_axis: axis out of range");
  Shape out_shape(3);
  std::size_t b = 0;
  for (std::size_t a = 0; a < 3; ++a) out_shape[a] = (a == axis) ? extent : field.shape[b++];
  ComplexField out(out_shape);
  for (std::size_t i = 0; i < out_shape[0]; ++i)
    for (std::size_t j = 0; j < out_shape[1]; ++j)
      for (std::size_t k = 0; k < out_shape[2]; ++k) {
        std::size_t fi, fj;
        if (axis == 0) { fi = j; fj = k; }
        else if (axis == 1) { fi = i; fj = k; }
        else { fi = i; fj = j; }
        out.at(i, j, k) = field.at(fi, fj);
      }
  return out;
}

ComplexField hadamard(const ComplexField& a, const ComplexField& b) {
  require_same_shape(a.shape, b.shape, "hadamard");
  ComplexField out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

RealField modulus_sq(const ComplexField& a) {
  RealField out(a.shape);
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = std::norm(a.data[i]);
  return out;
}

RealField guarded_sqrt(const RealField& h, double eps) {
  RealField out(h.shape);
  for (std::size_t i = 0; i < h.data.size(); ++i) {
    if (h.data[i] < 0.0)
      throw std::invalid_argument("guarded_sqrt: negative intensity at index " +
                                  std::to_string(i));
    out.data[i] = std::sqrt(h.data[i] + eps);
  }
  return out;
}

ComplexField add(const ComplexField& a, const ComplexField& b) {
  require_same_shape(a.shape, b.shape, "add");
  ComplexField out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

ComplexField sub(const ComplexField& a, const ComplexField& b) {
  require_same_shape(a.shape, b.shape, "sub");
  ComplexField out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

ComplexField scale(const ComplexField& a, cplx c) {
  ComplexField out = a;
  for (cplx& v : out.data) v *= c;
  return out;
}

ComplexField conj_field(const ComplexField& a) {
  ComplexField out = a;
  for (cplx& v : out.data) v = std::conj(v);
  return out;
}

namespace {

// DC-first angular frequency grid: q[k] = 2*pi * fftfreq(n, pitch).
std::vector<double> q_grid(std::size_t n, double pitch) {
  std::vector<double> q(n);
  for (std::size_t k = 0; k < n; ++k) {
    double f = (k <= (n - 1) / 2) ? double(k) : double(k) - double(n);
    q[k] = 2.0 * std::numbers::pi * f / (double(n) * pitch);
  }
  return q;
}

struct FresnelKey {
  std::size_t rows, cols;
  double pr, pc, z, lambda;
  bool operator<(const FresnelKey& o) const {
    return std::tie(rows, cols, pr, pc, z, lambda) <
           std::tie(o.rows, o.cols, o.pr, o.pc, o.z, o.lambda);
  }
};

} // namespace

const ComplexField& fresnel_kernel(const Shape& shape, const std::vector<double>& pitch,
                                   double z, double lambda) {
  static std::mutex mu;
  static std::map<FresnelKey, ComplexField> cache;
  FresnelKey key{shape[0], shape[1], pitch[0], pitch[1], z, lambda};
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  ComplexField kern(shape);
  std::vector<double> qr = q_grid(shape[0], pitch[0]);
  std::vector<double> qc = q_grid(shape[1], pitch[1]);
  double coef = -z * lambda / (4.0 * std::numbers::pi);
  for (std::size_t i = 0; i < shape[0]; ++i)
    for (std::size_t j = 0; j < shape[1]; ++j) {
      double ang = coef * (qr[i] * qr[i] + qc[j] * qc[j]);
      kern.at(i, j) = cplx(std::cos(ang), std::sin(ang));
    }
  return cache.emplace(key, std::move(kern)).first->second;
}

ComplexField fresnel_propagate(const ComplexField& field, double z, double lambda) {
  if (field.ndim() != 2)
    throw std::invalid_argument("fresnel_propagate: field must be 2D");
  if (!field.has_pitch())
    throw std::invalid_argument("fresnel_propagate: field pitch is required");
  if (z == 0.0) return field;
  const ComplexField& kern = fresnel_kernel(field.shape, field.pitch, z, lambda);
  ComplexField spec = dft(field);
  for (std::size_t i = 0; i < spec.data.size(); ++i) spec.data[i] *= kern.data[i];
  ComplexField out = idft(spec);
  out.pitch = field.pitch;
  return out;
}

ComplexField phase_ramp(const Shape& shape, double pitch, const std::array<double, 3>& q3) {
  if (shape.size() != 3) throw std::invalid_argument("phase_ramp: shape must be 3D");
  ComplexField out(shape);
  std::array<double, 3> center;
  for (std::size_t a = 0; a < 3; ++a) center[a] = 0.5 * double(shape[a] - 1);
  for (std::size_t i = 0; i < shape[0]; ++i)
    for (std::size_t j = 0; j < shape[1]; ++j)
      for (std::size_t k = 0; k < shape[2]; ++k) {
        double ang = pitch * ((double(i) - center[0]) * q3[0] +
                              (double(j) - center[1]) * q3[1] +
                              (double(k) - center[2]) * q3[2]);
        out.at(i, j, k) = cplx(std::cos(ang), std::sin(ang));
      }
  out.pitch = {pitch, pitch, pitch};
  return out;
}

} // namespace ptycho
