#pragma once
#include <complex>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "ptycho/errors.hpp"

namespace ptycho {

using cplx = std::complex<double>;
using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return s.empty() ? 0 : n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + ")";
}

// N-dimensional (1-3) complex array, row-major, with optional physical pitch
// per axis in meters. Carries objects, probes and exit waves.
struct ComplexField {
  Shape shape;
  std::vector<cplx> data;
  std::vector<double> pitch; // empty, or one strictly positive entry per axis

  ComplexField() = default;
  ComplexField(Shape s, cplx fill = cplx(0.0, 0.0))
      : shape(std::move(s)), data(shape_numel(shape), fill) {
    validate();
  }

  static ComplexField zeros(Shape s) { return ComplexField(std::move(s)); }
  static ComplexField full(Shape s, cplx v) { return ComplexField(std::move(s), v); }

  std::size_t ndim() const { return shape.size(); }
  std::size_t size() const { return data.size(); }
  bool has_pitch() const { return !pitch.empty(); }

  cplx& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  const cplx& at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
  cplx& at(std::size_t i, std::size_t j, std::size_t k) {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
  const cplx& at(std::size_t i, std::size_t j, std::size_t k) const {
    return data[(i * shape[1] + j) * shape[2] + k];
  }

  void validate() const {
    if (shape.empty() || shape.size() > 3)
      throw std::invalid_argument("ComplexField: rank must be 1-3, got " +
                                  std::to_string(shape.size()));
    for (std::size_t e : shape)
      if (e == 0) throw std::invalid_argument("ComplexField: zero extent in " + shape_str(shape));
    if (data.size() != shape_numel(shape))
      throw std::invalid_argument("ComplexField: data length " + std::to_string(data.size()) +
                                  " does not match shape " + shape_str(shape));
    if (!pitch.empty()) {
      if (pitch.size() != shape.size())
        throw std::invalid_argument("ComplexField: pitch rank mismatch");
      for (double p : pitch)
        if (!(p > 0.0)) throw std::invalid_argument("ComplexField: pitch entries must be > 0");
    }
  }
};

// Real-valued counterpart; intensity-valued instances are elementwise >= 0.
struct RealField {
  Shape shape;
  std::vector<double> data;

  RealField() = default;
  explicit RealField(Shape s, double fill = 0.0)
      : shape(std::move(s)), data(shape_numel(shape), fill) {}

  static RealField zeros(Shape s) { return RealField(std::move(s)); }
  static RealField full(Shape s, double v) { return RealField(std::move(s), v); }

  std::size_t ndim() const { return shape.size(); }
  std::size_t size() const { return data.size(); }

  double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  const double& at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
  const double& at(std::size_t i, std::size_t j, std::size_t k) const {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
};

// Axis-aligned integer-pixel window: the shift/extraction operator acting on a
// host field. offset >= 0 and offset + extent <= host shape on every axis.
struct PatchWindow {
  std::vector<std::int64_t> offset;
  std::vector<std::int64_t> extent;

  std::size_t ndim() const { return offset.size(); }
};

inline void check_window(const Shape& host, const PatchWindow& w) {
  if (w.offset.size() != host.size() || w.extent.size() != host.size())
    throw std::out_of_range("PatchWindow: rank mismatch against host " + shape_str(host));
  for (std::size_t a = 0; a < host.size(); ++a) {
    if (w.offset[a] < 0 || w.extent[a] <= 0 ||
        static_cast<std::size_t>(w.offset[a] + w.extent[a]) > host[a])
      throw std::out_of_range("PatchWindow: axis " + std::to_string(a) + " window [" +
                              std::to_string(w.offset[a]) + "," +
                              std::to_string(w.offset[a] + w.extent[a]) +
                              ") out of bounds for host " + shape_str(host));
  }
}

inline double norm2(const ComplexField& f) {
  double s = 0.0;
  for (const cplx& v : f.data) s += std::norm(v);
  return s;
}

inline double norm2(const RealField& f) {
  double s = 0.0;
  for (double v : f.data) s += v * v;
  return s;
}

// Standard complex inner product <a,b> = sum conj(a) * b.
inline cplx inner(const ComplexField& a, const ComplexField& b) {
  cplx s(0.0, 0.0);
  for (std::size_t i = 0; i < a.data.size(); ++i) s += std::conj(a.data[i]) * b.data[i];
  return s;
}

inline bool same_shape(const Shape& a, const Shape& b) { return a == b; }

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b)
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_str(a) +
                                " vs " + shape_str(b));
}

} // namespace ptycho
