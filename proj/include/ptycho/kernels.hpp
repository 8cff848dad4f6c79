#pragma once
#include <array>

#include "ptycho/field.hpp"

namespace ptycho {

// Elementwise floor added under the square root so the amplitude-loss gradient
// stays finite on dark pixels. Intensity units; far below one photon.
inline constexpr double kSqrtGuard = 1e-12;

// Sub-block extraction (the shift operator acting on the host) and its adjoint
// zero-padded placement.
ComplexField extract_patch(const ComplexField& host, const PatchWindow& w);
ComplexField embed_patch(const ComplexField& patch, const PatchWindow& w, const Shape& host_shape);

// Sum along one axis of a 3D field (the exit-beam projection); adjoint is a
// broadcast along the same axis.
ComplexField project_axis(const ComplexField& field, std::size_t axis);
ComplexField broadcast_axis(const ComplexField& field, std::size_t axis, std::size_t extent);

ComplexField hadamard(const ComplexField& a, const ComplexField& b);
RealField modulus_sq(const ComplexField& a);
RealField guarded_sqrt(const RealField& h, double eps = kSqrtGuard);

ComplexField add(const ComplexField& a, const ComplexField& b);
ComplexField sub(const ComplexField& a, const ComplexField& b);
ComplexField scale(const ComplexField& a, cplx c);
ComplexField conj_field(const ComplexField& a);

// Paraxial free-space transfer: idft(dft(f) * exp(-i*z*lambda*(qx^2+qy^2)/(4*pi)))
// with q = 2*pi*f on the fft-frequency grid implied by pitch and extent.
// Unit-modulus kernel: norm preserving, inverted by negating z. z == 0 is the
// exact identity.
ComplexField fresnel_propagate(const ComplexField& field, double z, double lambda);

// The transfer kernel itself (DC-first ordering), cached per geometry.
const ComplexField& fresnel_kernel(const Shape& shape, const std::vector<double>& pitch,
                                   double z, double lambda);

// Unit-modulus ramp exp(i r . q3) over voxel centers, origin at the array
// center; q3 in rad/m, isotropic pitch in meters.
ComplexField phase_ramp(const Shape& shape, double pitch, const std::array<double, 3>& q3);

} // namespace ptycho
