#pragma once
#include "ptycho/field.hpp"

namespace ptycho {

// Unnormalized forward DFT (DC term = sum of inputs). For rank-1 fields the
// transform runs over the single axis; rank-2 transforms both axes; rank-3
// inputs are treated as a stack of 2D slices (trailing two axes).
// idft carries the full 1/N factor so that idft(dft(x)) == x.
ComplexField dft(const ComplexField& field);
ComplexField idft(const ComplexField& field);

// In-place 1D transform of a contiguous line, any length (radix-2 for powers
// of two, Bluestein otherwise). inverse=true applies the 1/n factor.
void fft_line(cplx* x, std::size_t n, bool inverse);

// Transforms the trailing two axes of every slice in-place (rank >= 2).
void fft_2d_slices(cplx* data, std::size_t slices, std::size_t rows, std::size_t cols,
                   bool inverse);

// Full n-dimensional transform over every axis (registration and other
// whole-field work; dft/idft keep the stacked-slice convention).
ComplexField fft_all_axes(const ComplexField& field, bool inverse);

} // namespace ptycho
