#include "ptycho/fft.hpp"

#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <unordered_map>

namespace ptycho {
namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Iterative radix-2 plan: bit-reversal permutation plus stage-major twiddle
// tables (one table per direction, so the inner loop carries no branches).
struct Radix2Plan {
  std::size_t n = 0;
  std::vector<std::uint32_t> bitrev;
  std::vector<cplx> tw_fwd, tw_inv; // stage-major, n-1 entries each

  explicit Radix2Plan(std::size_t n_) : n(n_) {
    bitrev.resize(n);
    std::size_t log2n = 0;
    while ((std::size_t{1} << log2n) < n) ++log2n;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < log2n; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (log2n - 1 - b);
      bitrev[i] = static_cast<std::uint32_t>(r);
    }
    tw_fwd.reserve(n - 1);
    for (std::size_t half = 1; half < n; half <<= 1)
      for (std::size_t k = 0; k < half; ++k) {
        double ang = -std::numbers::pi * double(k) / double(half);
        tw_fwd.emplace_back(std::cos(ang), std::sin(ang));
      }
    tw_inv.resize(tw_fwd.size());
    for (std::size_t i = 0; i < tw_fwd.size(); ++i) tw_inv[i] = std::conj(tw_fwd[i]);
  }

  void run(cplx* x, bool inverse) const {
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t j = bitrev[i];
      if (i < j) std::swap(x[i], x[j]);
    }
    const cplx* stage_tw = inverse ? tw_inv.data() : tw_fwd.data();
    for (std::size_t half = 1; half < n; half <<= 1) {
      for (std::size_t start = 0; start < n; start += 2 * half) {
        cplx* lo = x + start;
        cplx* hi = lo + half;
        for (std::size_t k = 0; k < half; ++k) {
          double wr = stage_tw[k].real(), wi = stage_tw[k].imag();
          double hr = hi[k].real(), him = hi[k].imag();
          double tr = hr * wr - him * wi;
          double ti = hr * wi + him * wr;
          double lr = lo[k].real(), li = lo[k].imag();
          lo[k] = cplx(lr + tr, li + ti);
          hi[k] = cplx(lr - tr, li - ti);
        }
      }
      stage_tw += half;
    }
    if (inverse) {
      double inv = 1.0 / double(n);
      for (std::size_t i = 0; i < n; ++i) x[i] *= inv;
    }
  }
};

// Bluestein chirp-z plan for arbitrary n, convolved on a radix-2 grid of
// size m >= 2n-1. chirp[j] = exp(-i*pi*j^2/n) with j^2 reduced mod 2n to keep
// the angle well conditioned for large j.
struct BluesteinPlan {
  std::size_t n = 0, m = 0;
  std::shared_ptr<const Radix2Plan> inner;
  std::vector<cplx> chirp;   // forward chirp, length n
  std::vector<cplx> bfft;    // FFT of the wrapped conjugate chirp, length m

  explicit BluesteinPlan(std::size_t n_, std::shared_ptr<const Radix2Plan> inner_)
      : n(n_), m(inner_->n), inner(std::move(inner_)) {
    chirp.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t j2 = (j * j) % (2 * n);
      double ang = -std::numbers::pi * double(j2) / double(n);
      chirp[j] = cplx(std::cos(ang), std::sin(ang));
    }
    std::vector<cplx> b(m, cplx(0.0, 0.0));
    b[0] = std::conj(chirp[0]);
    for (std::size_t j = 1; j < n; ++j) {
      b[j] = std::conj(chirp[j]);
      b[m - j] = std::conj(chirp[j]);
    }
    inner->run(b.data(), false);
    bfft = std::move(b);
  }

  void run(cplx* x, bool inverse) const {
    std::vector<cplx> a(m, cplx(0.0, 0.0));
    if (!inverse) {
      for (std::size_t j = 0; j < n; ++j) a[j] = x[j] * chirp[j];
    } else {
      // inverse via conj(fft(conj(x)))/n
      for (std::size_t j = 0; j < n; ++j) a[j] = std::conj(x[j]) * chirp[j];
    }
    inner->run(a.data(), false);
    for (std::size_t j = 0; j < m; ++j) a[j] *= bfft[j];
    inner->run(a.data(), true);
    if (!inverse) {
      for (std::size_t j = 0; j < n; ++j) x[j] = a[j] * chirp[j];
    } else {
      double inv = 1.0 / double(n);
      for (std::size_t j = 0; j < n; ++j) x[j] = std::conj(a[j] * chirp[j]) * inv;
    }
  }
};

struct PlanSet {
  std::shared_ptr<const Radix2Plan> radix2;
  std::shared_ptr<const BluesteinPlan> bluestein;
};

const PlanSet& plan_for(std::size_t n) {
  static std::mutex mu;
  static std::unordered_map<std::size_t, PlanSet> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  PlanSet ps;
  if (is_pow2(n)) {
    ps.radix2 = std::make_shared<Radix2Plan>(n);
  } else {
    std::size_t m = next_pow2(2 * n - 1);
    auto inner_it = cache.find(m);
    std::shared_ptr<const Radix2Plan> inner;
    if (inner_it != cache.end() && inner_it->second.radix2) {
      inner = inner_it->second.radix2;
    } else {
      inner = std::make_shared<Radix2Plan>(m);
      cache[m].radix2 = inner;
    }
    ps.bluestein = std::make_shared<BluesteinPlan>(n, inner);
  }
  return cache.emplace(n, std::move(ps)).first->second;
}

} // namespace

void fft_line(cplx* x, std::size_t n, bool inverse) {
  if (n == 1) return;
  const PlanSet& ps = plan_for(n);
  if (ps.radix2)
    ps.radix2->run(x, inverse);
  else
    ps.bluestein->run(x, inverse);
}

namespace {

void transpose_into(const cplx* src, cplx* dst, std::size_t rows, std::size_t cols) {
  constexpr std::size_t B = 16;
  for (std::size_t rb = 0; rb < rows; rb += B)
    for (std::size_t cb = 0; cb < cols; cb += B) {
      std::size_t rend = std::min(rb + B, rows), cend = std::min(cb + B, cols);
      for (std::size_t r = rb; r < rend; ++r)
        for (std::size_t c = cb; c < cend; ++c) dst[c * rows + r] = src[r * cols + c];
    }
}

} // namespace

void fft_2d_slices(cplx* data, std::size_t slices, std::size_t rows, std::size_t cols,
                   bool inverse) {
  thread_local std::vector<cplx> scratch;
  scratch.resize(rows * cols);
  for (std::size_t s = 0; s < slices; ++s) {
    cplx* sl = data + s * rows * cols;
    for (std::size_t r = 0; r < rows; ++r) fft_line(sl + r * cols, cols, inverse);
    transpose_into(sl, scratch.data(), rows, cols);
    for (std::size_t c = 0; c < cols; ++c) fft_line(scratch.data() + c * rows, rows, inverse);
    transpose_into(scratch.data(), sl, cols, rows);
  }
}

namespace {

ComplexField transform(const ComplexField& field, bool inverse) {
  if (field.size() == 0 || field.shape.empty())
    throw std::invalid_argument("dft: empty field");
  ComplexField out = field;
  switch (field.ndim()) {
    case 1:
      fft_line(out.data.data(), out.shape[0], inverse);
      break;
    case 2:
      fft_2d_slices(out.data.data(), 1, out.shape[0], out.shape[1], inverse);
      break;
    case 3:
      fft_2d_slices(out.data.data(), out.shape[0], out.shape[1], out.shape[2], inverse);
      break;
    default:
      throw std::invalid_argument("dft: rank must be 1-3");
  }
  return out;
}

} // namespace

ComplexField dft(const ComplexField& field) { return transform(field, false); }
ComplexField idft(const ComplexField& field) { return transform(field, true); }

ComplexField fft_all_axes(const ComplexField& field, bool inverse) {
  if (field.size() == 0) throw std::invalid_argument("fft_all_axes: empty field");
  ComplexField out = field;
  const Shape& s = out.shape;
  if (out.ndim() == 1) {
    fft_line(out.data.data(), s[0], inverse);
    return out;
  }
  if (out.ndim() == 2) {
    fft_2d_slices(out.data.data(), 1, s[0], s[1], inverse);
    return out;
  }
  fft_2d_slices(out.data.data(), s[0], s[1], s[2], inverse);
  // remaining leading axis, stride s[1]*s[2]
  std::size_t stride = s[1] * s[2];
  std::vector<cplx> line(s[0]);
  for (std::size_t off = 0; off < stride; ++off) {
    for (std::size_t i = 0; i < s[0]; ++i) line[i] = out.data[i * stride + off];
    fft_line(line.data(), s[0], inverse);
    for (std::size_t i = 0; i < s[0]; ++i) out.data[i * stride + off] = line[i];
  }
  return out;
}

} // namespace ptycho
