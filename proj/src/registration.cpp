#include <algorithm>
#include <cmath>
#include <numbers>

#include "ptycho/fft.hpp"
#include "ptycho/loss.hpp"

namespace ptycho {

namespace {

// Signed fft frequency index for bin k of an n-point axis.
double freq_index(std::size_t k, std::size_t n) {
  return (k <= (n - 1) / 2) ? double(k) : double(k) - double(n);
}

// Evaluates the cross-correlation CC(s) = (1/Ntot) sum_k X(k) exp(+2pi i k.s/N)
// on a separable local grid via per-axis kernel matrices.
struct UpsampledCc {
  const ComplexField& X;
  std::vector<std::vector<double>> offsets;          // per axis, shift values
  std::vector<std::vector<cplx>> kernels;            // per axis, [offset][k]

  UpsampledCc(const ComplexField& x, const std::vector<std::vector<double>>& offs)
      : X(x), offsets(offs) {
    for (std::size_t a = 0; a < X.ndim(); ++a) {
      std::size_t n = X.shape[a];
      std::vector<cplx> mat(offsets[a].size() * n);
      for (std::size_t u = 0; u < offsets[a].size(); ++u)
        for (std::size_t k = 0; k < n; ++k) {
          double ang = 2.0 * std::numbers::pi * freq_index(k, n) * offsets[a][u] / double(n);
          mat[u * n + k] = cplx(std::cos(ang), std::sin(ang));
        }
      kernels.push_back(std::move(mat));
    }
  }

  // contracts axis by axis; result indexed [u0][u1](...[u2])
  std::vector<cplx> evaluate() const {
    std::vector<cplx> cur = X.data;
    Shape cur_shape = X.shape;
    for (std::size_t a = 0; a < X.ndim(); ++a) {
      std::size_t n = cur_shape[a];
      std::size_t lead = 1, trail = 1;
      for (std::size_t i = 0; i < a; ++i) lead *= cur_shape[i];
      for (std::size_t i = a + 1; i < cur_shape.size(); ++i) trail *= cur_shape[i];
      std::size_t m = offsets[a].size();
      std::vector<cplx> next(lead * m * trail, cplx(0.0, 0.0));
      const std::vector<cplx>& K = kernels[a];
      for (std::size_t l = 0; l < lead; ++l)
        for (std::size_t u = 0; u < m; ++u) {
          cplx* dst = &next[(l * m + u) * trail];
          for (std::size_t k = 0; k < n; ++k) {
            cplx w = K[u * n + k];
            const cplx* src = &cur[(l * n + k) * trail];
            for (std::size_t t = 0; t < trail; ++t) dst[t] += w * src[t];
          }
        }
      cur = std::move(next);
      cur_shape[a] = m;
    }
    double inv = 1.0 / double(shape_numel(X.shape));
    for (cplx& v : cur) v *= inv;
    return cur;
  }
};

} // namespace

RegistrationResult register_and_nrmse(const ComplexField& recon, const ComplexField& truth,
                                      std::size_t upsample) {
  require_same_shape(recon.shape, truth.shape, "register_and_nrmse");
  double nt2 = norm2(truth);
  double nr2 = norm2(recon);
  if (nt2 == 0.0) throw std::invalid_argument("register_and_nrmse: all-zero truth");
  RegistrationResult res;
  res.shift.assign(recon.ndim(), 0.0);
  if (nr2 == 0.0) {
    res.nrmse = 1.0;
    return res;
  }

  // cc(s) = <recon shifted by s, truth> via the cross-power spectrum
  ComplexField Fr = fft_all_axes(recon, false);
  ComplexField Ft = fft_all_axes(truth, false);
  ComplexField X(Fr.shape);
  for (std::size_t i = 0; i < X.data.size(); ++i)
    X.data[i] = Ft.data[i] * std::conj(Fr.data[i]);
  ComplexField cc = fft_all_axes(X, true);

  std::size_t peak = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < cc.data.size(); ++i) {
    double v = std::norm(cc.data[i]);
    if (v > best) {
      best = v;
      peak = i;
    }
  }
  // unravel and wrap to signed shifts
  std::vector<double> s0(recon.ndim());
  {
    std::size_t rem = peak;
    for (std::size_t a = recon.ndim(); a-- > 0;) {
      std::size_t n = recon.shape[a];
      std::size_t idx = rem % n;
      rem /= n;
      s0[a] = (idx <= n / 2) ? double(idx) : double(idx) - double(n);
    }
  }

  // local refinement: +-0.75 px around the integer peak at 1/upsample steps
  cplx peak_val = cc.data[peak];
  std::vector<double> refined = s0;
  if (upsample > 1) {
    std::vector<std::vector<double>> offsets(recon.ndim());
    std::size_t half = (3 * upsample) / 4;
    for (std::size_t a = 0; a < recon.ndim(); ++a) {
      offsets[a].reserve(2 * half + 1);
      for (std::size_t u = 0; u <= 2 * half; ++u)
        offsets[a].push_back(s0[a] + (double(u) - double(half)) / double(upsample));
    }
    UpsampledCc up(X, offsets);
    std::vector<cplx> grid = up.evaluate();
    Shape gshape;
    for (auto& o : offsets) gshape.push_back(o.size());
    std::size_t gpeak = 0;
    double gbest = -1.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      double v = std::norm(grid[i]);
      if (v > gbest) {
        gbest = v;
        gpeak = i;
      }
    }
    // keep the refinement only when it genuinely improves the correlation;
    // on broadband fields the trigonometric interpolant can peak between
    // samples even though the integer shift is the true optimum
    if (gbest > std::norm(peak_val)) {
      peak_val = grid[gpeak];
      std::size_t rem = gpeak;
      for (std::size_t a = recon.ndim(); a-- > 0;) {
        std::size_t idx = rem % gshape[a];
        rem /= gshape[a];
        refined[a] = offsets[a][idx];
      }
    }
  }

  res.shift = refined;
  res.phase = std::arg(peak_val);
  res.scale = std::abs(peak_val) / nr2;
  double frac = std::norm(peak_val) / (nt2 * nr2);
  res.nrmse = std::sqrt(std::max(0.0, 1.0 - std::min(frac, 1.0)));
  return res;
}

ComplexField apply_registration(const ComplexField& recon, const RegistrationResult& reg) {
  ComplexField F = fft_all_axes(recon, false);
  // circular shift by reg.shift via a Fourier ramp, then the global scale
  for (std::size_t i = 0; i < F.data.size(); ++i) {
    std::size_t rem = i;
    double ang = 0.0;
    for (std::size_t a = recon.ndim(); a-- > 0;) {
      std::size_t n = recon.shape[a];
      std::size_t idx = rem % n;
      rem /= n;
      ang -= 2.0 * std::numbers::pi * freq_index(idx, n) * reg.shift[a] / double(n);
    }
    F.data[i] *= cplx(std::cos(ang), std::sin(ang));
  }
  ComplexField out = fft_all_axes(F, true);
  cplx c = std::polar(reg.scale, reg.phase);
  for (cplx& v : out.data) v *= c;
  out.pitch = recon.pitch;
  return out;
}

} // namespace ptycho
