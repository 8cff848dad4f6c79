#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "ptycho/fft.hpp"
#include "ptycho/kernels.hpp"
#include "ptycho/rng.hpp"

using namespace ptycho;

namespace {

ComplexField random_field(Shape shape, std::uint64_t seed, double amp = 1.0) {
  ComplexField f(std::move(shape));
  CounterRng rng = CounterRng::from(seed, 101);
  for (cplx& v : f.data) v = amp * cplx(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0);
  return f;
}

// Brute-force DFT via the explicit transform matrix, O(N^2) per axis.
ComplexField dft_matrix_oracle_2d(const ComplexField& in) {
  const std::size_t R = in.shape[0], C = in.shape[1];
  ComplexField out(in.shape);
  for (std::size_t u = 0; u < R; ++u)
    for (std::size_t v = 0; v < C; ++v) {
      cplx acc(0.0, 0.0);
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) {
          double ang = -2.0 * std::numbers::pi *
                       (double(u * r) / double(R) + double(v * c) / double(C));
          acc += in.at(r, c) * cplx(std::cos(ang), std::sin(ang));
        }
      out.at(u, v) = acc;
    }
  return out;
}

double max_rel_diff(const ComplexField& a, const ComplexField& b) {
  double scale = 0.0;
  for (const cplx& v : b.data) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) scale = 1.0;
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(a.data[i] - b.data[i]) / scale);
  return m;
}

} // namespace

TEST_CASE("field invariants are enforced") {
  CHECK_THROWS_AS(ComplexField(Shape{}), std::invalid_argument);
  CHECK_THROWS_AS(ComplexField(Shape{4, 0}), std::invalid_argument);
  ComplexField f(Shape{2, 3});
  CHECK(f.size() == 6);
  f.pitch = {1e-6};
  CHECK_THROWS_AS(f.validate(), std::invalid_argument);
  f.pitch = {1e-6, -1.0};
  CHECK_THROWS_AS(f.validate(), std::invalid_argument);
  f.pitch = {1e-6, 2e-6};
  CHECK_NOTHROW(f.validate());
}

TEST_CASE("dft of a Kronecker delta is flat") {
  ComplexField f(Shape{4, 4});
  f.data[0] = 1.0;
  ComplexField F = dft(f);
  for (const cplx& v : F.data) {
    CHECK(v.real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v.imag() == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("dft of a constant concentrates at DC") {
  ComplexField f(Shape{4, 4}, cplx(1.0, 0.0));
  ComplexField F = dft(f);
  CHECK(F.data[0].real() == doctest::Approx(16.0));
  for (std::size_t i = 1; i < F.data.size(); ++i) CHECK(std::abs(F.data[i]) < 1e-12);
}

TEST_CASE("dft matches the DFT-matrix oracle on a random 8x8 field") {
  ComplexField f = random_field({8, 8}, 7);
  CHECK(max_rel_diff(dft(f), dft_matrix_oracle_2d(f)) < 1e-12);
}

TEST_CASE("dft matches the DFT-matrix oracle on non-power-of-two sizes") {
  for (Shape s : {Shape{6, 10}, Shape{15, 15}, Shape{19, 12}}) {
    ComplexField f = random_field(s, 11 + s[0]);
    CHECK(max_rel_diff(dft(f), dft_matrix_oracle_2d(f)) < 1e-11);
  }
}

TEST_CASE("idft inverts dft and Parseval holds") {
  for (Shape s : {Shape{16, 16}, Shape{190}, Shape{3, 8, 8}}) {
    ComplexField f = random_field(s, 23 + s.size());
    ComplexField roundtrip = idft(dft(f));
    CHECK(max_rel_diff(roundtrip, f) < 1e-12);
    double n = (s.size() == 1) ? double(s[0]) : double(s[s.size() - 1] * s[s.size() - 2]);
    CHECK(norm2(dft(f)) == doctest::Approx(n * norm2(f)).epsilon(1e-12));
  }
}

TEST_CASE("dft rejects empty input") {
  ComplexField f;
  CHECK_THROWS_AS(dft(f), std::invalid_argument);
}

TEST_CASE("extract_patch pulls the addressed block") {
  ComplexField host(Shape{4, 4});
  for (std::size_t i = 0; i < 16; ++i) host.data[i] = double(i);
  PatchWindow w{{0, 0}, {2, 2}};
  ComplexField p = extract_patch(host, w);
  CHECK(p.at(0, 0) == cplx(0.0, 0.0));
  CHECK(p.at(0, 1) == cplx(1.0, 0.0));
  CHECK(p.at(1, 0) == cplx(4.0, 0.0));
  CHECK(p.at(1, 1) == cplx(5.0, 0.0));
}

TEST_CASE("out-of-bounds windows raise index errors") {
  ComplexField host(Shape{4, 4});
  CHECK_THROWS_AS(extract_patch(host, PatchWindow{{3, 3}, {2, 2}}), std::out_of_range);
  CHECK_THROWS_AS(extract_patch(host, PatchWindow{{-1, 0}, {2, 2}}), std::out_of_range);
  ComplexField p(Shape{2, 2});
  CHECK_THROWS_AS(embed_patch(p, PatchWindow{{3, 3}, {2, 2}}, Shape{4, 4}), std::out_of_range);
}

TEST_CASE("extract/embed are adjoints under the complex inner product") {
  ComplexField host = random_field({9, 7}, 31);
  ComplexField patch = random_field({4, 3}, 32);
  PatchWindow w{{2, 3}, {4, 3}};
  cplx lhs = inner(extract_patch(host, w), patch);
  cplx rhs = inner(host, embed_patch(patch, w, host.shape));
  CHECK(std::abs(lhs - rhs) < 1e-12 * std::abs(lhs));
}

TEST_CASE("embed places the patch and zero-pads") {
  ComplexField p(Shape{2, 2}, cplx(1.0, 0.0));
  PatchWindow w{{1, 1}, {2, 2}};
  ComplexField e = embed_patch(p, w, Shape{4, 4});
  double total = 0.0;
  for (const cplx& v : e.data) total += v.real();
  CHECK(total == doctest::Approx(4.0));
  CHECK(e.at(1, 1) == cplx(1.0, 0.0));
  CHECK(e.at(2, 2) == cplx(1.0, 0.0));
  CHECK(e.at(0, 0) == cplx(0.0, 0.0));
  // left inverse
  ComplexField back = extract_patch(e, w);
  for (std::size_t i = 0; i < back.data.size(); ++i) CHECK(back.data[i] == p.data[i]);
}

TEST_CASE("project_axis sums planes and adjoins to broadcast") {
  ComplexField f(Shape{2, 2, 2}, cplx(1.0, 0.0));
  ComplexField p = project_axis(f, 0);
  CHECK(p.shape == Shape{2, 2});
  for (const cplx& v : p.data) CHECK(v == cplx(2.0, 0.0));

  ComplexField x = random_field({3, 4, 5}, 41);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    ComplexField y({x.shape[axis == 0 ? 1 : 0], x.shape[axis == 2 ? 1 : 2]});
    y = random_field(y.shape, 42 + axis);
    cplx lhs = inner(project_axis(x, axis), y);
    cplx rhs = inner(x, broadcast_axis(y, axis, x.shape[axis]));
    CHECK(std::abs(lhs - rhs) < 1e-12 * std::abs(lhs));
  }
  CHECK_THROWS_AS(project_axis(x, 3), std::invalid_argument);
}

TEST_CASE("projecting a single-plane field returns that plane") {
  ComplexField f(Shape{3, 2, 2});
  ComplexField plane = random_field({2, 2}, 55);
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t k = 0; k < 2; ++k) f.at(1, j, k) = plane.at(j, k);
  ComplexField p = project_axis(f, 0);
  CHECK(max_rel_diff(p, plane) == 0.0);
}

TEST_CASE("elementwise ops match their definitions") {
  ComplexField a(Shape{1}), b(Shape{1});
  a.data[0] = cplx(1.0, 1.0);
  b.data[0] = cplx(1.0, -1.0);
  CHECK(hadamard(a, b).data[0] == cplx(2.0, 0.0));

  ComplexField c(Shape{1});
  c.data[0] = cplx(3.0, 4.0);
  CHECK(modulus_sq(c).data[0] == doctest::Approx(25.0));

  RealField h(Shape{1}, 0.0);
  CHECK(guarded_sqrt(h, 1e-12).data[0] == doctest::Approx(1e-6));
  h.data[0] = -1.0;
  CHECK_THROWS_AS(guarded_sqrt(h), std::invalid_argument);

  ComplexField mis(Shape{2});
  CHECK_THROWS_AS(hadamard(a, mis), std::invalid_argument);
}

TEST_CASE("fresnel_propagate: identity at z=0, unitary, invertible") {
  ComplexField f = random_field({32, 32}, 61);
  f.pitch = {0.6e-6, 0.6e-6};
  double lambda = 1.42510e-10;

  ComplexField same = fresnel_propagate(f, 0.0, lambda);
  CHECK(max_rel_diff(same, f) == 0.0);

  ComplexField prop = fresnel_propagate(f, 0.047, lambda);
  CHECK(std::sqrt(norm2(prop) / norm2(f)) == doctest::Approx(1.0).epsilon(1e-12));

  ComplexField back = fresnel_propagate(prop, -0.047, lambda);
  CHECK(max_rel_diff(back, f) < 1e-10);

  ComplexField nopitch = random_field({8, 8}, 62);
  CHECK_THROWS_AS(fresnel_propagate(nopitch, 0.1, lambda), std::invalid_argument);
}

TEST_CASE("phase_ramp is a unit-modulus ramp with the requested slope") {
  Shape s{4, 5, 6};
  double pitch = 66e-9;
  ComplexField ones = phase_ramp(s, pitch, {0.0, 0.0, 0.0});
  for (const cplx& v : ones.data) CHECK(v == cplx(1.0, 0.0));

  std::array<double, 3> q{0.0, 2.1e6, 0.0};
  ComplexField ramp = phase_ramp(s, pitch, q);
  for (const cplx& v : ramp.data) CHECK(std::abs(v) == doctest::Approx(1.0).epsilon(1e-12));
  // adjacent voxels along axis 1 differ in phase by q*pitch
  double dphi = std::arg(ramp.at(0, 1, 0) / ramp.at(0, 0, 0));
  CHECK(dphi == doctest::Approx(q[1] * pitch).epsilon(1e-9));
}

TEST_CASE("poisson sampler is deterministic with correct moments") {
  CounterRng rng = CounterRng::from(2024, 1);
  CounterRng rng2 = CounterRng::from(2024, 1);
  for (int i = 0; i < 32; ++i) CHECK(poisson_sample(rng, 7.5) == poisson_sample(rng2, 7.5));

  const int n = 100000;
  double mean = 0.0, m2 = 0.0;
  CounterRng r = CounterRng::from(99, 5);
  std::vector<double> draws(n);
  for (int i = 0; i < n; ++i) draws[i] = double(poisson_sample(r, 50.0));
  for (double d : draws) mean += d;
  mean /= n;
  for (double d : draws) m2 += (d - mean) * (d - mean);
  m2 /= (n - 1);
  CHECK(std::abs(mean - 50.0) < 0.5);  // ~7 sigma of the CLT bound
  CHECK(std::abs(m2 - 50.0) < 2.0);

  CounterRng z = CounterRng::from(1, 2);
  CHECK(poisson_sample(z, 0.0) == 0);
}

TEST_CASE("shuffles are uniform (chi-square on J=4 permutation counts)") {
  const std::size_t trials = 10000;
  std::map<std::vector<std::size_t>, int> counts;
  for (std::size_t t = 0; t < trials; ++t)
    counts[shuffled_indices(4, CounterRng::from(777, t))]++;
  CHECK(counts.size() == 24);
  double expected = double(trials) / 24.0;
  double sigma = std::sqrt(expected * (1.0 - 1.0 / 24.0));
  for (auto& [perm, c] : counts) CHECK(std::abs(c - expected) <= 3.0 * sigma);

  // J=1 is the identity, fixed seeds repeat exactly
  CHECK(shuffled_indices(1, CounterRng::from(3, 0)) == std::vector<std::size_t>{0});
  CHECK(shuffled_indices(17, CounterRng::from(5, 9)) ==
        shuffled_indices(17, CounterRng::from(5, 9)));
}
