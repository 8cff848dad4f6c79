#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ptycho/fft.hpp"
#include "ptycho/loss.hpp"
#include "test_helpers.hpp"

using namespace ptycho;
using ptycho::testing::make_far_instance;
using ptycho::testing::random_complex;

TEST_CASE("amplitude loss definition and edge cases") {
  RealField y(Shape{1}, 4.0), h(Shape{1}, 1.0);
  CHECK(amplitude_loss(y, h, 0.0) == doctest::Approx(1.0)); // (2-1)^2

  RealField same(Shape{8}, 3.7);
  CHECK(amplitude_loss(same, same) < 1e-9 * 8 * 3.7);

  // random case against an independently coded sum
  CounterRng rng = CounterRng::from(5, 6);
  RealField yr(Shape{6, 6}), hr(Shape{6, 6});
  for (std::size_t i = 0; i < yr.data.size(); ++i) {
    yr.data[i] = 10.0 * rng.uniform();
    hr.data[i] = 10.0 * rng.uniform();
  }
  double expect = 0.0;
  for (std::size_t i = 0; i < yr.data.size(); ++i) {
    double d = std::sqrt(yr.data[i]) - std::sqrt(hr.data[i] + kSqrtGuard);
    expect += d * d;
  }
  CHECK(amplitude_loss(yr, hr) == doctest::Approx(expect).epsilon(1e-14));

  RealField bad(Shape{2});
  CHECK_THROWS_AS(amplitude_loss(yr, bad), std::invalid_argument);

  // permutation invariance of matched pixel pairs
  RealField yp = yr, hp = hr;
  std::reverse(yp.data.begin(), yp.data.end());
  std::reverse(hp.data.begin(), hp.data.end());
  CHECK(amplitude_loss(yp, hp) == doctest::Approx(amplitude_loss(yr, hr)).epsilon(1e-14));
}

TEST_CASE("total_loss sums per-position terms and matches the taped value") {
  auto inst = make_far_instance(20, 8, 4, 61);
  const ComplexField O = random_complex(inst.model->object_var_shape(), 62, 0.4, 0.5);
  const ComplexField P = random_complex(inst.model->probe_var_shape(), 63, 0.4, 0.5);

  LossReport single = total_loss(*inst.model, O, P, {2});
  CHECK(single.total ==
        doctest::Approx(amplitude_loss(inst.model->measured(2),
                                       inst.model->predict_one(O, P, 2))).epsilon(1e-12));

  LossReport dup = total_loss(*inst.model, O, P, {2, 2});
  CHECK(dup.total == doctest::Approx(2.0 * single.total).epsilon(1e-12));

  std::vector<std::size_t> all(inst.model->positions());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
  std::vector<std::size_t> half1(all.begin(), all.begin() + all.size() / 2);
  std::vector<std::size_t> half2(all.begin() + all.size() / 2, all.end());
  LossReport full = total_loss(*inst.model, O, P, all);
  LossReport h1 = total_loss(*inst.model, O, P, half1);
  LossReport h2 = total_loss(*inst.model, O, P, half2);
  CHECK(full.total == doctest::Approx(h1.total + h2.total).epsilon(1e-11));

  double per_sum = 0.0;
  for (double g : full.per_position) {
    CHECK(g >= 0.0);
    per_sum += g;
  }
  CHECK(full.total == doctest::Approx(per_sum).epsilon(1e-10));
}

TEST_CASE("registration removes global phase and reports zero error on a match") {
  ComplexField truth = random_complex({24, 24}, 71, 1.0, 0.3);
  RegistrationResult self = register_and_nrmse(truth, truth);
  CHECK(self.nrmse < 1e-7);
  CHECK(std::abs(self.shift[0]) < 1e-9);

  ComplexField rotated = truth;
  for (cplx& v : rotated.data) v *= std::polar(1.0, 1.234);
  RegistrationResult reg = register_and_nrmse(rotated, truth);
  CHECK(reg.nrmse < 1e-7);

  ComplexField zeros(truth.shape);
  CHECK_THROWS_AS(register_and_nrmse(truth, zeros), std::invalid_argument);
}

TEST_CASE("registration recovers a constructed orthogonal perturbation norm") {
  ComplexField truth = random_complex({32, 32}, 81, 1.0, 0.4);
  // delta orthogonal to truth: alternate +/- of conj pattern projected out
  ComplexField delta = random_complex({32, 32}, 82);
  cplx proj = inner(truth, delta) / cplx(norm2(truth), 0.0);
  for (std::size_t i = 0; i < delta.data.size(); ++i) delta.data[i] -= proj * truth.data[i];
  double target = 0.1 * std::sqrt(norm2(truth) / norm2(delta));
  ComplexField recon = truth;
  for (std::size_t i = 0; i < recon.data.size(); ++i)
    recon.data[i] += target * delta.data[i];
  RegistrationResult reg = register_and_nrmse(recon, truth);
  CHECK(std::abs(reg.nrmse - 0.1) < 1e-3);
}

TEST_CASE("registration is invariant to integer circular shifts") {
  ComplexField truth = random_complex({20, 28}, 91, 1.0, 0.5);
  ComplexField shifted(truth.shape);
  const std::int64_t si = 3, sj = -5;
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 28; ++j) {
      std::size_t ti = (i + si + 20) % 20;
      std::size_t tj = (j + sj + 28) % 28;
      shifted.at(ti, tj) = truth.at(i, j);
    }
  RegistrationResult reg = register_and_nrmse(shifted, truth);
  CHECK(reg.nrmse < 1e-6);
  CHECK(reg.shift[0] == doctest::Approx(-3.0).epsilon(1e-6));
  CHECK(reg.shift[1] == doctest::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("registration refines subpixel shifts to 0.01 px") {
  // build a band-limited field, then shift by a known subpixel amount in Fourier space
  ComplexField truth = random_complex({32, 32}, 101);
  ComplexField spec = fft_all_axes(truth, false);
  for (std::size_t i = 0; i < 32; ++i)
    for (std::size_t j = 0; j < 32; ++j) {
      double fi = (i <= 15) ? double(i) : double(i) - 32.0;
      double fj = (j <= 15) ? double(j) : double(j) - 32.0;
      if (std::abs(fi) > 8 || std::abs(fj) > 8) spec.at(i, j) = 0.0; // band limit
    }
  truth = fft_all_axes(spec, true);
  RegistrationResult self = register_and_nrmse(truth, truth);
  CHECK(self.nrmse < 1e-7);

  const double di = 0.37, dj = -0.24;
  ComplexField shifted_spec = fft_all_axes(truth, false);
  for (std::size_t i = 0; i < 32; ++i)
    for (std::size_t j = 0; j < 32; ++j) {
      double fi = (i <= 15) ? double(i) : double(i) - 32.0;
      double fj = (j <= 15) ? double(j) : double(j) - 32.0;
      double ang = -2.0 * std::numbers::pi * (fi * di + fj * dj) / 32.0;
      shifted_spec.at(i, j) *= std::polar(1.0, ang);
    }
  ComplexField shifted = fft_all_axes(shifted_spec, true);
  RegistrationResult reg = register_and_nrmse(shifted, truth);
  CHECK(reg.shift[0] == doctest::Approx(-di).epsilon(0.05));
  CHECK(reg.shift[1] == doctest::Approx(-dj).epsilon(0.05));
  CHECK(reg.nrmse < 1e-4);
}

TEST_CASE("registration works on 3D volumes") {
  ComplexField truth = random_complex({8, 10, 12}, 111, 1.0, 0.4);
  ComplexField rolled(truth.shape);
  for (std::size_t x = 0; x < 8; ++x)
    for (std::size_t y = 0; y < 10; ++y)
      for (std::size_t z = 0; z < 12; ++z)
        rolled.at((x + 2) % 8, y, (z + 11) % 12) = truth.at(x, y, z) * std::polar(1.0, 0.7);
  RegistrationResult reg = register_and_nrmse(rolled, truth);
  CHECK(reg.nrmse < 1e-6);
  CHECK(reg.shift[0] == doctest::Approx(-2.0).epsilon(1e-6));
  CHECK(reg.shift[2] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("apply_registration aligns the field it measured") {
  ComplexField truth = random_complex({16, 16}, 121, 1.0, 0.4);
  ComplexField recon = truth;
  for (cplx& v : recon.data) v *= std::polar(2.0, -0.9);
  RegistrationResult reg = register_and_nrmse(recon, truth);
  ComplexField aligned = apply_registration(recon, reg);
  double err = 0.0;
  for (std::size_t i = 0; i < truth.data.size(); ++i)
    err += std::norm(aligned.data[i] - truth.data[i]);
  CHECK(std::sqrt(err / norm2(truth)) < 1e-8);
}
