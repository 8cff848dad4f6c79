#include <doctest.h>

#include <cmath>

#include "ptycho/fft.hpp"
#include "ptycho/loss.hpp"
#include "ptycho/models.hpp"
#include "test_helpers.hpp"

using namespace ptycho;
using ptycho::testing::desk_bragg_recipe;
using ptycho::testing::make_far_instance;
using ptycho::testing::random_complex;

namespace {

double max_abs_diff(const RealField& a, const RealField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

} // namespace

TEST_CASE("exit_wave_far multiplies the extracted patch by the probe") {
  ComplexField O(Shape{6, 6}, cplx(1.0, 0.0));
  ComplexField P(Shape{3, 3}, cplx(1.0, 0.0));
  PatchWindow w{{1, 2}, {3, 3}};
  ComplexField psi = exit_wave_far(O, P, w);
  for (const cplx& v : psi.data) CHECK(v == cplx(1.0, 0.0));

  // probe nonzero in one pixel picks out exactly one object sample
  ComplexField O2 = random_complex({6, 6}, 1);
  ComplexField P2(Shape{3, 3});
  P2.at(1, 2) = cplx(2.0, -1.0);
  ComplexField psi2 = exit_wave_far(O2, P2, w);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      cplx expect = (i == 1 && j == 2) ? P2.at(1, 2) * O2.at(1 + 1, 2 + 2) : cplx(0.0, 0.0);
      CHECK(std::abs(psi2.at(i, j) - expect) < 1e-15);
    }

  // random case against direct indexing
  ComplexField P3 = random_complex({3, 3}, 2);
  ComplexField psi3 = exit_wave_far(O2, P3, w);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      cplx expect = P3.at(i, j) * O2.at(i + 1, j + 2);
      CHECK(std::abs(psi3.at(i, j) - expect) < 1e-14 * std::abs(expect));
    }

  ComplexField bad_probe(Shape{2, 2}, cplx(1.0, 0.0));
  CHECK_THROWS_AS(exit_wave_far(O, bad_probe, w), std::invalid_argument);
}

TEST_CASE("intensity_far uses the unnormalized DFT and adds the background") {
  ComplexField psi(Shape{8, 8}, cplx(1.0, 0.0));
  RealField h = intensity_far(psi, 0.0);
  CHECK(h.data[0] == doctest::Approx(4096.0)); // (8*8)^2 at DC
  for (std::size_t i = 1; i < h.data.size(); ++i) CHECK(std::abs(h.data[i]) < 1e-9);

  ComplexField zero(Shape{4, 4});
  RealField hz = intensity_far(zero, 2.5);
  for (double v : hz.data) CHECK(v == doctest::Approx(2.5));

  // Parseval bookkeeping: sum h = M ||psi||^2 + sum nu
  ComplexField r = random_complex({8, 8}, 3);
  double nu = 0.75;
  RealField hr = intensity_far(r, nu);
  double total = 0.0;
  for (double v : hr.data) total += v;
  CHECK(total == doctest::Approx(64.0 * norm2(r) + 64.0 * nu).epsilon(1e-12));

  CHECK_THROWS_AS(intensity_far(r, -1.0), std::invalid_argument);
}

TEST_CASE("intensity_near is unitary in the propagation") {
  ComplexField psi = random_complex({16, 16}, 4);
  psi.pitch = {0.6e-6, 0.6e-6};
  double lambda = 1.4251e-10;

  RealField h0 = intensity_near(psi, 0.0, lambda, 0.0);
  RealField direct = modulus_sq(psi);
  CHECK(max_abs_diff(h0, direct) < 1e-14);

  RealField hz = intensity_near(psi, 0.047, lambda, 0.0);
  double total = 0.0;
  for (double v : hz.data) total += v;
  CHECK(total == doctest::Approx(norm2(psi)).epsilon(1e-12));

  // matches composing the kernels by hand
  ComplexField spec = dft(psi);
  const ComplexField& kern = fresnel_kernel(psi.shape, psi.pitch, 0.047, lambda);
  for (std::size_t i = 0; i < spec.data.size(); ++i) spec.data[i] *= kern.data[i];
  RealField manual = modulus_sq(idft(spec));
  CHECK(max_abs_diff(hz, manual) < 1e-12 * norm2(psi));
}

TEST_CASE("exit_wave_bragg projects the modulated product") {
  ComplexField O(Shape{2, 2, 2}, cplx(1.0, 0.0));
  ComplexField P(Shape{2, 2, 2}, cplx(1.0, 0.0));
  ComplexField Q(Shape{2, 2, 2}, cplx(1.0, 0.0));
  PatchWindow w{{0, 0, 0}, {2, 2, 2}};
  ComplexField psi = exit_wave_bragg(O, P, w, Q, 0);
  for (const cplx& v : psi.data) CHECK(v == cplx(2.0, 0.0));

  // dtheta = 0 (unit ramp) reduces exactly to the unramped projection
  ComplexField O3 = random_complex({4, 5, 6}, 7);
  ComplexField P3 = random_complex({3, 4, 5}, 8);
  PatchWindow w3{{1, 0, 1}, {3, 4, 5}};
  ComplexField ones(Shape{3, 4, 5}, cplx(1.0, 0.0));
  ComplexField with_ramp = exit_wave_bragg(O3, P3, w3, ones, 1);
  ComplexField eq16 = project_axis(hadamard(P3, extract_patch(O3, w3)), 1);
  for (std::size_t i = 0; i < with_ramp.data.size(); ++i)
    CHECK(with_ramp.data[i] == eq16.data[i]);

  // random instance against an unfused multiply-then-sum oracle
  ComplexField Q3 = random_complex({3, 4, 5}, 9);
  ComplexField out = exit_wave_bragg(O3, P3, w3, Q3, 1);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 5; ++k) {
      cplx acc(0.0, 0.0);
      for (std::size_t j = 0; j < 4; ++j)
        acc += Q3.at(i, j, k) * P3.at(i, j, k) * O3.at(i + 1, j + 0, k + 1);
      CHECK(std::abs(out.at(i, k) - acc) < 1e-12 * std::max(1.0, std::abs(acc)));
    }

  ComplexField bad(Shape{2, 2, 2});
  CHECK_THROWS_AS(exit_wave_bragg(O3, bad, w3, Q3, 1), std::invalid_argument);
}

TEST_CASE("predict_batch matches single-position ops and permutes with indices") {
  auto inst = make_far_instance(24, 8, 4, 11);
  const ComplexField& O = inst.ds.object_true;
  const ComplexField& P = inst.ds.probe_true;

  auto single = inst.model->predict_batch(O, P, {3});
  RealField direct = inst.model->predict_one(O, P, 3);
  CHECK(max_abs_diff(single[0], direct) < 1e-9);

  auto fwd = inst.model->predict_batch(O, P, {0, 2, 4});
  auto rev = inst.model->predict_batch(O, P, {4, 2, 0});
  CHECK(max_abs_diff(fwd[0], rev[2]) == 0.0);
  CHECK(max_abs_diff(fwd[1], rev[1]) == 0.0);

  // sum of intensities over the full plan equals the sum over singletons
  std::vector<std::size_t> all(inst.model->positions());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
  auto batch = inst.model->predict_batch(O, P, all);
  double sum_batch = 0.0, sum_single = 0.0;
  for (std::size_t j = 0; j < all.size(); ++j) {
    for (double v : batch[j].data) sum_batch += v;
    for (double v : inst.model->predict_one(O, P, j).data) sum_single += v;
  }
  CHECK(sum_batch == doctest::Approx(sum_single).epsilon(1e-12));

  CHECK_THROWS_AS(inst.model->predict_batch(O, P, {inst.model->positions()}),
                  std::out_of_range);
}

TEST_CASE("taped losses differentiate for all three models (finite differences)") {
  // far field, random 12x12 object with 6x6 probe, 4 positions
  {
    auto inst = make_far_instance(12, 6, 3, 21);
    std::vector<std::size_t> batch{0, 1, 2, 3};
    const ForwardModel& m = *inst.model;
    auto build = [&](Tape& t, const std::vector<ComplexField>& leaves) {
      m.build_loss(t, leaves[0], leaves[1], batch);
    };
    ComplexField O0 = random_complex(m.object_var_shape(), 22, 0.5, 0.6);
    ComplexField P0 = random_complex(m.probe_var_shape(), 23, 0.5, 0.8);
    GradcheckReport rep = gradcheck(build, {O0, P0}, 1e-6, 1e-5);
    CHECK(rep.pass);
  }
  // near field
  {
    Recipe r = preset_recipe("nearfield-desk");
    r.set("grid", std::int64_t(24));
    r.set("object", std::int64_t(12));
    r.set("step_px", std::int64_t(3));
    r.set("grid_counts", std::int64_t(3));
    r.set("probe_fwhm", 0.6e-6 * 8);
    r.set("flux", 2.0); // O(1) data keeps the finite differences well conditioned
    Dataset ds = build_dataset(r);
    auto m = ds.make_model();
    std::vector<std::size_t> batch{0, 4, 8};
    auto build = [&](Tape& t, const std::vector<ComplexField>& leaves) {
      m->build_loss(t, leaves[0], leaves[1], batch);
    };
    ComplexField O0 = random_complex(m->object_var_shape(), 31, 0.5, 0.7);
    ComplexField P0 = random_complex(m->probe_var_shape(), 32, 0.4, 0.9);
    GradcheckReport rep = gradcheck(build, {O0, P0}, 1e-5, 1e-5);
    CHECK(rep.pass);
  }
  // bragg (object-only variable)
  {
    Recipe br = desk_bragg_recipe(77, 2);
    br.set("photons", 1.0);
    Dataset ds = build_dataset(br);
    auto m = ds.make_model();
    std::vector<std::size_t> batch{0, 7, 19};
    auto build = [&](Tape& t, const std::vector<ComplexField>& leaves) {
      m->build_loss(t, leaves[0], ComplexField(), batch);
    };
    ComplexField O0 = random_complex(m->object_var_shape(), 41, 0.3, 0.2);
    GradcheckReport rep = gradcheck(build, {O0}, 1e-5, 1e-5);
    CHECK(rep.pass);
  }
}

TEST_CASE("taped forward values equal the eager predictions") {
  auto inst = make_far_instance(16, 8, 4, 51);
  const ComplexField& O = inst.ds.object_true;
  const ComplexField& P = inst.ds.probe_true;
  Tape tape;
  std::vector<int> h_nodes;
  inst.model->build_loss(tape, O, P, {0, 1}, &h_nodes);
  for (std::size_t b = 0; b < 2; ++b) {
    RealField eager = inst.model->predict_one(O, P, b);
    const ComplexField& taped = tape.node(h_nodes[b]).value;
    for (std::size_t i = 0; i < eager.data.size(); ++i)
      CHECK(eager.data[i] == doctest::Approx(taped.data[i].real()).epsilon(1e-12));
  }
}

TEST_CASE("near-field geometry computes and reports the Fresnel number") {
  Recipe r = preset_recipe("nearfield-desk");
  Dataset ds = build_dataset(r);
  // 256 px * 0.6 um = 153.6 um lateral extent at z = 4.7 cm, 8.7 keV
  CHECK(ds.near.fresnel_number() > 1000.0);
}
