#include <doctest.h>

#include <cmath>

#include "ptycho/rng.hpp"
#include "ptycho/tape.hpp"

using namespace ptycho;

namespace {

ComplexField random_field(Shape shape, std::uint64_t seed, double amp = 1.0) {
  ComplexField f(std::move(shape));
  CounterRng rng = CounterRng::from(seed, 202);
  for (cplx& v : f.data) v = amp * cplx(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0);
  return f;
}

} // namespace

TEST_CASE("sum |z|^2 evaluates and differentiates (d/dz* = z)") {
  Tape tape;
  ComplexField z(Shape{1});
  z.data[0] = cplx(1.0, 1.0);
  int v = tape.var(z);
  tape.sum_(tape.modulus_sq_(v));
  CHECK(tape.loss() == doctest::Approx(2.0));
  auto grads = tape.backward();
  CHECK(grads.size() == 1);
  CHECK(grads[0].data[0].real() == doctest::Approx(1.0));
  CHECK(grads[0].data[0].imag() == doctest::Approx(1.0));
}

TEST_CASE("linear loss sum Re(z) has exact gradient 1/2") {
  ComplexField z = random_field({5}, 3);
  Tape tape;
  int v = tape.var(z);
  tape.sum_(tape.real_(v));
  auto grads = tape.backward();
  for (const cplx& g : grads[0].data) {
    CHECK(g.real() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g.imag() == doctest::Approx(0.0).epsilon(1e-15));
  }

  auto build = [](Tape& t, const std::vector<ComplexField>& leaves) {
    t.sum_(t.real_(t.var(leaves[0])));
  };
  GradcheckReport rep = gradcheck(build, {z}, 1e-6, 1e-9);
  CHECK(rep.pass);
  CHECK(rep.max_rel_err < 1e-9);
}

TEST_CASE("backward before any forward program is a state error") {
  Tape tape;
  CHECK_THROWS_AS(tape.backward(), StateError);
  ComplexField z = random_field({2, 2}, 4);
  Tape t2;
  t2.var(z); // complex terminal, not a real scalar loss
  CHECK_THROWS_AS(t2.backward(), StateError);
}

TEST_CASE("non-finite forward values fail fast naming the node") {
  ComplexField z(Shape{1});
  z.data[0] = cplx(1e308, 0.0);
  Tape tape;
  int v = tape.var(z);
  bool threw = false;
  try {
    tape.modulus_sq_(v); // overflows to inf
  } catch (const NumericError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("modulus_sq") != std::string::npos);
    CHECK(std::string(e.what()).find("node 1") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("gradcheck validates every elementary op against finite differences") {
  // one composite touching dft, idft, extract, embed, hadamard, add, sub,
  // scale, conj, modulus_sq, guarded_sqrt, sum
  ComplexField a = random_field({6, 6}, 11);
  ComplexField b = random_field({4, 4}, 12);
  auto build = [](Tape& t, const std::vector<ComplexField>& leaves) {
    int va = t.var(leaves[0]);
    int vb = t.var(leaves[1]);
    PatchWindow w{{1, 1}, {4, 4}};
    int patch = t.extract_(va, w);
    int mixed = t.hadamard_(patch, t.conj_(vb));
    int spectrum = t.dft_(t.add_(mixed, t.scale_(vb, cplx(0.3, -0.2))));
    int back = t.idft_(t.embed_(spectrum, PatchWindow{{1, 0}, {4, 4}}, Shape{6, 6}));
    int inten = t.modulus_sq_(t.sub_(back, t.scale_(va, cplx(0.1, 0.05))));
    int rooted = t.guarded_sqrt_(inten, 1e-12);
    t.sum_(rooted);
  };
  GradcheckReport rep = gradcheck(build, {a, b}, 1e-6, 1e-5);
  CHECK(rep.pass);
}

TEST_CASE("gradcheck validates project and fresnel ops") {
  ComplexField vol = random_field({3, 4, 4}, 21);
  auto build3d = [](Tape& t, const std::vector<ComplexField>& leaves) {
    int v = t.var(leaves[0]);
    int proj = t.project_(v, 0);
    t.sum_(t.modulus_sq_(t.dft_(proj)));
  };
  CHECK(gradcheck(build3d, {vol}, 1e-6, 1e-5).pass);

  ComplexField wave = random_field({8, 8}, 22);
  wave.pitch = {0.6e-6, 0.6e-6};
  auto build_fresnel = [](Tape& t, const std::vector<ComplexField>& leaves) {
    int v = t.var(leaves[0]);
    t.sum_(t.modulus_sq_(t.fresnel_(v, 0.047, 1.4e-10)));
  };
  CHECK(gradcheck(build_fresnel, {wave}, 1e-6, 1e-5).pass);
}

TEST_CASE("backward is linear in the loss scale") {
  ComplexField z = random_field({4, 4}, 31);
  auto grads_scaled = [&](double alpha) {
    Tape t;
    int v = t.var(z);
    t.scale_(t.sum_(t.modulus_sq_(t.dft_(v))), cplx(alpha, 0.0));
    return t.backward();
  };
  auto g1 = grads_scaled(1.0);
  auto g3 = grads_scaled(3.0);
  for (std::size_t i = 0; i < g1[0].data.size(); ++i)
    CHECK(std::abs(g3[0].data[i] - 3.0 * g1[0].data[i]) < 1e-12 * std::abs(g3[0].data[i]));
}

TEST_CASE("gradient of a real program at real leaves is real") {
  ComplexField z(Shape{3, 3});
  CounterRng rng = CounterRng::from(41, 0);
  for (cplx& v : z.data) v = cplx(rng.uniform() + 0.25, 0.0);
  Tape t;
  int v = t.var(z);
  int s = t.guarded_sqrt_(t.modulus_sq_(v), 1e-12);
  t.sum_(t.modulus_sq_(s));
  auto grads = t.backward();
  for (const cplx& g : grads[0].data) CHECK(std::abs(g.imag()) <= 1e-14);
}

TEST_CASE("identical tapes give bit-identical gradients") {
  ComplexField z = random_field({8, 8}, 51);
  auto run = [&]() {
    Tape t;
    int v = t.var(z);
    t.sum_(t.guarded_sqrt_(t.modulus_sq_(t.dft_(v)), 1e-12));
    return t.backward();
  };
  auto g1 = run();
  auto g2 = run();
  for (std::size_t i = 0; i < g1[0].data.size(); ++i) {
    CHECK(g1[0].data[i].real() == g2[0].data[i].real());
    CHECK(g1[0].data[i].imag() == g2[0].data[i].imag());
  }
}
