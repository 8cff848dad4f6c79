#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ptycho/dataset.hpp"
#include "ptycho/fft.hpp"
#include "ptycho/loss.hpp"
#include "ptycho/optim.hpp"
#include "ptycho/rng.hpp"

namespace py = pybind11;
using namespace ptycho;

namespace {

ComplexField field_from_array(const py::array_t<std::complex<double>>& arr,
                              std::vector<double> pitch = {}) {
  py::buffer_info info = arr.request();
  if (info.ndim < 1 || info.ndim > 3)
    throw std::invalid_argument("expected a 1-3 dimensional complex array");
  Shape shape;
  for (py::ssize_t d = 0; d < info.ndim; ++d) shape.push_back(std::size_t(info.shape[d]));
  ComplexField f(shape);
  auto unchecked = arr.unchecked();
  std::size_t i = 0;
  if (info.ndim == 1)
    for (py::ssize_t a = 0; a < info.shape[0]; ++a) f.data[i++] = unchecked(a);
  else if (info.ndim == 2)
    for (py::ssize_t a = 0; a < info.shape[0]; ++a)
      for (py::ssize_t b = 0; b < info.shape[1]; ++b) f.data[i++] = unchecked(a, b);
  else
    for (py::ssize_t a = 0; a < info.shape[0]; ++a)
      for (py::ssize_t b = 0; b < info.shape[1]; ++b)
        for (py::ssize_t c = 0; c < info.shape[2]; ++c) f.data[i++] = unchecked(a, b, c);
  f.pitch = std::move(pitch);
  return f;
}

py::array_t<std::complex<double>> array_from_field(const ComplexField& f) {
  std::vector<py::ssize_t> shape(f.shape.begin(), f.shape.end());
  py::array_t<std::complex<double>> out(shape);
  std::memcpy(out.request().ptr, f.data.data(), f.data.size() * sizeof(cplx));
  return out;
}

RealField real_from_array(const py::array_t<double>& arr) {
  py::buffer_info info = arr.request();
  Shape shape;
  for (py::ssize_t d = 0; d < info.ndim; ++d) shape.push_back(std::size_t(info.shape[d]));
  RealField f(shape);
  std::memcpy(f.data.data(), info.ptr, f.data.size() * sizeof(double));
  return f;
}

py::array_t<double> array_from_real(const RealField& f) {
  std::vector<py::ssize_t> shape(f.shape.begin(), f.shape.end());
  py::array_t<double> out(shape);
  std::memcpy(out.request().ptr, f.data.data(), f.data.size() * sizeof(double));
  return out;
}

PatchWindow window_from_py(const std::vector<std::int64_t>& offset,
                           const std::vector<std::int64_t>& extent) {
  return PatchWindow{offset, extent};
}

} // namespace

PYBIND11_MODULE(_ptycho, m) {
  m.doc() = "ptychographic phase retrieval core: deterministic kernels, Wirtinger "
            "reverse-mode autodiff, reconstruction engines";

  m.def("dft", [](py::array_t<std::complex<double>> a) { return array_from_field(dft(field_from_array(a))); });
  m.def("idft", [](py::array_t<std::complex<double>> a) { return array_from_field(idft(field_from_array(a))); });
  m.def(
      "fresnel_propagate",
      [](py::array_t<std::complex<double>> a, double z, double lam, double pitch) {
        return array_from_field(fresnel_propagate(field_from_array(a, {pitch, pitch}), z, lam));
      },
      py::arg("field"), py::arg("z"), py::arg("lam"), py::arg("pitch"));
  m.def("extract_patch",
        [](py::array_t<std::complex<double>> a, std::vector<std::int64_t> off,
           std::vector<std::int64_t> ext) {
          return array_from_field(extract_patch(field_from_array(a), window_from_py(off, ext)));
        });
  m.def("embed_patch", [](py::array_t<std::complex<double>> a, std::vector<std::int64_t> off,
                          std::vector<std::size_t> host) {
    ComplexField p = field_from_array(a);
    std::vector<std::int64_t> ext(p.shape.begin(), p.shape.end());
    return array_from_field(embed_patch(p, window_from_py(off, ext), Shape(host)));
  });
  m.def("project_axis", [](py::array_t<std::complex<double>> a, std::size_t axis) {
    return array_from_field(project_axis(field_from_array(a), axis));
  });
  m.def("phase_ramp", [](std::vector<std::size_t> shape, double pitch, std::array<double, 3> q) {
    return array_from_field(phase_ramp(Shape(shape), pitch, q));
  });
  m.def("amplitude_loss", [](py::array_t<double> y, py::array_t<double> h, double eps) {
    return amplitude_loss(real_from_array(y), real_from_array(h), eps);
  }, py::arg("y"), py::arg("h"), py::arg("eps") = kSqrtGuard);
  m.def("poissonize", [](py::array_t<double> h, std::uint64_t seed) {
    return array_from_real(poissonize(real_from_array(h), seed));
  });
  m.def("wavelength_from_kev", &wavelength_from_kev);

  m.def("register_nrmse", [](py::array_t<std::complex<double>> recon,
                             py::array_t<std::complex<double>> truth) {
    RegistrationResult r = register_and_nrmse(field_from_array(recon), field_from_array(truth));
    py::dict d;
    d["nrmse"] = r.nrmse;
    d["shift"] = r.shift;
    d["phase"] = r.phase;
    d["scale"] = r.scale;
    return d;
  });

  // far-field loss + Wirtinger gradients on one tape, plus the closed-form
  // ePIE route for cross-checking from python
  m.def(
      "farfield_loss_grads",
      [](py::array_t<std::complex<double>> object, py::array_t<std::complex<double>> probe,
         std::vector<std::vector<std::int64_t>> offsets, std::vector<py::array_t<double>> ys,
         double nu, bool closed_form) {
        ComplexField O = field_from_array(object);
        ComplexField P = field_from_array(probe);
        FarFieldGeometry geo;
        geo.lambda = 1e-10;
        geo.object_shape = O.shape;
        geo.probe_shape = P.shape;
        geo.pixel_pitch = {1e-6, 1e-6};
        geo.nu = nu;
        ScanPlan plan;
        for (auto& off : offsets) {
          PatchWindow w;
          w.offset = off;
          w.extent = {std::int64_t(P.shape[0]), std::int64_t(P.shape[1])};
          plan.windows.push_back(std::move(w));
        }
        FarFieldModel model(geo, plan);
        std::vector<RealField> y;
        for (auto& arr : ys) y.push_back(real_from_array(arr));
        model.set_measurements(std::move(y));
        std::vector<std::size_t> batch(plan.windows.size());
        for (std::size_t j = 0; j < batch.size(); ++j) batch[j] = j;
        GradResult g = closed_form ? closed_form_epie_gradients(model, O, P, batch)
                                   : minibatch_gradients(model, O, P, batch);
        return py::make_tuple(g.loss, array_from_field(g.obj), array_from_field(g.probe));
      },
      py::arg("object"), py::arg("probe"), py::arg("offsets"), py::arg("ys"),
      py::arg("nu") = 0.0, py::arg("closed_form") = false);

  m.def("build_preset_dataset", [](const std::string& preset, const std::string& out_dir,
                                   std::vector<std::pair<std::string, std::string>> overrides) {
    Recipe r = preset_recipe(preset);
    for (auto& [k, v] : overrides) r.kv[k] = v;
    Dataset ds = build_dataset(r);
    save_dataset(out_dir, ds);
    return ds.plan.size();
  });

  m.def("reconstruct", [](const std::string& data_dir, const std::string& engine,
                          std::size_t batch, std::size_t iterations, double alpha_obj,
                          double alpha_probe, std::uint64_t seed) {
    Dataset ds = load_dataset(data_dir);
    auto model = ds.make_model();
    CounterRng rng = CounterRng::from(seed, 0x0b1);
    ComplexField O0(model->object_var_shape());
    for (cplx& v : O0.data)
      v = std::polar(0.5 * rng.uniform(), 6.283185307179586 * rng.uniform() - 3.141592653589793);
    ComplexField P0 = ds.probe_true;
    ReconConfig cfg;
    cfg.engine = engine_from_string(engine);
    cfg.minibatch = batch;
    cfg.iterations = iterations;
    cfg.alpha_obj = alpha_obj;
    cfg.alpha_probe = alpha_probe;
    cfg.seed = seed;
    ReconState st = run_reconstruction(*model, O0, P0, cfg);
    py::dict d;
    d["object"] = array_from_field(st.object);
    d["probe"] = array_from_field(st.probe);
    d["loss"] = st.history.back().loss;
    std::vector<double> losses;
    for (auto& l : st.history) losses.push_back(l.loss);
    d["losses"] = losses;
    return d;
  });
}
