// ptycho: simulate | reconstruct | gridsearch | gradcheck | metrics
//
// Every command is a pure function of its inputs, flags and seeds; reruns
// with the same arguments produce bit-identical datasets and checkpoints.
// Exit codes: 0 success, 2 usage error, 3 numeric failure, 4 I/O error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "ptycho/dataset.hpp"
#include "ptycho/image_io.hpp"
#include "ptycho/loss.hpp"
#include "ptycho/optim.hpp"
#include "ptycho/rng.hpp"

namespace fs = std::filesystem;
using namespace ptycho;

namespace {

ComplexField random_object(const Shape& shape, double scale, std::uint64_t seed) {
  ComplexField f(shape);
  CounterRng rng = CounterRng::from(seed, 0x0b1);
  for (cplx& v : f.data)
    v = std::polar(scale * rng.uniform(), 2.0 * std::numbers::pi * rng.uniform() -
                                              std::numbers::pi);
  return f;
}

// Reconstruction-side probe guesses: the unpropagated aperture for far-field
// (normalized to the recorded photon budget), the backpropagated mean
// intensity for near-field, the stored known probe for Bragg.
ComplexField initial_probe(const Dataset& ds) {
  switch (ds.kind) {
    case ModelKind::FarField: {
      double width = ds.recipe.get_double("aperture_width", 7e-6);
      double pitch = ds.far.pixel_pitch[0];
      return probe_square_aperture(width, 0.0, ds.far.lambda, pitch, ds.far.probe_shape,
                                   ds.photons);
    }
    case ModelKind::NearField: {
      RealField mean_y(ds.y[0].shape);
      for (const RealField& y : ds.y)
        for (std::size_t i = 0; i < y.data.size(); ++i) mean_y.data[i] += y.data[i];
      ComplexField amp(mean_y.shape);
      for (std::size_t i = 0; i < amp.data.size(); ++i)
        amp.data[i] = std::sqrt(mean_y.data[i] / double(ds.y.size()));
      amp.pitch = ds.near.pixel_pitch;
      return fresnel_propagate(amp, -ds.near.z, ds.near.lambda);
    }
    case ModelKind::Bragg:
      return ds.probe_true;
  }
  throw std::invalid_argument("unknown model kind");
}

ComplexField truth_object_for_metrics(const Dataset& ds) {
  if (!ds.object_true.size()) return {};
  if (ds.kind == ModelKind::Bragg)
    return extract_patch(ds.object_true, ds.bragg.recon_window);
  return ds.object_true;
}

// the reported object NRMSE compares the ground-truth image region; the
// padding of the simulation box is scaffolding, not part of the object
PatchWindow metric_window_for(const Dataset& ds) {
  if (ds.kind == ModelKind::FarField && !ds.object_region.offset.empty())
    return ds.object_region;
  return {};
}

void print_summary(const Dataset& ds) {
  Shape pat = ds.pattern_shape();
  std::printf("model            %s\n", model_kind_name(ds.kind));
  std::printf("patterns         %zu of %s\n", ds.plan.size(), shape_str(pat).c_str());
  std::printf("photons          %.6g%s\n", ds.photons,
              ds.kind == ModelKind::NearField ? " per pixel" : " per exposure");
  std::printf("noiseless        %s\n", ds.noiseless ? "yes" : "no");
  std::printf("overlap          %.1f%%\n", 100.0 * ds.plan.overlap_fraction);
  if (ds.kind == ModelKind::FarField)
    std::printf("fringe scale     %.3g m (sqrt(lambda zeta))\n",
                std::sqrt(ds.far.lambda * ds.recipe.get_double("aperture_distance", 0.15)));
  if (ds.kind == ModelKind::NearField) {
    double fn = ds.near.fresnel_number();
    std::printf("fresnel number   %.3g%s\n", fn,
                fn < 10.0 ? "  WARNING: below 10, not in the near-field regime" : "");
  }
  if (ds.kind == ModelKind::Bragg)
    std::printf("rocking angles   %zu\n", ds.bragg.angles.size());
}

struct CsvLogs {
  std::ofstream iter_csv, timing_csv;
  explicit CsvLogs(const fs::path& dir) {
    iter_csv.open(dir / "iterations.csv");
    timing_csv.open(dir / "timing.csv");
    if (!iter_csv || !timing_csv) throw IoError("cannot open run logs");
    iter_csv << "iter,loss,obj_nrmse,probe_nrmse,elapsed_s\n";
    timing_csv << "iter,forward_ms,backward_ms,update_ms\n";
  }
  void log(const IterationLog& l) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%zu,%.12g,%.6g,%.6g,%.6g\n", l.iter, l.loss, l.obj_nrmse,
                  l.probe_nrmse, l.elapsed_s);
    iter_csv << buf;
    std::snprintf(buf, sizeof buf, "%zu,%.4g,%.4g,%.4g\n", l.iter, l.forward_ms,
                  l.backward_ms, l.update_ms);
    timing_csv << buf;
  }
};

Recipe assemble_recipe(const std::string& preset, const std::string& recipe_path,
                       const std::vector<std::string>& sets) {
  Recipe r;
  if (!preset.empty()) r = preset_recipe(preset);
  if (!recipe_path.empty()) {
    Recipe file = load_recipe(recipe_path);
    for (auto& [k, v] : file.kv) r.kv[k] = v;
  }
  for (const std::string& kv : sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    r.kv[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  if (r.kv.empty()) throw std::invalid_argument("simulate needs --preset or --recipe");
  return r;
}

int cmd_simulate(const std::string& preset, const std::string& recipe_path,
                 const std::vector<std::string>& sets, double photons, bool noiseless,
                 std::int64_t seed, const std::string& out_dir, bool dry_run) {
  Recipe r = assemble_recipe(preset, recipe_path, sets);
  if (photons > 0.0)
    r.set(r.get("model") == std::string("nearfield") ? "flux" : "photons", photons);
  if (noiseless) r.set("noiseless", std::int64_t(1));
  if (seed >= 0) {
    r.set("seed_probe", seed);
    r.set("seed_noise", seed + 1);
    r.set("seed_object", seed + 2);
  }
  if (dry_run) {
    DatasetSummary s = summarize_recipe(r);
    std::printf("model            %s\n", s.model.c_str());
    std::printf("patterns         %zu of %s\n", s.patterns, shape_str(s.pattern_shape).c_str());
    std::printf("photons          %.6g\n", s.photons);
    if (s.fresnel_number > 0.0) std::printf("fresnel number   %.3g\n", s.fresnel_number);
    return 0;
  }
  Dataset ds = build_dataset(r);
  save_dataset(out_dir, ds);
  print_summary(ds);
  std::printf("dataset          %s\n", out_dir.c_str());
  return 0;
}

struct ReconFlags {
  std::string data_dir, out_dir, engine = "adam";
  std::size_t batch = 1, iterations = 0, epochs = 0, hold_probe = 1;
  double alpha_obj = 0.01, alpha_probe = 1.0;
  std::int64_t seed = 0;
  std::size_t checkpoint_every = 0, nrmse_every = 50;
  double init_scale = 0.5;
  double phase_mask = 0.0;
  bool no_probe = false, probe_alpha_per_patch = false, init_probe_true = false;
  bool no_truth_metrics = false;
};

int cmd_reconstruct(const ReconFlags& f) {
  Dataset ds = load_dataset(f.data_dir);
  auto model = ds.make_model();
  ReconConfig cfg;
  cfg.engine = engine_from_string(f.engine);
  cfg.minibatch = f.batch;
  cfg.iterations = f.iterations;
  cfg.epochs = f.epochs;
  if (!f.iterations && !f.epochs)
    throw std::invalid_argument("reconstruct needs --iterations or --epochs");
  cfg.hold_probe_epochs = f.hold_probe;
  cfg.alpha_obj = f.alpha_obj;
  cfg.alpha_probe = f.alpha_probe;
  cfg.seed = std::uint64_t(f.seed);
  cfg.update_probe = !f.no_probe;
  cfg.probe_alpha_per_patch = f.probe_alpha_per_patch;
  cfg.nrmse_every = f.nrmse_every;
  cfg.checkpoint_every = f.checkpoint_every;
  cfg.metric_window = metric_window_for(ds);

  ComplexField object0 = random_object(model->object_var_shape(), f.init_scale, cfg.seed);
  ComplexField probe0 = f.init_probe_true ? ds.probe_true : initial_probe(ds);

  ComplexField truth_obj = truth_object_for_metrics(ds);
  const ComplexField* truth_obj_p =
      (!f.no_truth_metrics && truth_obj.size()) ? &truth_obj : nullptr;
  const ComplexField* truth_probe_p =
      (!f.no_truth_metrics && ds.probe_true.size() && ds.kind != ModelKind::Bragg)
          ? &ds.probe_true
          : nullptr;

  fs::create_directories(f.out_dir);
  CsvLogs logs(f.out_dir);
  ReconCallbacks cb;
  cb.on_iteration = [&](const IterationLog& l) { logs.log(l); };
  cb.on_checkpoint = [&](std::size_t iter, const ReconState& st) {
    save_checkpoint((fs::path(f.out_dir) / ("checkpoint_" + std::to_string(iter))).string(),
                    st.object, st.probe, iter);
  };

  ReconState st =
      run_reconstruction(*model, object0, probe0, cfg, truth_obj_p, truth_probe_p, &cb);

  save_checkpoint((fs::path(f.out_dir) / "final").string(), st.object, st.probe, st.iter);
  export_field_images((fs::path(f.out_dir) / "object").string(), st.object, 16, f.phase_mask);
  export_field_images((fs::path(f.out_dir) / "probe").string(), st.probe, 16);
  std::printf("iterations       %zu\n", st.iter);
  std::printf("final loss       %.6g\n", st.history.back().loss);
  if (truth_obj_p) {
    RegistrationResult reg =
        cfg.metric_window.offset.empty()
            ? register_and_nrmse(st.object, *truth_obj_p)
            : register_and_nrmse(extract_patch(st.object, cfg.metric_window),
                                 extract_patch(*truth_obj_p, cfg.metric_window));
    std::printf("object nrmse     %.4f\n", reg.nrmse);
  }
  if (truth_probe_p) {
    RegistrationResult reg = register_and_nrmse(st.probe, *truth_probe_p);
    std::printf("probe nrmse      %.4f\n", reg.nrmse);
  }
  std::printf("run dir          %s\n", f.out_dir.c_str());
  return 0;
}

int cmd_gridsearch(const std::string& data_dir, const std::string& out_dir,
                   std::vector<double> obj_grid, std::vector<double> probe_grid,
                   std::size_t batch, std::size_t iterations, std::int64_t seed,
                   std::size_t workers, double init_scale) {
  Dataset ds = load_dataset(data_dir);
  auto model = ds.make_model();
  ComplexField truth_obj = truth_object_for_metrics(ds);
  if (!truth_obj.size())
    throw std::invalid_argument("gridsearch requires a dataset with ground truth");
  ReconConfig cfg;
  cfg.minibatch = batch;
  cfg.iterations = iterations;
  cfg.seed = std::uint64_t(seed);
  cfg.metric_window = metric_window_for(ds);
  ComplexField object0 = random_object(model->object_var_shape(), init_scale, cfg.seed);
  ComplexField probe0 = initial_probe(ds);
  GridsearchResult res =
      gridsearch(*model, object0, probe0, cfg, obj_grid, probe_grid, truth_obj, workers);

  fs::create_directories(out_dir);
  std::ofstream csv(fs::path(out_dir) / "gridsearch.csv");
  if (!csv) throw IoError("cannot open gridsearch.csv");
  csv << "alpha_obj";
  for (double ap : probe_grid) csv << ",alpha_probe_" << ap;
  csv << "\n";
  double best = 1e9;
  std::size_t best_cell = 0;
  for (std::size_t i = 0; i < obj_grid.size(); ++i) {
    csv << obj_grid[i];
    for (std::size_t j = 0; j < probe_grid.size(); ++j) {
      double v = res.obj_nrmse[i * probe_grid.size() + j];
      csv << "," << v;
      if (v < best) {
        best = v;
        best_cell = i * probe_grid.size() + j;
      }
    }
    csv << "\n";
  }
  std::printf("best nrmse %.4f at alpha_obj=%g alpha_probe=%g\n", best,
              obj_grid[best_cell / probe_grid.size()],
              probe_grid[best_cell % probe_grid.size()]);
  std::printf("matrix           %s/gridsearch.csv\n", out_dir.c_str());
  return 0;
}

int cmd_gradcheck(const std::string& model_name, std::size_t size, std::int64_t seed,
                  double step, double tol) {
  bool pass = true;
  auto report = [&](const char* what, const GradcheckReport& rep) {
    std::printf("%-28s max rel err %.3g  (tol %.1g)  %s\n", what, rep.max_rel_err, rep.tol,
                rep.pass ? "ok" : "FAIL");
    pass = pass && rep.pass;
  };
  std::uint64_t s = std::uint64_t(seed);

  if (model_name == "far" || model_name == "all") {
    Recipe r = preset_recipe("farfield");
    std::size_t box = std::max<std::size_t>(size, 16);
    r.set("box", std::int64_t(box));
    r.set("object", std::int64_t(box * 3 / 4));
    r.set("probe", std::int64_t(box / 2));
    r.set("step_px", std::int64_t(box / 2));
    r.set("photons", 256.0);
    r.set("aperture_width", 7e-6 * double(box / 4) / 12.0);
    r.set("seed_probe", seed);
    r.set("seed_noise", seed + 1);
    r.set("seed_object", seed + 2);
    Dataset ds = build_dataset(r);
    auto model = ds.make_model();
    std::vector<std::size_t> batch;
    for (std::size_t j = 0; j < model->positions(); ++j) batch.push_back(j);
    ComplexField O0 = random_object(model->object_var_shape(), 0.8, s + 10);
    ComplexField P0 = random_object(model->probe_var_shape(), 0.8, s + 11);
    auto build = [&](Tape& t, const std::vector<ComplexField>& L) {
      model->build_loss(t, L[0], L[1], batch);
    };
    report("far-field vs finite diff", gradcheck(build, {O0, P0}, step, tol));

    GradResult ad = minibatch_gradients(*model, O0, P0, batch);
    GradResult cf = closed_form_epie_gradients(*model, O0, P0, batch);
    double scale = 0.0, diff = 0.0;
    for (const cplx& v : cf.obj.data) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < ad.obj.data.size(); ++i)
      diff = std::max(diff, std::abs(ad.obj.data[i] - cf.obj.data[i]));
    for (const cplx& v : cf.probe.data) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < ad.probe.data.size(); ++i)
      diff = std::max(diff, std::abs(ad.probe.data[i] - cf.probe.data[i]));
    bool cf_ok = diff < 1e-10 * scale;
    std::printf("%-28s max rel diff %.3g  (tol 1e-10)  %s\n", "AD vs closed-form ePIE",
                diff / scale, cf_ok ? "ok" : "FAIL");
    pass = pass && cf_ok;
  }
  if (model_name == "near" || model_name == "all") {
    Recipe r = preset_recipe("nearfield-desk");
    r.set("grid", std::int64_t(std::max<std::size_t>(size, 16)));
    r.set("object", std::int64_t(std::max<std::size_t>(size / 2, 8)));
    r.set("step_px", std::int64_t(std::max<std::size_t>(size / 8, 2)));
    r.set("grid_counts", std::int64_t(3));
    r.set("probe_fwhm", 0.6e-6 * double(size) / 3.0);
    r.set("flux", 2.0);
    r.set("seed_probe", seed);
    r.set("seed_noise", seed + 1);
    r.set("seed_object", seed + 2);
    Dataset ds = build_dataset(r);
    auto model = ds.make_model();
    std::vector<std::size_t> batch{0, 4, 8};
    ComplexField O0 = random_object(model->object_var_shape(), 0.8, s + 20);
    ComplexField P0 = random_object(model->probe_var_shape(), 0.8, s + 21);
    auto build = [&](Tape& t, const std::vector<ComplexField>& L) {
      model->build_loss(t, L[0], L[1], batch);
    };
    report("near-field vs finite diff", gradcheck(build, {O0, P0}, step, tol));
  }
  if (model_name == "bragg" || model_name == "all") {
    Recipe r = preset_recipe("bragg-desk");
    r.set("box_x", std::int64_t(16));
    r.set("box_y", std::int64_t(40));
    r.set("box_z", std::int64_t(28));
    r.set("cuboid_x", std::int64_t(8));
    r.set("cuboid_y", std::int64_t(20));
    r.set("cuboid_z", std::int64_t(14));
    r.set("probe_y", std::int64_t(24));
    r.set("probe_z", std::int64_t(16));
    r.set("probe_u", std::int64_t(32));
    r.set("probe_fwhm", 66e-9 * 4.0);
    r.set("raster_ny", std::int64_t(6));
    r.set("raster_nz", std::int64_t(5));
    r.set("step_y", std::int64_t(3));
    r.set("step_z", std::int64_t(2));
    r.set("angle_half_deg", 0.04);
    r.set("photons", 1.0);
    r.set("seed_probe", seed);
    r.set("seed_noise", seed + 1);
    r.set("seed_object", seed + 2);
    Dataset ds = build_dataset(r);
    auto model = ds.make_model();
    std::vector<std::size_t> batch{0, 7, 19};
    ComplexField O0 = random_object(model->object_var_shape(), 0.4, s + 30);
    auto build = [&](Tape& t, const std::vector<ComplexField>& L) {
      model->build_loss(t, L[0], ComplexField(), batch);
    };
    report("bragg vs finite diff", gradcheck(build, {O0}, step, tol));
  }
  if (!pass) throw NumericError("gradcheck failed");
  return 0;
}

int cmd_metrics(const std::string& recon_dir, const std::string& truth_dir,
                double phase_mask) {
  Checkpoint cp = load_checkpoint(recon_dir);
  Dataset ds = load_dataset(truth_dir);
  ComplexField truth_obj = truth_object_for_metrics(ds);
  if (!truth_obj.size()) throw std::invalid_argument("dataset has no ground truth object");
  PatchWindow win = metric_window_for(ds);
  RegistrationResult reg = win.offset.empty()
                               ? register_and_nrmse(cp.object, truth_obj)
                               : register_and_nrmse(extract_patch(cp.object, win),
                                                    extract_patch(truth_obj, win));
  std::printf("object nrmse     %.6f\n", reg.nrmse);
  std::printf("object shift     (");
  for (std::size_t a = 0; a < reg.shift.size(); ++a)
    std::printf("%s%.3f", a ? ", " : "", reg.shift[a]);
  std::printf(") px, phase %.4f rad, scale %.4g\n", reg.phase, reg.scale);
  if (ds.probe_true.size() && ds.probe_true.shape == cp.probe.shape) {
    RegistrationResult preg = register_and_nrmse(cp.probe, ds.probe_true);
    std::printf("probe nrmse      %.6f\n", preg.nrmse);
  }
  if (phase_mask > 0.0)
    std::printf("phase mask       |O| < %g zeroed in exported phase maps\n", phase_mask);
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"ptychographic phase retrieval with tape-based Wirtinger autodiff"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value config file");
  bool deterministic = true;
  app.add_flag("--deterministic,!--no-deterministic", deterministic,
               "ordered reductions and counter-based RNG streams (always on)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  std::string preset, recipe_path, out_dir = "dataset";
  std::vector<std::string> sets;
  double photons = 0.0;
  bool noiseless = false, dry_run = false;
  std::int64_t seed = -1;
  sim->add_option("--preset", preset,
                  "farfield | nearfield | nearfield-desk | bragg | bragg-desk");
  sim->add_option("--recipe", recipe_path, "recipe file (key = value lines)");
  sim->add_option("--set", sets, "override recipe entries, key=value")->take_all();
  sim->add_option("--photons", photons,
                  "photon budget (far/bragg: per exposure, near: per pixel)");
  sim->add_flag("--noiseless", noiseless, "skip the Poisson draw, y = h exactly");
  sim->add_option("--seed", seed, "base seed (probe, noise, object derive from it)");
  sim->add_flag("--dry-run", dry_run, "print the plan summary without writing data");
  sim->add_option("out", out_dir, "output dataset directory");

  // reconstruct
  auto* rec = app.add_subcommand("reconstruct", "run a reconstruction engine on a dataset");
  ReconFlags rf;
  rec->add_option("--data", rf.data_dir, "dataset directory")->required();
  rec->add_option("--engine", rf.engine, "epie | ad-epie | adam");
  rec->add_option("--batch,-b", rf.batch, "minibatch size");
  rec->add_option("--iterations", rf.iterations, "total minibatch updates");
  rec->add_option("--epochs", rf.epochs, "full passes through the dataset");
  rec->add_option("--alpha-obj", rf.alpha_obj, "Adam object step size");
  rec->add_option("--alpha-probe", rf.alpha_probe, "Adam probe step size");
  rec->add_option("--hold-probe-epochs", rf.hold_probe, "epochs with the probe frozen");
  rec->add_option("--seed", rf.seed, "shuffle / init seed");
  rec->add_option("--init-scale", rf.init_scale, "magnitude scale of the random object start");
  rec->add_option("--checkpoint-every", rf.checkpoint_every, "iterations between checkpoints");
  rec->add_option("--nrmse-every", rf.nrmse_every, "iterations between NRMSE measurements");
  rec->add_option("--phase-mask", rf.phase_mask, "zero exported phase where |O| is below this");
  rec->add_flag("--no-probe", rf.no_probe, "never update the probe");
  rec->add_flag("--probe-alpha-per-patch", rf.probe_alpha_per_patch,
                "use the per-patch maximum in the probe step size");
  rec->add_flag("--init-probe-true", rf.init_probe_true, "start from the stored true probe");
  rec->add_flag("--no-truth-metrics", rf.no_truth_metrics, "skip NRMSE even when truth exists");
  rec->add_option("--out", rf.out_dir, "run directory")->required();

  // gridsearch
  auto* gs = app.add_subcommand("gridsearch", "NRMSE over a step-size grid (Adam)");
  std::string gs_data, gs_out = "gridsearch";
  std::vector<double> obj_grid{10, 1, 0.1, 0.01, 0.001};
  std::vector<double> probe_grid{100, 10, 1, 0.1, 0.01};
  std::size_t gs_batch = 100, gs_iters = 1500, gs_workers = 1;
  std::int64_t gs_seed = 0;
  double gs_init_scale = 0.5;
  gs->add_option("--data", gs_data, "dataset directory")->required();
  gs->add_option("--alpha-obj-grid", obj_grid, "object step sizes")->delimiter(',');
  gs->add_option("--alpha-probe-grid", probe_grid, "probe step sizes")->delimiter(',');
  gs->add_option("--batch,-b", gs_batch, "minibatch size");
  gs->add_option("--iterations", gs_iters, "updates per cell");
  gs->add_option("--seed", gs_seed, "seed shared by every cell");
  gs->add_option("--workers", gs_workers, "parallel cells");
  gs->add_option("--init-scale", gs_init_scale, "object start magnitude scale");
  gs->add_option("--out", gs_out, "output directory");

  // gradcheck
  auto* gc =
      app.add_subcommand("gradcheck", "finite-difference and closed-form gradient checks");
  std::string gc_model = "all";
  std::size_t gc_size = 16;
  std::int64_t gc_seed = 1;
  double gc_step = 1e-5, gc_tol = 1e-5;
  gc->add_option("--model", gc_model, "far | near | bragg | all");
  gc->add_option("--size", gc_size, "instance scale (pixels)");
  gc->add_option("--seed", gc_seed, "instance seed");
  gc->add_option("--step", gc_step, "finite-difference step");
  gc->add_option("--tol", gc_tol, "max relative error tolerance");

  // metrics
  auto* mt = app.add_subcommand("metrics", "registered NRMSE of a checkpoint against truth");
  std::string mt_recon, mt_truth;
  double mt_mask = 0.0;
  mt->add_option("--recon", mt_recon, "checkpoint directory")->required();
  mt->add_option("--truth", mt_truth, "dataset directory with ground truth")->required();
  mt->add_option("--phase-mask", mt_mask, "report threshold for phase-error masking");

  try {
    app.parse(argc, argv);
    if (*sim)
      return cmd_simulate(preset, recipe_path, sets, photons, noiseless, seed, out_dir,
                          dry_run);
    if (*rec) return cmd_reconstruct(rf);
    if (*gs)
      return cmd_gridsearch(gs_data, gs_out, obj_grid, probe_grid, gs_batch, gs_iters,
                            gs_seed, gs_workers, gs_init_scale);
    if (*gc) return cmd_gradcheck(gc_model, gc_size, gc_seed, gc_step, gc_tol);
    if (*mt) return cmd_metrics(mt_recon, mt_truth, mt_mask);
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::out_of_range& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 4;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
