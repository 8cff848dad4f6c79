#include "ptycho/optim.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "ptycho/fft.hpp"
#include "ptycho/loss.hpp"
#include "ptycho/rng.hpp"

namespace ptycho {

namespace {
using Clock = std::chrono::steady_clock;
double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}
} // namespace

Engine engine_from_string(const std::string& name) {
  if (name == "epie") return Engine::Epie;
  if (name == "ad-epie" || name == "adepie") return Engine::AdEpie;
  if (name == "adam") return Engine::Adam;
  throw std::invalid_argument("unknown engine '" + name + "' (epie | ad-epie | adam)");
}

const char* engine_name(Engine e) {
  switch (e) {
    case Engine::Epie: return "epie";
    case Engine::AdEpie: return "ad-epie";
    case Engine::Adam: return "adam";
  }
  return "?";
}

void AdamState::init(std::size_t obj_size, std::size_t probe_size, double a_obj,
                     double a_probe) {
  m_re_obj.assign(obj_size, 0.0);
  m_im_obj.assign(obj_size, 0.0);
  v_re_obj.assign(obj_size, 0.0);
  v_im_obj.assign(obj_size, 0.0);
  m_re_probe.assign(probe_size, 0.0);
  m_im_probe.assign(probe_size, 0.0);
  v_re_probe.assign(probe_size, 0.0);
  v_im_probe.assign(probe_size, 0.0);
  k_obj = k_probe = 0;
  alpha_obj = a_obj;
  alpha_probe = a_probe;
}

namespace {

// One Adam step of a single complex variable, real and imaginary channels
// separate. The stored moments are the raw exponential averages; the bias
// correction 1/(1 - beta^k) applies where the step is formed.
void adam_step(std::vector<double>& m_re, std::vector<double>& m_im, std::vector<double>& v_re,
               std::vector<double>& v_im, std::size_t k, double alpha, double beta1,
               double beta2, double eps, ComplexField& param, const ComplexField& grad) {
  double bc1 = 1.0 - std::pow(beta1, double(k));
  double bc2 = 1.0 - std::pow(beta2, double(k));
  for (std::size_t i = 0; i < param.data.size(); ++i) {
    double g_re = grad.data[i].real();
    double g_im = grad.data[i].imag();
    m_re[i] = beta1 * m_re[i] + (1.0 - beta1) * g_re;
    v_re[i] = beta2 * v_re[i] + (1.0 - beta2) * g_re * g_re;
    m_im[i] = beta1 * m_im[i] + (1.0 - beta1) * g_im;
    v_im[i] = beta2 * v_im[i] + (1.0 - beta2) * g_im * g_im;
    param.data[i] -= cplx(alpha * (m_re[i] / bc1) / (std::sqrt(v_re[i] / bc2) + eps),
                          alpha * (m_im[i] / bc1) / (std::sqrt(v_im[i] / bc2) + eps));
  }
}

} // namespace

void AdamState::step_object(ComplexField& object, const ComplexField& grad) {
  ++k_obj;
  adam_step(m_re_obj, m_im_obj, v_re_obj, v_im_obj, k_obj, alpha_obj, beta1, beta2, eps,
            object, grad);
}

void AdamState::step_probe(ComplexField& probe, const ComplexField& grad) {
  ++k_probe;
  adam_step(m_re_probe, m_im_probe, v_re_probe, v_im_probe, k_probe, alpha_probe, beta1, beta2,
            eps, probe, grad);
}

std::vector<std::size_t> shuffle_positions(std::size_t n, std::uint64_t seed,
                                           std::uint64_t epoch) {
  return shuffled_indices(n, CounterRng::from(seed, 0x5f1eull, epoch));
}

GradResult minibatch_gradients(const ForwardModel& model, const ComplexField& object,
                               const ComplexField& probe,
                               const std::vector<std::size_t>& batch) {
  GradResult out;
  auto t0 = Clock::now();
  Tape tape;
  model.build_loss(tape, object, probe, batch);
  out.loss = tape.loss();
  out.forward_ms = ms_since(t0);
  auto t1 = Clock::now();
  std::vector<ComplexField> grads = tape.backward();
  out.backward_ms = ms_since(t1);
  out.obj = std::move(grads[0]);
  if (model.solve_probe && grads.size() > 1)
    out.probe = std::move(grads[1]);
  else
    out.probe = ComplexField(model.probe_var_shape());
  return out;
}

GradResult closed_form_epie_gradients(const ForwardModel& model, const ComplexField& object,
                                      const ComplexField& probe,
                                      const std::vector<std::size_t>& batch) {
  const auto* far = dynamic_cast<const FarFieldModel*>(&model);
  if (!far)
    throw std::invalid_argument("closed-form ePIE gradients are defined for the far-field model");
  if (batch.empty()) throw std::invalid_argument("closed_form_epie_gradients: empty batch");
  GradResult out;
  auto t0 = Clock::now();
  out.obj = ComplexField(far->geo.object_shape);
  out.probe = ComplexField(far->geo.probe_shape);
  const double nu = far->geo.nu;
  const double eps = model.guard_eps;
  const double M = double(shape_numel(far->geo.probe_shape));
  for (std::size_t j : batch) {
    const PatchWindow& w = far->plan().windows[j];
    ComplexField patch = extract_patch(object, w);
    ComplexField psi = hadamard(probe, patch);
    ComplexField u = dft(psi);
    const RealField& y = far->measured(j);
    ComplexField residual(u.shape);
    for (std::size_t i = 0; i < u.data.size(); ++i) {
      double h = std::norm(u.data[i]) + nu;
      double s = std::sqrt(h + eps);
      double d = std::sqrt(y.data[i]) - s;
      out.loss += d * d;
      residual.data[i] = (1.0 - std::sqrt(y.data[i]) / s) * u.data[i];
    }
    ComplexField psibar = idft(residual);
    for (cplx& v : psibar.data) v *= M;
    // dg/dP* += conj(patch) .* psibar ; dg/dO*|window += conj(P) .* psibar
    for (std::int64_t r = 0; r < w.extent[0]; ++r)
      for (std::int64_t c = 0; c < w.extent[1]; ++c) {
        cplx pb = psibar.at(r, c);
        out.probe.at(r, c) += std::conj(patch.at(r, c)) * pb;
        out.obj.at(w.offset[0] + r, w.offset[1] + c) += std::conj(probe.at(r, c)) * pb;
      }
  }
  out.forward_ms = ms_since(t0);
  return out;
}

StepSizes epie_step_sizes(const ForwardModel& model, const ComplexField& object,
                          const ComplexField& probe, const std::vector<std::size_t>& batch,
                          bool per_patch) {
  StepSizes s;
  double pmax = 0.0;
  for (const cplx& v : probe.data) pmax = std::max(pmax, std::norm(v));
  if (pmax == 0.0) throw NumericError("epie step size: probe is identically zero");
  s.alpha_obj = 1.0 / pmax;
  double omax = 0.0;
  model.probe_step_denominator(object, batch, per_patch, &omax);
  if (omax == 0.0)
    throw NumericError("epie step size: object patches are identically zero");
  s.alpha_probe = 1.0 / omax;
  return s;
}

void epie_update(ComplexField& param, const ComplexField& grad, double alpha) {
  require_same_shape(param.shape, grad.shape, "epie_update");
  for (std::size_t i = 0; i < param.data.size(); ++i) param.data[i] -= alpha * grad.data[i];
}

ReconState run_reconstruction(const ForwardModel& model, const ComplexField& object0,
                              const ComplexField& probe0, const ReconConfig& cfg,
                              const ComplexField* truth_obj, const ComplexField* truth_probe,
                              const ReconCallbacks* callbacks) {
  const std::size_t J = model.positions();
  const std::size_t b = std::max<std::size_t>(1, cfg.minibatch);
  const std::size_t per_epoch = (J + b - 1) / b;
  std::size_t total = cfg.iterations ? cfg.iterations : cfg.epochs * per_epoch;

  if (cfg.engine == Engine::Epie && model.kind() != ModelKind::FarField)
    throw std::invalid_argument("closed-form epie engine requires the far-field model");

  ReconState state;
  state.object = object0;
  state.probe = probe0;
  AdamState adam;
  if (cfg.engine == Engine::Adam)
    adam.init(state.object.size(), state.probe.size(), cfg.alpha_obj, cfg.alpha_probe);

  const bool probe_solved = cfg.update_probe && model.solve_probe;
  auto run_start = Clock::now();
  double loss0 = -1.0;
  std::size_t iter = 0;
  for (std::size_t epoch = 0; iter < total; ++epoch) {
    std::vector<std::size_t> order = shuffle_positions(J, cfg.seed, epoch);
    bool hold_probe = epoch < cfg.hold_probe_epochs;
    for (std::size_t start = 0; start < J && iter < total; start += b) {
      std::vector<std::size_t> batch(order.begin() + start,
                                     order.begin() + std::min(start + b, J));
      GradResult g = (cfg.engine == Engine::Epie)
                         ? closed_form_epie_gradients(model, state.object, state.probe, batch)
                         : minibatch_gradients(model, state.object, state.probe, batch);
      auto tu = Clock::now();
      bool do_probe = probe_solved && !hold_probe;
      if (cfg.engine == Engine::Adam) {
        adam.step_object(state.object, g.obj);
        if (do_probe) adam.step_probe(state.probe, g.probe);
      } else {
        StepSizes alphas = epie_step_sizes(model, state.object, state.probe, batch,
                                           cfg.probe_alpha_per_patch);
        // Eq.-9 step sizes are inverse Lipschitz constants for unit-normalized
        // transforms; the taped gradients carry the transform norm on top.
        double scale = model.gradient_scale();
        epie_update(state.object, g.obj, alphas.alpha_obj / scale);
        if (do_probe) epie_update(state.probe, g.probe, alphas.alpha_probe / scale);
      }
      double update_ms = ms_since(tu);
      ++iter;

      if (loss0 < 0.0) loss0 = g.loss;
      if (!(g.loss <= cfg.divergence_factor * (loss0 + 1e-300)))
        throw NumericError("reconstruction diverged: loss " + std::to_string(g.loss) +
                           " exceeds " + std::to_string(cfg.divergence_factor) +
                           "x the initial value at iteration " + std::to_string(iter));

      IterationLog log;
      log.iter = iter;
      log.loss = g.loss;
      log.forward_ms = g.forward_ms;
      log.backward_ms = g.backward_ms;
      log.update_ms = update_ms;
      log.elapsed_s = std::chrono::duration<double>(Clock::now() - run_start).count();
      bool measure = (cfg.nrmse_every && iter % cfg.nrmse_every == 0) || iter == total;
      if (measure && truth_obj) {
        if (!cfg.metric_window.offset.empty())
          log.obj_nrmse = register_and_nrmse(extract_patch(state.object, cfg.metric_window),
                                             extract_patch(*truth_obj, cfg.metric_window))
                              .nrmse;
        else
          log.obj_nrmse = register_and_nrmse(state.object, *truth_obj).nrmse;
      }
      else if (!state.history.empty())
        log.obj_nrmse = state.history.back().obj_nrmse;
      if (measure && truth_probe)
        log.probe_nrmse = register_and_nrmse(state.probe, *truth_probe).nrmse;
      else if (!state.history.empty())
        log.probe_nrmse = state.history.back().probe_nrmse;
      state.iter = iter;
      if (callbacks && callbacks->on_iteration) callbacks->on_iteration(log);
      state.history.push_back(std::move(log));
      if (callbacks && callbacks->on_checkpoint && cfg.checkpoint_every &&
          (iter % cfg.checkpoint_every == 0 || iter == total))
        callbacks->on_checkpoint(iter, state);
    }
  }
  return state;
}

GridsearchResult gridsearch(const ForwardModel& model, const ComplexField& object0,
                            const ComplexField& probe0, const ReconConfig& cfg,
                            const std::vector<double>& alpha_obj_grid,
                            const std::vector<double>& alpha_probe_grid,
                            const ComplexField& truth_obj, std::size_t workers) {
  if (alpha_obj_grid.empty() || alpha_probe_grid.empty())
    throw std::invalid_argument("gridsearch: empty step-size grid");
  GridsearchResult res;
  res.alpha_obj_grid = alpha_obj_grid;
  res.alpha_probe_grid = alpha_probe_grid;
  res.obj_nrmse.assign(alpha_obj_grid.size() * alpha_probe_grid.size(), res.cap);

  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      std::size_t cell = next.fetch_add(1);
      if (cell >= res.obj_nrmse.size()) return;
      ReconConfig c = cfg;
      c.engine = Engine::Adam;
      c.alpha_obj = alpha_obj_grid[cell / alpha_probe_grid.size()];
      c.alpha_probe = alpha_probe_grid[cell % alpha_probe_grid.size()];
      double val;
      try {
        ReconState st = run_reconstruction(model, object0, probe0, c, &truth_obj);
        val = std::min(st.history.back().obj_nrmse, res.cap);
        if (!std::isfinite(val)) val = res.cap;
      } catch (const NumericError&) {
        val = res.cap; // diverged cell
      }
      res.obj_nrmse[cell] = val;
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return res;
}

} // namespace ptycho
