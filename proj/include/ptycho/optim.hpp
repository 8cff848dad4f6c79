#pragma once
#include <functional>
#include <limits>
#include <string>

#include "ptycho/models.hpp"

namespace ptycho {

enum class Engine { Epie, AdEpie, Adam };

Engine engine_from_string(const std::string& name);
const char* engine_name(Engine e);

struct ReconConfig {
  Engine engine = Engine::Adam;
  std::size_t minibatch = 1;
  std::size_t iterations = 0; // total minibatch updates; wins over epochs
  std::size_t epochs = 0;
  std::size_t hold_probe_epochs = 1;
  double alpha_obj = 0.01;  // Adam step sizes (ePIE derives its own)
  double alpha_probe = 1.0;
  std::uint64_t seed = 0;
  bool update_probe = true;
  bool probe_alpha_per_patch = false; // Eq. 9 alternative: max over single patches
  double divergence_factor = 1e6;
  std::size_t nrmse_every = 0;     // 0: only on the final iteration
  std::size_t checkpoint_every = 0;
  bool deterministic = true;
  // when set, the object NRMSE compares this window of the reconstruction
  // against the same window of the truth (the ground-truth image region)
  PatchWindow metric_window;
};

struct IterationLog {
  std::size_t iter = 0;
  double loss = 0.0;
  double obj_nrmse = std::numeric_limits<double>::quiet_NaN();
  double probe_nrmse = std::numeric_limits<double>::quiet_NaN();
  double elapsed_s = 0.0;
  double forward_ms = 0.0, backward_ms = 0.0, update_ms = 0.0;
};

struct ReconState {
  ComplexField object, probe;
  std::size_t iter = 0;
  std::vector<IterationLog> history;
};

// Appendix-A Adam: the bias-corrected recurrences are stored directly and the
// four real channels (Re/Im of object and probe) update independently.
struct AdamState {
  std::vector<double> m_re_obj, m_im_obj, v_re_obj, v_im_obj;
  std::vector<double> m_re_probe, m_im_probe, v_re_probe, v_im_probe;
  std::size_t k_obj = 0, k_probe = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double alpha_obj = 0.01, alpha_probe = 1.0;

  void init(std::size_t obj_size, std::size_t probe_size, double a_obj, double a_probe);
  void step_object(ComplexField& object, const ComplexField& grad);
  void step_probe(ComplexField& probe, const ComplexField& grad);
};

// Epoch-level shuffle of probe positions, reproducible from (seed, epoch).
std::vector<std::size_t> shuffle_positions(std::size_t n, std::uint64_t seed,
                                           std::uint64_t epoch = 0);

struct GradResult {
  ComplexField obj, probe;
  double loss = 0.0;
  double forward_ms = 0.0, backward_ms = 0.0;
};

// Wirtinger gradients of the summed batch loss via one taped backward pass.
GradResult minibatch_gradients(const ForwardModel& model, const ComplexField& object,
                               const ComplexField& probe,
                               const std::vector<std::size_t>& batch);

// Symbolic ePIE derivatives (far-field only): the independent oracle for the
// AD path, and the gradient source of the closed-form engine.
GradResult closed_form_epie_gradients(const ForwardModel& model, const ComplexField& object,
                                      const ComplexField& probe,
                                      const std::vector<std::size_t>& batch);

struct StepSizes {
  double alpha_obj = 0.0;
  double alpha_probe = 0.0;
};

// Lipschitz-style step sizes: alpha_O = 1/max|P|^2, alpha_P from the
// batch-accumulated object power (see ForwardModel::probe_step_denominator).
StepSizes epie_step_sizes(const ForwardModel& model, const ComplexField& object,
                          const ComplexField& probe, const std::vector<std::size_t>& batch,
                          bool per_patch = false);

void epie_update(ComplexField& param, const ComplexField& grad, double alpha);

struct ReconCallbacks {
  std::function<void(const IterationLog&)> on_iteration;
  std::function<void(std::size_t iter, const ReconState&)> on_checkpoint;
};

ReconState run_reconstruction(const ForwardModel& model, const ComplexField& object0,
                              const ComplexField& probe0, const ReconConfig& cfg,
                              const ComplexField* truth_obj = nullptr,
                              const ComplexField* truth_probe = nullptr,
                              const ReconCallbacks* callbacks = nullptr);

struct GridsearchResult {
  std::vector<double> alpha_obj_grid, alpha_probe_grid;
  std::vector<double> obj_nrmse; // row-major [alpha_obj][alpha_probe], capped at 0.6
  double cap = 0.6;
};

GridsearchResult gridsearch(const ForwardModel& model, const ComplexField& object0,
                            const ComplexField& probe0, const ReconConfig& cfg,
                            const std::vector<double>& alpha_obj_grid,
                            const std::vector<double>& alpha_probe_grid,
                            const ComplexField& truth_obj, std::size_t workers = 1);

} // namespace ptycho
