#include "ptycho/loss.hpp"

#include <cmath>

namespace ptycho {

double amplitude_loss(const RealField& y, const RealField& h, double eps) {
  require_same_shape(y.shape, h.shape, "amplitude_loss");
  double g = 0.0;
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    if (y.data[i] < 0.0) throw std::invalid_argument("amplitude_loss: negative measurement");
    if (h.data[i] < 0.0) throw std::invalid_argument("amplitude_loss: negative intensity");
    double d = std::sqrt(y.data[i]) - std::sqrt(h.data[i] + eps);
    g += d * d;
  }
  if (!std::isfinite(g)) throw NumericError("amplitude_loss: non-finite result");
  return g;
}

LossReport total_loss(const ForwardModel& model, const ComplexField& object,
                      const ComplexField& probe, const std::vector<std::size_t>& batch) {
  if (batch.empty()) throw std::invalid_argument("total_loss: empty batch");
  LossReport report;
  Tape tape;
  model.build_loss(tape, object, probe, batch);
  report.total = tape.loss();
  report.per_position.reserve(batch.size());
  for (std::size_t j : batch)
    report.per_position.push_back(
        amplitude_loss(model.measured(j), model.predict_one(object, probe, j), model.guard_eps));
  return report;
}

} // namespace ptycho
