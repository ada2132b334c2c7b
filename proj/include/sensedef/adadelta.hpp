#ifndef SENSEDEF_ADADELTA_HPP
#define SENSEDEF_ADADELTA_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "sensedef/error.hpp"
#include "sensedef/tensor.hpp"

namespace sensedef {

/// `rate` scales every update; plain Adadelta is rate == 1.
struct AdadeltaConfig {
  double rho = 0.95;
  double eps = 1e-6;
  double rate = 0.12;
  bool operator==(const AdadeltaConfig&) const = default;
};

/// Running averages E[g^2] and E[dx^2] for one block of coordinates.
struct AdadeltaSlot {
  std::vector<double> avg_sq_grad;
  std::vector<double> avg_sq_update;

  AdadeltaSlot() = default;
  explicit AdadeltaSlot(std::size_t n) : avg_sq_grad(n, 0.0), avg_sq_update(n, 0.0) {}
  bool operator==(const AdadeltaSlot&) const = default;
};

inline void adadelta_step(const AdadeltaConfig& cfg, AdadeltaSlot& slot, std::span<double> x,
                          std::span<const double> g) {
  if (x.size() != g.size() || slot.avg_sq_grad.size() != x.size())
    throw ArgumentError("adadelta_step: shape mismatch");
  for (std::size_t k = 0; k < x.size(); ++k) {
    double& eg = slot.avg_sq_grad[k];
    double& ed = slot.avg_sq_update[k];
    eg = cfg.rho * eg + (1.0 - cfg.rho) * g[k] * g[k];
    const double delta = -cfg.rate * std::sqrt(ed + cfg.eps) / std::sqrt(eg + cfg.eps) * g[k];
    ed = cfg.rho * ed + (1.0 - cfg.rho) * delta * delta;
    x[k] += delta;
  }
}

/// Optimizer state for a whole tensor list.
struct AdadeltaState {
  AdadeltaConfig config;
  std::vector<AdadeltaSlot> slots;

  AdadeltaState() = default;
  AdadeltaState(AdadeltaConfig cfg, const TensorList& params) : config(cfg) {
    for (const auto& t : params) slots.emplace_back(t.size());
  }

  void step(TensorList& params, const TensorList& grads) {
    check_congruent(params, grads);
    if (slots.size() != params.size()) throw ArgumentError("adadelta: state does not match parameters");
    for (std::size_t i = 0; i < params.size(); ++i) adadelta_step(config, slots[i], params[i].data, grads[i].data);
  }

  bool operator==(const AdadeltaState&) const = default;
};

} // namespace sensedef

#endif // SENSEDEF_ADADELTA_HPP
