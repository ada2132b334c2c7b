#ifndef SENSEDEF_GRADCHECK_HPP
#define SENSEDEF_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "sensedef/neuralnet.hpp"
#include "sensedef/rng.hpp"

namespace sensedef {

struct GradCheckReport {
  CellKind kind = CellKind::gru;
  double max_rel_error = 0.0;
  std::string worst;  // coordinate with the largest error, e.g. "gru.U_r[13]"
  std::size_t checked = 0;

  bool passed(double tol = 1e-4) const { return max_rel_error < tol; }
};

/// Denominators below this are clamped so coordinates whose true gradient is
/// numerically zero compare by absolute error.
inline constexpr double kGradCheckFloor = 1e-6;

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
  return std::abs(analytic - numeric) / denom;
}

/// Compares `grads` against central differences of cosine_loss with the
/// given step over every parameter, input and target coordinate.
inline GradCheckReport compare_gradients(ModelParams params, std::vector<Vector> inputs, Vector target,
                                         const Gradients& grads, double step = 1e-5) {
  GradCheckReport rep;
  rep.kind = params.kind;
  auto loss = [&] { return cosine_loss(forward(params, inputs).e_hat, target); };
  auto probe = [&](double& coord, double analytic, const std::string& label) {
    const double saved = coord;
    coord = saved + step;
    const double up = loss();
    coord = saved - step;
    const double down = loss();
    coord = saved;
    const double err = relative_error(analytic, (up - down) / (2.0 * step));
    ++rep.checked;
    if (rep.worst.empty() || err > rep.max_rel_error) {
      rep.max_rel_error = err;
      rep.worst = label;
    }
  };
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    auto& t = params.tensors[i];
    for (std::size_t k = 0; k < t.size(); ++k)
      probe(t.data[k], grads.params[i].data[k], t.name + "[" + std::to_string(k) + "]");
  }
  for (std::size_t s = 0; s < inputs.size(); ++s)
    for (std::size_t k = 0; k < inputs[s].size(); ++k)
      probe(inputs[s][k], grads.inputs[s][k], "x" + std::to_string(s + 1) + "[" + std::to_string(k) + "]");
  for (std::size_t k = 0; k < target.size(); ++k)
    probe(target[k], grads.target[k], "target[" + std::to_string(k) + "]");
  return rep;
}

/// A random instance large enough to exercise the nonlinearities.
struct GradCheckInstance {
  ModelParams params;
  std::vector<Vector> inputs;
  Vector target;
};

inline GradCheckInstance random_instance(CellKind kind, std::uint64_t seed, std::size_t steps,
                                         std::size_t dim = 7) {
  GradCheckInstance inst;
  inst.params = init_params(kind, {dim, dim, dim}, seed, 0.5);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (auto& t : inst.params.tensors)
    if (is_bias(t))
      for (double& x : t.data) x = rng.symmetric(0.3);
  inst.inputs.assign(steps, Vector(dim));
  for (auto& x : inst.inputs)
    for (double& v : x) v = rng.symmetric(1.0);
  inst.target.resize(dim);
  for (double& v : inst.target) v = rng.symmetric(1.0);
  return inst;
}

inline GradCheckReport grad_check(CellKind kind, std::uint64_t seed, std::size_t steps) {
  auto inst = random_instance(kind, seed, steps);
  const auto tr = forward(inst.params, inst.inputs);
  const auto grads = backward(inst.params, tr, inst.inputs, inst.target);
  return compare_gradients(inst.params, inst.inputs, inst.target, grads);
}

/// Worst case over sequence lengths 1, 2 and 12.
inline GradCheckReport grad_check(CellKind kind, std::uint64_t seed) {
  GradCheckReport worst{kind, 0.0, {}, 0};
  for (std::size_t steps : {1u, 2u, 12u}) {
    auto rep = grad_check(kind, seed + steps, steps);
    worst.checked += rep.checked;
    if (worst.worst.empty() || rep.max_rel_error > worst.max_rel_error) {
      worst.max_rel_error = rep.max_rel_error;
      worst.worst = "n=" + std::to_string(steps) + " " + rep.worst;
    }
  }
  return worst;
}

} // namespace sensedef

#endif // SENSEDEF_GRADCHECK_HPP
