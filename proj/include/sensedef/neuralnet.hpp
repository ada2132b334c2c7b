#ifndef SENSEDEF_NEURALNET_HPP
#define SENSEDEF_NEURALNET_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sensedef/embeddings.hpp"
#include "sensedef/error.hpp"
#include "sensedef/rng.hpp"
#include "sensedef/tensor.hpp"

namespace sensedef {

enum class CellKind { vanilla, gru, lstm };

inline const char* cell_name(CellKind k) {
  switch (k) {
    case CellKind::vanilla: return "rnn";
    case CellKind::gru: return "gru";
    case CellKind::lstm: return "lstm";
  }
  return "?";
}

inline std::optional<CellKind> parse_cell(std::string_view s) {
  if (s == "rnn" || s == "vanilla") return CellKind::vanilla;
  if (s == "gru") return CellKind::gru;
  if (s == "lstm") return CellKind::lstm;
  return std::nullopt;
}

/// Gate blocks per cell. Each block owns an input matrix W (d_h x d_in),
/// a recurrent matrix U (d_h x d_h) and a bias b (d_h).
///   vanilla: {a}          h = tanh(a)
///   gru:     {z, r, c}    h = (1-z)*h' + z*tanh(Wc x + Uc (r*h') + bc)
///   lstm:    {i, f, o, g} c = f*c' + i*g, h = o*tanh(c)
inline std::size_t gate_count(CellKind k) {
  switch (k) {
    case CellKind::vanilla: return 1;
    case CellKind::gru: return 3;
    case CellKind::lstm: return 4;
  }
  return 0;
}

inline const char* gate_names(CellKind k) {
  switch (k) {
    case CellKind::vanilla: return "a";
    case CellKind::gru: return "zrc";
    case CellKind::lstm: return "ifog";
  }
  return "";
}

struct ModelDims {
  std::size_t input = 300;
  std::size_t hidden = 300;
  std::size_t output = 300;
  bool operator==(const ModelDims&) const = default;
};

/// Recurrent cell weights followed by the output projection (W_p, b_p).
/// Tensor order: for each gate g: W_g, U_g, b_g; then proj.W, proj.b.
struct ModelParams {
  CellKind kind = CellKind::gru;
  ModelDims dims;
  TensorList tensors;

  const Tensor& w(std::size_t gate) const { return tensors[3 * gate]; }
  const Tensor& u(std::size_t gate) const { return tensors[3 * gate + 1]; }
  const Tensor& b(std::size_t gate) const { return tensors[3 * gate + 2]; }
  const Tensor& proj_w() const { return tensors[3 * gate_count(kind)]; }
  const Tensor& proj_b() const { return tensors[3 * gate_count(kind) + 1]; }

  bool operator==(const ModelParams&) const = default;
};

inline bool is_bias(const Tensor& t) { return t.cols == 1; }

/// Zero-valued parameters with the right names and shapes.
inline ModelParams make_params(CellKind kind, ModelDims dims) {
  if (dims.input == 0 || dims.hidden == 0 || dims.output == 0)
    throw ArgumentError("model dimensions must be positive");
  ModelParams p{kind, dims, {}};
  const std::string prefix = cell_name(kind);
  const char* names = gate_names(kind);
  for (std::size_t g = 0; g < gate_count(kind); ++g) {
    const std::string gate(1, names[g]);
    p.tensors.emplace_back(prefix + ".W_" + gate, dims.hidden, dims.input);
    p.tensors.emplace_back(prefix + ".U_" + gate, dims.hidden, dims.hidden);
    p.tensors.emplace_back(prefix + ".b_" + gate, dims.hidden, 1);
  }
  p.tensors.emplace_back("proj.W", dims.output, dims.hidden);
  p.tensors.emplace_back("proj.b", dims.output, 1);
  return p;
}

inline constexpr double kInitRange = 0.012;

/// Weights uniform in (-range, range), biases zero.
inline ModelParams init_params(CellKind kind, ModelDims dims, std::uint64_t seed, double range = kInitRange) {
  ModelParams p = make_params(kind, dims);
  Rng rng(seed);
  for (auto& t : p.tensors) {
    if (is_bias(t)) continue;
    for (double& x : t.data) x = rng.symmetric(range);
  }
  return p;
}

/// Everything backward needs from one forward pass.
struct ForwardTrace {
  CellKind kind = CellKind::gru;
  ModelDims dims;
  std::size_t steps = 0;
  std::vector<Vector> h;                   // h[0] = 0, h[t] after step t
  std::vector<Vector> c;                   // lstm cell state, same indexing
  std::vector<std::vector<Vector>> gates;  // gates[t-1][g]: post-activation
  Vector e_hat;
};

namespace detail {

inline void check_inputs(const ModelParams& p, std::span<const ConstVec> inputs) {
  if (inputs.empty()) throw ArgumentError("forward: empty input sequence");
  for (std::size_t t = 0; t < inputs.size(); ++t)
    if (inputs[t].size() != p.dims.input)
      throw ArgumentError("forward: input " + std::to_string(t) + " has dimension " +
                          std::to_string(inputs[t].size()) + ", expected " + std::to_string(p.dims.input));
}

inline Vector preactivation(const ModelParams& p, std::size_t gate, ConstVec x, ConstVec h) {
  Vector a(p.b(gate).data);
  gemv_acc(p.w(gate), x, a);
  gemv_acc(p.u(gate), h, a);
  return a;
}

} // namespace detail

inline ForwardTrace forward(const ModelParams& p, std::span<const ConstVec> inputs) {
  detail::check_inputs(p, inputs);
  const std::size_t n = inputs.size(), dh = p.dims.hidden;
  ForwardTrace tr;
  tr.kind = p.kind;
  tr.dims = p.dims;
  tr.steps = n;
  tr.h.assign(n + 1, Vector(dh, 0.0));
  if (p.kind == CellKind::lstm) tr.c.assign(n + 1, Vector(dh, 0.0));
  tr.gates.resize(n);

  for (std::size_t t = 1; t <= n; ++t) {
    const ConstVec x = inputs[t - 1];
    const Vector& hp = tr.h[t - 1];
    Vector& h = tr.h[t];
    auto& gs = tr.gates[t - 1];
    switch (p.kind) {
      case CellKind::vanilla: {
        Vector a = detail::preactivation(p, 0, x, hp);
        for (std::size_t j = 0; j < dh; ++j) h[j] = std::tanh(a[j]);
        gs = {h};
        break;
      }
      case CellKind::gru: {
        Vector z = detail::preactivation(p, 0, x, hp);
        Vector r = detail::preactivation(p, 1, x, hp);
        for (std::size_t j = 0; j < dh; ++j) {
          z[j] = sigmoid(z[j]);
          r[j] = sigmoid(r[j]);
        }
        Vector rh(dh);
        for (std::size_t j = 0; j < dh; ++j) rh[j] = r[j] * hp[j];
        Vector cand(p.b(2).data);
        gemv_acc(p.w(2), x, cand);
        gemv_acc(p.u(2), rh, cand);
        for (std::size_t j = 0; j < dh; ++j) {
          cand[j] = std::tanh(cand[j]);
          h[j] = (1.0 - z[j]) * hp[j] + z[j] * cand[j];
        }
        gs = {std::move(z), std::move(r), std::move(cand)};
        break;
      }
      case CellKind::lstm: {
        Vector i = detail::preactivation(p, 0, x, hp);
        Vector f = detail::preactivation(p, 1, x, hp);
        Vector o = detail::preactivation(p, 2, x, hp);
        Vector g = detail::preactivation(p, 3, x, hp);
        const Vector& cp = tr.c[t - 1];
        Vector& c = tr.c[t];
        for (std::size_t j = 0; j < dh; ++j) {
          i[j] = sigmoid(i[j]);
          f[j] = sigmoid(f[j]);
          o[j] = sigmoid(o[j]);
          g[j] = std::tanh(g[j]);
          c[j] = f[j] * cp[j] + i[j] * g[j];
          h[j] = o[j] * std::tanh(c[j]);
        }
        gs = {std::move(i), std::move(f), std::move(o), std::move(g)};
        break;
      }
    }
  }
  tr.e_hat = p.proj_b().data;
  gemv_acc(p.proj_w(), tr.h[n], tr.e_hat);
  return tr;
}

inline ForwardTrace forward(const ModelParams& p, const std::vector<Vector>& inputs) {
  std::vector<ConstVec> views(inputs.begin(), inputs.end());
  return forward(p, std::span<const ConstVec>(views));
}

/// -cos(e_hat, target); 0 when either is the zero vector.
inline double cosine_loss(ConstVec e_hat, ConstVec target) { return -cosine(e_hat, target); }

/// Gradients of -cos(a, b) with respect to a and b. Both vanish when either
/// vector is zero, matching the cosine-of-zero convention.
struct CosineGrad {
  Vector d_a;
  Vector d_b;
};

inline CosineGrad cosine_loss_grad(ConstVec a, ConstVec b) {
  if (a.size() != b.size()) throw ArgumentError("cosine_loss: dimension mismatch");
  CosineGrad g{Vector(a.size(), 0.0), Vector(b.size(), 0.0)};
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) return g;
  const double cos = dot(a, b) / (na * nb);
  for (std::size_t k = 0; k < a.size(); ++k) {
    g.d_a[k] = -(b[k] / (na * nb) - cos * a[k] / (na * na));
    g.d_b[k] = -(a[k] / (na * nb) - cos * b[k] / (nb * nb));
  }
  return g;
}

struct Gradients {
  TensorList params;          // congruent with ModelParams::tensors
  std::vector<Vector> inputs;  // dL/dx_t
  Vector target;               // dL/d target
  double loss = 0.0;
};

/// Full backpropagation through time of cosine_loss(e_hat, target).
inline Gradients backward(const ModelParams& p, const ForwardTrace& tr, std::span<const ConstVec> inputs,
                          ConstVec target) {
  if (tr.kind != p.kind || tr.dims != p.dims || tr.steps != inputs.size() || tr.h.size() != inputs.size() + 1)
    throw ArgumentError("backward: trace does not match parameters or inputs");
  if (target.size() != p.dims.output) throw ArgumentError("backward: target dimension mismatch");
  const std::size_t n = tr.steps, dh = p.dims.hidden, din = p.dims.input;
  const std::size_t G = gate_count(p.kind);

  Gradients out;
  out.params = zeros_like(p.tensors);
  out.inputs.assign(n, Vector(din, 0.0));
  out.loss = cosine_loss(tr.e_hat, target);

  CosineGrad cg = cosine_loss_grad(tr.e_hat, target);
  out.target = std::move(cg.d_b);
  const Vector& d_e = cg.d_a;

  Tensor& g_pw = out.params[3 * G];
  Tensor& g_pb = out.params[3 * G + 1];
  outer_acc(g_pw, d_e, tr.h[n]);
  for (std::size_t k = 0; k < d_e.size(); ++k) g_pb.data[k] += d_e[k];

  Vector dh_next(dh, 0.0);
  gemv_t_acc(p.proj_w(), d_e, dh_next);
  Vector dc_next(dh, 0.0);

  auto accumulate_gate = [&](std::size_t gate, const Vector& da, ConstVec x, ConstVec hprev, Vector& dhprev,
                             Vector& dx) {
    outer_acc(out.params[3 * gate], da, x);
    outer_acc(out.params[3 * gate + 1], da, hprev);
    auto& gb = out.params[3 * gate + 2].data;
    for (std::size_t j = 0; j < dh; ++j) gb[j] += da[j];
    gemv_t_acc(p.w(gate), da, dx);
    gemv_t_acc(p.u(gate), da, dhprev);
  };

  for (std::size_t t = n; t >= 1; --t) {
    const ConstVec x = inputs[t - 1];
    const Vector& hp = tr.h[t - 1];
    const auto& gs = tr.gates[t - 1];
    Vector& dx = out.inputs[t - 1];
    Vector dhp(dh, 0.0);
    switch (p.kind) {
      case CellKind::vanilla: {
        const Vector& h = gs[0];
        Vector da(dh);
        for (std::size_t j = 0; j < dh; ++j) da[j] = dh_next[j] * (1.0 - h[j] * h[j]);
        accumulate_gate(0, da, x, hp, dhp, dx);
        break;
      }
      case CellKind::gru: {
        const Vector &z = gs[0], &r = gs[1], &cand = gs[2];
        Vector daz(dh), dac(dh), rh(dh);
        for (std::size_t j = 0; j < dh; ++j) {
          const double dz = dh_next[j] * (cand[j] - hp[j]);
          const double dcand = dh_next[j] * z[j];
          dhp[j] = dh_next[j] * (1.0 - z[j]);
          daz[j] = dz * z[j] * (1.0 - z[j]);
          dac[j] = dcand * (1.0 - cand[j] * cand[j]);
          rh[j] = r[j] * hp[j];
        }
        // candidate block sees r*h' rather than h'
        outer_acc(out.params[6], dac, x);
        outer_acc(out.params[7], dac, rh);
        for (std::size_t j = 0; j < dh; ++j) out.params[8].data[j] += dac[j];
        gemv_t_acc(p.w(2), dac, dx);
        Vector drh(dh, 0.0);
        gemv_t_acc(p.u(2), dac, drh);
        Vector dar(dh);
        for (std::size_t j = 0; j < dh; ++j) {
          dhp[j] += drh[j] * r[j];
          dar[j] = drh[j] * hp[j] * r[j] * (1.0 - r[j]);
        }
        accumulate_gate(0, daz, x, hp, dhp, dx);
        accumulate_gate(1, dar, x, hp, dhp, dx);
        break;
      }
      case CellKind::lstm: {
        const Vector &i = gs[0], &f = gs[1], &o = gs[2], &g = gs[3];
        const Vector& c = tr.c[t];
        const Vector& cp = tr.c[t - 1];
        Vector dai(dh), daf(dh), dao(dh), dag(dh), dcp(dh);
        for (std::size_t j = 0; j < dh; ++j) {
          const double tc = std::tanh(c[j]);
          const double dc = dc_next[j] + dh_next[j] * o[j] * (1.0 - tc * tc);
          dao[j] = dh_next[j] * tc * o[j] * (1.0 - o[j]);
          daf[j] = dc * cp[j] * f[j] * (1.0 - f[j]);
          dai[j] = dc * g[j] * i[j] * (1.0 - i[j]);
          dag[j] = dc * i[j] * (1.0 - g[j] * g[j]);
          dcp[j] = dc * f[j];
        }
        accumulate_gate(0, dai, x, hp, dhp, dx);
        accumulate_gate(1, daf, x, hp, dhp, dx);
        accumulate_gate(2, dao, x, hp, dhp, dx);
        accumulate_gate(3, dag, x, hp, dhp, dx);
        dc_next = std::move(dcp);
        break;
      }
    }
    dh_next = std::move(dhp);
  }
  return out;
}

inline Gradients backward(const ModelParams& p, const ForwardTrace& tr, const std::vector<Vector>& inputs,
                          ConstVec target) {
  std::vector<ConstVec> views(inputs.begin(), inputs.end());
  return backward(p, tr, std::span<const ConstVec>(views), target);
}

} // namespace sensedef

#endif // SENSEDEF_NEURALNET_HPP
