#ifndef SENSEDEF_TRAINER_HPP
#define SENSEDEF_TRAINER_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "sensedef/adadelta.hpp"
#include "sensedef/disambig.hpp"
#include "sensedef/embeddings.hpp"
#include "sensedef/lexicon.hpp"
#include "sensedef/neuralnet.hpp"
#include "sensedef/rng.hpp"
#include "sensedef/sense_table.hpp"

namespace sensedef {

struct TrainConfig {
  std::size_t epochs_phase1 = 20;
  std::size_t epochs_phase2 = 20;
  std::size_t epochs_phase3 = 10;
  std::size_t batch_size = 64;
  std::uint64_t seed = 1;
  double delta = 0.2;
  CellKind cell = CellKind::gru;
  std::size_t hidden = 300;
  AdadeltaConfig adadelta;
  bool shuffle = true;
  std::size_t max_gloss = 64;
  double clip_norm = 0.0;  // 0 disables clipping
  std::size_t jobs = 1;

  void validate() const {
    if (delta < -1.0 || delta > 1.0) throw ArgumentError("delta must lie in [-1, 1]");
    if (batch_size == 0) throw ArgumentError("batch size must be positive");
    if (hidden == 0) throw ArgumentError("hidden size must be positive");
    if (jobs == 0) throw ArgumentError("jobs must be positive");
    if (max_gloss == 0) throw ArgumentError("max gloss length must be positive");
    if (clip_norm < 0.0) throw ArgumentError("clip norm must be non-negative");
  }
};

/// Everything a checkpoint holds.
struct TrainingState {
  ModelParams params;
  AdadeltaState param_opt;
  SenseTable senses;
  std::vector<AdadeltaSlot> sense_opt;  // one per sense row

  bool operator==(const TrainingState&) const = default;
};

inline TrainingState make_initial_state(const Lexicon& lex, const EmbeddingStore& store, const TrainConfig& cfg,
                                        SenseInit* init_report = nullptr) {
  cfg.validate();
  SenseInit init = init_sense_embeddings(lex, store, cfg.delta);
  TrainingState st;
  st.params = init_params(cfg.cell, {store.dim(), cfg.hidden, store.dim()}, cfg.seed);
  st.param_opt = AdadeltaState(cfg.adadelta, st.params.tensors);
  st.senses = init.table;
  st.sense_opt.assign(st.senses.size(), AdadeltaSlot(st.senses.dim()));
  if (init_report) *init_report = std::move(init);
  return st;
}

/// One gloss input: a fixed word vector or a trainable sense vector.
struct InputRef {
  enum class Source { word, sense } source = Source::word;
  std::size_t row = 0;
  bool operator==(const InputRef&) const = default;
};

struct TrainInstance {
  SenseId sense_id;
  std::size_t target_row = 0;
  std::vector<Token> tokens;  // resolved tokens, parallel to inputs
  std::vector<InputRef> inputs;
};

enum class Scope { monosemous, all };
enum class InputMode { word, sense };

/// Per-gloss sense assignments keyed by the gloss's own sense id; positions
/// index the (truncated) gloss tokens.
using AssignmentMap = std::map<SenseId, std::map<std::size_t, SenseId>>;

struct InstanceSet {
  std::vector<TrainInstance> instances;
  std::size_t dropped_empty = 0;    // no resolvable gloss token
  std::size_t dropped_no_target = 0;  // zero-initialized target
  std::size_t dropped_tokens = 0;   // OOV tokens removed
};

inline std::vector<Token> truncated_gloss(const SenseEntry& e, std::size_t max_len) {
  const auto n = std::min(e.gloss.size(), max_len);
  return {e.gloss.begin(), e.gloss.begin() + static_cast<std::ptrdiff_t>(n)};
}

inline InstanceSet build_instances(const Lexicon& lex, const EmbeddingStore& store, const SenseTable& senses,
                                   Scope scope, InputMode mode, const AssignmentMap* assignments = nullptr,
                                   std::size_t max_gloss = 64) {
  InstanceSet out;
  for (const auto& e : lex.entries()) {
    if (scope == Scope::monosemous && !lex.is_monosemous(e.lemma)) continue;
    const auto row = senses.row_of(e.sense_id);
    if (!row || senses.tag(*row) == Provenance::none) {
      ++out.dropped_no_target;
      continue;
    }
    const std::map<std::size_t, SenseId>* assigned = nullptr;
    if (mode == InputMode::sense && assignments)
      if (auto it = assignments->find(e.sense_id); it != assignments->end()) assigned = &it->second;

    TrainInstance inst{e.sense_id, *row, {}, {}};
    const auto gloss = truncated_gloss(e, max_gloss);
    for (std::size_t p = 0; p < gloss.size(); ++p) {
      if (assigned) {
        if (auto it = assigned->find(p); it != assigned->end())
          if (auto srow = senses.row_of(it->second)) {
            inst.tokens.push_back(gloss[p]);
            inst.inputs.push_back({InputRef::Source::sense, *srow});
            continue;
          }
      }
      if (auto wrow = store.index_of(gloss[p])) {
        inst.tokens.push_back(gloss[p]);
        inst.inputs.push_back({InputRef::Source::word, *wrow});
      } else {
        ++out.dropped_tokens;
      }
    }
    if (inst.inputs.empty()) {
      ++out.dropped_empty;
      continue;
    }
    out.instances.push_back(std::move(inst));
  }
  return out;
}

/// mean_loss/mean_cos are the objective re-evaluated after the epoch's
/// updates; running_loss averages the pre-update losses seen during it.
struct EpochLog {
  int phase = 0;
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double mean_cos = 0.0;
  double running_loss = 0.0;
  std::size_t instances = 0;
};

struct PhaseResult {
  std::vector<EpochLog> epochs;
  std::size_t instances = 0;
  std::size_t dropped = 0;
};

struct TrainHooks {
  std::function<void(const EpochLog&)> on_epoch;
  /// Phase 3: called after the start-of-epoch reassignment, before any update.
  std::function<void(std::size_t epoch, const AssignmentMap&)> on_reassign;
};

/// Which vectors receive gradient besides the model parameters.
struct UpdateMask {
  bool targets = false;
  bool input_senses = false;
};

namespace detail {

inline std::vector<ConstVec> gather_inputs(const TrainInstance& inst, const EmbeddingStore& store,
                                           const SenseTable& senses) {
  std::vector<ConstVec> xs;
  xs.reserve(inst.inputs.size());
  for (const auto& ref : inst.inputs)
    xs.push_back(ref.source == InputRef::Source::word ? store.row(ref.row) : senses.row(ref.row));
  return xs;
}

struct BatchAccumulator {
  TensorList params;
  std::map<std::size_t, Vector> senses;
  double cos_sum = 0.0;

  void add_sense(std::size_t row, const Vector& g) {
    auto [it, fresh] = senses.try_emplace(row, g.size(), 0.0);
    for (std::size_t k = 0; k < g.size(); ++k) it->second[k] += g[k];
  }

  void merge(const BatchAccumulator& o) {
    add_into(params, o.params);
    for (const auto& [row, g] : o.senses) add_sense(row, g);
    cos_sum += o.cos_sum;
  }
};

inline void accumulate_range(const TrainingState& st, const EmbeddingStore& store,
                             const std::vector<TrainInstance>& instances, std::span<const std::size_t> order,
                             UpdateMask mask, BatchAccumulator& acc) {
  for (auto idx : order) {
    const auto& inst = instances[idx];
    const auto xs = gather_inputs(inst, store, st.senses);
    const ConstVec target = st.senses.row(inst.target_row);
    const auto tr = forward(st.params, std::span<const ConstVec>(xs));
    const auto g = backward(st.params, tr, std::span<const ConstVec>(xs), target);
    add_into(acc.params, g.params);
    acc.cos_sum += -g.loss;
    if (mask.targets) acc.add_sense(inst.target_row, g.target);
    if (mask.input_senses)
      for (std::size_t t = 0; t < inst.inputs.size(); ++t)
        if (inst.inputs[t].source == InputRef::Source::sense) acc.add_sense(inst.inputs[t].row, g.inputs[t]);
  }
}

} // namespace detail

/// Mean cos(e_ws, e~_ws) over the instances under the current state.
inline double mean_cosine(const TrainingState& st, const EmbeddingStore& store,
                          const std::vector<TrainInstance>& instances) {
  if (instances.empty()) return 0.0;
  double s = 0.0;
  for (const auto& inst : instances) {
    const auto xs = detail::gather_inputs(inst, store, st.senses);
    const auto tr = forward(st.params, std::span<const ConstVec>(xs));
    s += cosine(tr.e_hat, st.senses.row(inst.target_row));
  }
  return s / static_cast<double>(instances.size());
}

/// Runs one epoch of mini-batch Adadelta over `instances` in the given order.
/// Gradients are summed in batch order (per worker chunk when jobs > 1) and
/// applied once per batch; zero-initialized senses never receive updates.
inline EpochLog run_epoch(TrainingState& st, const EmbeddingStore& store, const std::vector<TrainInstance>& instances,
                          std::span<const std::size_t> order, const TrainConfig& cfg, UpdateMask mask) {
  EpochLog log;
  log.instances = order.size();
  double cos_total = 0.0;
  const std::size_t jobs = std::max<std::size_t>(1, cfg.jobs);
  for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
    const auto batch = order.subspan(begin, std::min(cfg.batch_size, order.size() - begin));
    const std::size_t workers = std::min(jobs, batch.size());
    std::vector<detail::BatchAccumulator> accs(workers);
    for (auto& a : accs) a.params = zeros_like(st.params.tensors);
    if (workers == 1) {
      detail::accumulate_range(st, store, instances, batch, mask, accs[0]);
    } else {
      std::vector<std::jthread> threads;
      const std::size_t chunk = (batch.size() + workers - 1) / workers;
      for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = std::min(batch.size(), w * chunk);
        const std::size_t hi = std::min(batch.size(), lo + chunk);
        threads.emplace_back([&, w, lo, hi] {
          detail::accumulate_range(st, store, instances, batch.subspan(lo, hi - lo), mask, accs[w]);
        });
      }
    }
    for (std::size_t w = 1; w < workers; ++w) accs[0].merge(accs[w]);
    auto& acc = accs[0];
    cos_total += acc.cos_sum;

    if (cfg.clip_norm > 0.0) {
      const double n = std::sqrt(squared_norm(acc.params));
      if (n > cfg.clip_norm) scale(acc.params, cfg.clip_norm / n);
    }
    st.param_opt.step(st.params.tensors, acc.params);
    for (const auto& [row, g] : acc.senses) {
      if (st.senses.tag(row) == Provenance::none) continue;
      adadelta_step(st.param_opt.config, st.sense_opt[row], st.senses.row(row), g);
    }
  }
  log.running_loss = order.empty() ? 0.0 : -cos_total / static_cast<double>(order.size());
  log.mean_cos = mean_cosine(st, store, instances);
  log.mean_loss = -log.mean_cos;
  return log;
}

namespace detail {

inline std::vector<std::size_t> epoch_order(std::size_t n, bool shuffle, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) rng.shuffle(std::span<std::size_t>(order));
  return order;
}

inline Rng phase_rng(std::uint64_t seed, int phase) {
  return Rng(seed * 0x100000001b3ULL + static_cast<std::uint64_t>(phase));
}

inline void emit(const TrainHooks& hooks, PhaseResult& res, EpochLog log) {
  res.epochs.push_back(log);
  if (hooks.on_epoch) hooks.on_epoch(log);
}

} // namespace detail

/// Runs `epochs` epochs over a fixed instance set.
inline PhaseResult train_epochs(TrainingState& st, const EmbeddingStore& store, const InstanceSet& set,
                                const TrainConfig& cfg, int phase, std::size_t epochs, UpdateMask mask,
                                const TrainHooks& hooks = {}) {
  PhaseResult res;
  res.instances = set.instances.size();
  res.dropped = set.dropped_empty + set.dropped_no_target;
  Rng rng = detail::phase_rng(cfg.seed, phase);
  for (std::size_t ep = 1; ep <= epochs; ++ep) {
    const auto order = detail::epoch_order(set.instances.size(), cfg.shuffle, rng);
    EpochLog log = run_epoch(st, store, set.instances, order, cfg, mask);
    log.phase = phase;
    log.epoch = ep;
    detail::emit(hooks, res, log);
  }
  return res;
}

/// Model parameters only, on monosemous senses with word inputs.
inline PhaseResult train_phase1(TrainingState& st, const Lexicon& lex, const EmbeddingStore& store,
                                const TrainConfig& cfg, const TrainHooks& hooks = {}) {
  const auto set = build_instances(lex, store, st.senses, Scope::monosemous, InputMode::word, nullptr, cfg.max_gloss);
  if (set.instances.empty()) throw DataError("phase 1: no trainable monosemous sense");
  return train_epochs(st, store, set, cfg, 1, cfg.epochs_phase1, {}, hooks);
}

/// Model parameters and all target sense vectors, word inputs.
inline PhaseResult train_phase2(TrainingState& st, const Lexicon& lex, const EmbeddingStore& store,
                                const TrainConfig& cfg, const TrainHooks& hooks = {}) {
  const auto set = build_instances(lex, store, st.senses, Scope::all, InputMode::word, nullptr, cfg.max_gloss);
  if (set.instances.empty()) throw DataError("phase 2: no trainable sense");
  return train_epochs(st, store, set, cfg, 2, cfg.epochs_phase2, {.targets = true}, hooks);
}

/// Disambiguates the content tokens of every gloss with the current sense vectors.
inline AssignmentMap assign_gloss_senses(const Lexicon& lex, const EmbeddingStore& store, const SenseTable& senses,
                                         std::size_t max_gloss) {
  AssignmentMap out;
  for (const auto& e : lex.entries()) {
    ContextInstance ci;
    ci.tokens = truncated_gloss(e, max_gloss);
    for (std::size_t p = 0; p < ci.tokens.size(); ++p)
      if (lex.is_content_word(ci.tokens[p])) ci.targets.push_back(p);
    if (ci.targets.empty()) continue;
    auto a = s2c(ci, lex, senses, store);
    if (!a.senses.empty()) out.emplace(e.sense_id, std::move(a.senses));
  }
  return out;
}

/// Gloss tokens represented by their assigned sense vectors, which are
/// trained along with targets and parameters. Reassignment once per epoch.
inline PhaseResult train_phase3(TrainingState& st, const Lexicon& lex, const EmbeddingStore& store,
                                const TrainConfig& cfg, const TrainHooks& hooks = {}) {
  PhaseResult res;
  Rng rng = detail::phase_rng(cfg.seed, 3);
  for (std::size_t ep = 1; ep <= cfg.epochs_phase3; ++ep) {
    const auto assignments = assign_gloss_senses(lex, store, st.senses, cfg.max_gloss);
    if (hooks.on_reassign) hooks.on_reassign(ep, assignments);
    const auto set =
        build_instances(lex, store, st.senses, Scope::all, InputMode::sense, &assignments, cfg.max_gloss);
    if (set.instances.empty()) throw DataError("phase 3: no trainable sense");
    res.instances = set.instances.size();
    res.dropped = set.dropped_empty + set.dropped_no_target;
    const auto order = detail::epoch_order(set.instances.size(), cfg.shuffle, rng);
    EpochLog log = run_epoch(st, store, set.instances, order, cfg, {.targets = true, .input_senses = true});
    log.phase = 3;
    log.epoch = ep;
    detail::emit(hooks, res, log);
  }
  return res;
}

} // namespace sensedef

#endif // SENSEDEF_TRAINER_HPP
