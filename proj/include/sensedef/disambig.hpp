#ifndef SENSEDEF_DISAMBIG_HPP
#define SENSEDEF_DISAMBIG_HPP

#include <algorithm>
#include <cstddef>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sensedef/embeddings.hpp"
#include "sensedef/lexicon.hpp"
#include "sensedef/neuralnet.hpp"
#include "sensedef/sense_table.hpp"

namespace sensedef {

struct ContextInstance {
  std::vector<Token> tokens;
  std::vector<std::size_t> targets;
  /// Optional POS filter, parallel to `targets` when non-empty.
  std::vector<std::optional<PartOfSpeech>> target_pos;
};

struct SenseAssignment {
  struct Step {
    std::size_t position = 0;
    std::size_t sense_count = 0;
    SenseId chosen;
    double score = 0.0;
  };
  std::map<std::size_t, SenseId> senses;
  std::vector<Step> trace;  // resolution order
  std::vector<std::size_t> unassigned;

  bool operator==(const SenseAssignment& o) const { return senses == o.senses && unassigned == o.unassigned; }
};

struct ContextOptions {
  /// Only tokens within this many positions of the target contribute; 0 means the whole instance.
  std::size_t window = 0;
};

/// Mean over content-word tokens other than `pos`: the assigned sense vector
/// when the position is resolved, else the word vector. Tokens with neither
/// are skipped; with no contributors the result is the zero vector.
inline Vector context_embedding(const ContextInstance& inst, std::size_t pos, const SenseTable& senses,
                                const EmbeddingStore& store, const SenseAssignment& resolved, const Lexicon& lex,
                                ContextOptions opts = {}) {
  if (pos >= inst.tokens.size()) throw ArgumentError("context_embedding: position out of range");
  Vector mean(store.dim(), 0.0);
  std::size_t count = 0;
  for (std::size_t q = 0; q < inst.tokens.size(); ++q) {
    if (q == pos) continue;
    if (opts.window != 0 && (q + opts.window < pos || q > pos + opts.window)) continue;
    const auto& tok = inst.tokens[q];
    if (!lex.is_content_word(tok)) continue;
    std::optional<ConstVec> v;
    if (auto it = resolved.senses.find(q); it != resolved.senses.end()) v = senses.find(it->second);
    if (!v) v = store.find(tok);
    if (!v) continue;
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += (*v)[k];
    ++count;
  }
  if (count > 0)
    for (double& x : mean) x /= static_cast<double>(count);
  return mean;
}

/// Candidate senses for a target, file order. A POS filter applies only when
/// it leaves at least one candidate.
inline std::vector<const SenseEntry*> candidate_senses(const Lexicon& lex, const Token& tok,
                                                       std::optional<PartOfSpeech> pos) {
  auto all = lex.senses_of(tok);
  if (!pos) return all;
  std::vector<const SenseEntry*> filtered;
  std::copy_if(all.begin(), all.end(), std::back_inserter(filtered),
               [&](const SenseEntry* e) { return e->pos == *pos; });
  return filtered.empty() ? all : filtered;
}

/// Simple-to-complex assignment: targets with fewer candidate senses are
/// resolved first (ties left to right), each taking the sense closest to the
/// current context embedding. Earlier choices feed later contexts.
inline SenseAssignment s2c(const ContextInstance& inst, const Lexicon& lex, const SenseTable& senses,
                           const EmbeddingStore& store, ContextOptions opts = {}) {
  struct Pending {
    std::size_t position;
    std::vector<const SenseEntry*> candidates;
  };
  SenseAssignment out;
  std::vector<Pending> pending;
  std::vector<std::size_t> seen;
  for (std::size_t i = 0; i < inst.targets.size(); ++i) {
    const auto p = inst.targets[i];
    if (p >= inst.tokens.size()) throw ArgumentError("s2c: target position out of range");
    if (std::find(seen.begin(), seen.end(), p) != seen.end()) continue;
    seen.push_back(p);
    const auto pos = i < inst.target_pos.size() ? inst.target_pos[i] : std::nullopt;
    auto cands = candidate_senses(lex, inst.tokens[p], pos);
    if (cands.empty()) {
      out.unassigned.push_back(p);
      continue;
    }
    pending.push_back({p, std::move(cands)});
  }
  std::sort(out.unassigned.begin(), out.unassigned.end());
  std::stable_sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
    if (a.candidates.size() != b.candidates.size()) return a.candidates.size() < b.candidates.size();
    return a.position < b.position;
  });

  const Vector zero(senses.dim(), 0.0);
  for (const auto& item : pending) {
    const Vector ctx = context_embedding(inst, item.position, senses, store, out, lex, opts);
    const SenseEntry* best = nullptr;
    double best_cos = 0.0;
    for (const auto* cand : item.candidates) {
      const auto v = senses.find(cand->sense_id);
      const double c = cosine(v ? *v : ConstVec(zero), ctx);
      if (!best || c > best_cos) {
        best = cand;
        best_cos = c;
      }
    }
    out.senses.emplace(item.position, best->sense_id);
    out.trace.push_back({item.position, item.candidates.size(), best->sense_id, best_cos});
  }
  return out;
}

/// Encodes a free-text description and ranks every sense against it.
inline std::vector<Scored> match_description(const ModelParams& params, const EmbeddingStore& store,
                                             const SenseTable& senses, std::string_view text, std::size_t k) {
  if (k == 0) return {};
  std::vector<ConstVec> inputs;
  for (const auto& tok : tokenize(text))
    if (auto v = store.find(tok)) inputs.push_back(*v);
  if (inputs.empty()) throw DataError("description has no in-vocabulary token");
  const auto tr = forward(params, std::span<const ConstVec>(inputs));
  return nearest(senses, tr.e_hat, k);
}

} // namespace sensedef

#endif // SENSEDEF_DISAMBIG_HPP
