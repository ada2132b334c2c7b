#ifndef SENSEDEF_SENSE_TABLE_HPP
#define SENSEDEF_SENSE_TABLE_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sensedef/embeddings.hpp"
#include "sensedef/error.hpp"
#include "sensedef/lexicon.hpp"

namespace sensedef {

/// Where a sense vector's initial value came from.
enum class Provenance { own_word, mono_synonym, gloss_word, fallback, none };

inline const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::own_word: return "own-word";
    case Provenance::mono_synonym: return "mono-synonym";
    case Provenance::gloss_word: return "gloss-word";
    case Provenance::fallback: return "fallback";
    case Provenance::none: return "none";
  }
  return "none";
}

inline std::optional<Provenance> parse_provenance(std::string_view s) {
  for (auto p : {Provenance::own_word, Provenance::mono_synonym, Provenance::gloss_word, Provenance::fallback,
                 Provenance::none})
    if (s == provenance_name(p)) return p;
  return std::nullopt;
}

/// Trainable sense embeddings, one row per sense id.
class SenseTable {
public:
  SenseTable() = default;
  explicit SenseTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<SenseId>& ids() const { return ids_; }
  const std::vector<double>& data() const { return data_; }
  std::span<double> mutable_data() { return data_; }

  std::size_t add(const SenseId& id, ConstVec v, Provenance tag) {
    if (v.size() != dim_) throw ArgumentError("sense vector for '" + id + "' has the wrong dimension");
    if (index_.contains(id)) throw ArgumentError("sense '" + id + "' already present");
    index_.emplace(id, ids_.size());
    ids_.push_back(id);
    tags_.push_back(tag);
    data_.insert(data_.end(), v.begin(), v.end());
    return ids_.size() - 1;
  }

  std::optional<std::size_t> row_of(const SenseId& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<ConstVec> find(const SenseId& id) const {
    auto r = row_of(id);
    if (!r) return std::nullopt;
    return row(*r);
  }

  ConstVec row(std::size_t r) const { return ConstVec(data_).subspan(r * dim_, dim_); }
  std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * dim_, dim_); }
  Provenance tag(std::size_t r) const { return tags_[r]; }
  const std::vector<Provenance>& tags() const { return tags_; }

  bool operator==(const SenseTable& o) const {
    return dim_ == o.dim_ && ids_ == o.ids_ && tags_ == o.tags_ && data_ == o.data_;
  }

private:
  std::size_t dim_ = 0;
  std::vector<SenseId> ids_;
  std::vector<Provenance> tags_;
  std::vector<double> data_;
  std::unordered_map<SenseId, std::size_t> index_;
};

inline std::vector<Scored> nearest(const SenseTable& senses, ConstVec query, std::size_t k,
                                   const std::unordered_set<std::string>& exclude = {}) {
  return nearest(senses.ids(), senses.data(), senses.dim(), query, k, exclude);
}

inline void write_vectors(std::ostream& out, const SenseTable& senses) {
  write_vectors(out, senses.ids(), senses.data(), senses.dim());
}

struct SenseInit {
  SenseTable table;
  std::size_t own_word = 0;
  std::size_t mono_synonym = 0;
  std::size_t gloss_word = 0;
  std::size_t fallback = 0;
  std::size_t none = 0;
  std::vector<std::string> warnings;
};

/// Initial sense vectors, tried in order for each sense of lemma w:
///   1. w is monosemous and has a word vector: that vector.
///   2. the first listed synonym that is a monosemous lemma with a word vector.
///   3. the gloss token with a word vector most cosine-similar to w's vector,
///      when that cosine exceeds `delta`.
///   4. w's own word vector.
/// Senses with none of these start at zero and are reported.
inline SenseInit init_sense_embeddings(const Lexicon& lex, const EmbeddingStore& store, double delta) {
  SenseInit out;
  out.table = SenseTable(store.dim());
  const Vector zero(store.dim(), 0.0);
  for (const auto& e : lex.entries()) {
    const auto lemma_vec = store.find(e.lemma);
    if (lex.is_monosemous(e.lemma) && lemma_vec) {
      out.table.add(e.sense_id, *lemma_vec, Provenance::own_word);
      ++out.own_word;
      continue;
    }
    bool done = false;
    for (const auto& syn : e.synonyms) {
      if (!lex.is_monosemous(syn)) continue;
      if (auto v = store.find(syn)) {
        out.table.add(e.sense_id, *v, Provenance::mono_synonym);
        ++out.mono_synonym;
        done = true;
        break;
      }
    }
    if (done) continue;
    if (lemma_vec) {
      std::optional<ConstVec> best;
      double best_cos = 0.0;
      for (const auto& tok : e.gloss) {
        auto v = store.find(tok);
        if (!v) continue;
        const double c = cosine(*v, *lemma_vec);
        if (!best || c > best_cos) {
          best = v;
          best_cos = c;
        }
      }
      if (best && best_cos > delta) {
        out.table.add(e.sense_id, *best, Provenance::gloss_word);
        ++out.gloss_word;
      } else {
        out.table.add(e.sense_id, *lemma_vec, Provenance::fallback);
        ++out.fallback;
      }
      continue;
    }
    out.table.add(e.sense_id, zero, Provenance::none);
    ++out.none;
    out.warnings.push_back("sense '" + e.sense_id + "' has no vector source; initialized to zero");
  }
  return out;
}

} // namespace sensedef

#endif // SENSEDEF_SENSE_TABLE_HPP
