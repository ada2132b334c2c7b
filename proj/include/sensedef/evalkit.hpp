#ifndef SENSEDEF_EVALKIT_HPP
#define SENSEDEF_EVALKIT_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "sensedef/disambig.hpp"
#include "sensedef/embeddings.hpp"
#include "sensedef/error.hpp"
#include "sensedef/lexicon.hpp"
#include "sensedef/rng.hpp"
#include "sensedef/sense_table.hpp"

namespace sensedef {

// ---------------------------------------------------------------------------
// Metrics

/// 1-based ranks; tied values share the average of their positions.
inline std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw ArgumentError("correlation undefined: zero rank variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Spearman's rho: Pearson correlation of average-rank vectors.
inline double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ArgumentError("spearman: length mismatch");
  if (xs.size() < 2) throw ArgumentError("spearman: need at least two items");
  const auto rx = average_ranks(xs), ry = average_ranks(ys);
  return pearson(rx, ry);
}

/// Uniform-weight mean of all cross-sense cosines.
inline double weisim(std::span<const ConstVec> a, std::span<const ConstVec> b) {
  if (a.empty() || b.empty()) throw ArgumentError("weisim: empty sense list");
  double s = 0.0;
  for (const auto& u : a)
    for (const auto& v : b) s += cosine(u, v);
  return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

// ---------------------------------------------------------------------------
// Reports

struct ItemRecord {
  std::string label;
  double gold = 0.0;
  double predicted = 0.0;
  bool skipped = false;
  std::string note;
};

struct EvalReport {
  std::string metric;
  double score = 0.0;
  std::size_t n_items = 0;
  std::size_t n_skipped = 0;
  std::map<std::string, double> extra;  // e.g. precision/recall for WSD
  std::vector<ItemRecord> records;

  nlohmann::json to_json(bool with_records = false) const {
    nlohmann::json j = {{"metric", metric}, {"score", score}, {"n_items", n_items}, {"n_skipped", n_skipped}};
    for (const auto& [k, v] : extra) j[k] = v;
    if (with_records) {
      j["records"] = nlohmann::json::array();
      for (const auto& r : records)
        j["records"].push_back(
            {{"item", r.label}, {"gold", r.gold}, {"predicted", r.predicted}, {"skipped", r.skipped}, {"note", r.note}});
    }
    return j;
  }
};

// ---------------------------------------------------------------------------
// Word similarity

struct SimilarityPair {
  Token word1, word2;
  double gold = 0.0;
  std::optional<PartOfSpeech> pos1, pos2;
  std::vector<Token> context1, context2;  // SCWS only
  std::size_t index1 = 0, index2 = 0;     // target positions in the contexts
};

namespace detail {

inline std::vector<std::string> split_on(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  const auto e = s.find_last_not_of(" \t\r\"");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

} // namespace detail

/// "word1,word2,score" lines; a first line with a non-numeric score is a header.
inline std::vector<SimilarityPair> parse_wordsim(std::istream& in, const std::string& name = "<stream>") {
  std::vector<SimilarityPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const char sep = line.find(',') != std::string::npos ? ',' : '\t';
    const auto f = detail::split_on(line, sep);
    double gold = 0.0;
    const bool numeric = f.size() >= 3 && detail::parse_double(detail::trim(f[2]), gold);
    if (!numeric) {
      if (out.empty() && lineno == 1) continue;
      throw DataError(at_line(name, lineno) + "expected word1,word2,score");
    }
    SimilarityPair pair;
    pair.word1 = normalize_lemma(detail::trim(f[0]));
    pair.word2 = normalize_lemma(detail::trim(f[1]));
    pair.gold = gold;
    out.push_back(std::move(pair));
  }
  return out;
}

inline std::vector<SimilarityPair> load_wordsim(const std::string& path) {
  auto in = detail::open_or_throw(path);
  return parse_wordsim(in, path);
}

/// Splits an SCWS context around its <b>target</b> marker; the marked span
/// becomes the single token `word`.
inline std::pair<std::vector<Token>, std::size_t> parse_marked_context(const std::string& ctx, const Token& word) {
  const auto open = ctx.find("<b>");
  const auto close = ctx.find("</b>", open == std::string::npos ? 0 : open);
  if (open == std::string::npos || close == std::string::npos) throw DataError("context has no <b>target</b> marker");
  auto tokens = tokenize(ctx.substr(0, open));
  const std::size_t index = tokens.size();
  tokens.push_back(word);
  for (auto& t : tokenize(ctx.substr(close + 4))) tokens.push_back(std::move(t));
  return {std::move(tokens), index};
}

/// Tab-separated: id, word1, pos1, word2, pos2, context1, context2, mean rating[, individual ratings...]
inline std::vector<SimilarityPair> parse_scws(std::istream& in, const std::string& name = "<stream>") {
  std::vector<SimilarityPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_on(line, '\t');
    double gold = 0.0;
    if (f.size() < 8 || !detail::parse_double(detail::trim(f[7]), gold))
      throw DataError(at_line(name, lineno) + "expected 8 tab-separated fields ending in a mean rating");
    SimilarityPair p;
    p.word1 = normalize_lemma(f[1]);
    p.word2 = normalize_lemma(f[3]);
    p.pos1 = parse_pos(detail::trim(f[2]));
    p.pos2 = parse_pos(detail::trim(f[4]));
    p.gold = gold;
    try {
      std::tie(p.context1, p.index1) = parse_marked_context(f[5], p.word1);
      std::tie(p.context2, p.index2) = parse_marked_context(f[6], p.word2);
    } catch (const DataError& e) {
      throw DataError(at_line(name, lineno) + e.what());
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<SimilarityPair> load_scws(const std::string& path) {
  auto in = detail::open_or_throw(path);
  return parse_scws(in, path);
}

/// Non-zero sense vectors of a word, file order.
inline std::vector<ConstVec> sense_vectors_of(const Lexicon& lex, const SenseTable& senses, const Token& word) {
  std::vector<ConstVec> out;
  for (const auto* e : lex.senses_of(word))
    if (auto v = senses.find(e->sense_id); v && !is_zero(*v)) out.push_back(*v);
  return out;
}

namespace detail {

inline EvalReport finish_correlation(EvalReport rep, const std::vector<double>& gold, const std::vector<double>& pred) {
  if (gold.size() < 2) throw DataError(rep.metric + ": fewer than two scorable pairs");
  rep.score = spearman(gold, pred);
  return rep;
}

} // namespace detail

/// Context-free similarity: weisim over each word's senses, then Spearman's
/// rho against gold. `vectors_of` supplies the candidate vectors per word.
inline EvalReport eval_similarity(const std::vector<SimilarityPair>& data,
                                  const std::function<std::vector<ConstVec>(const Token&)>& vectors_of,
                                  std::string metric = "wordsim_spearman") {
  EvalReport rep;
  rep.metric = std::move(metric);
  std::vector<double> gold, pred;
  for (const auto& p : data) {
    ++rep.n_items;
    ItemRecord r{p.word1 + "," + p.word2, p.gold, 0.0, false, {}};
    const auto a = vectors_of(p.word1), b = vectors_of(p.word2);
    if (a.empty() || b.empty()) {
      r.skipped = true;
      r.note = a.empty() ? "no vector for '" + p.word1 + "'" : "no vector for '" + p.word2 + "'";
      ++rep.n_skipped;
    } else {
      r.predicted = weisim(a, b);
      gold.push_back(p.gold);
      pred.push_back(r.predicted);
    }
    rep.records.push_back(std::move(r));
  }
  return detail::finish_correlation(std::move(rep), gold, pred);
}

inline EvalReport eval_wordsim(const std::vector<SimilarityPair>& data, const Lexicon& lex, const SenseTable& senses) {
  return eval_similarity(data, [&](const Token& w) { return sense_vectors_of(lex, senses, w); });
}

/// Baseline: one vector per word straight from the store.
inline EvalReport eval_wordsim_baseline(const std::vector<SimilarityPair>& data, const EmbeddingStore& store) {
  return eval_similarity(data, [&](const Token& w) {
    std::vector<ConstVec> out;
    if (auto v = store.find(w)) out.push_back(*v);
    return out;
  });
}

/// Disambiguates the target of one SCWS side. All content words in the
/// context take part in the simple-to-complex ordering.
inline std::optional<SenseId> disambiguate_target(const std::vector<Token>& tokens, std::size_t index,
                                                  std::optional<PartOfSpeech> pos, const Lexicon& lex,
                                                  const SenseTable& senses, const EmbeddingStore& store) {
  ContextInstance ci{tokens, {index}, {pos}};
  for (std::size_t q = 0; q < tokens.size(); ++q)
    if (q != index && lex.is_content_word(tokens[q])) ci.targets.push_back(q);
  const auto a = s2c(ci, lex, senses, store);
  auto it = a.senses.find(index);
  if (it == a.senses.end()) return std::nullopt;
  return it->second;
}

inline EvalReport eval_scws(const std::vector<SimilarityPair>& data, const Lexicon& lex, const SenseTable& senses,
                            const EmbeddingStore& store) {
  EvalReport rep;
  rep.metric = "scws_spearman";
  std::vector<double> gold, pred;
  for (const auto& p : data) {
    ++rep.n_items;
    ItemRecord r{p.word1 + "," + p.word2, p.gold, 0.0, false, {}};
    const auto s1 = disambiguate_target(p.context1, p.index1, p.pos1, lex, senses, store);
    const auto s2 = disambiguate_target(p.context2, p.index2, p.pos2, lex, senses, store);
    const auto v1 = s1 ? senses.find(*s1) : std::nullopt;
    const auto v2 = s2 ? senses.find(*s2) : std::nullopt;
    if (!v1 || !v2) {
      r.skipped = true;
      r.note = "target not in sense inventory";
      ++rep.n_skipped;
    } else {
      r.predicted = cosine(*v1, *v2);
      r.note = *s1 + " " + *s2;
      gold.push_back(p.gold);
      pred.push_back(r.predicted);
    }
    rep.records.push_back(std::move(r));
  }
  return detail::finish_correlation(std::move(rep), gold, pred);
}

// ---------------------------------------------------------------------------
// Coarse-grained WSD

struct WsdKey {
  std::map<std::string, std::vector<SenseId>> gold;  // instance id -> gold sense(s)
  std::map<SenseId, std::string> clusters;           // sense id -> cluster; identity when absent

  const std::string& cluster_of(const SenseId& s) const {
    auto it = clusters.find(s);
    return it == clusters.end() ? s : it->second;
  }
};

using SenseMap = std::map<SenseId, SenseId>;

namespace detail {

template <class F>
void for_each_fields(std::istream& in, const std::string& name, std::size_t min_fields, F&& f) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = split_fields(line);
    if (fields.empty() || fields[0].front() == '#') continue;
    if (fields.size() < min_fields)
      throw DataError(at_line(name, lineno) + "expected at least " + std::to_string(min_fields) + " fields");
    f(fields);
  }
}

} // namespace detail

/// "instance_id sense_id [sense_id...]" per line.
inline void parse_wsd_key(std::istream& in, WsdKey& key, const std::string& name = "<stream>") {
  detail::for_each_fields(in, name, 2, [&](const auto& f) {
    auto& g = key.gold[std::string(f[0])];
    for (std::size_t i = 1; i < f.size(); ++i) g.emplace_back(f[i]);
  });
}

/// "sense_id cluster_id" per line.
inline void parse_clusters(std::istream& in, WsdKey& key, const std::string& name = "<stream>") {
  detail::for_each_fields(in, name, 2,
                          [&](const auto& f) { key.clusters[std::string(f[0])] = std::string(f[1]); });
}

/// "from_sense_id to_sense_id" per line.
inline SenseMap parse_sense_map(std::istream& in, const std::string& name = "<stream>") {
  SenseMap m;
  detail::for_each_fields(in, name, 2, [&](const auto& f) { m[std::string(f[0])] = std::string(f[1]); });
  return m;
}

inline WsdKey load_wsd_key(const std::string& key_path, const std::string& cluster_path = {}) {
  WsdKey key;
  {
    auto in = detail::open_or_throw(key_path);
    parse_wsd_key(in, key, key_path);
  }
  if (!cluster_path.empty()) {
    auto in = detail::open_or_throw(cluster_path);
    parse_clusters(in, key, cluster_path);
  }
  return key;
}

inline SenseMap load_sense_map(const std::string& path) {
  auto in = detail::open_or_throw(path);
  return parse_sense_map(in, path);
}

/// Precision, recall and F1 (x100). A prediction counts when it falls in the
/// same cluster as a gold sense. Predictions for unknown instances are
/// reported and ignored.
inline EvalReport score_wsd(const std::map<std::string, SenseId>& predictions, const WsdKey& key,
                            const SenseMap* sense_map = nullptr) {
  EvalReport rep;
  rep.metric = "wsd_f1";
  rep.n_items = key.gold.size();
  std::size_t attempted = 0, correct = 0;
  for (const auto& [id, raw] : predictions) {
    SenseId pred = raw;
    if (sense_map)
      if (auto it = sense_map->find(raw); it != sense_map->end()) pred = it->second;
    auto g = key.gold.find(id);
    if (g == key.gold.end()) {
      rep.records.push_back({id, 0.0, 0.0, true, "unknown instance"});
      continue;
    }
    ++attempted;
    const auto& pc = key.cluster_of(pred);
    const bool ok = std::any_of(g->second.begin(), g->second.end(),
                                [&](const SenseId& s) { return key.cluster_of(s) == pc; });
    correct += ok ? 1 : 0;
    rep.records.push_back({id, 1.0, ok ? 1.0 : 0.0, false, pred});
  }
  rep.n_skipped = key.gold.size() - attempted;
  const double p = attempted == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(attempted);
  const double r = key.gold.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(key.gold.size());
  const double f1 = (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  rep.extra["precision"] = 100.0 * p;
  rep.extra["recall"] = 100.0 * r;
  rep.extra["attempted"] = static_cast<double>(attempted);
  rep.extra["correct"] = static_cast<double>(correct);
  rep.score = 100.0 * f1;
  return rep;
}

// ---------------------------------------------------------------------------
// Sentence-level disambiguation input

/// One JSON-lines record: {"tokens": [...], "targets": [index | {"id", "index", "pos"}]}.
struct TaggedSentence {
  ContextInstance context;
  std::vector<std::string> ids;  // parallel to context.targets
};

inline TaggedSentence parse_tagged_sentence(const nlohmann::json& j, const std::string& fallback_prefix) {
  TaggedSentence s;
  if (!j.is_object() || !j.contains("tokens") || !j.contains("targets"))
    throw DataError("record needs 'tokens' and 'targets'");
  for (const auto& t : j.at("tokens")) s.context.tokens.push_back(normalize_lemma(t.get<std::string>()));
  for (const auto& t : j.at("targets")) {
    std::size_t index = 0;
    std::string id;
    std::optional<PartOfSpeech> pos;
    if (t.is_number_integer()) {
      index = t.get<std::size_t>();
    } else {
      index = t.at("index").get<std::size_t>();
      if (t.contains("id")) id = t.at("id").get<std::string>();
      if (t.contains("pos")) pos = parse_pos(t.at("pos").get<std::string>());
    }
    if (index >= s.context.tokens.size()) throw DataError("target index " + std::to_string(index) + " out of range");
    s.context.targets.push_back(index);
    s.context.target_pos.push_back(pos);
    s.ids.push_back(id.empty() ? fallback_prefix + std::to_string(index) : id);
  }
  return s;
}

inline std::vector<TaggedSentence> load_tagged_sentences(const std::string& path) {
  auto in = detail::open_or_throw(path);
  std::vector<TaggedSentence> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(parse_tagged_sentence(nlohmann::json::parse(line), std::to_string(lineno) + ":"));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(at_line(path, lineno) + e.what());
    } catch (const DataError& e) {
      throw DataError(at_line(path, lineno) + e.what());
    }
  }
  return out;
}

/// S2C predictions keyed by instance id.
inline std::map<std::string, SenseId> predict_wsd(const std::vector<TaggedSentence>& sentences, const Lexicon& lex,
                                                  const SenseTable& senses, const EmbeddingStore& store) {
  std::map<std::string, SenseId> out;
  for (const auto& s : sentences) {
    const auto a = s2c(s.context, lex, senses, store);
    for (std::size_t i = 0; i < s.ids.size(); ++i)
      if (auto it = a.senses.find(s.context.targets[i]); it != a.senses.end()) out[s.ids[i]] = it->second;
  }
  return out;
}

/// Seeded uniform choice among each target's candidate senses.
inline std::map<std::string, SenseId> random_wsd(const std::vector<TaggedSentence>& sentences, const Lexicon& lex,
                                                 std::uint64_t seed) {
  Rng rng(seed);
  std::map<std::string, SenseId> out;
  for (const auto& s : sentences)
    for (std::size_t i = 0; i < s.ids.size(); ++i) {
      const auto pos = i < s.context.target_pos.size() ? s.context.target_pos[i] : std::nullopt;
      const auto cands = candidate_senses(lex, s.context.tokens[s.context.targets[i]], pos);
      if (!cands.empty()) out[s.ids[i]] = cands[rng.below(cands.size())]->sense_id;
    }
  return out;
}

} // namespace sensedef

#endif // SENSEDEF_EVALKIT_HPP
