#ifndef SENSEDEF_LEXICON_HPP
#define SENSEDEF_LEXICON_HPP

#include <cctype>
#include <cstddef>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "sensedef/error.hpp"

namespace sensedef {

using Token = std::string;
using SenseId = std::string;

enum class PartOfSpeech { noun, verb, adj, adv, other };

inline std::optional<PartOfSpeech> parse_pos(std::string_view code) {
  if (code == "n") return PartOfSpeech::noun;
  if (code == "v") return PartOfSpeech::verb;
  if (code == "a" || code == "s" || code == "j") return PartOfSpeech::adj;
  if (code == "r") return PartOfSpeech::adv;
  if (code == "x") return PartOfSpeech::other;
  return std::nullopt;
}

inline const char* pos_code(PartOfSpeech pos) {
  switch (pos) {
    case PartOfSpeech::noun: return "n";
    case PartOfSpeech::verb: return "v";
    case PartOfSpeech::adj: return "a";
    case PartOfSpeech::adv: return "r";
    case PartOfSpeech::other: return "x";
  }
  return "x";
}

inline bool is_content_pos(PartOfSpeech pos) { return pos != PartOfSpeech::other; }

namespace detail {

inline bool is_ascii_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }
inline bool is_ascii_space(unsigned char c) { return c < 0x80 && std::isspace(c); }

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) {
    auto c = static_cast<unsigned char>(ch);
    if (c < 0x80) ch = static_cast<char>(std::tolower(c));
  }
  return out;
}

} // namespace detail

/// Lowercases, splits on whitespace and strips leading/trailing ASCII
/// punctuation from each piece. Internal punctuation ("self-evident") stays.
/// Lowercasing is ASCII-only; non-ASCII bytes pass through unchanged.
inline std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    while (i < n && detail::is_ascii_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < n && !detail::is_ascii_space(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t b = i, e = j;
    while (b < e && detail::is_ascii_punct(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && detail::is_ascii_punct(static_cast<unsigned char>(text[e - 1]))) --e;
    if (e > b) tokens.push_back(detail::ascii_lower(text.substr(b, e - b)));
    i = j;
  }
  return tokens;
}

/// Lemma form used for lookups: trimmed, lowercased, internal spaces as '_'.
inline Token normalize_lemma(std::string_view raw) {
  std::size_t b = 0, e = raw.size();
  while (b < e && detail::is_ascii_space(static_cast<unsigned char>(raw[b]))) ++b;
  while (e > b && detail::is_ascii_space(static_cast<unsigned char>(raw[e - 1]))) --e;
  std::string out;
  bool in_space = false;
  for (char ch : raw.substr(b, e - b)) {
    if (detail::is_ascii_space(static_cast<unsigned char>(ch))) {
      in_space = true;
      continue;
    }
    if (in_space) out.push_back('_');
    in_space = false;
    out.push_back(ch);
  }
  return detail::ascii_lower(out);
}

struct SenseEntry {
  SenseId sense_id;
  Token lemma;
  PartOfSpeech pos = PartOfSpeech::other;
  std::vector<Token> synonyms;
  std::vector<Token> gloss;
};

/// Immutable sense inventory indexed by lemma and by sense id.
class Lexicon {
public:
  Lexicon() = default;

  /// Throws DataError on a duplicate sense id or an empty gloss.
  explicit Lexicon(std::vector<SenseEntry> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      auto& e = entries_[i];
      if (e.gloss.empty()) throw DataError("sense '" + e.sense_id + "' has an empty gloss");
      std::erase(e.synonyms, e.lemma);
      if (!by_id_.emplace(e.sense_id, i).second)
        throw DataError("duplicate sense_id '" + e.sense_id + "'");
      by_lemma_[e.lemma].push_back(i);
      if (is_content_pos(e.pos)) content_lemmas_.insert(e.lemma);
    }
  }

  const std::vector<SenseEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t lemma_count() const { return by_lemma_.size(); }

  /// Entries for `lemma` in file order; empty when unknown.
  std::vector<const SenseEntry*> senses_of(const Token& lemma) const {
    std::vector<const SenseEntry*> out;
    if (auto it = by_lemma_.find(lemma); it != by_lemma_.end())
      for (auto i : it->second) out.push_back(&entries_[i]);
    return out;
  }

  std::size_t sense_count(const Token& lemma) const {
    auto it = by_lemma_.find(lemma);
    return it == by_lemma_.end() ? 0 : it->second.size();
  }

  const SenseEntry* find(const SenseId& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &entries_[it->second];
  }

  /// Position of the sense in file order; used for deterministic tie-breaks.
  std::optional<std::size_t> index_of(const SenseId& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

  bool is_monosemous(const Token& lemma) const { return sense_count(lemma) == 1; }

  std::set<Token> monosemous_words() const {
    std::set<Token> out;
    for (const auto& [lemma, idx] : by_lemma_)
      if (idx.size() == 1) out.insert(lemma);
    return out;
  }

  std::set<Token> lemmas() const {
    std::set<Token> out;
    for (const auto& [lemma, idx] : by_lemma_) out.insert(lemma);
    return out;
  }

  bool is_content_word(const Token& t) const { return content_lemmas_.contains(t); }

  /// Writes the inventory back as JSON lines; glosses are the joined tokens.
  void write_jsonl(std::ostream& out) const {
    for (const auto& e : entries_) {
      std::string gloss;
      for (const auto& t : e.gloss) {
        if (!gloss.empty()) gloss.push_back(' ');
        gloss += t;
      }
      nlohmann::json j = {{"sense_id", e.sense_id}, {"lemma", e.lemma}, {"pos", pos_code(e.pos)},
                          {"synonyms", e.synonyms}, {"gloss", gloss}};
      out << j.dump() << '\n';
    }
  }

private:
  std::vector<SenseEntry> entries_;
  std::unordered_map<Token, std::vector<std::size_t>> by_lemma_;
  std::unordered_map<SenseId, std::size_t> by_id_;
  std::set<Token> content_lemmas_;
};

struct LexiconLoad {
  Lexicon lexicon;
  std::vector<std::string> warnings;
  std::size_t skipped = 0;
};

/// Parses one JSON object per line. Records whose gloss tokenizes to nothing
/// are skipped with a warning; everything else malformed is fatal.
inline LexiconLoad parse_lexicon(std::istream& in, const std::string& name = "<stream>") {
  LexiconLoad result;
  std::vector<SenseEntry> entries;
  std::unordered_map<SenseId, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(at_line(name, lineno) + "malformed JSON: " + e.what());
    }
    if (!j.is_object()) throw DataError(at_line(name, lineno) + "expected a JSON object");
    for (const char* key : {"sense_id", "lemma", "pos", "synonyms", "gloss"})
      if (!j.contains(key)) throw DataError(at_line(name, lineno) + "missing field '" + key + "'");
    SenseEntry e;
    try {
      e.sense_id = j.at("sense_id").get<std::string>();
      e.lemma = normalize_lemma(j.at("lemma").get<std::string>());
      auto pos = parse_pos(j.at("pos").get<std::string>());
      if (!pos) throw DataError(at_line(name, lineno) + "unknown pos '" + j.at("pos").get<std::string>() + "'");
      e.pos = *pos;
      for (const auto& s : j.at("synonyms")) {
        auto syn = normalize_lemma(s.get<std::string>());
        if (!syn.empty() && syn != e.lemma) e.synonyms.push_back(std::move(syn));
      }
      e.gloss = tokenize(j.at("gloss").get<std::string>());
    } catch (const nlohmann::json::exception& ex) {
      throw DataError(at_line(name, lineno) + "bad field type: " + ex.what());
    }
    if (e.sense_id.empty()) throw DataError(at_line(name, lineno) + "empty sense_id");
    if (e.lemma.empty()) throw DataError(at_line(name, lineno) + "empty lemma");
    if (auto [it, fresh] = seen.emplace(e.sense_id, lineno); !fresh)
      throw DataError(at_line(name, lineno) + "duplicate sense_id '" + e.sense_id + "' (first on line " +
                      std::to_string(it->second) + ")");
    if (e.gloss.empty()) {
      result.warnings.push_back(at_line(name, lineno) + "gloss of '" + e.sense_id + "' is empty; skipped");
      ++result.skipped;
      continue;
    }
    entries.push_back(std::move(e));
  }
  result.lexicon = Lexicon(std::move(entries));
  return result;
}

inline LexiconLoad load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon file '" + path + "'");
  return parse_lexicon(in, path);
}

} // namespace sensedef

#endif // SENSEDEF_LEXICON_HPP
