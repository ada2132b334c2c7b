#ifndef SENSEDEF_EMBEDDINGS_HPP
#define SENSEDEF_EMBEDDINGS_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sensedef/error.hpp"

namespace sensedef {

using Vector = std::vector<double>;
using ConstVec = std::span<const double>;

inline double dot(ConstVec u, ConstVec v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

inline double norm(ConstVec u) { return std::sqrt(dot(u, u)); }

/// Cosine similarity; 0 when either vector has zero norm.
inline double cosine(ConstVec u, ConstVec v) {
  if (u.size() != v.size())
    throw ArgumentError("cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                        std::to_string(v.size()) + ")");
  const double nu = norm(u), nv = norm(v);
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

inline bool is_zero(ConstVec u) {
  return std::all_of(u.begin(), u.end(), [](double x) { return x == 0.0; });
}

/// Fixed word vectors, row-major, in file order. Read-only after construction.
class EmbeddingStore {
public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Adds a vector; returns false (and keeps the old one) when the token exists.
  bool add(const std::string& token, ConstVec values) {
    if (values.size() != dim_)
      throw ArgumentError("vector for '" + token + "' has dimension " + std::to_string(values.size()) +
                          ", expected " + std::to_string(dim_));
    if (index_.contains(token)) return false;
    index_.emplace(token, tokens_.size());
    tokens_.push_back(token);
    data_.insert(data_.end(), values.begin(), values.end());
    return true;
  }

  bool contains(const std::string& token) const { return index_.contains(token); }

  std::optional<std::size_t> index_of(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<ConstVec> find(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return row(it->second);
  }

  ConstVec row(std::size_t i) const { return ConstVec(data_).subspan(i * dim_, dim_); }

  /// Raw storage, used to assert that training never writes word vectors.
  const std::vector<double>& data() const { return data_; }

private:
  std::size_t dim_ = 0;
  std::vector<std::string> tokens_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct VectorLoad {
  EmbeddingStore store;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool parse_size(std::string_view s, std::size_t& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

inline bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size() && std::isfinite(out);
}

inline std::string format_double(double x) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

} // namespace detail

/// Text word-vector format: optional "count dim" header, then "token v1 ... vd".
/// A first line of exactly two integer fields is a header.
inline VectorLoad parse_word_vectors(std::istream& in, const std::string& name = "<stream>") {
  VectorLoad result;
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::size_t> dim;
  std::optional<std::size_t> declared_count;
  std::vector<double> values;
  bool any_line = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = detail::split_fields(line);
    if (fields.empty()) continue;
    if (!any_line) {
      any_line = true;
      std::size_t a = 0, b = 0;
      if (fields.size() == 2 && detail::parse_size(fields[0], a) && detail::parse_size(fields[1], b)) {
        if (b == 0) throw DataError(at_line(name, lineno) + "header declares dimension 0");
        declared_count = a;
        dim = b;
        result.store = EmbeddingStore(b);
        continue;
      }
    }
    if (!dim) {
      if (fields.size() < 2) throw DataError(at_line(name, lineno) + "vector line has no components");
      dim = fields.size() - 1;
      result.store = EmbeddingStore(*dim);
    }
    if (fields.size() - 1 != *dim)
      throw DataError(at_line(name, lineno) + "expected " + std::to_string(*dim) + " components, found " +
                      std::to_string(fields.size() - 1));
    values.assign(*dim, 0.0);
    for (std::size_t k = 0; k < *dim; ++k)
      if (!detail::parse_double(fields[k + 1], values[k]))
        throw DataError(at_line(name, lineno) + "non-numeric component '" + std::string(fields[k + 1]) + "'");
    std::string token(fields[0]);
    if (!result.store.add(token, values))
      result.warnings.push_back(at_line(name, lineno) + "duplicate token '" + token + "'; keeping first");
  }
  if (!any_line) throw DataError(name + ": empty vector file");
  if (result.store.size() == 0) throw DataError(name + ": no vectors after header");
  if (declared_count && *declared_count != result.store.size())
    result.warnings.push_back(name + ": header declares " + std::to_string(*declared_count) + " vectors, read " +
                              std::to_string(result.store.size()));
  return result;
}

inline VectorLoad load_word_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vector file '" + path + "'");
  return parse_word_vectors(in, path);
}

/// Writes rows in the same text format, always with a header.
inline void write_vectors(std::ostream& out, std::span<const std::string> ids,
                          std::span<const double> data, std::size_t dim) {
  out << ids.size() << ' ' << dim << '\n';
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i];
    for (std::size_t k = 0; k < dim; ++k) out << ' ' << detail::format_double(data[i * dim + k]);
    out << '\n';
  }
}

inline void write_vectors(std::ostream& out, const EmbeddingStore& store) {
  write_vectors(out, store.tokens(), store.data(), store.dim());
}

struct Scored {
  std::string id;
  double score = 0.0;
  bool operator==(const Scored&) const = default;
};

/// Ranking order: higher score first, then lexicographically smaller id.
inline bool ranks_before(const Scored& a, const Scored& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

/// Top-k rows of an (ids, row-major data) collection by cosine with `query`.
inline std::vector<Scored> nearest(std::span<const std::string> ids, std::span<const double> data,
                                   std::size_t dim, ConstVec query, std::size_t k,
                                   const std::unordered_set<std::string>& exclude = {}) {
  if (k == 0) return {};
  if (query.size() != dim) throw ArgumentError("nearest: query dimension mismatch");
  std::vector<Scored> scored;
  scored.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (exclude.contains(ids[i])) continue;
    scored.push_back({ids[i], cosine(data.subspan(i * dim, dim), query)});
  }
  const auto take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                    ranks_before);
  scored.resize(take);
  return scored;
}

inline std::vector<Scored> nearest(const EmbeddingStore& store, ConstVec query, std::size_t k,
                                   const std::unordered_set<std::string>& exclude = {}) {
  return nearest(store.tokens(), store.data(), store.dim(), query, k, exclude);
}

} // namespace sensedef

#endif // SENSEDEF_EMBEDDINGS_HPP
