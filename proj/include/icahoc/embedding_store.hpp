#ifndef ICAHOC_EMBEDDING_STORE_HPP
#define ICAHOC_EMBEDDING_STORE_HPP

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "icahoc/binary_io.hpp"
#include "icahoc/error.hpp"

namespace icahoc {

/// n x d word vectors with their vocabulary and corpus counts.
///
/// Row t of `vectors` belongs to `vocab[t]`, whose corpus frequency is
/// `counts[t]`. Words are unique under exact byte comparison.
struct EmbeddingMatrix {
  Eigen::MatrixXd vectors;
  std::vector<std::string> vocab;
  std::vector<std::uint64_t> counts;

  std::size_t rows() const { return static_cast<std::size_t>(vectors.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(vectors.cols()); }

  bool operator==(const EmbeddingMatrix&) const = default;
};

using WordIndex = std::unordered_map<std::string, std::size_t>;

inline WordIndex make_word_index(const std::vector<std::string>& vocab) {
  WordIndex index;
  index.reserve(vocab.size());
  for (std::size_t t = 0; t < vocab.size(); ++t) index.emplace(vocab[t], t);
  return index;
}

struct FrequencyTable {
  std::unordered_map<std::string, std::uint64_t> counts;
  std::size_t duplicate_warnings = 0;
};

namespace detail {

inline std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && line[pos] == ' ') ++pos;
    if (pos >= line.size()) break;
    auto end = line.find(' ', pos);
    if (end == std::string_view::npos) end = line.size();
    fields.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return fields;
}

inline std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

template <typename Int>
std::optional<Int> parse_integer(std::string_view s) {
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::ifstream open_input(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

} // namespace detail

/// Parses the word2vec text format: a "n d" header, then n lines "word v1 ... vd".
inline EmbeddingMatrix load_word2vec_text(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty embedding file");
  const auto header = detail::split_spaces(detail::strip_cr(line));
  if (header.size() != 2) throw DataError("bad header: expected \"n d\"");
  const auto n = detail::parse_integer<std::size_t>(header[0]);
  const auto d = detail::parse_integer<std::size_t>(header[1]);
  if (!n || !d || *d == 0) throw DataError("bad header: expected \"n d\"");

  EmbeddingMatrix m;
  m.vectors.resize(static_cast<Eigen::Index>(*n), static_cast<Eigen::Index>(*d));
  m.vocab.reserve(*n);
  m.counts.assign(*n, 0);
  WordIndex seen;
  seen.reserve(*n);

  std::size_t row = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::strip_cr(line);
    if (text.find_first_not_of(' ') == std::string_view::npos) continue;
    if (row >= *n) throw DataError("row count mismatch: header says " + std::to_string(*n) + ", found more rows");
    const auto fields = detail::split_spaces(text);
    if (fields.size() != *d + 1)
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(*d) + " values, got " +
                      std::to_string(fields.size() - 1));
    std::string word(fields[0]);
    if (!seen.emplace(word, row).second) throw DataError("duplicate word: " + word);
    for (std::size_t c = 0; c < *d; ++c) {
      const auto v = detail::parse_double(fields[c + 1]);
      if (!v) throw DataError("line " + std::to_string(line_no) + ": bad number '" + std::string(fields[c + 1]) + "'");
      if (!std::isfinite(*v)) throw DataError("non-finite value for word " + word);
      m.vectors(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(c)) = *v;
    }
    m.vocab.push_back(std::move(word));
    ++row;
  }
  if (row != *n)
    throw DataError("row count mismatch: header says " + std::to_string(*n) + ", found " + std::to_string(row));
  return m;
}

inline EmbeddingMatrix load_word2vec_text(const std::string& path) {
  auto in = detail::open_input(path);
  return load_word2vec_text(in);
}

/// Reads "word<TAB>count" lines. Later duplicates overwrite earlier ones and
/// bump `duplicate_warnings`.
inline FrequencyTable load_frequencies(std::istream& in) {
  FrequencyTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::strip_cr(line);
    if (text.empty()) continue;
    const auto tab = text.find('\t');
    if (tab == std::string_view::npos) throw DataError("line " + std::to_string(line_no) + ": expected word<TAB>count");
    const auto word = text.substr(0, tab);
    const auto count_text = text.substr(tab + 1);
    if (!count_text.empty() && count_text.front() == '-' && detail::parse_integer<std::int64_t>(count_text))
      throw DataError("line " + std::to_string(line_no) + ": negative count for " + std::string(word));
    const auto count = detail::parse_integer<std::uint64_t>(count_text);
    if (!count)
      throw DataError("line " + std::to_string(line_no) + ": non-integer count '" + std::string(count_text) + "'");
    auto [it, inserted] = table.counts.insert_or_assign(std::string(word), *count);
    if (!inserted) ++table.duplicate_warnings;
  }
  return table;
}

inline FrequencyTable load_frequencies(const std::string& path) {
  auto in = detail::open_input(path);
  return load_frequencies(in);
}

/// Fills `m.counts` from the table. Returns the number of vocabulary words
/// without an entry (left at 0); with `strict` the first such word throws.
inline std::size_t attach_frequencies(EmbeddingMatrix& m, const FrequencyTable& table, bool strict = false) {
  std::size_t missing = 0;
  m.counts.assign(m.rows(), 0);
  for (std::size_t t = 0; t < m.rows(); ++t) {
    auto it = table.counts.find(m.vocab[t]);
    if (it == table.counts.end()) {
      if (strict) throw DataError("no frequency for word: " + m.vocab[t]);
      ++missing;
      continue;
    }
    m.counts[t] = it->second;
  }
  return missing;
}

/// Rescales every row to unit Euclidean norm.
inline Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& x, const std::vector<std::string>* vocab = nullptr) {
  Eigen::MatrixXd out = x;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double norm = out.row(r).norm();
    if (!(norm > 0.0)) {
      const auto who = vocab ? (*vocab)[static_cast<std::size_t>(r)] : "row " + std::to_string(r);
      throw DataError("zero-norm row: " + who);
    }
    out.row(r) /= norm;
  }
  return out;
}

inline EmbeddingMatrix normalize_rows(const EmbeddingMatrix& m) {
  EmbeddingMatrix out;
  out.vectors = normalize_rows(m.vectors, &m.vocab);
  out.vocab = m.vocab;
  out.counts = m.counts;
  return out;
}

inline constexpr std::string_view kEmbeddingCacheMagic = "ICAHOCEM";
inline constexpr std::uint8_t kEmbeddingCacheVersion = 1;

/// Binary layout: magic, version byte, n, d, n*d float64 (row-major), then per
/// row a length-prefixed UTF-8 word and its u64 count. All little-endian.
inline void save_cache(const EmbeddingMatrix& m, std::ostream& out) {
  io::Writer w(out);
  w.raw(kEmbeddingCacheMagic);
  w.u8(kEmbeddingCacheVersion);
  w.matrix(m.vectors);
  for (std::size_t t = 0; t < m.rows(); ++t) {
    w.string(m.vocab[t]);
    w.u64(m.counts[t]);
  }
}

inline void save_cache(const EmbeddingMatrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  save_cache(m, out);
  if (!out) throw DataError("write failed: " + path);
}

inline EmbeddingMatrix load_cache(std::istream& in) {
  io::Reader r(in, "cache");
  r.expect_header(kEmbeddingCacheMagic, kEmbeddingCacheVersion);
  EmbeddingMatrix m;
  m.vectors = r.matrix();
  m.vocab.reserve(m.rows());
  m.counts.reserve(m.rows());
  for (std::size_t t = 0; t < m.rows(); ++t) {
    m.vocab.push_back(r.string());
    m.counts.push_back(r.u64());
  }
  return m;
}

inline EmbeddingMatrix load_cache(const std::string& path) {
  auto in = detail::open_input(path, std::ios::binary);
  return load_cache(in);
}

} // namespace icahoc

#endif
