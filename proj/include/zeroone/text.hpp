#ifndef ZEROONE_TEXT_HPP
#define ZEROONE_TEXT_HPP

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "zeroone/core.hpp"

namespace zeroone {

/// Lowercased word tokens. A token is a maximal run of ASCII alphanumerics
/// and apostrophes (everything else separates, including any non-ASCII
/// byte), with leading/trailing apostrophes stripped. Simple by design and
/// pinned by golden tests.
inline std::vector<std::string> tokenize(std::string_view text) {
  auto in_class = [](unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '\'';
  };
  std::vector<std::string> tokens;
  std::string piece;
  auto flush = [&] {
    const auto first = piece.find_first_not_of('\'');
    if (first != std::string::npos) {
      const auto last = piece.find_last_not_of('\'');
      tokens.push_back(piece.substr(first, last - first + 1));
    }
    piece.clear();
  };
  for (unsigned char c : text) {
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    if (in_class(c))
      piece.push_back(static_cast<char>(c));
    else
      flush();
  }
  flush();
  return tokens;
}

namespace detail {

struct TransparentHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
};

}  // namespace detail

/// token -> d-dimensional vector map. Rows are stored in first-seen order;
/// duplicate inserts keep the first vector and are counted.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw std::invalid_argument("EmbeddingTable: dimension must be positive");
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return tokens_.size(); }
  std::size_t duplicates_skipped() const { return duplicates_; }

  bool insert(std::string token, std::span<const double> vec) {
    if (vec.size() != dim_) throw std::invalid_argument("EmbeddingTable: vector length != dim");
    if (!all_finite(vec)) throw std::invalid_argument("EmbeddingTable: non-finite entry");
    if (index_.contains(token)) {
      ++duplicates_;
      return false;
    }
    index_.emplace(token, tokens_.size());
    tokens_.push_back(std::move(token));
    data_.insert(data_.end(), vec.begin(), vec.end());
    return true;
  }

  std::optional<std::size_t> row_of(std::string_view token) const {
    const auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  const std::string& token(std::size_t i) const { return tokens_[i]; }

  std::span<const double> find(std::string_view token) const {
    const auto i = row_of(token);
    return i ? row(*i) : std::span<const double>{};
  }

 private:
  std::size_t dim_;
  std::vector<std::string> tokens_;
  std::vector<double> data_;  // size() * dim_, row-major
  std::unordered_map<std::string, std::size_t, detail::TransparentHash, std::equal_to<>> index_;
  std::size_t duplicates_ = 0;
};

namespace detail {

inline double parse_double(std::string_view text, std::size_t line_number, const char* what) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw std::runtime_error(std::string(what) + ": unparseable number '" + std::string(text) +
                             "' at line " + std::to_string(line_number));
  return value;
}

inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, ptr};
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

/// GloVe text format: one line per token, token then d decimals. The first
/// line fixes d; later lines must agree (hard error naming the line).
inline EmbeddingTable load_embeddings(std::istream& in) {
  std::string line;
  std::size_t line_number = 0;
  std::optional<EmbeddingTable> table;
  std::vector<double> vec;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const auto fields = detail::split_ws(line);
    if (fields.size() < 2)
      throw std::runtime_error("load_embeddings: missing vector at line " +
                               std::to_string(line_number));
    if (!table) table.emplace(fields.size() - 1);
    if (fields.size() - 1 != table->dim())
      throw std::runtime_error("load_embeddings: dimension mismatch (" +
                               std::to_string(fields.size() - 1) + " vs " +
                               std::to_string(table->dim()) + ") at line " +
                               std::to_string(line_number));
    vec.clear();
    for (std::size_t f = 1; f < fields.size(); ++f)
      vec.push_back(detail::parse_double(fields[f], line_number, "load_embeddings"));
    table->insert(std::string(fields[0]), vec);
  }
  if (!table) throw std::runtime_error("load_embeddings: empty file");
  return *std::move(table);
}

inline EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_embeddings: cannot open " + path);
  return load_embeddings(in);
}

/// Inverse of load_embeddings; doubles are written in shortest
/// round-trip form so reloading is bitwise exact.
inline void save_embeddings(const EmbeddingTable& table, std::ostream& out) {
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.token(i);
    for (double v : table.row(i)) out << ' ' << detail::format_double(v);
    out << '\n';
  }
}

struct Document {
  std::vector<std::string> tokens;
  int label = +1;  // in {-1,+1}

  friend bool operator==(const Document&, const Document&) = default;
};

/// Mean embedding of in-vocabulary tokens plus the out-of-vocabulary count.
/// Rows are summed in sorted row-index order, so the result is bitwise
/// invariant under token permutations. Empty or all-OOV documents yield the
/// zero vector.
inline std::pair<std::vector<double>, std::size_t> average_vector(const Document& doc,
                                                                  const EmbeddingTable& table) {
  std::vector<std::size_t> rows;
  std::size_t oov = 0;
  for (const std::string& token : doc.tokens) {
    if (const auto i = table.row_of(token))
      rows.push_back(*i);
    else
      ++oov;
  }
  std::sort(rows.begin(), rows.end());
  std::vector<double> mean(table.dim(), 0.0);
  for (std::size_t r : rows) {
    const auto row = table.row(r);
    for (std::size_t f = 0; f < mean.size(); ++f) mean[f] += row[f];
  }
  if (!rows.empty())
    for (double& v : mean) v /= static_cast<double>(rows.size());
  return {std::move(mean), oov};
}

/// Document as a max_len x d image: row i is token i's embedding (zero row
/// when OOV), truncated at max_len, zero-padded below valid_len.
struct DocMatrix {
  Matrix matrix;
  std::size_t valid_len = 0;

  friend bool operator==(const DocMatrix&, const DocMatrix&) = default;
};

inline DocMatrix stack_matrix(const Document& doc, const EmbeddingTable& table,
                              std::size_t max_len) {
  if (max_len == 0) throw std::invalid_argument("stack_matrix: max_len must be positive");
  DocMatrix out;
  out.matrix = Matrix(max_len, table.dim());
  out.valid_len = std::min(doc.tokens.size(), max_len);
  for (std::size_t i = 0; i < out.valid_len; ++i) {
    const auto row = table.find(doc.tokens[i]);
    if (!row.empty()) std::copy(row.begin(), row.end(), out.matrix.row(i).begin());
  }
  return out;
}

enum class CorpusFormat {
  tsv,           // label (-1 or 1) <TAB> text
  mr,            // label (0 or 1) <SPACE> text
  polarity_csv,  // CSV: label (1 -> -1, 2 -> +1), text
  ag_csv,        // CSV: class (1=World -> -1, 2=Sports -> +1, others filtered), title, description
};

inline CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "tsv") return CorpusFormat::tsv;
  if (name == "mr") return CorpusFormat::mr;
  if (name == "polarity-csv") return CorpusFormat::polarity_csv;
  if (name == "ag-csv") return CorpusFormat::ag_csv;
  throw std::runtime_error("unknown corpus format '" + std::string(name) +
                           "' (expected tsv, mr, polarity-csv, ag-csv)");
}

struct Corpus {
  std::vector<Document> documents;
  std::size_t malformed_rows = 0;
  std::size_t filtered_rows = 0;  // valid rows excluded by a binary class filter
};

namespace detail {

/// One CSV record: fields split on commas, double quotes wrap fields,
/// doubled quotes inside a quoted field mean a literal quote. Quoted fields
/// must not span lines. Returns nullopt for structurally broken rows.
inline std::optional<std::vector<std::string>> parse_csv_row(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  std::size_t i = 0;
  while (i <= line.size()) {
    if (i == line.size()) {
      if (quoted) return std::nullopt;  // unterminated quote
      fields.push_back(std::move(field));
      break;
    }
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
    ++i;
  }
  return fields;
}

}  // namespace detail

/// Rows in file order; malformed rows are counted and skipped; class-filter
/// exclusions (ag-csv classes 3/4) are counted separately. Empty text is a
/// valid empty-token document.
inline Corpus load_corpus(std::istream& in, CorpusFormat format) {
  Corpus corpus;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::optional<int> label;
    std::string_view text;
    std::vector<std::string> csv_fields;
    switch (format) {
      case CorpusFormat::tsv: {
        const auto tab = line.find('\t');
        const std::string_view field(line.data(), tab == std::string::npos ? line.size() : tab);
        if (field == "-1" || field == "+1" || field == "1") {
          label = field == "-1" ? -1 : +1;
          if (tab != std::string::npos) text = std::string_view(line).substr(tab + 1);
        }
        break;
      }
      case CorpusFormat::mr: {
        const auto space = line.find(' ');
        const std::string_view field(line.data(),
                                     space == std::string::npos ? line.size() : space);
        if (field == "0" || field == "1") {
          label = field == "0" ? -1 : +1;
          if (space != std::string::npos) text = std::string_view(line).substr(space + 1);
        }
        break;
      }
      case CorpusFormat::polarity_csv:
      case CorpusFormat::ag_csv: {
        auto fields = detail::parse_csv_row(line);
        if (!fields || fields->size() < 2) break;
        csv_fields = *std::move(fields);
        if (format == CorpusFormat::polarity_csv) {
          if (csv_fields[0] == "1")
            label = -1;
          else if (csv_fields[0] == "2")
            label = +1;
          text = csv_fields[1];
        } else {
          if (csv_fields[0] == "1" || csv_fields[0] == "2") {
            label = csv_fields[0] == "1" ? -1 : +1;
            if (csv_fields.size() >= 3) {
              csv_fields[1] += ' ';
              csv_fields[1] += csv_fields[2];
            }
            text = csv_fields[1];
          } else if (csv_fields[0] == "3" || csv_fields[0] == "4") {
            ++corpus.filtered_rows;
            continue;
          }
        }
        break;
      }
    }
    if (!label) {
      ++corpus.malformed_rows;
      continue;
    }
    corpus.documents.push_back({tokenize(text), *label});
  }
  if (corpus.documents.empty()) throw std::runtime_error("load_corpus: no usable rows");
  return corpus;
}

inline Corpus load_corpus(const std::string& path, CorpusFormat format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_corpus: cannot open " + path);
  return load_corpus(in, format);
}

struct CorpusStats {
  std::size_t documents = 0;
  double mean_tokens = 0.0;
  double oov_rate = 0.0;  // OOV tokens / all tokens (0 when the corpus has no tokens)
};

inline CorpusStats corpus_stats(const Corpus& corpus, const EmbeddingTable& table) {
  CorpusStats stats;
  stats.documents = corpus.documents.size();
  std::size_t tokens = 0, oov = 0;
  for (const Document& doc : corpus.documents) {
    tokens += doc.tokens.size();
    for (const std::string& t : doc.tokens)
      if (!table.row_of(t)) ++oov;
  }
  if (stats.documents > 0)
    stats.mean_tokens = static_cast<double>(tokens) / static_cast<double>(stats.documents);
  if (tokens > 0) stats.oov_rate = static_cast<double>(oov) / static_cast<double>(tokens);
  return stats;
}

/// Averaged-vector features for the whole corpus (the SignNetwork path).
inline LabeledDataset averaged_dataset(const Corpus& corpus, const EmbeddingTable& table) {
  Matrix features(corpus.documents.size(), table.dim());
  std::vector<int> labels(corpus.documents.size());
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    const auto [mean, oov] = average_vector(corpus.documents[i], table);
    std::copy(mean.begin(), mean.end(), features.row(i).begin());
    labels[i] = corpus.documents[i].label;
  }
  return {std::move(features), std::move(labels)};
}

/// Stacked-matrix features for the whole corpus (the ConvSignModel path).
inline std::pair<std::vector<DocMatrix>, std::vector<int>> stacked_dataset(
    const Corpus& corpus, const EmbeddingTable& table, std::size_t max_len) {
  std::vector<DocMatrix> matrices;
  matrices.reserve(corpus.documents.size());
  std::vector<int> labels;
  labels.reserve(corpus.documents.size());
  for (const Document& doc : corpus.documents) {
    matrices.push_back(stack_matrix(doc, table, max_len));
    labels.push_back(doc.label);
  }
  return {std::move(matrices), std::move(labels)};
}

}  // namespace zeroone

#endif  // ZEROONE_TEXT_HPP
