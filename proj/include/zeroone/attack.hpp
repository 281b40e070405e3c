#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "zeroone/ensemble.hpp"
#include "zeroone/parallel.hpp"
#include "zeroone/text.hpp"

namespace zeroone {

// Black-box query surface: the attacker only ever sees vote probabilities.
// Every query() call bumps the counter by exactly one.
struct MeteredTarget {
  std::function<VoteResult(const std::vector<std::string>&)> model;
  std::uint64_t query_count = 0;

  VoteResult query(const std::vector<std::string>& tokens) {
    ++query_count;
    return model(tokens);
  }
};

inline double true_class_probability(const VoteResult& r, int label) {
  if (label != +1 && label != -1) throw std::invalid_argument("label must be -1 or +1");
  return label == +1 ? r.probability_positive : 1.0 - r.probability_positive;
}

struct Synonym {
  std::string token;
  double similarity = 0.0;

  friend bool operator==(const Synonym&, const Synonym&) = default;
};

// Per-token top-N nearest neighbors by cosine similarity, each >= the
// similarity floor, sorted by (similarity desc, token asc). Tokens whose
// vector has zero norm get no list and never appear as candidates.
class SynonymIndex {
 public:
  using Map = std::unordered_map<std::string, std::vector<Synonym>, detail::TransparentHash,
                                 std::equal_to<>>;

  SynonymIndex() = default;
  explicit SynonymIndex(Map lists) : lists_(std::move(lists)) {}

  const std::vector<Synonym>& lookup(std::string_view token) const {
    const auto it = lists_.find(token);
    if (it == lists_.end()) {
      static const std::vector<Synonym> empty;
      return empty;
    }
    return it->second;
  }

  const Map& lists() const { return lists_; }

 private:
  Map lists_;
};

namespace detail {

inline std::vector<double> row_norms(const EmbeddingTable& table) {
  std::vector<double> norms(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto row = table.row(i);
    norms[i] = std::sqrt(std::inner_product(row.begin(), row.end(), row.begin(), 0.0));
  }
  return norms;
}

inline std::vector<Synonym> neighbors_of(const EmbeddingTable& table,
                                         std::span<const double> norms, std::size_t query,
                                         std::size_t max_candidates, double min_similarity) {
  std::vector<Synonym> found;
  if (norms[query] == 0.0) return found;
  const auto q = table.row(query);
  for (std::size_t j = 0; j < table.size(); ++j) {
    if (j == query || norms[j] == 0.0) continue;
    const auto v = table.row(j);
    const double dot = std::inner_product(q.begin(), q.end(), v.begin(), 0.0);
    const double sim = dot / (norms[query] * norms[j]);
    if (sim >= min_similarity) found.push_back({std::string(table.token(j)), sim});
  }
  std::sort(found.begin(), found.end(), [](const Synonym& a, const Synonym& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.token < b.token;
  });
  if (found.size() > max_candidates) found.resize(max_candidates);
  return found;
}

}  // namespace detail

// Exact all-pairs top-N build over the whole table.
inline SynonymIndex build_synonym_index(const EmbeddingTable& table, std::size_t max_candidates,
                                        double min_similarity) {
  if (table.size() == 0) throw std::invalid_argument("synonym index needs a nonempty table");
  const std::vector<double> norms = detail::row_norms(table);
  std::vector<std::vector<Synonym>> lists(table.size());
  parallel_for(table.size(), [&](std::size_t i) {
    lists[i] = detail::neighbors_of(table, norms, i, max_candidates, min_similarity);
  });
  SynonymIndex::Map map;
  map.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i)
    map.emplace(std::string(table.token(i)), std::move(lists[i]));
  return SynonymIndex(std::move(map));
}

// Same semantics restricted to query tokens from `vocabulary` (candidates
// still come from the whole table); saves the quadratic scan when only the
// attacked documents' tokens matter.
inline SynonymIndex build_synonym_index(const EmbeddingTable& table,
                                        const std::vector<std::string>& vocabulary,
                                        std::size_t max_candidates, double min_similarity) {
  if (table.size() == 0) throw std::invalid_argument("synonym index needs a nonempty table");
  const std::vector<double> norms = detail::row_norms(table);
  std::vector<std::size_t> rows;
  for (const std::string& token : vocabulary) {
    const auto row = table.row_of(token);
    if (row.has_value()) rows.push_back(*row);
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  std::vector<std::vector<Synonym>> lists(rows.size());
  parallel_for(rows.size(), [&](std::size_t i) {
    lists[i] = detail::neighbors_of(table, norms, rows[i], max_candidates, min_similarity);
  });
  SynonymIndex::Map map;
  map.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    map.emplace(std::string(table.token(rows[i])), std::move(lists[i]));
  return SynonymIndex(std::move(map));
}

struct AttackConfig {
  std::size_t max_candidates = 50;
  double min_similarity = 0.5;
  double max_perturb = 1.0;

  void validate() const {
    if (max_candidates == 0) throw std::invalid_argument("max_candidates must be positive");
    if (!std::isfinite(min_similarity)) throw std::invalid_argument("min_similarity not finite");
    if (!(max_perturb > 0.0)) throw std::invalid_argument("max_perturb must be positive");
  }
};

struct Substitution {
  std::size_t position = 0;
  std::string old_token;
  std::string new_token;

  friend bool operator==(const Substitution&, const Substitution&) = default;
};

struct AttackOutcome {
  int original_label = 0;  // prediction on the intact document
  int final_label = 0;     // prediction on the document as returned
  bool success = false;
  std::vector<Substitution> substitutions;
  std::uint64_t queries = 0;

  friend bool operator==(const AttackOutcome&, const AttackOutcome&) = default;
};

// Deletion-based word importance: baseline true-class probability minus the
// probability with token i removed. Costs exactly len+1 queries (1 for an
// empty document).
inline std::vector<double> importance_scores(const Document& doc, MeteredTarget& target) {
  const double base = true_class_probability(target.query(doc.tokens), doc.label);
  std::vector<double> scores(doc.tokens.size());
  std::vector<std::string> reduced;
  for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
    reduced.clear();
    reduced.reserve(doc.tokens.size() - 1);
    for (std::size_t j = 0; j < doc.tokens.size(); ++j)
      if (j != i) reduced.push_back(doc.tokens[j]);
    scores[i] = base - true_class_probability(target.query(reduced), doc.label);
  }
  return scores;
}

// Greedy word-substitution attack. Positions are visited by descending
// importance (stable on ties); at each one every synonym candidate is
// queried in place. The first label-flipping candidate is committed and
// ends the attack; otherwise the best strict decrease in true-class
// probability is committed before moving on. Attacking another position is
// skipped once it would push the substituted fraction past max_perturb.
inline AttackOutcome attack_document(const Document& doc, MeteredTarget& target,
                                     const SynonymIndex& index, const AttackConfig& config) {
  config.validate();
  AttackOutcome outcome;
  const std::uint64_t start_count = target.query_count;
  const VoteResult clean = target.query(doc.tokens);
  outcome.original_label = clean.label;
  outcome.final_label = clean.label;
  if (clean.label != doc.label || doc.tokens.empty()) {
    outcome.queries = target.query_count - start_count;
    return outcome;
  }

  const std::vector<double> importance = importance_scores(doc, target);
  std::vector<std::size_t> order(doc.tokens.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return importance[a] > importance[b]; });

  std::vector<std::string> working = doc.tokens;
  double best_probability = true_class_probability(clean, doc.label);
  const double len = static_cast<double>(doc.tokens.size());

  for (const std::size_t pos : order) {
    if ((static_cast<double>(outcome.substitutions.size()) + 1.0) / len > config.max_perturb)
      break;
    const std::string original = working[pos];
    const Synonym* best = nullptr;
    double best_seen = best_probability;
    for (const Synonym& candidate : index.lookup(original)) {
      working[pos] = candidate.token;
      const VoteResult r = target.query(working);
      if (r.label != doc.label) {
        outcome.substitutions.push_back({pos, original, candidate.token});
        outcome.final_label = r.label;
        outcome.success = true;
        outcome.queries = target.query_count - start_count;
        return outcome;
      }
      const double p = true_class_probability(r, doc.label);
      if (p < best_seen) {
        best_seen = p;
        best = &candidate;
      }
    }
    if (best != nullptr) {
      working[pos] = best->token;
      outcome.substitutions.push_back({pos, original, best->token});
      best_probability = best_seen;
    } else {
      working[pos] = original;
    }
  }
  outcome.queries = target.query_count - start_count;
  return outcome;
}

struct AttackReport {
  double clean_accuracy = 0.0;
  double after_attack_accuracy = 0.0;
  double mean_queries = 0.0;
  std::vector<AttackOutcome> outcomes;
};

// Runs the attack over a corpus. Each document gets its own fresh metered
// wrapper (the counter is part of the per-document semantics); documents
// run in parallel and merge by index.
inline AttackReport evaluate(const std::function<VoteResult(const std::vector<std::string>&)>& model,
                             const std::vector<Document>& corpus, const SynonymIndex& index,
                             const AttackConfig& config) {
  if (corpus.empty()) throw std::invalid_argument("attack corpus is empty");
  config.validate();
  AttackReport report;
  report.outcomes.resize(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t i) {
    MeteredTarget target{model};
    report.outcomes[i] = attack_document(corpus[i], target, index, config);
  });
  std::size_t clean = 0;
  std::size_t after = 0;
  std::uint64_t queries = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const AttackOutcome& o = report.outcomes[i];
    const bool clean_correct = o.original_label == corpus[i].label;
    clean += clean_correct;
    after += clean_correct && !o.success;
    queries += o.queries;
  }
  report.clean_accuracy = static_cast<double>(clean) / static_cast<double>(corpus.size());
  report.after_attack_accuracy = static_cast<double>(after) / static_cast<double>(corpus.size());
  report.mean_queries = static_cast<double>(queries) / static_cast<double>(corpus.size());
  return report;
}

}  // namespace zeroone
