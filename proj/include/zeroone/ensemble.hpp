#ifndef ZEROONE_ENSEMBLE_HPP
#define ZEROONE_ENSEMBLE_HPP

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "zeroone/core.hpp"
#include "zeroone/scd.hpp"

namespace zeroone {

/// k independently trained models of one type sharing an input representation.
template <typename Model>
struct Ensemble {
  std::vector<Model> members;

  std::size_t size() const { return members.size(); }
};

struct VoteResult {
  std::size_t positive_votes = 0;
  std::size_t votes = 0;
  double probability_positive = 0.0;  // positive_votes / votes
  int label = +1;

  friend bool operator==(const VoteResult&, const VoteResult&) = default;
};

/// Majority vote over the members; ties (even k) go to +1. Works for any
/// model type with an ADL-visible predict(model, x) -> {-1,+1}.
template <typename Model, typename Input>
VoteResult vote(const Ensemble<Model>& ensemble, const Input& x) {
  const std::size_t k = ensemble.members.size();
  if (k == 0) throw std::invalid_argument("vote: empty ensemble");
  VoteResult result;
  result.votes = k;
  for (const Model& member : ensemble.members)
    if (predict(member, x) == +1) ++result.positive_votes;
  result.probability_positive =
      static_cast<double>(result.positive_votes) / static_cast<double>(k);
  result.label = 2 * result.positive_votes >= k ? +1 : -1;
  return result;
}

/// k training runs with seeds config.seed + 0 ... + (k-1), full logs kept.
inline std::vector<TrainResult> train_members(const LabeledDataset& data, TrainConfig config,
                                              std::size_t k) {
  if (k == 0) throw std::invalid_argument("train_members: k must be positive");
  const std::uint64_t base_seed = config.seed;
  std::vector<TrainResult> members;
  members.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    config.seed = base_seed + i;
    members.push_back(train(data, config));
  }
  return members;
}

inline Ensemble<SignNetwork> train_ensemble(const LabeledDataset& data, const TrainConfig& config,
                                            std::size_t k) {
  Ensemble<SignNetwork> ensemble;
  ensemble.members.reserve(k);
  for (TrainResult& r : train_members(data, config, k))
    ensemble.members.push_back(std::move(r.network));
  return ensemble;
}

/// Fraction of samples whose majority-vote label matches the dataset label.
template <typename Model>
double ensemble_accuracy(const Ensemble<Model>& ensemble, const LabeledDataset& data) {
  const std::uint64_t correct = parallel_count(data.size(), [&](std::size_t i) -> std::uint64_t {
    return vote(ensemble, data.row(i)).label == data.label(i) ? 1u : 0u;
  });
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace zeroone

#endif  // ZEROONE_ENSEMBLE_HPP
