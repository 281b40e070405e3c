#ifndef ZEROONE_SCD_HPP
#define ZEROONE_SCD_HPP

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "zeroone/core.hpp"
#include "zeroone/parallel.hpp"
#include "zeroone/random.hpp"
#include "zeroone/threshold_scan.hpp"

namespace zeroone {

struct TrainConfig {
  std::size_t epochs = 1000;
  double learning_rate = 0.1;  // ignored in binary mode
  double batch_fraction = 0.75;
  std::size_t feature_pool_size = 128;  // effective pool: min(this, node dimension)
  std::size_t hidden_nodes = 20;
  std::uint64_t seed = 0;
  bool binary_mode = false;

  void validate() const {
    if (!binary_mode && !(learning_rate > 0.0))
      throw std::invalid_argument("TrainConfig: learning_rate must be positive");
    if (!(batch_fraction > 0.0) || batch_fraction > 1.0)
      throw std::invalid_argument("TrainConfig: batch_fraction must be in (0,1]");
    if (feature_pool_size == 0)
      throw std::invalid_argument("TrainConfig: feature_pool_size must be positive");
    if (hidden_nodes == 0) throw std::invalid_argument("TrainConfig: hidden_nodes must be positive");
  }
};

/// Identifies the coordinate-descent target: the output node or hidden
/// column j.
struct NodeRef {
  bool is_output = false;
  std::size_t hidden_index = 0;

  static NodeRef output() { return {true, 0}; }
  static NodeRef hidden(std::size_t j) { return {false, j}; }

  friend bool operator==(const NodeRef&, const NodeRef&) = default;
};

/// One evaluated perturbation: weight `feature_index` of the node changed
/// by `delta`, with the node bias re-optimized to `new_bias` against the
/// batch.
struct CandidateUpdate {
  NodeRef node;
  std::size_t feature_index = 0;
  double delta = 0.0;
  double new_bias = 0.0;
  std::uint64_t batch_mismatches = 0;
  double batch_loss = 0.0;
};

struct StepResult {
  SignNetwork network;
  bool accepted = false;
  CandidateUpdate best;  // the batch-loss argmin candidate that was tried
  std::size_t candidates_evaluated = 0;
  std::uint64_t full_mismatches = 0;  // of the returned network
  double full_loss = 0.0;
};

/// Stratified batch: floor(fraction * class size) indices per class, drawn
/// without replacement, class -1 first then +1.
inline std::vector<std::size_t> stratified_batch_indices(std::span<const int> labels,
                                                         double fraction, Rng& rng) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw std::invalid_argument("stratified_batch_indices: fraction must be in (0,1]");
  std::vector<std::size_t> batch;
  for (int cls : {-1, +1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) members.push_back(i);
    if (members.empty())
      throw std::invalid_argument("stratified_batch_indices: class absent from data");
    const auto take = static_cast<std::size_t>(fraction * static_cast<double>(members.size()));
    if (take == 0)
      throw std::invalid_argument("stratified_batch_indices: fraction*class_size < 1");
    for (std::size_t pos : sample_without_replacement(members.size(), take, rng))
      batch.push_back(members[pos]);
  }
  return batch;
}

/// Weights i.i.d. N(0,1) (mapped through sign_activation in binary mode),
/// hidden biases at the negated median projection of the training data,
/// output bias from the exact scan over the initial hidden representations.
inline SignNetwork init_network(const LabeledDataset& data, const TrainConfig& config, Rng& rng) {
  config.validate();
  const std::size_t d = data.dim();
  const std::size_t h = config.hidden_nodes;
  const std::size_t n = data.size();

  SignNetwork net;
  net.binary_mode = config.binary_mode;
  net.hidden_weights = Matrix(d, h);
  fill_normal(rng, net.hidden_weights.data());
  net.output_weights.resize(h);
  fill_normal(rng, net.output_weights);
  if (config.binary_mode) {
    for (double& w : net.hidden_weights.data()) w = sign_activation(w);
    for (double& w : net.output_weights) w = sign_activation(w);
  }

  net.hidden_biases.resize(h);
  std::vector<double> projections(n);
  for (std::size_t j = 0; j < h; ++j) {
    for (std::size_t i = 0; i < n; ++i) projections[i] = node_projection(net, j, data.row(i));
    net.hidden_biases[j] = -median(projections);
  }

  std::vector<double> sums(n);
  parallel_for(n, [&](std::size_t i) {
    double acc = 0.0;
    const auto x = data.row(i);
    for (std::size_t j = 0; j < h; ++j) {
      const int s = detail::raw_sign(node_projection(net, j, x) + net.hidden_biases[j]);
      acc += net.output_weights[j] * s;
    }
    sums[i] = acc;
  });
  net.output_bias = optimal_output_bias(sums, data.labels()).bias;
  net.validate();
  return net;
}

inline SignNetwork init_network(const LabeledDataset& data, const TrainConfig& config) {
  Rng rng(config.seed);
  return init_network(data, config, rng);
}

namespace detail {

struct Perturbation {
  std::size_t feature = 0;
  double delta = 0.0;
};

// Candidate list in scan order: pool draw order, +eta before -eta; binary
// mode emits one sign flip per feature.
inline std::vector<Perturbation> candidate_list(std::span<const std::size_t> pool,
                                                std::span<const double> weights,
                                                const TrainConfig& config) {
  std::vector<Perturbation> out;
  out.reserve(pool.size() * (config.binary_mode ? 1 : 2));
  for (std::size_t f : pool) {
    if (config.binary_mode) {
      out.push_back({f, -2.0 * weights[f]});
    } else {
      out.push_back({f, +config.learning_rate});
      out.push_back({f, -config.learning_rate});
    }
  }
  return out;
}

}  // namespace detail

/// One coordinate-descent step on `node`: draw a feature pool, evaluate
/// every +-eta perturbation (sign flip in binary mode) with the node bias
/// re-optimized against the batch, apply the batch-loss argmin (first in
/// scan order on ties), and keep it only if the full-data loss strictly
/// decreases. The input network is never mutated, so a rejected step
/// returns it bitwise unchanged.
inline StepResult coordinate_descent_step(const SignNetwork& net, NodeRef node,
                                          const LabeledDataset& batch, const LabeledDataset& full,
                                          const TrainConfig& config, Rng& rng,
                                          std::optional<std::uint64_t> full_mismatches_before = {}) {
  net.validate();
  config.validate();
  if (batch.dim() != net.input_dim() || full.dim() != net.input_dim())
    throw std::invalid_argument("coordinate_descent_step: dataset dimension mismatch");
  const std::size_t h = net.hidden_nodes();
  const std::size_t d = net.input_dim();
  if (!node.is_output && node.hidden_index >= h)
    throw std::invalid_argument("coordinate_descent_step: hidden index out of range");

  const std::size_t n = batch.size();
  const std::size_t node_dim = node.is_output ? h : d;
  const std::vector<std::size_t> pool =
      sample_without_replacement(node_dim, std::min(config.feature_pool_size, node_dim), rng);

  // Per-sample base values that candidate evaluation perturbs incrementally.
  std::vector<double> base(n);        // output sums (no bias) | node projections
  std::vector<double> rest;           // hidden step: output pre-activation minus this node
  std::vector<double> hidden_signs;   // output step: sign of node j for sample i, n*h
  const std::size_t j = node.hidden_index;
  if (node.is_output) {
    hidden_signs.resize(n * h);
    parallel_for(n, [&](std::size_t i) {
      const auto x = batch.row(i);
      double acc = 0.0;
      for (std::size_t k = 0; k < h; ++k) {
        const double s = detail::raw_sign(node_projection(net, k, x) + net.hidden_biases[k]);
        hidden_signs[i * h + k] = s;
        acc += net.output_weights[k] * s;
      }
      base[i] = acc;
    });
  } else {
    rest.resize(n);
    parallel_for(n, [&](std::size_t i) {
      const auto x = batch.row(i);
      double acc = net.output_bias;
      for (std::size_t k = 0; k < h; ++k) {
        if (k == j) continue;
        const int s = detail::raw_sign(node_projection(net, k, x) + net.hidden_biases[k]);
        acc += net.output_weights[k] * s;
      }
      rest[i] = acc;
      base[i] = node_projection(net, j, x);
    });
  }

  std::vector<double> hidden_column;
  std::span<const double> node_weights;
  if (node.is_output) {
    node_weights = net.output_weights;
  } else {
    hidden_column.resize(d);
    for (std::size_t f = 0; f < d; ++f) hidden_column[f] = net.hidden_weights(f, j);
    node_weights = hidden_column;
  }
  const std::vector<detail::Perturbation> candidates =
      detail::candidate_list(pool, node_weights, config);

  std::vector<BiasScan> scans(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t c) {
    const auto [f, delta] = candidates[c];
    std::vector<double> values(n);
    if (node.is_output) {
      for (std::size_t i = 0; i < n; ++i) values[i] = base[i] + delta * hidden_signs[i * h + f];
      scans[c] = optimal_output_bias(values, batch.labels());
    } else {
      for (std::size_t i = 0; i < n; ++i) values[i] = base[i] + delta * batch.features()(i, f);
      scans[c] = optimal_hidden_bias(values, rest, net.output_weights[j], batch.labels());
    }
  });

  std::size_t best_c = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c)
    if (scans[c].mismatches < scans[best_c].mismatches) best_c = c;

  StepResult result;
  result.candidates_evaluated = candidates.size();
  result.best = {node, candidates[best_c].feature, candidates[best_c].delta, scans[best_c].bias,
                 scans[best_c].mismatches, scans[best_c].loss};

  SignNetwork updated = net;
  if (node.is_output) {
    updated.output_weights[candidates[best_c].feature] += candidates[best_c].delta;
    updated.output_bias = scans[best_c].bias;
  } else {
    updated.hidden_weights(candidates[best_c].feature, j) += candidates[best_c].delta;
    updated.hidden_biases[j] = scans[best_c].bias;
  }

  const std::uint64_t before =
      full_mismatches_before ? *full_mismatches_before : zero_one_mismatches(net, full);
  const std::uint64_t after = zero_one_mismatches(updated, full);
  if (after < before) {
    result.network = std::move(updated);
    result.accepted = true;
    result.full_mismatches = after;
  } else {
    result.network = net;
    result.accepted = false;
    result.full_mismatches = before;
  }
  result.full_loss =
      static_cast<double>(result.full_mismatches) / static_cast<double>(full.size());
  return result;
}

struct EpochResult {
  SignNetwork network;
  StepResult output_step;
  StepResult hidden_step;
  std::size_t hidden_index = 0;
};

/// One epoch: stratified batch, output-node step, then one uniformly
/// chosen hidden-node step, both judged against the full data.
inline EpochResult train_epoch(const SignNetwork& net, const LabeledDataset& data,
                               const TrainConfig& config, Rng& rng,
                               std::optional<std::uint64_t> full_mismatches_before = {}) {
  if (!data.has_both_classes()) throw std::invalid_argument("train_epoch: class absent from data");
  const std::vector<std::size_t> indices =
      stratified_batch_indices(data.labels(), config.batch_fraction, rng);
  const LabeledDataset batch = data.subset(indices);

  EpochResult result;
  result.output_step = coordinate_descent_step(net, NodeRef::output(), batch, data, config, rng,
                                               full_mismatches_before);
  result.hidden_index = uniform_index(net.hidden_nodes(), rng);
  result.hidden_step =
      coordinate_descent_step(result.output_step.network, NodeRef::hidden(result.hidden_index),
                              batch, data, config, rng, result.output_step.full_mismatches);
  result.network = result.hidden_step.network;
  return result;
}

struct TrainLogEntry {
  std::size_t epoch = 0;  // 1-based
  NodeRef node;
  bool accepted = false;
  std::uint64_t full_mismatches = 0;
  double full_loss = 0.0;
};

struct TrainResult {
  SignNetwork network;
  std::vector<TrainLogEntry> log;  // two entries per epoch: output step, hidden step
};

inline TrainResult train(const LabeledDataset& data, const TrainConfig& config) {
  config.validate();
  if (!data.has_both_classes()) throw std::invalid_argument("train: class absent from data");
  Rng rng(config.seed);
  TrainResult result;
  result.network = init_network(data, config, rng);
  result.log.reserve(2 * config.epochs);
  std::uint64_t current = zero_one_mismatches(result.network, data);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochResult er = train_epoch(result.network, data, config, rng, current);
    result.log.push_back({epoch, NodeRef::output(), er.output_step.accepted,
                          er.output_step.full_mismatches, er.output_step.full_loss});
    result.log.push_back({epoch, NodeRef::hidden(er.hidden_index), er.hidden_step.accepted,
                          er.hidden_step.full_mismatches, er.hidden_step.full_loss});
    result.network = std::move(er.network);
    current = er.hidden_step.full_mismatches;
  }
  return result;
}

}  // namespace zeroone

#endif  // ZEROONE_SCD_HPP
