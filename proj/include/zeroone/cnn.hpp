#ifndef ZEROONE_CNN_HPP
#define ZEROONE_CNN_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "zeroone/core.hpp"
#include "zeroone/ensemble.hpp"
#include "zeroone/parallel.hpp"
#include "zeroone/random.hpp"
#include "zeroone/scd.hpp"
#include "zeroone/text.hpp"
#include "zeroone/threshold_scan.hpp"

namespace zeroone {

enum class PoolingMode {
  signed_average,  // mean of the +-1 signs
  positive_sum,    // count of +1 signs only
};

/// Sign-activation text convnet: F filters slide over the stacked document
/// matrix, each filter's sign sequence is pooled globally, and a final sign
/// node reads the pooled vector. Thresholds are stored as additive biases,
/// as in SignNetwork.
struct ConvSignModel {
  std::vector<Matrix> filters;        // filter f: width_f x d
  std::vector<double> filter_biases;  // F
  PoolingMode pooling = PoolingMode::signed_average;
  std::vector<double> output_weights;  // F
  double output_bias = 0.0;

  std::size_t num_filters() const { return filters.size(); }
  std::size_t embedding_dim() const { return filters.empty() ? 0 : filters.front().cols(); }

  void validate() const {
    const std::size_t F = filters.size();
    if (F == 0) throw std::invalid_argument("ConvSignModel: no filters");
    if (filter_biases.size() != F || output_weights.size() != F)
      throw std::invalid_argument("ConvSignModel: inconsistent dimensions");
    const std::size_t d = filters.front().cols();
    for (const Matrix& f : filters) {
      if (f.rows() == 0 || f.cols() != d)
        throw std::invalid_argument("ConvSignModel: bad filter shape");
      if (!all_finite(f.data())) throw std::invalid_argument("ConvSignModel: non-finite filter");
    }
    if (!all_finite(filter_biases) || !all_finite(output_weights) || !std::isfinite(output_bias))
      throw std::invalid_argument("ConvSignModel: non-finite parameter");
  }

  friend bool operator==(const ConvSignModel&, const ConvSignModel&) = default;
};

/// Signs at every valid convolution position. Only rows below valid_len are
/// read, so padding never leaks in; documents shorter than the filter give
/// an empty sequence.
inline std::vector<int> conv_sign(const DocMatrix& doc, const Matrix& filter, double bias) {
  const std::size_t w = filter.rows();
  const std::size_t d = filter.cols();
  if (doc.matrix.cols() != d) throw std::invalid_argument("conv_sign: dimension mismatch");
  if (doc.valid_len < w) return {};
  std::vector<int> signs(doc.valid_len - w + 1);
  for (std::size_t p = 0; p < signs.size(); ++p) {
    double acc = bias;
    for (std::size_t r = 0; r < w; ++r) {
      const auto doc_row = doc.matrix.row(p + r);
      const auto filt_row = filter.row(r);
      for (std::size_t c = 0; c < d; ++c) acc += filt_row[c] * doc_row[c];
    }
    signs[p] = detail::raw_sign(acc);
  }
  return signs;
}

/// Mean of a +-1 sequence: exact integer sum, one division. Empty -> 0.
inline double pool_signed_average(std::span<const int> signs) {
  if (signs.empty()) return 0.0;
  const std::int64_t sum = std::accumulate(signs.begin(), signs.end(), std::int64_t{0});
  return static_cast<double>(sum) / static_cast<double>(signs.size());
}

/// Count of +1 entries ("only sum the 1's"). Empty -> 0.
inline std::uint64_t pool_positive_sum(std::span<const int> signs) {
  return static_cast<std::uint64_t>(std::count(signs.begin(), signs.end(), +1));
}

namespace detail {

// Pooled value from the positive count; the signed average is the same
// integer expression (2*positives - length) divided once, so train-time
// incremental pooling matches forward() bitwise.
inline double pooled_from_count(std::uint64_t positives, std::uint64_t length, PoolingMode mode) {
  if (length == 0) return 0.0;
  if (mode == PoolingMode::positive_sum) return static_cast<double>(positives);
  const auto sum = 2 * static_cast<std::int64_t>(positives) - static_cast<std::int64_t>(length);
  return static_cast<double>(sum) / static_cast<double>(length);
}

}  // namespace detail

inline std::vector<double> pooled_features(const ConvSignModel& model, const DocMatrix& doc) {
  std::vector<double> pooled(model.num_filters());
  for (std::size_t f = 0; f < pooled.size(); ++f) {
    const std::vector<int> signs = conv_sign(doc, model.filters[f], model.filter_biases[f]);
    pooled[f] = detail::pooled_from_count(pool_positive_sum(signs), signs.size(), model.pooling);
  }
  return pooled;
}

inline int forward(const ConvSignModel& model, const DocMatrix& doc) {
  const std::vector<double> pooled = pooled_features(model, doc);
  double acc = model.output_bias;
  for (std::size_t f = 0; f < pooled.size(); ++f) acc += model.output_weights[f] * pooled[f];
  return sign_activation(acc);
}

/// predict() alias so Ensemble<ConvSignModel> works with vote().
inline int predict(const ConvSignModel& model, const DocMatrix& doc) {
  return forward(model, doc);
}

/// Stacked-matrix dataset for conv training. Documents are stored once;
/// batches reference them by index.
class ConvDataset {
 public:
  ConvDataset(std::vector<DocMatrix> docs, std::vector<int> labels)
      : docs_(std::move(docs)), labels_(std::move(labels)) {
    if (docs_.empty()) throw std::invalid_argument("ConvDataset: no documents");
    if (labels_.size() != docs_.size())
      throw std::invalid_argument("ConvDataset: label count != document count");
    const std::size_t max_len = docs_.front().matrix.rows();
    const std::size_t d = docs_.front().matrix.cols();
    for (const DocMatrix& doc : docs_) {
      if (doc.matrix.rows() != max_len || doc.matrix.cols() != d || doc.valid_len > max_len)
        throw std::invalid_argument("ConvDataset: inconsistent document shape");
    }
    for (int y : labels_)
      if (y != -1 && y != +1) throw std::invalid_argument("ConvDataset: label not in {-1,+1}");
  }

  std::size_t size() const { return docs_.size(); }
  std::size_t embedding_dim() const { return docs_.front().matrix.cols(); }
  std::size_t max_len() const { return docs_.front().matrix.rows(); }
  const DocMatrix& doc(std::size_t i) const { return docs_[i]; }
  const std::vector<int>& labels() const { return labels_; }
  int label(std::size_t i) const { return labels_[i]; }

  std::size_t class_count(int label) const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
  }
  bool has_both_classes() const { return class_count(-1) > 0 && class_count(+1) > 0; }

 private:
  std::vector<DocMatrix> docs_;
  std::vector<int> labels_;
};

inline std::uint64_t conv_mismatches(const ConvSignModel& model, const ConvDataset& data) {
  if (data.embedding_dim() != model.embedding_dim())
    throw std::invalid_argument("conv_mismatches: dimension mismatch");
  return parallel_count(data.size(), [&](std::size_t i) -> std::uint64_t {
    return forward(model, data.doc(i)) != data.label(i) ? 1u : 0u;
  });
}

inline double conv_loss(const ConvSignModel& model, const ConvDataset& data) {
  return static_cast<double>(conv_mismatches(model, data)) / static_cast<double>(data.size());
}

struct ConvConfig {
  std::size_t epochs = 1000;
  double learning_rate = 0.1;
  double batch_fraction = 0.75;
  std::size_t feature_pool_size = 32;  // coordinates perturbed per step
  std::size_t num_filters = 32;
  std::vector<std::size_t> filter_widths = {3};  // filter i gets widths[i % size]
  std::uint64_t seed = 0;
  PoolingMode pooling = PoolingMode::signed_average;

  void validate() const {
    if (!(learning_rate > 0.0))
      throw std::invalid_argument("ConvConfig: learning_rate must be positive");
    if (!(batch_fraction > 0.0) || batch_fraction > 1.0)
      throw std::invalid_argument("ConvConfig: batch_fraction must be in (0,1]");
    if (feature_pool_size == 0)
      throw std::invalid_argument("ConvConfig: feature_pool_size must be positive");
    if (num_filters == 0) throw std::invalid_argument("ConvConfig: num_filters must be positive");
    if (filter_widths.empty())
      throw std::invalid_argument("ConvConfig: filter_widths must be nonempty");
    for (std::size_t w : filter_widths)
      if (w == 0) throw std::invalid_argument("ConvConfig: filter width must be positive");
  }
};

/// Exact optimal bias for one filter, through the whole network. The
/// flattened pre-activation values (doc-major, doc i owning
/// [offsets[i], offsets[i+1])) are swept in ascending threshold order; each
/// document's positive count, hence its pooled value and output sign, is
/// updated incrementally as positions stop firing.
inline BiasScan optimal_filter_bias(std::span<const double> values,
                                    std::span<const std::size_t> offsets,
                                    std::span<const double> rest_outputs, double filter_weight,
                                    std::span<const int> labels, PoolingMode mode) {
  const std::size_t n = labels.size();
  if (offsets.size() != n + 1 || rest_outputs.size() != n)
    throw std::invalid_argument("optimal_filter_bias: size mismatch");
  if (values.size() != offsets[n] || values.empty())
    throw std::invalid_argument("optimal_filter_bias: no convolution positions");

  std::vector<std::size_t> doc_of(values.size());
  std::vector<std::uint64_t> length(n), positives(n);
  for (std::size_t i = 0; i < n; ++i) {
    length[i] = offsets[i + 1] - offsets[i];
    positives[i] = length[i];  // below the lowest threshold, everything fires
    for (std::size_t v = offsets[i]; v < offsets[i + 1]; ++v) doc_of[v] = i;
  }

  const auto wrong = [&](std::size_t i) -> std::int64_t {
    const double pooled = detail::pooled_from_count(positives[i], length[i], mode);
    return detail::raw_sign(rest_outputs[i] + filter_weight * pooled) != labels[i] ? 1 : 0;
  };

  std::int64_t count = 0;
  for (std::size_t i = 0; i < n; ++i) count += wrong(i);

  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  const std::vector<double> candidates = threshold_candidates(values);

  double best_t = candidates.front();
  std::int64_t best_count = count;
  std::size_t next = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    const double t = candidates[c];
    while (next < order.size() && values[order[next]] < t) {
      const std::size_t i = doc_of[order[next]];
      count -= wrong(i);
      --positives[i];
      count += wrong(i);
      ++next;
    }
    if (count < best_count) {
      best_count = count;
      best_t = t;
    }
  }

  BiasScan result;
  result.bias = best_t == 0.0 ? 0.0 : -best_t;
  result.mismatches = static_cast<std::uint64_t>(best_count);
  result.loss = static_cast<double>(best_count) / static_cast<double>(n);
  return result;
}

/// Filters and output weights i.i.d. N(0,1); each filter bias at the
/// negated median of its initial pre-activations over the whole dataset
/// (0 when no document is long enough); output bias from the exact scan.
inline ConvSignModel init_conv(const ConvDataset& data, const ConvConfig& config, Rng& rng) {
  config.validate();
  const std::size_t d = data.embedding_dim();
  ConvSignModel model;
  model.pooling = config.pooling;
  model.filters.reserve(config.num_filters);
  for (std::size_t f = 0; f < config.num_filters; ++f) {
    Matrix filter(config.filter_widths[f % config.filter_widths.size()], d);
    fill_normal(rng, filter.data());
    model.filters.push_back(std::move(filter));
  }
  model.output_weights.resize(config.num_filters);
  fill_normal(rng, model.output_weights);

  model.filter_biases.resize(config.num_filters, 0.0);
  std::vector<double> preacts;
  for (std::size_t f = 0; f < config.num_filters; ++f) {
    preacts.clear();
    const Matrix& filter = model.filters[f];
    const std::size_t w = filter.rows();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const DocMatrix& doc = data.doc(i);
      if (doc.valid_len < w) continue;
      for (std::size_t p = 0; p + w <= doc.valid_len; ++p) {
        double acc = 0.0;
        for (std::size_t r = 0; r < w; ++r) {
          const auto doc_row = doc.matrix.row(p + r);
          const auto filt_row = filter.row(r);
          for (std::size_t c = 0; c < d; ++c) acc += filt_row[c] * doc_row[c];
        }
        preacts.push_back(acc);
      }
    }
    model.filter_biases[f] = preacts.empty() ? 0.0 : -median(preacts);
  }

  std::vector<double> sums(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    const std::vector<double> pooled = pooled_features(model, data.doc(i));
    double acc = 0.0;
    for (std::size_t f = 0; f < pooled.size(); ++f) acc += model.output_weights[f] * pooled[f];
    sums[i] = acc;
  });
  model.output_bias = optimal_output_bias(sums, data.labels()).bias;
  model.validate();
  return model;
}

inline ConvSignModel init_conv(const ConvDataset& data, const ConvConfig& config) {
  Rng rng(config.seed);
  return init_conv(data, config, rng);
}

struct ConvStepResult {
  ConvSignModel model;
  bool accepted = false;
  CandidateUpdate best;
  std::size_t candidates_evaluated = 0;
  std::uint64_t full_mismatches = 0;
  double full_loss = 0.0;
};

/// One coordinate-descent step on the output node or one filter; mirrors
/// the dense trainer: batch-side candidate scan with exact bias
/// re-optimization, full-data strict-decrease acceptance, bitwise revert.
inline ConvStepResult conv_descent_step(const ConvSignModel& model, NodeRef node,
                                        const ConvDataset& data,
                                        std::span<const std::size_t> batch,
                                        const ConvConfig& config, Rng& rng,
                                        std::optional<std::uint64_t> full_mismatches_before = {}) {
  model.validate();
  config.validate();
  if (data.embedding_dim() != model.embedding_dim())
    throw std::invalid_argument("conv_descent_step: dimension mismatch");
  const std::size_t F = model.num_filters();
  if (!node.is_output && node.hidden_index >= F)
    throw std::invalid_argument("conv_descent_step: filter index out of range");

  const std::size_t n = batch.size();
  if (n == 0) throw std::invalid_argument("conv_descent_step: empty batch");
  std::vector<int> batch_labels(n);
  for (std::size_t i = 0; i < n; ++i) batch_labels[i] = data.label(batch[i]);

  const auto finish = [&](ConvStepResult result) {
    const std::uint64_t before =
        full_mismatches_before ? *full_mismatches_before : conv_mismatches(model, data);
    if (result.accepted) {
      const std::uint64_t after = conv_mismatches(result.model, data);
      if (after < before) {
        result.full_mismatches = after;
      } else {
        result.model = model;
        result.accepted = false;
        result.full_mismatches = before;
      }
    } else {
      result.model = model;
      result.full_mismatches = before;
    }
    result.full_loss =
        static_cast<double>(result.full_mismatches) / static_cast<double>(data.size());
    return result;
  };

  if (node.is_output) {
    // Pooled features are fixed while only output weights move.
    Matrix pooled(n, F);
    parallel_for(n, [&](std::size_t i) {
      const std::vector<double> p = pooled_features(model, data.doc(batch[i]));
      std::copy(p.begin(), p.end(), pooled.row(i).begin());
    });
    std::vector<double> base(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = pooled.row(i);
      for (std::size_t f = 0; f < F; ++f) base[i] += model.output_weights[f] * row[f];
    }

    const std::vector<std::size_t> pool =
        sample_without_replacement(F, std::min(config.feature_pool_size, F), rng);
    std::vector<detail::Perturbation> candidates;
    candidates.reserve(2 * pool.size());
    for (std::size_t f : pool) {
      candidates.push_back({f, +config.learning_rate});
      candidates.push_back({f, -config.learning_rate});
    }
    std::vector<BiasScan> scans(candidates.size());
    parallel_for(candidates.size(), [&](std::size_t c) {
      const auto [f, delta] = candidates[c];
      std::vector<double> sums(n);
      for (std::size_t i = 0; i < n; ++i) sums[i] = base[i] + delta * pooled(i, f);
      scans[c] = optimal_output_bias(sums, batch_labels);
    });
    std::size_t best_c = 0;
    for (std::size_t c = 1; c < candidates.size(); ++c)
      if (scans[c].mismatches < scans[best_c].mismatches) best_c = c;

    ConvStepResult result;
    result.candidates_evaluated = candidates.size();
    result.best = {node, candidates[best_c].feature, candidates[best_c].delta, scans[best_c].bias,
                   scans[best_c].mismatches, scans[best_c].loss};
    result.model = model;
    result.model.output_weights[candidates[best_c].feature] += candidates[best_c].delta;
    result.model.output_bias = scans[best_c].bias;
    result.accepted = true;  // provisional; finish() re-checks on full data
    return finish(std::move(result));
  }

  // Filter step: perturb a pool of this filter's coordinates.
  const std::size_t j = node.hidden_index;
  const Matrix& filter = model.filters[j];
  const std::size_t w = filter.rows();
  const std::size_t d = filter.cols();
  const std::vector<std::size_t> pool =
      sample_without_replacement(w * d, std::min(config.feature_pool_size, w * d), rng);

  // rest = output pre-activation without filter j; base pre-activations of
  // filter j flattened doc-major.
  std::vector<double> rest(n);
  std::vector<std::size_t> offsets(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = data.doc(batch[i]).valid_len;
    offsets[i + 1] = offsets[i] + (len >= w ? len - w + 1 : 0);
  }
  std::vector<double> base(offsets[n]);
  parallel_for(n, [&](std::size_t i) {
    const DocMatrix& doc = data.doc(batch[i]);
    const std::vector<double> p = pooled_features(model, doc);
    double acc = model.output_bias;
    for (std::size_t f = 0; f < F; ++f)
      if (f != j) acc += model.output_weights[f] * p[f];
    rest[i] = acc;
    for (std::size_t pos = offsets[i]; pos < offsets[i + 1]; ++pos) {
      const std::size_t start = pos - offsets[i];
      double v = 0.0;
      for (std::size_t r = 0; r < w; ++r) {
        const auto doc_row = doc.matrix.row(start + r);
        const auto filt_row = filter.row(r);
        for (std::size_t c = 0; c < d; ++c) v += filt_row[c] * doc_row[c];
      }
      base[pos] = v;
    }
  });

  if (offsets[n] == 0) {
    // No document in the batch reaches this filter's width: nothing to scan.
    ConvStepResult result;
    result.best.node = node;
    return finish(std::move(result));
  }

  std::vector<detail::Perturbation> candidates;
  candidates.reserve(2 * pool.size());
  for (std::size_t k : pool) {
    candidates.push_back({k, +config.learning_rate});
    candidates.push_back({k, -config.learning_rate});
  }
  std::vector<BiasScan> scans(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t c) {
    const auto [coord, delta] = candidates[c];
    const std::size_t r = coord / d;
    const std::size_t col = coord % d;
    std::vector<double> values(base.size());
    for (std::size_t i = 0; i < n; ++i) {
      const DocMatrix& doc = data.doc(batch[i]);
      for (std::size_t pos = offsets[i]; pos < offsets[i + 1]; ++pos) {
        const std::size_t start = pos - offsets[i];
        values[pos] = base[pos] + delta * doc.matrix(start + r, col);
      }
    }
    scans[c] = optimal_filter_bias(values, offsets, rest, model.output_weights[j], batch_labels,
                                   model.pooling);
  });
  std::size_t best_c = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c)
    if (scans[c].mismatches < scans[best_c].mismatches) best_c = c;

  ConvStepResult result;
  result.candidates_evaluated = candidates.size();
  result.best = {node, candidates[best_c].feature, candidates[best_c].delta, scans[best_c].bias,
                 scans[best_c].mismatches, scans[best_c].loss};
  result.model = model;
  result.model.filters[j](candidates[best_c].feature / d, candidates[best_c].feature % d) +=
      candidates[best_c].delta;
  result.model.filter_biases[j] = scans[best_c].bias;
  result.accepted = true;  // provisional; finish() re-checks on full data
  return finish(std::move(result));
}

struct ConvEpochResult {
  ConvSignModel model;
  ConvStepResult output_step;
  ConvStepResult filter_step;
  std::size_t filter_index = 0;
};

inline ConvEpochResult conv_train_epoch(const ConvSignModel& model, const ConvDataset& data,
                                        const ConvConfig& config, Rng& rng,
                                        std::optional<std::uint64_t> full_mismatches_before = {}) {
  if (!data.has_both_classes())
    throw std::invalid_argument("conv_train_epoch: class absent from data");
  const std::vector<std::size_t> batch =
      stratified_batch_indices(data.labels(), config.batch_fraction, rng);

  ConvEpochResult result;
  result.output_step = conv_descent_step(model, NodeRef::output(), data, batch, config, rng,
                                         full_mismatches_before);
  result.filter_index = uniform_index(model.num_filters(), rng);
  result.filter_step =
      conv_descent_step(result.output_step.model, NodeRef::hidden(result.filter_index), data,
                        batch, config, rng, result.output_step.full_mismatches);
  result.model = result.filter_step.model;
  return result;
}

struct ConvTrainResult {
  ConvSignModel model;
  std::vector<TrainLogEntry> log;  // two entries per epoch: output step, filter step
};

inline ConvTrainResult train_conv(const ConvDataset& data, const ConvConfig& config) {
  config.validate();
  if (!data.has_both_classes()) throw std::invalid_argument("train_conv: class absent from data");
  Rng rng(config.seed);
  ConvTrainResult result;
  result.model = init_conv(data, config, rng);
  result.log.reserve(2 * config.epochs);
  std::uint64_t current = conv_mismatches(result.model, data);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    ConvEpochResult er = conv_train_epoch(result.model, data, config, rng, current);
    result.log.push_back({epoch, NodeRef::output(), er.output_step.accepted,
                          er.output_step.full_mismatches, er.output_step.full_loss});
    result.log.push_back({epoch, NodeRef::hidden(er.filter_index), er.filter_step.accepted,
                          er.filter_step.full_mismatches, er.filter_step.full_loss});
    result.model = std::move(er.model);
    current = er.filter_step.full_mismatches;
  }
  return result;
}

/// k conv models with seeds config.seed + 0 ... + (k-1).
inline std::vector<ConvTrainResult> train_conv_members(const ConvDataset& data, ConvConfig config,
                                                       std::size_t k) {
  if (k == 0) throw std::invalid_argument("train_conv_members: k must be positive");
  const std::uint64_t base_seed = config.seed;
  std::vector<ConvTrainResult> members;
  members.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    config.seed = base_seed + i;
    members.push_back(train_conv(data, config));
  }
  return members;
}

inline Ensemble<ConvSignModel> train_conv_ensemble(const ConvDataset& data,
                                                   const ConvConfig& config, std::size_t k) {
  Ensemble<ConvSignModel> ensemble;
  ensemble.members.reserve(k);
  for (ConvTrainResult& r : train_conv_members(data, config, k))
    ensemble.members.push_back(std::move(r.model));
  return ensemble;
}

}  // namespace zeroone

#endif  // ZEROONE_CNN_HPP
