#ifndef ZEROONE_THRESHOLD_SCAN_HPP
#define ZEROONE_THRESHOLD_SCAN_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "zeroone/core.hpp"

namespace zeroone {

/// Result of an exact 1-D bias optimization. `bias` is the additive form
/// (bias = -threshold); `mismatches` is the exact integer count of wrong
/// predictions at that bias and `loss` = mismatches / n.
struct BiasScan {
  double bias = 0.0;
  std::uint64_t mismatches = 0;
  double loss = 0.0;

  friend bool operator==(const BiasScan&, const BiasScan&) = default;
};

/// Candidate thresholds for a set of projection values: one sentinel below
/// the minimum, the midpoint between each pair of consecutive distinct
/// values, and one sentinel above the maximum, in ascending order. A node
/// fires (+1) exactly when projection >= threshold, so these candidates
/// realize every achievable split of the samples.
inline std::vector<double> threshold_candidates(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("threshold_candidates: empty input");
  if (!all_finite(values)) throw std::invalid_argument("threshold_candidates: non-finite value");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<double> candidates;
  candidates.reserve(sorted.size() + 1);
  candidates.push_back(sorted.front() - 1.0);
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
    candidates.push_back((sorted[i] + sorted[i + 1]) / 2.0);
  candidates.push_back(sorted.back() + 1.0);
  return candidates;
}

namespace detail {

/// Shared sweep: choose the threshold minimizing total mismatches, where
/// sample i sits on the +1 side iff values[i] >= threshold and contributes
/// wrong_if_plus[i] there and wrong_if_minus[i] on the other side.
/// Candidates are scanned in ascending threshold order and the first
/// minimum wins, so the result is deterministic under ties.
inline BiasScan scan_thresholds(std::span<const double> values,
                                std::span<const std::uint8_t> wrong_if_plus,
                                std::span<const std::uint8_t> wrong_if_minus) {
  const std::size_t n = values.size();
  if (n == 0) throw std::invalid_argument("scan_thresholds: empty input");
  if (wrong_if_plus.size() != n || wrong_if_minus.size() != n)
    throw std::invalid_argument("scan_thresholds: size mismatch");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  const std::vector<double> candidates = threshold_candidates(values);

  // At the lowest candidate every sample is on the +1 side.
  std::int64_t count = 0;
  for (std::size_t i = 0; i < n; ++i) count += wrong_if_plus[i];

  double best_t = candidates.front();
  std::int64_t best_count = count;
  std::size_t next = 0;  // first index in `order` not yet moved to the -1 side
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    const double t = candidates[c];
    while (next < n && values[order[next]] < t) {
      const std::size_t i = order[next];
      count += static_cast<std::int64_t>(wrong_if_minus[i]) -
               static_cast<std::int64_t>(wrong_if_plus[i]);
      ++next;
    }
    if (count < best_count) {
      best_count = count;
      best_t = t;
    }
  }

  BiasScan result;
  result.bias = best_t == 0.0 ? 0.0 : -best_t;  // avoid -0.0 in stored models
  result.mismatches = static_cast<std::uint64_t>(best_count);
  result.loss = static_cast<double>(best_count) / static_cast<double>(n);
  return result;
}

}  // namespace detail

/// Exact optimal bias for the output node: given per-sample output
/// pre-activations (sum of weighted hidden signs, without the bias) and
/// labels, minimize the number of sign mismatches.
inline BiasScan optimal_output_bias(std::span<const double> sums, std::span<const int> labels) {
  const std::size_t n = sums.size();
  if (labels.size() != n) throw std::invalid_argument("optimal_output_bias: size mismatch");
  std::vector<std::uint8_t> wrong_if_plus(n), wrong_if_minus(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != -1 && labels[i] != +1)
      throw std::invalid_argument("optimal_output_bias: label not in {-1,+1}");
    wrong_if_plus[i] = labels[i] != +1;
    wrong_if_minus[i] = labels[i] != -1;
  }
  return detail::scan_thresholds(sums, wrong_if_plus, wrong_if_minus);
}

/// Exact optimal bias for one hidden node, accounting for the rest of the
/// network: projections are the node's pre-bias projections, rest_outputs
/// the output pre-activation excluding this node's contribution (but
/// including the output bias), node_weight the node's output weight. The
/// node's sign flows through the output sign, so sample i is wrong on the
/// +1 side iff sign(rest_i + node_weight) != label_i.
inline BiasScan optimal_hidden_bias(std::span<const double> projections,
                                    std::span<const double> rest_outputs, double node_weight,
                                    std::span<const int> labels) {
  const std::size_t n = projections.size();
  if (rest_outputs.size() != n || labels.size() != n)
    throw std::invalid_argument("optimal_hidden_bias: size mismatch");
  if (!all_finite(rest_outputs) || !std::isfinite(node_weight))
    throw std::invalid_argument("optimal_hidden_bias: non-finite input");
  std::vector<std::uint8_t> wrong_if_plus(n), wrong_if_minus(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != -1 && labels[i] != +1)
      throw std::invalid_argument("optimal_hidden_bias: label not in {-1,+1}");
    wrong_if_plus[i] = detail::raw_sign(rest_outputs[i] + node_weight) != labels[i];
    wrong_if_minus[i] = detail::raw_sign(rest_outputs[i] - node_weight) != labels[i];
  }
  return detail::scan_thresholds(projections, wrong_if_plus, wrong_if_minus);
}

}  // namespace zeroone

#endif  // ZEROONE_THRESHOLD_SCAN_HPP
