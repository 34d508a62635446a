#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hst/error.hpp"
#include "hst/linalg.hpp"
#include "hst/types.hpp"

// Connectionist Temporal Classification after Graves et al. 2006, in log
// space throughout. The blank is the last class index N.

namespace hst {

struct CtcResult {
  double negative_log_likelihood = 0.0;
  std::optional<Matrix> gradient;  // d(loss)/d(pre-softmax logits), T x (N+1)
};

enum class DecodeMode { greedy, prefix_beam };

struct DecodeConfig {
  DecodeMode mode = DecodeMode::greedy;
  int beam_width = 1;
};

namespace detail {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kProbFloor = 1e-30;  // clamp before log

inline double log_prob(double p) { return std::log(std::max(p, kProbFloor)); }

inline void check_probability_rows(const LogitMatrix& probs) {
  for (std::size_t t = 0; t < probs.frames(); ++t) {
    double sum = 0.0;
    for (double p : probs.scores.row(t)) {
      require(p >= 0.0, ErrorCode::domain, "ctc: negative probability");
      sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-6, ErrorCode::domain,
            "ctc: row " + std::to_string(t) + " sums to " + std::to_string(sum) +
                ", expected 1");
  }
}

// Minimal number of frames able to emit the sequence: one per label plus a
// blank between equal neighbours.
inline int min_frames_for(const GlossSequence& labels) {
  int extra = 0;
  for (std::size_t i = 1; i < labels.labels.size(); ++i)
    if (labels.labels[i] == labels.labels[i - 1]) ++extra;
  return static_cast<int>(labels.labels.size()) + extra;
}

// Remove consecutive repeats, then blanks.
inline GlossSequence collapse(const std::vector<int>& frame_labels, int blank) {
  GlossSequence out;
  int prev = -1;
  for (int label : frame_labels) {
    if (label != prev && label != blank) out.labels.push_back(label);
    prev = label;
  }
  return out;
}

}  // namespace detail

// Negative log likelihood of the label sequence under per-frame class
// probabilities, with the standard blank-augmented forward recursion. When
// requested, the gradient with respect to pre-softmax logits is computed via
// the forward-backward posteriors; its rows sum to zero.
inline CtcResult ctc_loss(const LogitMatrix& probs, const GlossSequence& labels,
                          bool with_gradient = false) {
  const int T = static_cast<int>(probs.frames());
  const int blank = probs.blank_index();
  require(T >= 1, ErrorCode::empty_input, "ctc_loss: no frames");
  check_labels(labels, probs.num_classes());
  detail::check_probability_rows(probs);
  require(T >= detail::min_frames_for(labels), ErrorCode::infeasible,
          "ctc_loss: label sequence needs at least " +
              std::to_string(detail::min_frames_for(labels)) + " frames, got " +
              std::to_string(T));

  // Blank-augmented states: blank, y0, blank, y1, ..., blank.
  const int L = static_cast<int>(labels.labels.size());
  const int S = 2 * L + 1;
  const auto state_label = [&](int s) { return (s % 2 == 0) ? blank : labels.labels[s / 2]; };

  Matrix log_alpha(T, S, detail::kNegInf);
  log_alpha(0, 0) = detail::log_prob(probs.scores(0, state_label(0)));
  if (S > 1) log_alpha(0, 1) = detail::log_prob(probs.scores(0, state_label(1)));

  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double acc = log_alpha(t - 1, s);
      if (s >= 1) acc = log_sum_exp(acc, log_alpha(t - 1, s - 1));
      if (s >= 2 && state_label(s) != blank && state_label(s) != state_label(s - 2))
        acc = log_sum_exp(acc, log_alpha(t - 1, s - 2));
      log_alpha(t, s) = acc + detail::log_prob(probs.scores(t, state_label(s)));
    }
  }

  double log_p = log_alpha(T - 1, S - 1);
  if (S > 1) log_p = log_sum_exp(log_p, log_alpha(T - 1, S - 2));
  require(std::isfinite(log_p), ErrorCode::infeasible,
          "ctc_loss: label sequence has probability zero under these frames");

  CtcResult result;
  result.negative_log_likelihood = -log_p;
  if (!with_gradient) return result;

  Matrix log_beta(T, S, detail::kNegInf);
  log_beta(T - 1, S - 1) = detail::log_prob(probs.scores(T - 1, state_label(S - 1)));
  if (S > 1) log_beta(T - 1, S - 2) = detail::log_prob(probs.scores(T - 1, state_label(S - 2)));
  for (int t = T - 2; t >= 0; --t) {
    for (int s = S - 1; s >= 0; --s) {
      double acc = log_beta(t + 1, s);
      if (s + 1 < S) acc = log_sum_exp(acc, log_beta(t + 1, s + 1));
      if (s + 2 < S && state_label(s + 2) != blank && state_label(s) != state_label(s + 2))
        acc = log_sum_exp(acc, log_beta(t + 1, s + 2));
      log_beta(t, s) = acc + detail::log_prob(probs.scores(t, state_label(s)));
    }
  }

  // d(-log P)/d(u_{t,k}) = p_{t,k} - q_{t,k} with q the state posterior mass
  // of class k at frame t (alpha and beta both include the frame emission,
  // so one copy is divided back out).
  Matrix grad(T, probs.scores.cols());
  for (int t = 0; t < T; ++t) {
    std::vector<double> log_q(probs.scores.cols(), detail::kNegInf);
    for (int s = 0; s < S; ++s) {
      const int k = state_label(s);
      const double term =
          log_alpha(t, s) + log_beta(t, s) - detail::log_prob(probs.scores(t, k));
      log_q[k] = log_sum_exp(log_q[k], term);
    }
    for (std::size_t k = 0; k < probs.scores.cols(); ++k) {
      const double q = std::exp(log_q[k] - log_p);
      grad(t, k) = probs.scores(t, k) - q;
    }
  }
  result.gradient = std::move(grad);
  return result;
}

// Exhaustive oracle: every (N+1)^T frame labelling is enumerated, the ones
// collapsing to the target are summed. Independent of the forward-backward
// path above.
inline double ctc_brute_force(const LogitMatrix& probs, const GlossSequence& labels) {
  const int T = static_cast<int>(probs.frames());
  const int classes = static_cast<int>(probs.scores.cols());
  const int blank = probs.blank_index();
  check_labels(labels, probs.num_classes());
  detail::check_probability_rows(probs);

  double total_paths = 1.0;
  for (int t = 0; t < T; ++t) {
    total_paths *= classes;
    require(total_paths <= 1e6, ErrorCode::oracle_too_large,
            "ctc_brute_force: more than 1e6 paths");
  }

  std::vector<int> path(T, 0);
  double sum = 0.0;
  while (true) {
    double p = 1.0;
    for (int t = 0; t < T; ++t) p *= probs.scores(t, path[t]);
    if (detail::collapse(path, blank) == labels) sum += p;

    int t = T - 1;
    while (t >= 0 && path[t] == classes - 1) path[t--] = 0;
    if (t < 0) break;
    ++path[t];
  }
  return -std::log(sum);
}

// Greedy: per-frame argmax (ties to the lower class index), collapse repeats,
// drop blanks.
inline GlossSequence decode_greedy(const LogitMatrix& probs) {
  std::vector<int> frame_labels;
  frame_labels.reserve(probs.frames());
  for (std::size_t t = 0; t < probs.frames(); ++t) {
    const auto row = probs.scores.row(t);
    int best = 0;
    for (std::size_t k = 1; k < row.size(); ++k)
      if (row[k] > row[best]) best = static_cast<int>(k);
    frame_labels.push_back(best);
  }
  return detail::collapse(frame_labels, probs.blank_index());
}

// Standard prefix beam search over (blank, non-blank) prefix probabilities.
// Prefixes merge by exact equality; ties order by the lexicographically
// smaller prefix, so lower class indices win.
inline GlossSequence decode_prefix_beam(const LogitMatrix& probs, int beam_width) {
  require(beam_width >= 1, ErrorCode::config, "decode: beam width must be >= 1");
  const int blank = probs.blank_index();

  struct Mass {
    double log_blank = detail::kNegInf;      // prefix ends in blank
    double log_non_blank = detail::kNegInf;  // prefix ends in its last label
    double total() const { return log_sum_exp(log_blank, log_non_blank); }
  };
  using Beam = std::map<std::vector<int>, Mass>;

  Beam beam;
  beam[{}] = Mass{0.0, detail::kNegInf};

  for (std::size_t t = 0; t < probs.frames(); ++t) {
    const auto row = probs.scores.row(t);
    Beam next;
    for (const auto& [prefix, mass] : beam) {
      const double log_pb = detail::log_prob(row[blank]);
      Mass& same = next[prefix];
      same.log_blank = log_sum_exp(same.log_blank, mass.total() + log_pb);

      for (int k = 0; k < blank; ++k) {
        const double log_pk = detail::log_prob(row[k]);
        if (!prefix.empty() && prefix.back() == k) {
          // Repeating the last label extends the same prefix; growing it
          // requires the blank-terminated mass.
          same.log_non_blank = log_sum_exp(same.log_non_blank, mass.log_non_blank + log_pk);
          std::vector<int> grown = prefix;
          grown.push_back(k);
          Mass& g = next[grown];
          g.log_non_blank = log_sum_exp(g.log_non_blank, mass.log_blank + log_pk);
        } else {
          std::vector<int> grown = prefix;
          grown.push_back(k);
          Mass& g = next[grown];
          g.log_non_blank = log_sum_exp(g.log_non_blank, mass.total() + log_pk);
        }
      }
    }

    if (static_cast<int>(next.size()) > beam_width) {
      std::vector<Beam::iterator> order;
      for (auto it = next.begin(); it != next.end(); ++it) order.push_back(it);
      std::stable_sort(order.begin(), order.end(), [](auto a, auto b) {
        const double ta = a->second.total();
        const double tb = b->second.total();
        if (ta != tb) return ta > tb;
        return a->first < b->first;
      });
      Beam pruned;
      for (int i = 0; i < beam_width; ++i) pruned.insert(*order[i]);
      beam = std::move(pruned);
    } else {
      beam = std::move(next);
    }
  }

  const std::vector<int>* best = nullptr;
  double best_total = detail::kNegInf;
  for (const auto& [prefix, mass] : beam) {
    const double total = mass.total();
    if (!best || total > best_total || (total == best_total && prefix < *best)) {
      best = &prefix;
      best_total = total;
    }
  }
  return GlossSequence{*best};
}

inline GlossSequence ctc_decode(const LogitMatrix& probs, const DecodeConfig& config) {
  detail::check_probability_rows(probs);
  if (config.mode == DecodeMode::greedy) return decode_greedy(probs);
  return decode_prefix_beam(probs, config.beam_width);
}

// (substitutions + deletions + insertions) / |reference|, unit costs.
inline double word_error_rate(const GlossSequence& reference, const GlossSequence& hypothesis) {
  require(!reference.labels.empty(), ErrorCode::domain,
          "word_error_rate: empty reference makes the metric undefined");
  const std::size_t n = reference.labels.size();
  const std::size_t m = hypothesis.labels.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub =
          prev[j - 1] + (reference.labels[i - 1] == hypothesis.labels[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[m]) / static_cast<double>(n);
}

}  // namespace hst
