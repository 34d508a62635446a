#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hst/contrastive.hpp"
#include "hst/ctc.hpp"
#include "hst/rng.hpp"
#include "hst/synth.hpp"
#include "hst/trainer.hpp"
#include "hst/tree.hpp"

// Central finite-difference checks for every analytic gradient in the
// library. The CLI exposes this as `hst grad-check`.

namespace hst {

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

struct GradCheckReport {
  std::string name;
  int fixtures = 0;
  long checked = 0;
  double max_rel_err = 0.0;
  bool passed() const { return max_rel_err < 1e-4; }
};

namespace gradcheck_detail {

constexpr double kStep = 1e-5;

inline double central_difference(const std::function<double()>& f, double& x) {
  const double saved = x;
  x = saved + kStep;
  const double hi = f();
  x = saved - kStep;
  const double lo = f();
  x = saved;
  return (hi - lo) / (2.0 * kStep);
}

inline Matrix random_pre_softmax(Mcg64& rng, int frames, int classes) {
  Matrix u(frames, classes);
  for (double& v : u.data()) v = rng.next_gaussian();
  return u;
}

inline GlossSequence random_feasible_labels(Mcg64& rng, int frames, int num_classes) {
  const int max_len = std::min(3, frames);
  const int len = 1 + static_cast<int>(rng.next_index(max_len));
  GlossSequence labels;
  for (int i = 0; i < len; ++i) {
    int g = static_cast<int>(rng.next_index(num_classes));
    while (num_classes > 1 && !labels.labels.empty() && g == labels.labels.back())
      g = static_cast<int>(rng.next_index(num_classes));
    labels.labels.push_back(g);
  }
  return labels;
}

inline SubactionTree small_fixture_tree(std::uint64_t seed, int dimension, int n_glosses) {
  SynthConfig sc;
  sc.n_glosses = n_glosses;
  sc.subactions_per_gloss = 3;
  sc.dimension = dimension;
  sc.noise_sigma = 0.05;
  sc.seed = seed;
  const auto corpus = generate_corpus(sc);
  TreeConfig tc;
  tc.seed = seed;
  return build_tree(corpus, tc);
}

}  // namespace gradcheck_detail

// CTC: analytic d(loss)/d(pre-softmax logits) against central differences
// through the softmax.
inline GradCheckReport check_ctc_gradients(std::uint64_t seed, int fixtures = 50) {
  namespace gd = gradcheck_detail;
  Mcg64 rng(derive_seed(seed, 0x637463ull));
  GradCheckReport report{"ctc"};
  report.fixtures = fixtures;

  for (int f = 0; f < fixtures; ++f) {
    const int frames = 2 + static_cast<int>(rng.next_index(4));   // 2..5
    const int classes = 2 + static_cast<int>(rng.next_index(3));  // 2..4 glosses
    Matrix u = gd::random_pre_softmax(rng, frames, classes + 1);
    const auto labels = gd::random_feasible_labels(rng, frames, classes);

    const auto loss_of = [&]() {
      LogitMatrix probs{u};
      softmax_rows(probs.scores);
      return ctc_loss(probs, labels).negative_log_likelihood;
    };

    LogitMatrix probs{u};
    softmax_rows(probs.scores);
    const auto analytic = ctc_loss(probs, labels, true);
    for (std::size_t i = 0; i < u.data().size(); ++i) {
      const double fd = gd::central_difference(loss_of, u.data()[i]);
      report.max_rel_err =
          std::max(report.max_rel_err, relative_error(analytic.gradient->data()[i], fd));
      ++report.checked;
    }
  }
  return report;
}

// Contrastive: analytic d(loss)/d(frame feature) against central differences.
inline GradCheckReport check_contrastive_gradients(std::uint64_t seed, int fixtures = 50) {
  namespace gd = gradcheck_detail;
  Mcg64 rng(derive_seed(seed, 0x636f6eull));
  GradCheckReport report{"contrastive"};
  report.fixtures = fixtures;

  for (int f = 0; f < fixtures; ++f) {
    const int dimension = 4;
    const auto tree = gd::small_fixture_tree(derive_seed(seed, 0x74726565ull, f), dimension, 3);
    const int frames = 2 + static_cast<int>(rng.next_index(3));

    VisualSequence seq;
    seq.frames = Matrix(frames, dimension);
    for (double& v : seq.frames.data()) v = rng.next_gaussian();

    Matrix u = gd::random_pre_softmax(rng, frames, tree.num_glosses() + 1);
    LogitMatrix probs{u};
    softmax_rows(probs.scores);

    ContrastiveBatch batch = make_contrastive_batch(tree, seq, probs);
    if (batch.frames.empty()) continue;  // every pseudo-label was blank

    const auto loss_of = [&]() { return contrastive_loss(batch, tree).value; };
    const auto analytic = contrastive_loss(batch, tree, true);
    for (std::size_t i = 0; i < batch.frames.size(); ++i) {
      for (std::size_t c = 0; c < batch.frames[i].feature.size(); ++c) {
        const double fd = gd::central_difference(loss_of, batch.frames[i].feature[c]);
        report.max_rel_err =
            std::max(report.max_rel_err, relative_error((*analytic.gradients)[i][c], fd));
        ++report.checked;
      }
    }
  }
  return report;
}

// Full model: every parameter of the combined objective.
inline GradCheckReport check_model_gradients(std::uint64_t seed, int fixtures = 50) {
  namespace gd = gradcheck_detail;
  Mcg64 rng(derive_seed(seed, 0x6d6f64ull));
  GradCheckReport report{"model"};
  report.fixtures = fixtures;

  for (int f = 0; f < fixtures; ++f) {
    const int dimension = 4;
    const int n_glosses = 3;
    const auto tree = gd::small_fixture_tree(derive_seed(seed, 0x6d74ull, f), dimension, n_glosses);

    const int frames = 4;
    TrainConfig config;
    config.lambda_c = 1.0;

    // The pseudo-labels are per-frame argmaxes, so the objective is only
    // piecewise smooth; finite differences are valid away from the argmax
    // boundaries. Resample fixtures whose top-2 logit margin is tight.
    Matrix raw(frames, dimension);
    GlossSequence labels;
    LinearModel model = LinearModel::init(1, 1, 1, 0);
    for (int attempt = 0; attempt < 100; ++attempt) {
      for (double& v : raw.data()) v = rng.next_gaussian();
      labels = gd::random_feasible_labels(rng, frames, n_glosses);
      model = LinearModel::init(dimension, dimension, n_glosses,
                                derive_seed(seed, 0x696e6974ull, f * 100 + attempt));
      const auto fwd = forward(model, raw);
      bool clean = true;
      for (int t = 0; t < frames && clean; ++t) {
        const auto row = fwd.pre_softmax.row(t);
        double top1 = -1e300, top2 = -1e300;
        for (double v : row) {
          if (v > top1) {
            top2 = top1;
            top1 = v;
          } else if (v > top2) {
            top2 = v;
          }
        }
        clean = (top1 - top2) > 1e-2;
      }
      if (clean) break;
    }

    const auto loss_of = [&]() {
      return total_loss(model, raw, labels, tree, config).total;
    };
    const auto analytic = total_loss(model, raw, labels, tree, config, true);
    const ModelGradients& g = *analytic.gradients;

    const auto check_block = [&](std::vector<double>& params, const std::vector<double>& grads) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double fd = gd::central_difference(loss_of, params[i]);
        report.max_rel_err = std::max(report.max_rel_err, relative_error(grads[i], fd));
        ++report.checked;
      }
    };
    check_block(model.projection.data(), g.projection.data());
    check_block(model.projection_bias, g.projection_bias);
    check_block(model.classifier.data(), g.classifier.data());
    check_block(model.classifier_bias, g.classifier_bias);
  }
  return report;
}

inline std::vector<GradCheckReport> run_gradient_suite(std::uint64_t seed, int fixtures = 50) {
  return {check_ctc_gradients(seed, fixtures), check_contrastive_gradients(seed, fixtures),
          check_model_gradients(seed, fixtures)};
}

}  // namespace hst
