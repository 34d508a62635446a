#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hst/contrastive.hpp"
#include "hst/ctc.hpp"
#include "hst/error.hpp"
#include "hst/io.hpp"
#include "hst/rng.hpp"
#include "hst/tree.hpp"
#include "hst/types.hpp"

namespace hst {

// Linear stand-in for a visual backbone: a projection into the alignment
// space shared with the tree centroids, then a linear classifier head.
struct LinearModel {
  Matrix projection;                    // d_raw x d
  std::vector<double> projection_bias;  // d
  Matrix classifier;                    // d x (N+1)
  std::vector<double> classifier_bias;  // N+1

  int raw_dimension() const { return static_cast<int>(projection.rows()); }
  int aligned_dimension() const { return static_cast<int>(projection.cols()); }
  int num_classes() const { return static_cast<int>(classifier.cols()) - 1; }

  static LinearModel init(int d_raw, int d, int num_classes, std::uint64_t seed) {
    require(d_raw >= 1 && d >= 1 && num_classes >= 1, ErrorCode::config,
            "model: dimensions must be >= 1");
    Mcg64 rng(derive_seed(seed, 0x6d6f64656cull));  // "model"
    LinearModel m;
    m.projection = Matrix(d_raw, d);
    const double p_scale = 1.0 / std::sqrt(static_cast<double>(d_raw));
    for (double& v : m.projection.data()) v = p_scale * rng.next_gaussian();
    m.projection_bias.assign(d, 0.0);
    m.classifier = Matrix(d, num_classes + 1);
    const double c_scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (double& v : m.classifier.data()) v = c_scale * rng.next_gaussian();
    m.classifier_bias.assign(num_classes + 1, 0.0);
    return m;
  }

  bool all_finite() const {
    auto vec_ok = [](const std::vector<double>& v) {
      for (double x : v)
        if (!std::isfinite(x)) return false;
      return true;
    };
    return projection.all_finite() && classifier.all_finite() && vec_ok(projection_bias) &&
           vec_ok(classifier_bias);
  }
};

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 50;
  double lambda_c = 1.0;  // weight of the contrastive term
  std::uint64_t seed = 7;
};

inline void check_train_config(const TrainConfig& config) {
  require(config.learning_rate > 0.0, ErrorCode::config, "train: learning_rate must be > 0");
  require(config.epochs >= 1, ErrorCode::config, "train: epochs must be >= 1");
  require(config.lambda_c >= 0.0, ErrorCode::config, "train: lambda_c must be >= 0");
}

struct ForwardResult {
  VisualSequence aligned;   // T x d, the features scored against the tree
  Matrix pre_softmax;       // T x (N+1)
  LogitMatrix probs;        // row-softmax of pre_softmax
};

inline ForwardResult forward(const LinearModel& model, const Matrix& raw,
                             const std::string& video_id = {}) {
  require(static_cast<int>(raw.cols()) == model.raw_dimension(), ErrorCode::shape,
          "forward: raw feature dimension " + std::to_string(raw.cols()) +
              " differs from model input " + std::to_string(model.raw_dimension()));
  const std::size_t T = raw.rows();
  const std::size_t d = model.projection.cols();
  const std::size_t classes = model.classifier.cols();

  ForwardResult result;
  result.aligned.video_id = video_id;
  result.aligned.frames = Matrix(T, d);
  for (std::size_t t = 0; t < T; ++t) {
    const auto x = raw.row(t);
    auto a = result.aligned.frames.row(t);
    for (std::size_t j = 0; j < d; ++j) {
      double s = model.projection_bias[j];
      for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * model.projection(i, j);
      a[j] = s;
    }
  }

  result.pre_softmax = Matrix(T, classes);
  for (std::size_t t = 0; t < T; ++t) {
    const auto a = result.aligned.frames.row(t);
    auto u = result.pre_softmax.row(t);
    for (std::size_t j = 0; j < classes; ++j) {
      double s = model.classifier_bias[j];
      for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * model.classifier(i, j);
      u[j] = s;
    }
  }
  result.probs.scores = result.pre_softmax;
  softmax_rows(result.probs.scores);
  return result;
}

struct ModelGradients {
  Matrix projection;
  std::vector<double> projection_bias;
  Matrix classifier;
  std::vector<double> classifier_bias;
};

struct LossBreakdown {
  double total = 0.0;
  double ctc = 0.0;
  double contrastive = 0.0;  // already weighted into total by lambda_c
  std::optional<ModelGradients> gradients;
};

// L = L_seq(probs, labels) + lambda_c * L_c(aligned, tree), with gradients
// assembled by backpropagation through the softmax, the classifier and the
// projection. Tree centroids are frozen constants; pseudo-labels are treated
// as constants of the current logits. A contrastive term with no signal
// contributes zero with zero gradient.
inline LossBreakdown total_loss(const LinearModel& model, const Matrix& raw,
                                const GlossSequence& labels, const SubactionTree& tree,
                                const TrainConfig& config, bool with_gradients = false) {
  check_train_config(config);
  const auto fwd = forward(model, raw);
  const std::size_t T = raw.rows();
  const std::size_t d = model.projection.cols();
  const std::size_t classes = model.classifier.cols();

  const auto ctc = ctc_loss(fwd.probs, labels, with_gradients);

  ContrastiveResult con;
  bool has_contrastive = false;
  std::optional<ContrastiveBatch> batch;
  if (config.lambda_c > 0.0) {
    batch = make_contrastive_batch(tree, fwd.aligned, fwd.probs);
    try {
      con = contrastive_loss(*batch, tree, with_gradients);
      has_contrastive = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::no_signal) throw;
    }
  }

  LossBreakdown out;
  out.ctc = ctc.negative_log_likelihood;
  out.contrastive = has_contrastive ? config.lambda_c * con.value : 0.0;
  out.total = out.ctc + out.contrastive;
  if (!with_gradients) return out;

  // d(total)/d(aligned features)
  Matrix d_aligned(T, d, 0.0);
  const Matrix& g_u = *ctc.gradient;
  for (std::size_t t = 0; t < T; ++t) {
    auto da = d_aligned.row(t);
    const auto gu = g_u.row(t);
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < classes; ++j) s += gu[j] * model.classifier(i, j);
      da[i] = s;
    }
  }
  if (has_contrastive && con.gradients) {
    for (std::size_t f = 0; f < batch->frames.size(); ++f) {
      auto da = d_aligned.row(static_cast<std::size_t>(batch->frames[f].frame));
      for (std::size_t i = 0; i < d; ++i) da[i] += config.lambda_c * (*con.gradients)[f][i];
    }
  }

  ModelGradients grads;
  grads.classifier = Matrix(d, classes, 0.0);
  grads.classifier_bias.assign(classes, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    const auto a = fwd.aligned.frames.row(t);
    const auto gu = g_u.row(t);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < classes; ++j) grads.classifier(i, j) += a[i] * gu[j];
    for (std::size_t j = 0; j < classes; ++j) grads.classifier_bias[j] += gu[j];
  }

  grads.projection = Matrix(raw.cols(), d, 0.0);
  grads.projection_bias.assign(d, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    const auto x = raw.row(t);
    const auto da = d_aligned.row(t);
    for (std::size_t r = 0; r < raw.cols(); ++r)
      for (std::size_t i = 0; i < d; ++i) grads.projection(r, i) += x[r] * da[i];
    for (std::size_t i = 0; i < d; ++i) grads.projection_bias[i] += da[i];
  }
  out.gradients = std::move(grads);
  return out;
}

struct TrainSample {
  std::string id;
  Matrix raw;
  GlossSequence labels;
};

struct TrainTrace {
  std::vector<double> epoch_losses;  // mean loss before each update
};

// Deterministic full-batch gradient descent. The per-epoch loss is the mean
// over samples at the parameters in force at the start of the epoch.
inline TrainTrace train(LinearModel& model, const std::vector<TrainSample>& dataset,
                        const SubactionTree& tree, const TrainConfig& config) {
  check_train_config(config);
  require(!dataset.empty(), ErrorCode::empty_input, "train: empty dataset");

  TrainTrace trace;
  const double inv_n = 1.0 / static_cast<double>(dataset.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    ModelGradients acc;
    acc.projection = Matrix(model.projection.rows(), model.projection.cols(), 0.0);
    acc.projection_bias.assign(model.projection_bias.size(), 0.0);
    acc.classifier = Matrix(model.classifier.rows(), model.classifier.cols(), 0.0);
    acc.classifier_bias.assign(model.classifier_bias.size(), 0.0);

    double loss_sum = 0.0;
    for (const TrainSample& sample : dataset) {
      const auto breakdown = total_loss(model, sample.raw, sample.labels, tree, config, true);
      loss_sum += breakdown.total;
      const ModelGradients& g = *breakdown.gradients;
      for (std::size_t i = 0; i < acc.projection.data().size(); ++i)
        acc.projection.data()[i] += g.projection.data()[i];
      for (std::size_t i = 0; i < acc.projection_bias.size(); ++i)
        acc.projection_bias[i] += g.projection_bias[i];
      for (std::size_t i = 0; i < acc.classifier.data().size(); ++i)
        acc.classifier.data()[i] += g.classifier.data()[i];
      for (std::size_t i = 0; i < acc.classifier_bias.size(); ++i)
        acc.classifier_bias[i] += g.classifier_bias[i];
    }

    const double epoch_loss = loss_sum * inv_n;
    require(std::isfinite(epoch_loss), ErrorCode::diverged,
            "train: loss became non-finite at epoch " + std::to_string(epoch));
    trace.epoch_losses.push_back(epoch_loss);

    const double step = config.learning_rate * inv_n;
    for (std::size_t i = 0; i < model.projection.data().size(); ++i)
      model.projection.data()[i] -= step * acc.projection.data()[i];
    for (std::size_t i = 0; i < model.projection_bias.size(); ++i)
      model.projection_bias[i] -= step * acc.projection_bias[i];
    for (std::size_t i = 0; i < model.classifier.data().size(); ++i)
      model.classifier.data()[i] -= step * acc.classifier.data()[i];
    for (std::size_t i = 0; i < model.classifier_bias.size(); ++i)
      model.classifier_bias[i] -= step * acc.classifier_bias[i];

    require(model.all_finite(), ErrorCode::diverged,
            "train: parameters became non-finite at epoch " + std::to_string(epoch));
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Model files: JSON with row-major matrices.

inline nlohmann::ordered_json matrix_to_json(const Matrix& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& where) {
  require(j.is_array() && !j.empty(), ErrorCode::parse, where + ": expected a non-empty array");
  const std::size_t rows = j.size();
  const std::size_t cols = j.front().size();
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    require(j[r].size() == cols, ErrorCode::shape, where + ": ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  require(m.all_finite(), ErrorCode::not_finite, where + ": non-finite parameter");
  return m;
}

inline void save_model(const LinearModel& model, const std::filesystem::path& path,
                       const TrainConfig* config_echo = nullptr) {
  nlohmann::ordered_json j;
  j["raw_dimension"] = model.raw_dimension();
  j["aligned_dimension"] = model.aligned_dimension();
  j["num_classes"] = model.num_classes();
  j["projection"] = matrix_to_json(model.projection);
  j["projection_bias"] = model.projection_bias;
  j["classifier"] = matrix_to_json(model.classifier);
  j["classifier_bias"] = model.classifier_bias;
  if (config_echo) {
    j["train_config"] = {{"learning_rate", config_echo->learning_rate},
                         {"epochs", config_echo->epochs},
                         {"lambda_c", config_echo->lambda_c},
                         {"seed", config_echo->seed}};
  }
  auto out = open_for_write(path);
  out << j.dump(2) << '\n';
  require(out.good(), ErrorCode::io, "write failed for " + path.string());
}

inline LinearModel load_model(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse, path.string() + ": " + e.what());
  }
  LinearModel m;
  try {
    m.projection = matrix_from_json(j.at("projection"), path.string() + ": projection");
    m.projection_bias = j.at("projection_bias").get<std::vector<double>>();
    m.classifier = matrix_from_json(j.at("classifier"), path.string() + ": classifier");
    m.classifier_bias = j.at("classifier_bias").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse, path.string() + ": " + e.what());
  }
  require(m.projection.cols() == m.classifier.rows(), ErrorCode::shape,
          path.string() + ": projection and classifier dimensions disagree");
  require(m.projection_bias.size() == m.projection.cols(), ErrorCode::shape,
          path.string() + ": projection bias length mismatch");
  require(m.classifier_bias.size() == m.classifier.cols(), ErrorCode::shape,
          path.string() + ": classifier bias length mismatch");
  require(m.all_finite(), ErrorCode::not_finite, path.string() + ": non-finite parameter");
  return m;
}

}  // namespace hst
