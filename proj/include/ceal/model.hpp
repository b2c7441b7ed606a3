#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ceal/data.hpp"
#include "ceal/rng.hpp"

namespace ceal {

using Features = Eigen::Ref<const Eigen::RowVectorXd>;

/// Fully connected ReLU network with inverted dropout after every hidden
/// layer. weights[l] maps layer l (rows) to layer l+1 (columns).
struct Classifier {
  std::vector<int> widths;
  double dropout_rate = 0.0;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::RowVectorXd> biases;

  int input_dim() const { return widths.front(); }
  int num_classes() const { return widths.back(); }
  std::size_t num_layers() const { return weights.size(); }
  std::size_t num_parameters() const;
};

bool operator==(const Classifier& a, const Classifier& b);

/// Per-pass class probabilities from stochastic forward passes, one row per
/// pass.
struct PredictiveSamples {
  Eigen::MatrixXd probs;

  int t_passes() const { return static_cast<int>(probs.rows()); }
  int num_classes() const { return static_cast<int>(probs.cols()); }
  /// Throws std::invalid_argument unless every row is a distribution (1e-9).
  void validate() const;
};

struct TrainSpec {
  int epochs = 20;
  int batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainSpec&) const = default;
};

/// Same shapes as the classifier parameters.
struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::RowVectorXd> biases;
};

/// Uniform Glorot initialization, zero biases.
Classifier init_classifier(const std::vector<int>& widths, double dropout_rate, std::uint64_t seed);

/// Class probabilities for one input. In stochastic mode every hidden unit is
/// dropped with probability dropout_rate (one uniform draw per unit, layer by
/// layer, ascending unit index) and survivors are scaled by 1/(1-p).
Eigen::RowVectorXd forward_proba(const Classifier& model, const Features& x, bool stochastic, Rng& rng);

/// Inverted dropout on one activation vector: each unit is zeroed with
/// probability p, survivors are scaled by 1/(1-p). No draws when p == 0.
Eigen::RowVectorXd inverted_dropout(Eigen::RowVectorXd h, double p, Rng& rng);

/// t_passes stochastic passes, pass 0 first. Consumes rng exactly as
/// t_passes consecutive forward_proba calls would.
PredictiveSamples mc_predict(const Classifier& model, const Features& x, int t_passes, Rng& rng);

/// Mean softmax cross-entropy over the given rows. If dropout_rng is
/// non-null, dropout masks are drawn from it (training mode). If grads is
/// non-null it receives the gradient of the returned loss.
double loss_and_gradients(const Classifier& model, const Dataset& data,
                          std::span<const std::size_t> rows, Gradients* grads,
                          Rng* dropout_rng);

/// Mini-batch SGD with momentum over exactly `rows`. Batch order is
/// reshuffled every epoch. If epoch_losses is given it receives the mean
/// training loss of each epoch.
Classifier train(Classifier model, const Dataset& data, std::span<const std::size_t> rows,
                 const TrainSpec& spec, std::vector<double>* epoch_losses = nullptr);

/// Deterministic argmax, ties to the lowest class index.
int predict_class(const Classifier& model, const Features& x);

double evaluate_accuracy(const Classifier& model, const Dataset& data);

/// Text checkpoint with hex-float parameters; load(save(m)) == m exactly.
void save_classifier(const Classifier& model, const std::filesystem::path& path);
Classifier load_classifier(const std::filesystem::path& path);

/// Row-wise argmax with ties to the lowest index.
int argmax(const Eigen::Ref<const Eigen::RowVectorXd>& v);

}  // namespace ceal
