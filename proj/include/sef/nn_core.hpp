#pragma once

// Dense feed-forward regressor: ReLU hidden layers, one linear output unit,
// mini-batch Adam on a shifted mean-squared-error loss, validation-based
// early stopping.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sef {

enum class Activation { ReLU };

struct NetworkConfig {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_sizes{100, 50};
  Activation activation = Activation::ReLU;
  double learning_rate = 1e-3;
  std::size_t max_epochs = 500;
  std::size_t batch_size = 32;
  std::size_t patience = 20;
  double validation_fraction = 0.10;
  std::uint64_t seed = 0;

  /// Throws ConfigError on any invariant violation.
  void validate() const;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

/// Per-feature affine map applied to raw inputs before the first layer.
struct InputScaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static InputScaler identity(std::size_t dim);
  /// Zero mean / unit variance from the rows of x; constant columns keep scale 1.
  static InputScaler fit(const Eigen::MatrixXd& x);
};

struct Network {
  NetworkConfig config;
  std::vector<DenseLayer> layers;
  InputScaler scaler;

  /// Verifies that layer widths chain from input_dim to a single output.
  void check_shapes() const;
  std::size_t parameter_count() const;
};

struct Gradients {
  std::vector<DenseLayer> layers;
  double loss = 0.0;
};

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<DenseLayer> first_moment;
  std::vector<DenseLayer> second_moment;

  static AdamState zeros_like(const Network& net);
};

struct TrainReport {
  std::size_t epochs_run = 0;
  double best_val_loss = 0.0;
  double final_train_loss = 0.0;
  bool stopped_early = false;
  std::vector<double> val_history;  // one entry per epoch run
};

struct TrainedNetwork {
  Network network;
  TrainReport report;
};

/// He-normal weights (std = sqrt(2 / fan_in)), zero biases, identity scaler.
Network init_network(const NetworkConfig& config);

double forward(const Network& net, std::span<const double> x);

/// Batched forward pass over the rows of x (n x input_dim).
Eigen::VectorXd predict(const Network& net, const Eigen::MatrixXd& x);

/// (1/n) * sum_i (pred_i - (target_i + shift))^2
double shifted_mse(std::span<const double> predictions, std::span<const double> targets,
                   double shift);

/// Gradient of shifted_mse over the batch with respect to every weight and bias.
Gradients backward(const Network& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   double shift);

/// One bias-corrected Adam update. step is 1-based.
void adam_step(Network& net, AdamState& state, const Gradients& grads, std::size_t step,
               const AdamParams& params = {});

/// Fits a fresh network to y + shift. The internal validation set is the last
/// validation_fraction of a seed-shuffled copy of the rows; the returned
/// parameters are those with the lowest validation loss.
TrainedNetwork train(const NetworkConfig& config, const Eigen::MatrixXd& x,
                     const Eigen::VectorXd& y, double shift);

}  // namespace sef
