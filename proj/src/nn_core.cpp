#include "sef/nn_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "sef/error.hpp"
#include "sef/random.hpp"

namespace sef {

namespace {

// Standardized inputs, one sample per column.
Eigen::MatrixXd scaled_columns(const Network& net, const Eigen::MatrixXd& x) {
  if (static_cast<std::size_t>(x.cols()) != net.config.input_dim) {
    throw ShapeError(fmt::format("input has {} columns, network expects {}", x.cols(),
                                 net.config.input_dim));
  }
  Eigen::MatrixXd cols = x.transpose();
  cols.colwise() -= net.scaler.mean;
  cols.array().colwise() /= net.scaler.scale.array();
  return cols;
}

// Pre-activations of every layer for the given standardized input columns.
std::vector<Eigen::MatrixXd> forward_cache(const Network& net, const Eigen::MatrixXd& input) {
  std::vector<Eigen::MatrixXd> pre;
  pre.reserve(net.layers.size());
  Eigen::MatrixXd act = input;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const auto& layer = net.layers[k];
    Eigen::MatrixXd z = layer.weights * act;
    z.colwise() += layer.bias;
    if (k + 1 < net.layers.size()) {
      act = z.cwiseMax(0.0);
    }
    pre.push_back(std::move(z));
  }
  return pre;
}

Eigen::VectorXd output_of(const Network& net, const Eigen::MatrixXd& input) {
  Eigen::MatrixXd act = input;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const auto& layer = net.layers[k];
    Eigen::MatrixXd z = layer.weights * act;
    z.colwise() += layer.bias;
    act = (k + 1 < net.layers.size()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return act.row(0).transpose();
}

double mse_against(const Eigen::VectorXd& pred, const Eigen::VectorXd& y, double shift) {
  return (pred.array() - (y.array() + shift)).square().mean();
}

std::vector<DenseLayer> zeros_like(const std::vector<DenseLayer>& layers) {
  std::vector<DenseLayer> out;
  out.reserve(layers.size());
  for (const auto& l : layers) {
    out.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                   Eigen::VectorXd::Zero(l.bias.size())});
  }
  return out;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& x, std::span<const std::size_t> idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& y, std::span<const std::size_t> idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

}  // namespace

void NetworkConfig::validate() const {
  if (input_dim == 0) throw ConfigError("input_dim must be positive");
  if (hidden_sizes.empty()) throw ConfigError("hidden_sizes must be non-empty");
  for (auto h : hidden_sizes) {
    if (h == 0) throw ConfigError("hidden layer sizes must be >= 1");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (patience == 0) throw ConfigError("patience must be positive");
  if (!(validation_fraction > 0.0 && validation_fraction <= 0.5)) {
    throw ConfigError("validation_fraction must lie in (0, 0.5]");
  }
}

InputScaler InputScaler::identity(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return {Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)};
}

InputScaler InputScaler::fit(const Eigen::MatrixXd& x) {
  InputScaler s;
  s.mean = x.colwise().mean().transpose();
  s.scale = ((x.rowwise() - s.mean.transpose()).array().square().colwise().mean())
                .sqrt()
                .transpose();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
    if (!(s.scale(j) > 0.0)) s.scale(j) = 1.0;
  }
  return s;
}

void Network::check_shapes() const {
  if (layers.empty()) throw ShapeError("network has no layers");
  auto width = static_cast<Eigen::Index>(config.input_dim);
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (l.weights.cols() != width || l.bias.size() != l.weights.rows()) {
      throw ShapeError(fmt::format("layer {} does not chain with its input width {}", k, width));
    }
    width = l.weights.rows();
  }
  if (width != 1) throw ShapeError("network output width must be 1");
  if (scaler.mean.size() != static_cast<Eigen::Index>(config.input_dim) ||
      scaler.scale.size() != static_cast<Eigen::Index>(config.input_dim)) {
    throw ShapeError("input scaler does not match input_dim");
  }
}

std::size_t Network::parameter_count() const {
  std::size_t count = 0;
  for (const auto& l : layers) count += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return count;
}

AdamState AdamState::zeros_like(const Network& net) {
  return {sef::zeros_like(net.layers), sef::zeros_like(net.layers)};
}

Network init_network(const NetworkConfig& config) {
  config.validate();
  Network net{config, {}, InputScaler::identity(config.input_dim)};
  Rng rng(config.seed);
  std::size_t fan_in = config.input_dim;
  std::vector<std::size_t> widths = config.hidden_sizes;
  widths.push_back(1);
  for (auto out : widths) {
    DenseLayer layer{Eigen::MatrixXd(static_cast<Eigen::Index>(out),
                                     static_cast<Eigen::Index>(fan_in)),
                     Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out))};
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    // Row-major fill order so the draw sequence does not depend on Eigen storage.
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        layer.weights(r, c) = rng.normal(0.0, sd);
      }
    }
    net.layers.push_back(std::move(layer));
    fan_in = out;
  }
  return net;
}

double forward(const Network& net, std::span<const double> x) {
  if (x.size() != net.config.input_dim) {
    throw ShapeError(fmt::format("input has length {}, network expects {}", x.size(),
                                 net.config.input_dim));
  }
  Eigen::MatrixXd row(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) row(0, static_cast<Eigen::Index>(j)) = x[j];
  return predict(net, row)(0);
}

Eigen::VectorXd predict(const Network& net, const Eigen::MatrixXd& x) {
  return output_of(net, scaled_columns(net, x));
}

double shifted_mse(std::span<const double> predictions, std::span<const double> targets,
                   double shift) {
  if (predictions.size() != targets.size()) {
    throw ShapeError("predictions and targets differ in length");
  }
  if (predictions.empty()) throw DomainError("shifted_mse of an empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double r = predictions[i] - (targets[i] + shift);
    sum += r * r;
  }
  return sum / static_cast<double>(predictions.size());
}

Gradients backward(const Network& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   double shift) {
  if (x.rows() == 0) throw DataError("backward on an empty batch");
  if (x.rows() != y.size()) throw ShapeError("batch inputs and targets differ in length");
  const Eigen::MatrixXd input = scaled_columns(net, x);
  const auto pre = forward_cache(net, input);
  const auto n = static_cast<double>(x.rows());
  const std::size_t depth = net.layers.size();

  Gradients g;
  g.layers.resize(depth);
  Eigen::RowVectorXd residual = pre.back().row(0) - (y.array() + shift).matrix().transpose();
  g.loss = residual.squaredNorm() / n;

  Eigen::MatrixXd delta = (2.0 / n) * residual;
  for (std::size_t k = depth; k-- > 0;) {
    const Eigen::MatrixXd act_in = (k == 0) ? input : Eigen::MatrixXd(pre[k - 1].cwiseMax(0.0));
    g.layers[k].weights = delta * act_in.transpose();
    g.layers[k].bias = delta.rowwise().sum();
    if (k > 0) {
      Eigen::MatrixXd upstream = net.layers[k].weights.transpose() * delta;
      delta = upstream.cwiseProduct((pre[k - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

void adam_step(Network& net, AdamState& state, const Gradients& grads, std::size_t step,
               const AdamParams& params) {
  if (grads.layers.size() != net.layers.size() ||
      state.first_moment.size() != net.layers.size() ||
      state.second_moment.size() != net.layers.size()) {
    throw ShapeError("optimizer state does not match the network");
  }
  if (step == 0) throw ConfigError("adam step index is 1-based");
  const double lr = net.config.learning_rate;
  const double c1 = 1.0 - std::pow(params.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(params.beta2, static_cast<double>(step));

  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    if (param.size() != g.size() || m.size() != g.size() || v.size() != g.size()) {
      throw ShapeError("gradient shape does not match parameter shape");
    }
    m = params.beta1 * m + (1.0 - params.beta1) * g;
    v = params.beta2 * v + (1.0 - params.beta2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + params.epsilon);
  };
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    update(net.layers[k].weights, state.first_moment[k].weights, state.second_moment[k].weights,
           grads.layers[k].weights);
    update(net.layers[k].bias, state.first_moment[k].bias, state.second_moment[k].bias,
           grads.layers[k].bias);
  }
}

TrainedNetwork train(const NetworkConfig& config, const Eigen::MatrixXd& x,
                     const Eigen::VectorXd& y, double shift) {
  config.validate();
  const auto n = static_cast<std::size_t>(x.rows());
  if (static_cast<std::size_t>(y.size()) != n) throw ShapeError("x and y differ in row count");
  if (static_cast<std::size_t>(x.cols()) != config.input_dim) {
    throw ShapeError(fmt::format("x has {} columns, config expects {}", x.cols(),
                                 config.input_dim));
  }
  if (n < 10) throw DataError(fmt::format("training needs at least 10 samples, got {}", n));
  if (!std::isfinite(shift)) throw DomainError("shift must be finite");
  if (!x.allFinite() || !y.allFinite()) throw DataError("training data contains NaN or Inf");

  Network net = init_network(config);
  net.scaler = InputScaler::fit(x);

  // Seed-shuffled rows; the tail is the validation set.
  auto order = shuffled_indices(n, config.seed, /*stream=*/1);
  auto n_val = static_cast<std::size_t>(
      std::llround(config.validation_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  std::vector<std::size_t> fit_rows(order.begin(), order.end() - static_cast<long>(n_val));
  const std::span<const std::size_t> val_rows(order.end() - static_cast<long>(n_val), order.end());

  const Eigen::MatrixXd x_fit = gather_rows(x, fit_rows);
  const Eigen::VectorXd y_fit = gather(y, fit_rows);
  const Eigen::MatrixXd val_input = scaled_columns(net, gather_rows(x, val_rows));
  const Eigen::VectorXd y_val = gather(y, val_rows);

  TrainedNetwork result{net, {}};
  TrainReport& report = result.report;
  report.best_val_loss = mse_against(output_of(net, val_input), y_val, shift);

  AdamState state = AdamState::zeros_like(net);
  Rng batch_rng(config.seed, /*stream=*/2);
  std::vector<std::size_t> perm(fit_rows.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::size_t step = 0;
  std::size_t since_best = 0;
  double best = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    batch_rng.shuffle(std::span<std::size_t>(perm));
    for (std::size_t start = 0; start < perm.size(); start += config.batch_size) {
      const std::size_t stop = std::min(perm.size(), start + config.batch_size);
      const std::span<const std::size_t> batch(perm.data() + start, stop - start);
      const auto grads = backward(net, gather_rows(x_fit, batch), gather(y_fit, batch), shift);
      adam_step(net, state, grads, ++step);
    }
    const double val_loss = mse_against(output_of(net, val_input), y_val, shift);
    if (!std::isfinite(val_loss)) {
      throw TrainingError(fmt::format("validation loss diverged at epoch {}", epoch + 1));
    }
    report.val_history.push_back(val_loss);
    report.epochs_run = epoch + 1;
    if (val_loss < best) {
      best = val_loss;
      result.network = net;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      report.stopped_early = true;
      break;
    }
  }
  if (report.epochs_run > 0) report.best_val_loss = best;
  report.final_train_loss = mse_against(predict(result.network, x_fit), y_fit, shift);
  return result;
}

}  // namespace sef
