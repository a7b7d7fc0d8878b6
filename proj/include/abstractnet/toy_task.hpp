#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "abstractnet/zeroconv.hpp"

namespace abstractnet {

struct ToyTaskShape {
  std::size_t channels = 4;
  std::size_t cond_channels = 2;
  std::size_t size = 8;
  std::size_t eval_samples = 64;
  double locked_weight_gain = 1.0;
  double locked_bias_std = 0.1;
  // The hidden map is this gain times a random matrix with orthonormal
  // columns, so every condition direction is equally strong.
  double hidden_map_gain = 4.0;
  Activation activation = Activation::kLeakySilu;
};

struct ToySample {
  Tensor x;
  Tensor c;
  Tensor cond_component;  // hidden_map applied to c
  Tensor target;          // F(x; locked) + cond_component
};

/// Regression task whose target is the locked block's output plus a hidden
/// pointwise linear map of the condition. The locked block alone reaches the
/// variance of that conditional term; a perfect ControlNet reaches zero.
struct ToyTask {
  ToyTaskShape shape;
  std::uint64_t seed = 0;
  NetBlock locked;
  Tensor hidden_map;  // (channels, cond_channels)
  std::vector<ToySample> eval_set;

  ToySample sample(Rng& rng) const;
  ToySample make_sample(Tensor x, Tensor c) const;
  /// ||W||_F^2 / channels: expected per-element loss of the locked block alone.
  double expected_baseline_loss() const;
};

ToyTask make_toy_task(std::uint64_t seed, const ToyTaskShape& shape = {});

/// Fresh ControlNet around the task's locked block.
ControlNetBlock make_controlnet(const ToyTask& task);

struct TrainConfig {
  int steps = 500;
  int batch_size = 2;
  double learning_rate = 0.05;
  std::uint64_t seed = 7;
  int log_every = 1;
  int jobs = 1;

  void validate() const;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainLogRow {
  int step = 0;
  double loss = 0.0;
  double condition_fidelity = 0.0;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
  double baseline_loss = 0.0;  // locked block alone on the eval set
  double final_loss = 0.0;
  double final_fidelity = 0.0;
};

struct EvalResult {
  double loss = 0.0;
  double condition_fidelity = 0.0;
};

/// Mean squared error over the eval set, and the Pearson correlation between
/// the ControlNet's output delta (y_c - y) and the true conditional component.
/// The correlation is 0 when the delta is identically zero.
EvalResult evaluate(const ControlNetBlock& cb, const ToyTask& task);

/// Loss of the locked block alone on the eval set.
double locked_baseline_loss(const ToyTask& task);

double pearson_correlation(std::span<const double> a, std::span<const double> b);

/// Mean-squared-error loss over a batch and its gradients summed in batch
/// order. The batch may be processed serially or with OpenMP workers; the
/// result is bitwise identical.
struct BatchGradients {
  double loss = 0.0;
  ControlNetGradients grads;
};
BatchGradients batch_gradients_serial(const ControlNetBlock& cb, std::span<const ToySample> batch);
BatchGradients batch_gradients_parallel(const ControlNetBlock& cb, std::span<const ToySample> batch,
                                        int jobs);

/// Plain SGD on the non-locked params. Row k of the log is measured on the
/// eval set before update k; `final_*` are measured after the last update.
TrainLog train_toy(ControlNetBlock& cb, const ToyTask& task, const TrainConfig& config);

/// CSV with header `step,loss,condition_fidelity`.
std::string train_log_csv(const TrainLog& log);

}  // namespace abstractnet
