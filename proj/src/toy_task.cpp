#include "abstractnet/toy_task.hpp"

#include <omp.h>

#include <cmath>
#include <span>

#include "abstractnet/approximator.hpp"

namespace abstractnet {
namespace {

struct SampleGradient {
  double squared_error = 0.0;
  ControlNetGradients grads;
};

SampleGradient sample_gradient(const ControlNetBlock& cb, const ToySample& s, double scale) {
  const Tensor y = controlnet_forward(cb, s.x, s.c);
  Tensor upstream = y - s.target;
  SampleGradient out;
  out.squared_error = sum_of_squares(upstream);
  upstream *= 2.0 * scale;
  out.grads = compute_gradients(cb, s.x, s.c, upstream);
  return out;
}

BatchGradients reduce(std::vector<SampleGradient>& parts, std::size_t elements) {
  BatchGradients out;
  double sse = 0.0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    sse += parts[i].squared_error;
    if (i == 0) {
      out.grads = std::move(parts[i].grads);
    } else {
      out.grads += parts[i].grads;
    }
  }
  out.loss = sse / static_cast<double>(elements * parts.size());
  return out;
}

std::size_t elements_per_sample(const ToySample& s) { return s.target.size(); }

// rows x cols matrix (rows >= cols) with orthonormal columns, via Gram-Schmidt
// on Gaussian draws.
Tensor orthonormal_columns(std::size_t rows, std::size_t cols, Rng& rng) {
  if (cols > rows) throw std::invalid_argument("hidden map needs cond_channels <= channels");
  Tensor m = random_normal({rows, cols}, rng);
  for (std::size_t j = 0; j < cols; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double dot = 0.0;
      for (std::size_t i = 0; i < rows; ++i) dot += m[i * cols + j] * m[i * cols + k];
      for (std::size_t i = 0; i < rows; ++i) m[i * cols + j] -= dot * m[i * cols + k];
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < rows; ++i) norm += m[i * cols + j] * m[i * cols + j];
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < rows; ++i) m[i * cols + j] /= norm;
  }
  return m;
}

}  // namespace

ToySample ToyTask::make_sample(Tensor x, Tensor c) const {
  ToySample s;
  ZeroConv hidden(shape.cond_channels, shape.channels);
  hidden.weight.value = Tensor({shape.channels, shape.cond_channels, 1, 1}, hidden_map.values());
  s.cond_component = zero_conv_forward(hidden, c);
  s.target = block_forward(locked, x) + s.cond_component;
  s.x = std::move(x);
  s.c = std::move(c);
  return s;
}

ToySample ToyTask::sample(Rng& rng) const {
  Tensor x = random_normal({shape.channels, shape.size, shape.size}, rng);
  Tensor c = random_normal({shape.cond_channels, shape.size, shape.size}, rng);
  return make_sample(std::move(x), std::move(c));
}

double ToyTask::expected_baseline_loss() const {
  return sum_of_squares(hidden_map) / static_cast<double>(shape.channels);
}

ToyTask make_toy_task(std::uint64_t seed, const ToyTaskShape& shape) {
  ToyTask task;
  task.shape = shape;
  task.seed = seed;
  Rng rng(derive_seed(seed, std::string_view("toy-task")));
  task.locked = NetBlock::random(shape.channels, rng, shape.locked_weight_gain, shape.locked_bias_std,
                                 shape.activation);
  task.locked.set_locked(true);
  task.hidden_map = orthonormal_columns(shape.channels, shape.cond_channels, rng);
  task.hidden_map *= shape.hidden_map_gain;
  Rng eval_rng(derive_seed(seed, std::string_view("toy-eval")));
  task.eval_set.reserve(shape.eval_samples);
  for (std::size_t i = 0; i < shape.eval_samples; ++i) task.eval_set.push_back(task.sample(eval_rng));
  return task;
}

ControlNetBlock make_controlnet(const ToyTask& task) {
  return init_controlnet(task.locked, task.shape.cond_channels);
}

void TrainConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("steps must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be finite and non-negative");
  }
  if (log_every < 1) throw std::invalid_argument("log_every must be at least 1");
  if (jobs < 1) throw std::invalid_argument("jobs must be at least 1");
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) return 0.0;
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

EvalResult evaluate(const ControlNetBlock& cb, const ToyTask& task) {
  double sse = 0.0;
  std::size_t count = 0;
  std::vector<double> delta;
  std::vector<double> truth;
  for (const ToySample& s : task.eval_set) {
    const Tensor y = block_forward(cb.locked, s.x);
    const Tensor yc = controlnet_forward(cb, s.x, s.c);
    for (std::size_t i = 0; i < yc.size(); ++i) {
      const double e = yc[i] - s.target[i];
      sse += e * e;
      delta.push_back(yc[i] - y[i]);
      truth.push_back(s.cond_component[i]);
    }
    count += yc.size();
  }
  return {count ? sse / static_cast<double>(count) : 0.0, pearson_correlation(delta, truth)};
}

double locked_baseline_loss(const ToyTask& task) {
  double sse = 0.0;
  std::size_t count = 0;
  for (const ToySample& s : task.eval_set) {
    const Tensor y = block_forward(task.locked, s.x);
    sse += sum_of_squares(y - s.target);
    count += y.size();
  }
  return count ? sse / static_cast<double>(count) : 0.0;
}

BatchGradients batch_gradients_serial(const ControlNetBlock& cb, std::span<const ToySample> batch) {
  const double scale = 1.0 / static_cast<double>(elements_per_sample(batch[0]) * batch.size());
  std::vector<SampleGradient> parts(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) parts[i] = sample_gradient(cb, batch[i], scale);
  return reduce(parts, elements_per_sample(batch[0]));
}

BatchGradients batch_gradients_parallel(const ControlNetBlock& cb, std::span<const ToySample> batch,
                                        int jobs) {
  const double scale = 1.0 / static_cast<double>(elements_per_sample(batch[0]) * batch.size());
  std::vector<SampleGradient> parts(batch.size());
  const auto n = static_cast<std::int64_t>(batch.size());
#pragma omp parallel for schedule(static) num_threads(jobs)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    parts[idx] = sample_gradient(cb, batch[idx], scale);
  }
  return reduce(parts, elements_per_sample(batch[0]));
}

TrainLog train_toy(ControlNetBlock& cb, const ToyTask& task, const TrainConfig& config) {
  config.validate();
  TrainLog log;
  log.baseline_loss = locked_baseline_loss(task);
  const std::uint64_t locked_before = locked_fingerprint(cb);
  Rng rng(config.seed);
  std::vector<ToySample> batch;

  for (int step = 0; step < config.steps; ++step) {
    if (step % config.log_every == 0) {
      const EvalResult eval = evaluate(cb, task);
      if (!std::isfinite(eval.loss)) {
        throw TrainingDiverged("non-finite eval loss at step " + std::to_string(step));
      }
      if (locked_fingerprint(cb) != locked_before) {
        throw std::logic_error("locked parameters changed during training");
      }
      log.rows.push_back({step, eval.loss, eval.condition_fidelity});
    }

    batch.clear();
    for (int b = 0; b < config.batch_size; ++b) batch.push_back(task.sample(rng));
    BatchGradients bg = config.jobs > 1 ? batch_gradients_parallel(cb, batch, config.jobs)
                                        : batch_gradients_serial(cb, batch);
    if (!std::isfinite(bg.loss)) {
      throw TrainingDiverged("non-finite training loss " + format_double(bg.loss) + " at step " +
                             std::to_string(step) + " (learning rate " +
                             format_double(config.learning_rate) + ")");
    }
    store_gradients(cb, bg.grads);
    sgd_step(cb, config.learning_rate);
  }

  const EvalResult final_eval = evaluate(cb, task);
  if (!std::isfinite(final_eval.loss)) throw TrainingDiverged("non-finite eval loss after training");
  log.final_loss = final_eval.loss;
  log.final_fidelity = final_eval.condition_fidelity;
  return log;
}

std::string train_log_csv(const TrainLog& log) {
  std::string out = "step,loss,condition_fidelity\n";
  for (const TrainLogRow& r : log.rows) {
    out += std::to_string(r.step) + "," + format_double(r.loss) + "," +
           format_double(r.condition_fidelity) + "\n";
  }
  return out;
}

}  // namespace abstractnet
