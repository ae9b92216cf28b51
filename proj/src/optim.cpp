#include "clare/optim.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "clare/errors.hpp"

namespace clare {

void OptimConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(lr_min > 0.0) || !(lr_min < lr_max)) throw ConfigError("need 0 < lr_min < lr_max");
  if (!(cycle_length >= 1.0)) throw ConfigError("T0 must be >= 1");
  if (!(cycle_multiplier >= 1.0)) throw ConfigError("T_mult must be >= 1");
  if (!(warmup_epochs >= 0.0)) throw ConfigError("warmup_epochs must be non-negative");
  if (epochs_per_task < 0) throw ConfigError("epochs_per_task must be non-negative");
  if (!(mix_prob >= 0.0 && mix_prob <= 1.0)) throw ConfigError("mix_prob must be in [0, 1]");
  if (!(mix_strength > 0.0)) throw ConfigError("mix_strength must be positive");
}

std::string_view to_string(TrainStrategy strategy) {
  return strategy == TrainStrategy::Scratch ? "scratch" : "finetune";
}

TrainStrategy parse_strategy(std::string_view text) {
  if (text == "scratch") return TrainStrategy::Scratch;
  if (text == "finetune" || text == "fine-tune") return TrainStrategy::FineTune;
  throw ConfigError("unknown strategy '" + std::string(text) + "'");
}

double lr_at(const OptimConfig& config, double epoch) {
  if (!(epoch >= 0.0) || !(epoch < static_cast<double>(config.epochs_per_task))) {
    throw ScheduleError("epoch " + std::to_string(epoch) + " outside [0, " +
                        std::to_string(config.epochs_per_task) + ")");
  }
  const double span = config.lr_max - config.lr_min;
  if (epoch < config.warmup_epochs) {
    return config.lr_min + span * (epoch / config.warmup_epochs);
  }
  double t = epoch - config.warmup_epochs;
  double period = config.cycle_length;
  while (t >= period) {
    t -= period;
    period *= config.cycle_multiplier;
  }
  // Written as a drop from lr_max so every restart returns lr_max exactly.
  return config.lr_max - 0.5 * span * (1.0 - std::cos(std::numbers::pi * t / period));
}

std::vector<double> cycle_starts(const OptimConfig& config) {
  std::vector<double> out;
  double start = config.warmup_epochs;
  double period = config.cycle_length;
  while (start < static_cast<double>(config.epochs_per_task)) {
    out.push_back(start);
    start += period;
    period *= config.cycle_multiplier;
  }
  return out;
}

template <typename Real>
void sgd_step(BasicDynNan<Real>& model, const LayerStack<Real>& grad, double lr) {
  auto& layers = model.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    const auto& g = grad[i];
    if (g.weight.size() != l.weight.size() || g.bias.size() != l.bias.size()) {
      throw ShapeError("gradient shape does not match model layer " + std::to_string(i + 1));
    }
    const auto step = static_cast<Real>(lr);
    for (std::size_t j = 0; j < l.weight.size(); ++j) l.weight[j] -= step * g.weight[j];
    for (std::size_t j = 0; j < l.bias.size(); ++j) l.bias[j] -= step * g.bias[j];
  }
}

template void sgd_step<float>(BasicDynNan<float>&, const LayerStack<float>&, double);
template void sgd_step<double>(BasicDynNan<double>&, const LayerStack<double>&, double);

std::uint64_t init_seed(std::uint64_t run_seed, int task_index) {
  return mix_seed(run_seed, 2 * static_cast<std::uint64_t>(task_index));
}

std::uint64_t train_seed(std::uint64_t run_seed, int task_index) {
  return mix_seed(run_seed, 2 * static_cast<std::uint64_t>(task_index) + 1);
}

TrainReport train_task(DynNanModel& model, const TrainingSet& data, const OptimConfig& config,
                       TrainStrategy strategy, std::uint64_t seed, int task_index) {
  config.validate();
  if (data.dim != model.input_dim()) throw ShapeError("training set width != model input width");
  const auto columns = model.columns_of(data.labels);

  if (strategy == TrainStrategy::Scratch) {
    model = DynNanModel::init(model.input_dim(), model.class_map(), init_seed(seed, task_index),
                              model.hidden_width());
  }
  TrainReport report;
  if (config.epochs_per_task == 0) return report;
  if (data.size() == 0) throw DataError("training set is empty");

  Rng rng(train_seed(seed, task_index));
  const std::size_t n = data.size();
  const std::size_t dim = data.dim;
  const std::size_t batches = (n + config.batch_size - 1) / config.batch_size;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<float> features;
  std::vector<std::size_t> targets;

  for (int epoch = 0; epoch < config.epochs_per_task; ++epoch) {
    rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t rows = std::min(config.batch_size, n - begin);
      features.resize(rows * dim);
      targets.resize(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t idx = order[begin + r];
        std::copy_n(data.features.begin() + static_cast<std::ptrdiff_t>(idx * dim), dim,
                    features.begin() + static_cast<std::ptrdiff_t>(r * dim));
        targets[r] = columns[idx];
      }
      const auto mixed = mix_batch<float>(features, rows, targets, config.mix_prob,
                                          config.mix_strength, rng);
      const auto pass = model.forward(mixed.features, rows);
      const auto result = model.loss_and_grad(pass, mixed.targets, config.weight_decay);
      const double progress =
          static_cast<double>(epoch) + static_cast<double>(b) / static_cast<double>(batches);
      sgd_step(model, result.grad, lr_at(config, progress));
      epoch_loss += result.loss;
      ++report.steps;
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
  }
  return report;
}

}  // namespace clare
