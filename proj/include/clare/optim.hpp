#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "clare/dynnan.hpp"
#include "clare/memory.hpp"

namespace clare {

struct OptimConfig {
  std::size_t batch_size = 64;
  double weight_decay = 1e-4;
  double lr_max = 0.005;
  double lr_min = 5e-5;
  double cycle_length = 1.0;      // T0, epochs
  double cycle_multiplier = 2.0;  // T_mult
  double warmup_epochs = 1.0;
  int epochs_per_task = 16;  // warm-up + cycles of 1, 2, 4, 8
  double mix_prob = 0.5;
  double mix_strength = 1.0;

  void validate() const;  // ConfigError
};

enum class TrainStrategy { Scratch, FineTune };

std::string_view to_string(TrainStrategy strategy);
TrainStrategy parse_strategy(std::string_view text);  // scratch | finetune

/// Learning rate at fractional epoch progress within a task: linear ramp
/// lr_min -> lr_max over the warm-up, then cosine cycles of length T0,
/// T0*T_mult, ... restarting at lr_max. The clock resets every task.
/// ScheduleError outside [0, epochs_per_task).
double lr_at(const OptimConfig& config, double epoch);

// Epochs at which a cosine cycle starts, up to epochs_per_task.
std::vector<double> cycle_starts(const OptimConfig& config);

// theta -= lr * grad. The gradient already carries weight decay.
template <typename Real>
void sgd_step(BasicDynNan<Real>& model, const LayerStack<Real>& grad, double lr);

// Seeds derived from (run seed, task index).
std::uint64_t init_seed(std::uint64_t run_seed, int task_index);
std::uint64_t train_seed(std::uint64_t run_seed, int task_index);

struct TrainReport {
  std::vector<double> epoch_loss;  // mean minibatch loss per epoch
  std::size_t steps = 0;
};

/// Trains on the memory contents for config.epochs_per_task epochs of
/// shuffled mini-batches (last partial batch kept) with feature mixing.
/// Scratch re-initializes every parameter from init_seed(seed, task_index)
/// first, keeping the class map; FineTune continues from the incoming
/// weights.
TrainReport train_task(DynNanModel& model, const TrainingSet& data, const OptimConfig& config,
                       TrainStrategy strategy, std::uint64_t seed, int task_index);

}  // namespace clare
