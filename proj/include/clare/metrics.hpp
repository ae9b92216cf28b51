#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clare/dynnan.hpp"
#include "clare/embedstore.hpp"

namespace clare {

/// acc(j, k), 1 <= k <= j <= K: accuracy of the snapshot taken after task j
/// on the test samples whose class is in Y_1 u ... u Y_k. Lower-triangular;
/// unset cells are NaN.
class AccuracyMatrix {
 public:
  explicit AccuracyMatrix(int tasks);

  int tasks() const { return tasks_; }
  double at(int j, int k) const;
  void set(int j, int k, double value);  // MetricError outside [0, 1]
  bool complete() const;

  nlohmann::json to_json() const;  // rows: [[acc(1,1)], [acc(2,1), acc(2,2)], ...]
  static AccuracyMatrix from_json(const nlohmann::json& rows);

 private:
  std::size_t offset(int j, int k) const;
  int tasks_;
  std::vector<double> cells_;
};

struct RunMetrics {
  double last_task_accuracy = 0.0;    // A_K
  double average_accuracy = 0.0;      // A_Avg
  double avg_global_forgetting = 0.0; // F_AvgG
  double avg_task_forgetting = 0.0;   // F_AvgT
  std::vector<double> task_accuracy;      // A_k
  std::vector<double> global_forgetting;  // F_G(k), F_G(1) = 0
  std::vector<double> task_forgetting;    // F_T(k), F_T(1) = 0

  int tasks() const { return static_cast<int>(task_accuracy.size()); }
  nlohmann::json to_json() const;
  static RunMetrics from_json(const nlohmann::json& j);
};

/// A_k = acc(k, k); F_G(k) = A_{k-1} - A_k; A'_k = acc(k+1, k) and the
/// task-forgetting term for the step into task k+1 is A_k - A'_k, stored at
/// index k+1. Both averages divide by K with the first term fixed at zero.
/// Negative forgetting is kept as is.
RunMetrics compute_metrics(const AccuracyMatrix& matrix);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample std (n - 1); 0 for a single run
};

struct AggregateMetrics {
  std::size_t runs = 0;
  int tasks = 0;
  MeanStd last_task_accuracy;
  MeanStd average_accuracy;
  MeanStd avg_global_forgetting;
  MeanStd avg_task_forgetting;
  std::vector<MeanStd> task_accuracy;
  std::vector<MeanStd> global_forgetting;
  std::vector<MeanStd> task_forgetting;
};

AggregateMetrics aggregate_runs(std::span<const RunMetrics> runs);
MeanStd mean_std(std::span<const double> values);

// "89.90 ±0.18": fraction shown as a percentage with two decimals.
std::string format_percent(const MeanStd& value);

/// Fraction of test samples with label in `seen` that the model classifies
/// correctly. EvaluationError if no test sample is eligible or a seen class
/// has no output head.
double evaluate_snapshot(const DynNanModel& model, const EmbeddingStore& store,
                         std::span<const ClassId> seen);

/// One accuracy-matrix row: the model is run once over the test split and
/// scored against each prefix union seen[0..k-1].
std::vector<double> evaluate_row(const DynNanModel& model, const EmbeddingStore& store,
                                 std::span<const std::vector<ClassId>> seen_prefixes);

}  // namespace clare
