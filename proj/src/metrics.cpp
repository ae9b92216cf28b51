#include "clare/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "clare/errors.hpp"

namespace clare {

AccuracyMatrix::AccuracyMatrix(int tasks) : tasks_(tasks) {
  if (tasks < 1) throw MetricError("accuracy matrix needs at least one task");
  const auto k = static_cast<std::size_t>(tasks);
  cells_.assign(k * (k + 1) / 2, std::numeric_limits<double>::quiet_NaN());
}

std::size_t AccuracyMatrix::offset(int j, int k) const {
  if (j < 1 || j > tasks_ || k < 1 || k > j) {
    throw MetricError("accuracy cell (" + std::to_string(j) + ", " + std::to_string(k) +
                      ") outside the lower triangle");
  }
  const auto uj = static_cast<std::size_t>(j);
  return (uj - 1) * uj / 2 + static_cast<std::size_t>(k - 1);
}

double AccuracyMatrix::at(int j, int k) const { return cells_[offset(j, k)]; }

void AccuracyMatrix::set(int j, int k, double value) {
  if (!(value >= 0.0 && value <= 1.0)) throw MetricError("accuracy outside [0, 1]");
  cells_[offset(j, k)] = value;
}

bool AccuracyMatrix::complete() const {
  return std::none_of(cells_.begin(), cells_.end(), [](double v) { return std::isnan(v); });
}

nlohmann::json AccuracyMatrix::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (int j = 1; j <= tasks_; ++j) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 1; k <= j; ++k) {
      const double v = at(j, k);
      row.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

AccuracyMatrix AccuracyMatrix::from_json(const nlohmann::json& rows) {
  AccuracyMatrix m(static_cast<int>(rows.size()));
  for (int j = 1; j <= m.tasks(); ++j) {
    const auto& row = rows.at(static_cast<std::size_t>(j - 1));
    if (row.size() != static_cast<std::size_t>(j)) throw MetricError("ragged accuracy row");
    for (int k = 1; k <= j; ++k) {
      const auto& cell = row.at(static_cast<std::size_t>(k - 1));
      if (!cell.is_null()) m.set(j, k, cell.get<double>());
    }
  }
  return m;
}

RunMetrics compute_metrics(const AccuracyMatrix& matrix) {
  if (!matrix.complete()) throw MetricError("accuracy matrix is incomplete");
  const int tasks = matrix.tasks();
  const double inv = 1.0 / tasks;
  RunMetrics m;
  for (int k = 1; k <= tasks; ++k) m.task_accuracy.push_back(matrix.at(k, k));
  m.global_forgetting.assign(static_cast<std::size_t>(tasks), 0.0);
  m.task_forgetting.assign(static_cast<std::size_t>(tasks), 0.0);
  for (int k = 2; k <= tasks; ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    m.global_forgetting[i] = m.task_accuracy[i - 1] - m.task_accuracy[i];
    // Step into task k: accuracy on Y_{k-1} before (A_{k-1}) and after (A'_{k-1}).
    m.task_forgetting[i] = matrix.at(k - 1, k - 1) - matrix.at(k, k - 1);
  }
  double sum_a = 0.0;
  double sum_g = 0.0;
  double sum_t = 0.0;
  for (std::size_t i = 0; i < m.task_accuracy.size(); ++i) {
    sum_a += m.task_accuracy[i];
    sum_g += m.global_forgetting[i];
    sum_t += m.task_forgetting[i];
  }
  m.last_task_accuracy = m.task_accuracy.back();
  m.average_accuracy = sum_a * inv;
  m.avg_global_forgetting = sum_g * inv;
  m.avg_task_forgetting = sum_t * inv;
  return m;
}

nlohmann::json RunMetrics::to_json() const {
  return {
      {"last_task_accuracy", last_task_accuracy},
      {"average_accuracy", average_accuracy},
      {"avg_global_forgetting", avg_global_forgetting},
      {"avg_task_forgetting", avg_task_forgetting},
      {"task_accuracy", task_accuracy},
      {"global_forgetting", global_forgetting},
      {"task_forgetting", task_forgetting},
  };
}

RunMetrics RunMetrics::from_json(const nlohmann::json& j) {
  RunMetrics m;
  m.last_task_accuracy = j.at("last_task_accuracy").get<double>();
  m.average_accuracy = j.at("average_accuracy").get<double>();
  m.avg_global_forgetting = j.at("avg_global_forgetting").get<double>();
  m.avg_task_forgetting = j.at("avg_task_forgetting").get<double>();
  m.task_accuracy = j.at("task_accuracy").get<std::vector<double>>();
  m.global_forgetting = j.at("global_forgetting").get<std::vector<double>>();
  m.task_forgetting = j.at("task_forgetting").get<std::vector<double>>();
  return m;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw AggregationError("nothing to aggregate");
  double sum = 0.0;
  for (const double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

AggregateMetrics aggregate_runs(std::span<const RunMetrics> runs) {
  if (runs.empty()) throw AggregationError("need at least one run");
  const int tasks = runs.front().tasks();
  for (const auto& r : runs) {
    if (r.tasks() != tasks) throw AggregationError("runs disagree on the number of tasks");
  }
  AggregateMetrics agg;
  agg.runs = runs.size();
  agg.tasks = tasks;
  auto field = [&](auto getter) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(getter(r));
    return mean_std(v);
  };
  agg.last_task_accuracy = field([](const RunMetrics& r) { return r.last_task_accuracy; });
  agg.average_accuracy = field([](const RunMetrics& r) { return r.average_accuracy; });
  agg.avg_global_forgetting = field([](const RunMetrics& r) { return r.avg_global_forgetting; });
  agg.avg_task_forgetting = field([](const RunMetrics& r) { return r.avg_task_forgetting; });
  for (std::size_t k = 0; k < static_cast<std::size_t>(tasks); ++k) {
    agg.task_accuracy.push_back(field([k](const RunMetrics& r) { return r.task_accuracy[k]; }));
    agg.global_forgetting.push_back(
        field([k](const RunMetrics& r) { return r.global_forgetting[k]; }));
    agg.task_forgetting.push_back(field([k](const RunMetrics& r) { return r.task_forgetting[k]; }));
  }
  return agg;
}

std::string format_percent(const MeanStd& value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f \xC2\xB1%.2f", 100.0 * value.mean, 100.0 * value.std);
  return buf;
}

namespace {

struct TestBlock {
  std::vector<float> features;
  std::vector<ClassId> labels;
};

TestBlock test_block(const EmbeddingStore& store) {
  TestBlock block;
  for (const auto& r : store.records()) {
    if (r.split != Split::Test) continue;
    block.features.insert(block.features.end(), r.vector.begin(), r.vector.end());
    block.labels.push_back(r.label);
  }
  return block;
}

std::vector<ClassId> predict_all(const DynNanModel& model, const TestBlock& block,
                                 std::size_t dim) {
  constexpr std::size_t kChunk = 512;
  std::vector<ClassId> out;
  out.reserve(block.labels.size());
  for (std::size_t begin = 0; begin < block.labels.size(); begin += kChunk) {
    const std::size_t rows = std::min(kChunk, block.labels.size() - begin);
    const auto part = model.predict_batch(
        std::span(block.features).subspan(begin * dim, rows * dim), rows);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

double score(std::span<const ClassId> predicted, std::span<const ClassId> labels,
             std::span<const ClassId> seen, std::size_t num_classes) {
  std::vector<bool> eligible(num_classes, false);
  for (const auto c : seen) {
    if (c < num_classes) eligible[c] = true;
  }
  std::size_t total = 0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!eligible[labels[i]]) continue;
    ++total;
    if (predicted[i] == labels[i]) ++correct;
  }
  if (total == 0) throw EvaluationError("no test samples for the seen classes");
  return static_cast<double>(correct) / static_cast<double>(total);
}

void require_heads(const DynNanModel& model, std::span<const ClassId> seen) {
  try {
    (void)model.columns_of(seen);
  } catch (const LabelError& e) {
    throw EvaluationError(std::string("model cannot score seen classes: ") + e.what());
  }
}

}  // namespace

double evaluate_snapshot(const DynNanModel& model, const EmbeddingStore& store,
                         std::span<const ClassId> seen) {
  require_heads(model, seen);
  const auto block = test_block(store);
  const auto predicted = predict_all(model, block, store.dim());
  return score(predicted, block.labels, seen, store.num_classes());
}

std::vector<double> evaluate_row(const DynNanModel& model, const EmbeddingStore& store,
                                 std::span<const std::vector<ClassId>> seen_prefixes) {
  if (seen_prefixes.empty()) return {};
  require_heads(model, seen_prefixes.back());
  const auto block = test_block(store);
  const auto predicted = predict_all(model, block, store.dim());
  std::vector<double> row;
  for (const auto& seen : seen_prefixes) {
    row.push_back(score(predicted, block.labels, seen, store.num_classes()));
  }
  return row;
}

}  // namespace clare
