#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "clare/embedstore.hpp"

namespace clare {

enum class ScenarioKind { Unrealistic, SemiRealCL, RealCL };

std::string_view to_string(ScenarioKind kind);
// Accepts the CLI spellings (unreal, semireal, real) and the full names.
ScenarioKind parse_scenario(std::string_view text);

/// One task: the sample ids it owns and the label space they induce.
/// The label space is always recomputed from the ids.
class TaskSpec {
 public:
  TaskSpec() = default;
  // Ids are sorted; every id must resolve in the store (DataError otherwise).
  TaskSpec(int index, std::vector<SampleId> train_ids, const EmbeddingStore& store);

  int index() const { return index_; }  // 1-based
  const std::vector<SampleId>& train_ids() const { return train_ids_; }
  const std::vector<ClassId>& label_space() const { return label_space_; }  // ascending

 private:
  int index_ = 0;
  std::vector<SampleId> train_ids_;
  std::vector<ClassId> label_space_;
};

struct TaskStream {
  ScenarioKind kind = ScenarioKind::RealCL;
  std::uint64_t seed = 0;
  std::vector<TaskSpec> tasks;

  std::size_t size() const { return tasks.size(); }
};

// Balanced class-incremental: shuffled classes cut into K groups whose sizes
// differ by at most one.
TaskStream gen_unrealistic(const EmbeddingStore& store, int num_tasks, std::uint64_t seed);
// Each class goes to a uniformly random task; redrawn until no task is empty.
TaskStream gen_semireal(const EmbeddingStore& store, int num_tasks, std::uint64_t seed);
// Uniform permutation of all train ids cut into K near-equal chunks.
TaskStream gen_realcl(const EmbeddingStore& store, int num_tasks, std::uint64_t seed);

TaskStream generate_stream(ScenarioKind kind, const EmbeddingStore& store, int num_tasks,
                           std::uint64_t seed);

/// Cumulative label spaces: seen[k-1] = Y_1 u ... u Y_k, each ascending.
using SeenClasses = std::vector<std::vector<ClassId>>;
SeenClasses seen_classes(const TaskStream& stream);

// Manifest document: kind, K, seed and per-task sorted id arrays.
nlohmann::json stream_manifest(const TaskStream& stream);
TaskStream stream_from_manifest(const nlohmann::json& manifest, const EmbeddingStore& store);
std::uint64_t manifest_hash(const TaskStream& stream);

}  // namespace clare
