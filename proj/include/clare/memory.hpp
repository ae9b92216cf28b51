#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "clare/embedstore.hpp"
#include "clare/random.hpp"
#include "clare/scenario.hpp"

namespace clare {

enum class MemoryPolicy { RandomBalanced, Herding };

std::string_view to_string(MemoryPolicy policy);
MemoryPolicy parse_policy(std::string_view text);  // random | herding

struct MemoryEntry {
  SampleId sample_id = 0;
  ClassId label = 0;
  int task = 0;  // index of the task the sample arrived with

  friend bool operator==(const MemoryEntry&, const MemoryEntry&) = default;
};

/// Splits `capacity` slots over classes with the given availabilities.
///
/// Water-filling: every class whose availability fits in the current equal
/// share keeps all of its samples and leaves the pool; the rest share what
/// remains. The final remainder goes one slot each to the classes with the
/// most available samples, ties to the lower position. The result sums to
/// min(capacity, sum(available)) and never exceeds availability.
std::vector<std::size_t> allocate_quotas(std::span<const std::size_t> available,
                                         std::size_t capacity);

struct HerdingCandidate {
  SampleId sample_id = 0;
  std::span<const float> vector;
};

/// Greedy herding: repeatedly takes the candidate that brings the mean of
/// the selected set closest (L2) to the mean of all candidates. Ties go to
/// the lowest sample id. Returns ids in selection order.
std::vector<SampleId> herding_select(std::span<const HerdingCandidate> candidates,
                                     std::size_t quota);

/// Capacity-bounded rehearsal buffer; the only data the learner trains on.
class MemoryBuffer {
 public:
  MemoryBuffer(std::size_t capacity, MemoryPolicy policy);

  std::size_t capacity() const { return capacity_; }
  MemoryPolicy policy() const { return policy_; }
  // Sorted by (label, sample_id).
  const std::vector<MemoryEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  // Merges the task into the buffer under class-balanced quotas. The
  // candidate pool of each class is its current entries plus the task's
  // samples of that class.
  void update(const TaskSpec& task, const EmbeddingStore& store, Rng& rng);

  // (task, sample_id, label) triples sorted, for audit dumps.
  nlohmann::json snapshot() const;

 private:
  std::size_t capacity_;
  MemoryPolicy policy_;
  std::vector<MemoryEntry> entries_;
};

struct TrainingSet {
  std::size_t dim = 0;
  std::vector<float> features;  // size() x dim, row-major
  std::vector<ClassId> labels;

  std::size_t size() const { return labels.size(); }
};

// Materializes buffer embeddings in buffer order. Shuffling is the
// trainer's job.
TrainingSet as_training_set(const MemoryBuffer& buffer, const EmbeddingStore& store);

}  // namespace clare
