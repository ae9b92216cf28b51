#include "clare/memory.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <tuple>

#include "clare/errors.hpp"

namespace clare {

std::string_view to_string(MemoryPolicy policy) {
  return policy == MemoryPolicy::Herding ? "herding" : "random";
}

MemoryPolicy parse_policy(std::string_view text) {
  if (text == "random" || text == "random_balanced") return MemoryPolicy::RandomBalanced;
  if (text == "herding") return MemoryPolicy::Herding;
  throw ConfigError("unknown memory policy '" + std::string(text) + "'");
}

std::vector<std::size_t> allocate_quotas(std::span<const std::size_t> available,
                                         std::size_t capacity) {
  std::vector<std::size_t> quota(available.size(), 0);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < available.size(); ++i) {
    if (available[i] > 0) active.push_back(i);
  }
  std::size_t budget = capacity;
  while (!active.empty() && budget > 0) {
    const std::size_t share = budget / active.size();
    std::vector<std::size_t> still_active;
    for (const auto i : active) {
      if (available[i] <= share) {
        quota[i] = available[i];
        budget -= available[i];
      } else {
        still_active.push_back(i);
      }
    }
    if (still_active.size() == active.size()) {
      // Nobody saturates: everyone gets the share, the remainder goes to the
      // largest pools. All of them have > share samples, so +1 always fits.
      std::stable_sort(still_active.begin(), still_active.end(),
                       [&](std::size_t a, std::size_t b) { return available[a] > available[b]; });
      const std::size_t remainder = budget % still_active.size();
      for (std::size_t r = 0; r < still_active.size(); ++r) {
        quota[still_active[r]] = share + (r < remainder ? 1 : 0);
      }
      break;
    }
    active = std::move(still_active);
  }
  return quota;
}

std::vector<SampleId> herding_select(std::span<const HerdingCandidate> candidates,
                                     std::size_t quota) {
  if (quota > candidates.size()) {
    throw QuotaError("herding quota " + std::to_string(quota) + " exceeds " +
                     std::to_string(candidates.size()) + " candidates");
  }
  if (quota == 0) return {};
  const std::size_t dim = candidates.front().vector.size();
  for (const auto& c : candidates) {
    if (c.vector.size() != dim) throw ShapeError("herding candidates differ in width");
  }

  // Visit candidates by ascending id so strict '<' yields the lowest-id tie.
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].sample_id < candidates[b].sample_id;
  });

  std::vector<double> target(dim, 0.0);
  for (const auto& c : candidates) {
    for (std::size_t d = 0; d < dim; ++d) target[d] += c.vector[d];
  }
  for (auto& v : target) v /= static_cast<double>(candidates.size());

  std::vector<double> running(dim, 0.0);
  std::vector<bool> taken(candidates.size(), false);
  std::vector<double> score(candidates.size());
  std::vector<SampleId> selected;
  selected.reserve(quota);

  for (std::size_t step = 0; step < quota; ++step) {
    const double inv = 1.0 / static_cast<double>(step + 1);
    const auto n = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto& v = candidates[static_cast<std::size_t>(i)].vector;
      double dist = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = target[d] - (running[d] + v[d]) * inv;
        dist += diff * diff;
      }
      score[static_cast<std::size_t>(i)] = dist;
    }
    std::size_t best = candidates.size();
    double best_score = std::numeric_limits<double>::infinity();
    for (const auto i : order) {
      if (!taken[i] && (best == candidates.size() || score[i] < best_score)) {
        best = i;
        best_score = score[i];
      }
    }
    taken[best] = true;
    for (std::size_t d = 0; d < dim; ++d) running[d] += candidates[best].vector[d];
    selected.push_back(candidates[best].sample_id);
  }
  return selected;
}

MemoryBuffer::MemoryBuffer(std::size_t capacity, MemoryPolicy policy)
    : capacity_(capacity), policy_(policy) {
  if (capacity_ == 0) throw ConfigError("memory capacity must be >= 1");
}

void MemoryBuffer::update(const TaskSpec& task, const EmbeddingStore& store, Rng& rng) {
  // Pool per class, ids ascending within the class.
  std::map<ClassId, std::vector<MemoryEntry>> pools;
  for (const auto& e : entries_) pools[e.label].push_back(e);
  for (const auto id : task.train_ids()) {
    const auto& rec = store.at(id);
    if (rec.split != Split::Train) {
      throw DataError("task references test sample " + std::to_string(id));
    }
    pools[rec.label].push_back({id, rec.label, task.index()});
  }
  std::vector<std::size_t> available;
  for (auto& [label, pool] : pools) {
    std::sort(pool.begin(), pool.end(),
              [](const MemoryEntry& a, const MemoryEntry& b) { return a.sample_id < b.sample_id; });
    const auto dup = std::adjacent_find(pool.begin(), pool.end(), [](auto& a, auto& b) {
      return a.sample_id == b.sample_id;
    });
    if (dup != pool.end()) {
      throw DataError("sample " + std::to_string(dup->sample_id) + " offered to memory twice");
    }
    available.push_back(pool.size());
  }
  const auto quotas = allocate_quotas(available, capacity_);

  std::vector<MemoryEntry> next;
  next.reserve(capacity_);
  std::size_t slot = 0;
  for (auto& [label, pool] : pools) {
    const std::size_t quota = quotas[slot++];
    if (quota == 0) continue;
    std::vector<MemoryEntry> kept;
    if (policy_ == MemoryPolicy::RandomBalanced) {
      // Partial Fisher-Yates: first `quota` slots become a uniform subset.
      for (std::size_t i = 0; i < quota; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
      }
      kept.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(quota));
    } else {
      std::vector<HerdingCandidate> cands;
      cands.reserve(pool.size());
      for (const auto& e : pool) cands.push_back({e.sample_id, store.at(e.sample_id).vector});
      const auto chosen = herding_select(cands, quota);
      for (const auto id : chosen) {
        const auto it = std::lower_bound(
            pool.begin(), pool.end(), id,
            [](const MemoryEntry& e, SampleId v) { return e.sample_id < v; });
        kept.push_back(*it);
      }
    }
    std::sort(kept.begin(), kept.end(),
              [](const MemoryEntry& a, const MemoryEntry& b) { return a.sample_id < b.sample_id; });
    next.insert(next.end(), kept.begin(), kept.end());
  }
  entries_ = std::move(next);
}

nlohmann::json MemoryBuffer::snapshot() const {
  auto sorted = entries_;
  std::sort(sorted.begin(), sorted.end(), [](const MemoryEntry& a, const MemoryEntry& b) {
    return std::tie(a.task, a.sample_id) < std::tie(b.task, b.sample_id);
  });
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : sorted) rows.push_back({e.task, e.sample_id, e.label});
  return rows;
}

TrainingSet as_training_set(const MemoryBuffer& buffer, const EmbeddingStore& store) {
  TrainingSet set;
  set.dim = store.dim();
  set.features.reserve(buffer.size() * set.dim);
  set.labels.reserve(buffer.size());
  for (const auto& e : buffer.entries()) {
    const auto* rec = store.find(e.sample_id);
    if (rec == nullptr) {
      throw DataError("memory entry " + std::to_string(e.sample_id) + " is not in the store");
    }
    set.features.insert(set.features.end(), rec->vector.begin(), rec->vector.end());
    set.labels.push_back(rec->label);
  }
  return set;
}

}  // namespace clare
