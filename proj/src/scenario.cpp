#include "clare/scenario.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "clare/errors.hpp"
#include "clare/hash.hpp"
#include "clare/random.hpp"

namespace clare {

namespace {

std::vector<ClassId> train_classes(const EmbeddingStore& store) {
  std::vector<bool> present(store.num_classes(), false);
  for (const auto& r : store.records()) {
    if (r.split == Split::Train) present[r.label] = true;
  }
  std::vector<ClassId> out;
  for (std::size_t c = 0; c < present.size(); ++c) {
    if (present[c]) out.push_back(static_cast<ClassId>(c));
  }
  return out;
}

// Tasks from a class -> task-slot assignment (slot 0-based).
TaskStream tasks_from_class_groups(ScenarioKind kind, std::uint64_t seed,
                                   const EmbeddingStore& store,
                                   const std::map<ClassId, int>& slot_of_class, int num_tasks) {
  std::vector<std::vector<SampleId>> ids(static_cast<std::size_t>(num_tasks));
  for (const auto& r : store.records()) {
    if (r.split != Split::Train) continue;
    ids[static_cast<std::size_t>(slot_of_class.at(r.label))].push_back(r.sample_id);
  }
  TaskStream stream{kind, seed, {}};
  for (int k = 0; k < num_tasks; ++k) {
    stream.tasks.emplace_back(k + 1, std::move(ids[static_cast<std::size_t>(k)]), store);
  }
  return stream;
}

void require_tasks(int num_tasks) {
  if (num_tasks < 1) throw ConfigError("number of tasks must be >= 1");
}

}  // namespace

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Unrealistic: return "unrealistic";
    case ScenarioKind::SemiRealCL: return "semirealcl";
    case ScenarioKind::RealCL: return "realcl";
  }
  return "?";
}

ScenarioKind parse_scenario(std::string_view text) {
  if (text == "unreal" || text == "unrealistic") return ScenarioKind::Unrealistic;
  if (text == "semireal" || text == "semirealcl") return ScenarioKind::SemiRealCL;
  if (text == "real" || text == "realcl") return ScenarioKind::RealCL;
  throw ConfigError("unknown scenario '" + std::string(text) + "'");
}

TaskSpec::TaskSpec(int index, std::vector<SampleId> train_ids, const EmbeddingStore& store)
    : index_(index), train_ids_(std::move(train_ids)) {
  std::sort(train_ids_.begin(), train_ids_.end());
  for (const auto id : train_ids_) label_space_.push_back(store.at(id).label);
  std::sort(label_space_.begin(), label_space_.end());
  label_space_.erase(std::unique(label_space_.begin(), label_space_.end()), label_space_.end());
}

TaskStream gen_unrealistic(const EmbeddingStore& store, int num_tasks, std::uint64_t seed) {
  require_tasks(num_tasks);
  auto classes = train_classes(store);
  const auto n_classes = classes.size();
  if (n_classes < static_cast<std::size_t>(num_tasks)) {
    throw ConfigError("unrealistic scenario needs at least K classes (" +
                      std::to_string(n_classes) + " < " + std::to_string(num_tasks) + ")");
  }
  Rng rng(seed);
  rng.shuffle(std::span(classes));
  const auto k = static_cast<std::size_t>(num_tasks);
  const std::size_t base = n_classes / k;
  const std::size_t extra = n_classes % k;
  std::map<ClassId, int> slot;
  std::size_t pos = 0;
  for (std::size_t t = 0; t < k; ++t) {
    const std::size_t size = base + (t < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) slot[classes[pos++]] = static_cast<int>(t);
  }
  return tasks_from_class_groups(ScenarioKind::Unrealistic, seed, store, slot, num_tasks);
}

TaskStream gen_semireal(const EmbeddingStore& store, int num_tasks, std::uint64_t seed) {
  require_tasks(num_tasks);
  const auto classes = train_classes(store);
  if (classes.size() < static_cast<std::size_t>(num_tasks)) {
    throw ConfigError("SemiRealCL scenario needs at least K classes (" +
                      std::to_string(classes.size()) + " < " + std::to_string(num_tasks) + ")");
  }
  Rng rng(seed);
  std::map<ClassId, int> slot;
  for (;;) {
    std::vector<int> used(static_cast<std::size_t>(num_tasks), 0);
    for (const auto c : classes) {
      const auto t = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_tasks)));
      slot[c] = t;
      ++used[static_cast<std::size_t>(t)];
    }
    if (std::find(used.begin(), used.end(), 0) == used.end()) break;
  }
  return tasks_from_class_groups(ScenarioKind::SemiRealCL, seed, store, slot, num_tasks);
}

TaskStream gen_realcl(const EmbeddingStore& store, int num_tasks, std::uint64_t seed) {
  require_tasks(num_tasks);
  auto ids = store.ids(Split::Train);
  if (ids.size() < static_cast<std::size_t>(num_tasks)) {
    throw ConfigError("RealCL scenario needs at least K training samples");
  }
  Rng rng(seed);
  rng.shuffle(std::span(ids));
  const auto k = static_cast<std::size_t>(num_tasks);
  const std::size_t base = ids.size() / k;
  const std::size_t extra = ids.size() % k;
  TaskStream stream{ScenarioKind::RealCL, seed, {}};
  std::size_t pos = 0;
  for (std::size_t t = 0; t < k; ++t) {
    const std::size_t size = base + (t < extra ? 1 : 0);
    std::vector<SampleId> chunk(ids.begin() + static_cast<std::ptrdiff_t>(pos),
                                ids.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
    stream.tasks.emplace_back(static_cast<int>(t) + 1, std::move(chunk), store);
  }
  return stream;
}

TaskStream generate_stream(ScenarioKind kind, const EmbeddingStore& store, int num_tasks,
                           std::uint64_t seed) {
  switch (kind) {
    case ScenarioKind::Unrealistic: return gen_unrealistic(store, num_tasks, seed);
    case ScenarioKind::SemiRealCL: return gen_semireal(store, num_tasks, seed);
    case ScenarioKind::RealCL: return gen_realcl(store, num_tasks, seed);
  }
  throw ConfigError("unknown scenario");
}

SeenClasses seen_classes(const TaskStream& stream) {
  SeenClasses seen;
  std::vector<ClassId> acc;
  for (const auto& task : stream.tasks) {
    std::vector<ClassId> merged;
    std::set_union(acc.begin(), acc.end(), task.label_space().begin(), task.label_space().end(),
                   std::back_inserter(merged));
    acc = std::move(merged);
    seen.push_back(acc);
  }
  return seen;
}

nlohmann::json stream_manifest(const TaskStream& stream) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : stream.tasks) tasks.push_back(t.train_ids());
  return {
      {"format", "clare-stream-manifest"},
      {"version", 1},
      {"kind", to_string(stream.kind)},
      {"tasks", stream.tasks.size()},
      {"seed", stream.seed},
      {"task_ids", std::move(tasks)},
  };
}

TaskStream stream_from_manifest(const nlohmann::json& manifest, const EmbeddingStore& store) {
  try {
    if (manifest.at("format") != "clare-stream-manifest" || manifest.at("version") != 1) {
      throw FormatError("not a version-1 stream manifest");
    }
    TaskStream stream;
    stream.kind = parse_scenario(manifest.at("kind").get<std::string>());
    stream.seed = manifest.at("seed").get<std::uint64_t>();
    int k = 1;
    for (const auto& ids : manifest.at("task_ids")) {
      stream.tasks.emplace_back(k++, ids.get<std::vector<SampleId>>(), store);
    }
    if (stream.tasks.size() != manifest.at("tasks").get<std::size_t>()) {
      throw FormatError("manifest task count does not match task_ids");
    }
    return stream;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed stream manifest: ") + e.what());
  }
}

std::uint64_t manifest_hash(const TaskStream& stream) {
  return fnv1a64(stream_manifest(stream).dump());
}

}  // namespace clare
