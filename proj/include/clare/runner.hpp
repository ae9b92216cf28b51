#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "clare/embedstore.hpp"
#include "clare/memory.hpp"
#include "clare/metrics.hpp"
#include "clare/optim.hpp"
#include "clare/scenario.hpp"

namespace clare {

struct RunConfig {
  std::filesystem::path store_path;
  std::string dataset;  // empty: derived from the store file name
  ScenarioKind scenario = ScenarioKind::RealCL;
  int tasks = 0;  // 0: default_tasks(dataset)
  std::size_t memory_capacity = 1000;
  MemoryPolicy policy = MemoryPolicy::RandomBalanced;
  TrainStrategy strategy = TrainStrategy::Scratch;
  OptimConfig optim;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::filesystem::path output_dir;  // empty: nothing written
  bool dump_memory = false;          // buffer snapshots in the manifest files
  bool save_models = false;          // final CLDN snapshot per seed

  // Fills dataset/tasks defaults and checks invariants (ConfigError).
  void resolve();

  // Full document, including paths and seeds.
  nlohmann::json to_json() const;
  // Missing keys keep their current values, so this doubles as an overlay.
  void merge_json(const nlohmann::json& doc);
};

// cifar10 -> 5, cifar100 -> 20, tinyimagenet -> 20, anything else -> 5.
int default_tasks(std::string_view dataset);
std::string dataset_from_path(const std::filesystem::path& store_path);

// Digest of the experimental settings: everything except paths, seeds and
// output switches, so every seed of one configuration shares it.
std::uint64_t config_hash(const RunConfig& config);

/// Checks a stream against a store. Every kind must partition the training
/// split into non-empty tasks; Unrealistic and SemiRealCL must also have
/// pairwise disjoint label spaces, and Unrealistic class groups must differ
/// in size by at most one. Returns human-readable violations (empty = ok).
std::vector<std::string> validate_stream(const TaskStream& stream, const EmbeddingStore& store);

struct SeedRun {
  std::uint64_t seed = 0;
  AccuracyMatrix matrix{1};
  RunMetrics metrics;
  nlohmann::json record;  // what gets written to runs/*.json
};

struct ExperimentResult {
  std::vector<SeedRun> runs;
  AggregateMetrics aggregate;
};

/// Runs every seed of the configuration: per task, update memory, grow the
/// head to the seen classes, train on the memory, then score the frozen
/// snapshot on every seen-class prefix. Seeds run one after another; the
/// kernels are deterministic under any thread count, so output does not
/// depend on OMP_NUM_THREADS. When output_dir is set, writes
/// runs/<tag>_seed<N>.json, manifests/<tag>_seed<N>.json and refreshes
/// aggregate.csv from all run records in the directory.
ExperimentResult run_experiment(const EmbeddingStore& store, RunConfig config,
                                std::ostream* log = nullptr);

// Loads the store named in the config, then runs.
ExperimentResult run_experiment(RunConfig config, std::ostream* log = nullptr);

/// Groups run records by configuration hash and writes one CSV row per
/// configuration. Returns the number of rows.
std::size_t write_aggregate_csv(std::span<const nlohmann::json> records,
                                const std::filesystem::path& csv_path);

// Reads every *.json under dir (recursively) that is a run record.
std::vector<nlohmann::json> load_run_records(const std::filesystem::path& dir);

// The record minus its timestamp, hashed.
std::uint64_t record_hash(const nlohmann::json& record);

}  // namespace clare
