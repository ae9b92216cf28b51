#include "clare/runner.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>

#include "clare/errors.hpp"
#include "clare/hash.hpp"

namespace clare {

namespace fs = std::filesystem;
using nlohmann::json;

int default_tasks(std::string_view dataset) {
  if (dataset == "cifar100" || dataset == "tinyimagenet") return 20;
  return 5;
}

std::string dataset_from_path(const fs::path& store_path) {
  std::string out;
  for (const char c : store_path.stem().string()) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out.empty() ? "store" : out;
}

void RunConfig::resolve() {
  if (dataset.empty()) dataset = dataset_from_path(store_path);
  if (tasks == 0) tasks = default_tasks(dataset);
  if (tasks < 1) throw ConfigError("tasks must be >= 1");
  if (memory_capacity < 1) throw ConfigError("memory capacity must be >= 1");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  optim.validate();
}

namespace {

json optim_json(const OptimConfig& o) {
  return {
      {"batch_size", o.batch_size},
      {"weight_decay", o.weight_decay},
      {"lr_max", o.lr_max},
      {"lr_min", o.lr_min},
      {"t0", o.cycle_length},
      {"t_mult", o.cycle_multiplier},
      {"warmup_epochs", o.warmup_epochs},
      {"epochs_per_task", o.epochs_per_task},
      {"mix_prob", o.mix_prob},
      {"mix_strength", o.mix_strength},
  };
}

template <typename T>
void take(const json& doc, const char* key, T& field) {
  if (doc.contains(key)) field = doc.at(key).get<T>();
}

json settings_json(const RunConfig& c) {
  return {
      {"dataset", c.dataset},
      {"scenario", to_string(c.scenario)},
      {"tasks", c.tasks},
      {"memory", c.memory_capacity},
      {"policy", to_string(c.policy)},
      {"strategy", to_string(c.strategy)},
      {"optim", optim_json(c.optim)},
  };
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string config_tag(const RunConfig& c) {
  return c.dataset + "_" + std::string(to_string(c.scenario)) + "_M" +
         std::to_string(c.memory_capacity) + "_K" + std::to_string(c.tasks) + "_" +
         std::string(to_string(c.strategy)) + "_" + std::string(to_string(c.policy)) + "_" +
         hex64(config_hash(c)).substr(0, 8);
}

void write_json(const fs::path& path, const json& doc) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace

json RunConfig::to_json() const {
  json doc = settings_json(*this);
  doc["store"] = store_path.string();
  doc["seeds"] = seeds;
  doc["out"] = output_dir.string();
  doc["dump_memory"] = dump_memory;
  doc["save_models"] = save_models;
  return doc;
}

void RunConfig::merge_json(const json& doc) {
  try {
    if (doc.contains("store")) store_path = doc.at("store").get<std::string>();
    if (doc.contains("out")) output_dir = doc.at("out").get<std::string>();
    take(doc, "dataset", dataset);
    if (doc.contains("scenario")) scenario = parse_scenario(doc.at("scenario").get<std::string>());
    take(doc, "tasks", tasks);
    take(doc, "memory", memory_capacity);
    if (doc.contains("policy")) policy = parse_policy(doc.at("policy").get<std::string>());
    if (doc.contains("strategy")) strategy = parse_strategy(doc.at("strategy").get<std::string>());
    take(doc, "seeds", seeds);
    take(doc, "dump_memory", dump_memory);
    take(doc, "save_models", save_models);
    if (doc.contains("optim")) {
      const auto& o = doc.at("optim");
      take(o, "batch_size", optim.batch_size);
      take(o, "weight_decay", optim.weight_decay);
      take(o, "lr_max", optim.lr_max);
      take(o, "lr_min", optim.lr_min);
      take(o, "t0", optim.cycle_length);
      take(o, "t_mult", optim.cycle_multiplier);
      take(o, "warmup_epochs", optim.warmup_epochs);
      take(o, "epochs_per_task", optim.epochs_per_task);
      take(o, "mix_prob", optim.mix_prob);
      take(o, "mix_strength", optim.mix_strength);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad run config: ") + e.what());
  }
}

std::uint64_t config_hash(const RunConfig& config) {
  return fnv1a64(settings_json(config).dump());
}

std::vector<std::string> validate_stream(const TaskStream& stream, const EmbeddingStore& store) {
  std::vector<std::string> violations;
  if (stream.tasks.empty()) {
    violations.push_back("stream has no tasks");
    return violations;
  }
  std::map<SampleId, int> owner;
  for (std::size_t t = 0; t < stream.tasks.size(); ++t) {
    const auto& task = stream.tasks[t];
    const auto label = "task " + std::to_string(t + 1);
    if (task.index() != static_cast<int>(t) + 1) {
      violations.push_back(label + ": index " + std::to_string(task.index()) + " out of sequence");
    }
    if (task.train_ids().empty()) violations.push_back(label + ": empty task");
    for (const auto id : task.train_ids()) {
      const auto* rec = store.find(id);
      if (rec == nullptr) {
        violations.push_back(label + ": sample " + std::to_string(id) + " not in store");
        continue;
      }
      if (rec->split != Split::Train) {
        violations.push_back(label + ": sample " + std::to_string(id) + " is a test sample");
      }
      const auto [it, fresh] = owner.emplace(id, task.index());
      if (!fresh) {
        violations.push_back("sample in two tasks: " + std::to_string(id) + " (tasks " +
                             std::to_string(it->second) + " and " +
                             std::to_string(task.index()) + ")");
      }
    }
  }
  std::size_t missing = 0;
  for (const auto id : store.ids(Split::Train)) {
    if (!owner.contains(id)) ++missing;
  }
  if (missing > 0) {
    violations.push_back(std::to_string(missing) + " training samples belong to no task");
  }

  if (stream.kind == ScenarioKind::RealCL) return violations;

  std::map<ClassId, int> class_owner;
  for (const auto& task : stream.tasks) {
    for (const auto c : task.label_space()) {
      const auto [it, fresh] = class_owner.emplace(c, task.index());
      if (!fresh) {
        violations.push_back("label spaces overlap: class " + std::to_string(c) +
                             " in tasks " + std::to_string(it->second) + " and " +
                             std::to_string(task.index()));
      }
    }
  }
  if (stream.kind == ScenarioKind::Unrealistic) {
    std::size_t lo = SIZE_MAX;
    std::size_t hi = 0;
    for (const auto& task : stream.tasks) {
      lo = std::min(lo, task.label_space().size());
      hi = std::max(hi, task.label_space().size());
    }
    if (hi - lo > 1) {
      violations.push_back("balance violation: class groups range from " + std::to_string(lo) +
                           " to " + std::to_string(hi) + " classes");
    }
  }
  return violations;
}

std::uint64_t record_hash(const json& record) {
  json copy = record;
  copy.erase("timestamp");
  copy.erase("record_hash");
  return fnv1a64(copy.dump());
}

ExperimentResult run_experiment(const EmbeddingStore& store, RunConfig config,
                                std::ostream* log) {
  config.resolve();
  const auto chash = hex64(config_hash(config));
  const auto shash = hex64(store_hash(store));
  const auto tag = config_tag(config);
  ExperimentResult result;

  for (const auto seed : config.seeds) {
    const auto stream = generate_stream(config.scenario, store, config.tasks, seed);
    if (const auto bad = validate_stream(stream, store); !bad.empty()) {
      throw DataError("generated stream failed validation: " + bad.front());
    }
    const auto seen = seen_classes(stream);
    const auto mhash = hex64(manifest_hash(stream));
    json manifest = stream_manifest(stream);
    json memory_dumps = json::array();

    MemoryBuffer buffer(config.memory_capacity, config.policy);
    Rng memory_rng(mix_seed(seed, 0x6d656d6f7279ULL));
    std::optional<DynNanModel> model;
    AccuracyMatrix matrix(config.tasks);
    json memory_sizes = json::array();
    json final_losses = json::array();

    for (const auto& task : stream.tasks) {
      const int k = task.index();
      buffer.update(task, store, memory_rng);
      const auto& classes = seen[static_cast<std::size_t>(k - 1)];
      if (!model) {
        model = DynNanModel::init(store.dim(), classes, init_seed(seed, k));
      } else {
        std::vector<ClassId> fresh;
        const auto& known = model->class_map();
        for (const auto c : classes) {
          if (std::find(known.begin(), known.end(), c) == known.end()) fresh.push_back(c);
        }
        model->expand(fresh, init_seed(seed, k));
      }
      const auto data = as_training_set(buffer, store);
      const auto report = train_task(*model, data, config.optim, config.strategy, seed, k);
      const auto row = evaluate_row(
          *model, store, std::span(seen).first(static_cast<std::size_t>(k)));
      for (int kk = 1; kk <= k; ++kk) matrix.set(k, kk, row[static_cast<std::size_t>(kk - 1)]);

      memory_sizes.push_back(buffer.size());
      final_losses.push_back(report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back());
      if (config.dump_memory) memory_dumps.push_back({{"task", k}, {"entries", buffer.snapshot()}});
      if (log) {
        char line[160];
        std::snprintf(line, sizeof line,
                      "seed %llu task %d/%d: memory %zu, classes %zu, A_k %.4f\n",
                      static_cast<unsigned long long>(seed), k, config.tasks, buffer.size(),
                      classes.size(), row.back());
        *log << line << std::flush;
      }
    }

    SeedRun run;
    run.seed = seed;
    run.metrics = compute_metrics(matrix);
    run.matrix = matrix;
    run.record = {
        {"format", "clare-run"},
        {"version", 1},
        {"config", settings_json(config)},
        {"config_hash", chash},
        {"store_hash", shash},
        {"manifest_hash", mhash},
        {"seed", seed},
        {"accuracy_matrix", matrix.to_json()},
        {"metrics", run.metrics.to_json()},
        {"memory_sizes", memory_sizes},
        {"final_epoch_loss", final_losses},
    };
    run.record["record_hash"] = hex64(record_hash(run.record));
    run.record["timestamp"] = utc_timestamp();

    if (!config.output_dir.empty()) {
      const auto name = tag + "_seed" + std::to_string(seed) + ".json";
      write_json(config.output_dir / "runs" / name, run.record);
      if (config.dump_memory) manifest["memory"] = memory_dumps;
      manifest["manifest_hash"] = mhash;
      write_json(config.output_dir / "manifests" / name, manifest);
      if (config.save_models) {
        fs::create_directories(config.output_dir / "models");
        save_model(*model, config.output_dir / "models" / (tag + "_seed" + std::to_string(seed) + ".cldn"));
      }
    }
    result.runs.push_back(std::move(run));
  }

  std::vector<RunMetrics> metrics;
  for (const auto& r : result.runs) metrics.push_back(r.metrics);
  result.aggregate = aggregate_runs(metrics);

  if (!config.output_dir.empty()) {
    const auto records = load_run_records(config.output_dir / "runs");
    write_aggregate_csv(records, config.output_dir / "aggregate.csv");
  }
  return result;
}

ExperimentResult run_experiment(RunConfig config, std::ostream* log) {
  const auto store = load_store(config.store_path);
  return run_experiment(store, std::move(config), log);
}

std::vector<json> load_run_records(const fs::path& dir) {
  std::vector<fs::path> files;
  if (!fs::exists(dir)) return {};
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<json> records;
  for (const auto& f : files) {
    std::ifstream in(f);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_object() && doc.value("format", "") == "clare-run") records.push_back(std::move(doc));
  }
  return records;
}

std::size_t write_aggregate_csv(std::span<const json> records, const fs::path& csv_path) {
  // Preserve first-seen order of configurations; seeds sorted within each.
  std::vector<std::string> order;
  std::map<std::string, std::map<std::uint64_t, const json*>> groups;
  for (const auto& r : records) {
    const auto key = r.at("config_hash").get<std::string>();
    if (!groups.contains(key)) order.push_back(key);
    groups[key][r.at("seed").get<std::uint64_t>()] = &r;
  }

  if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
  std::ofstream out(csv_path);
  if (!out) throw IoError("cannot write " + csv_path.string());
  out << "dataset,scenario,memory,tasks,strategy,policy,config_hash,runs,"
         "last_task_accuracy_mean,last_task_accuracy_std,"
         "average_accuracy_mean,average_accuracy_std,"
         "avg_global_forgetting_mean,avg_global_forgetting_std,"
         "avg_task_forgetting_mean,avg_task_forgetting_std\n";
  for (const auto& key : order) {
    std::vector<RunMetrics> metrics;
    const json* first = nullptr;
    for (const auto& [seed, rec] : groups[key]) {
      if (!first) first = rec;
      metrics.push_back(RunMetrics::from_json(rec->at("metrics")));
    }
    const auto agg = aggregate_runs(metrics);
    const auto& c = first->at("config");
    out << c.at("dataset").get<std::string>() << ',' << c.at("scenario").get<std::string>() << ','
        << c.at("memory").get<std::size_t>() << ',' << c.at("tasks").get<int>() << ','
        << c.at("strategy").get<std::string>() << ',' << c.at("policy").get<std::string>() << ','
        << key << ',' << agg.runs;
    for (const auto* f : {&agg.last_task_accuracy, &agg.average_accuracy,
                          &agg.avg_global_forgetting, &agg.avg_task_forgetting}) {
      char buf[64];
      std::snprintf(buf, sizeof buf, ",%.2f,%.2f", 100.0 * f->mean, 100.0 * f->std);
      out << buf;
    }
    out << '\n';
  }
  return order.size();
}

}  // namespace clare
