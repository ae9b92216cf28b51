// Command-line front end: synth | run | validate | report.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "clare/embedstore.hpp"
#include "clare/errors.hpp"
#include "clare/runner.hpp"
#include "clare/scenario.hpp"

namespace {

using nlohmann::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw clare::IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw clare::FormatError(path + ": " + e.what());
  }
}

void print_summary(const clare::RunConfig& config, const clare::AggregateMetrics& agg) {
  std::cout << config.dataset << " | " << clare::to_string(config.scenario) << " | M="
            << config.memory_capacity << " | K=" << config.tasks << " | "
            << clare::to_string(config.strategy) << " | " << clare::to_string(config.policy)
            << " | runs=" << agg.runs << '\n'
            << "  Last Task Accuracy        " << clare::format_percent(agg.last_task_accuracy) << '\n'
            << "  Average Accuracy          " << clare::format_percent(agg.average_accuracy) << '\n'
            << "  Average Global Forgetting " << clare::format_percent(agg.avg_global_forgetting) << '\n'
            << "  Average Task Forgetting   " << clare::format_percent(agg.avg_task_forgetting) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual learning over frozen embeddings with a growing classification head"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic embedding store");
  clare::SynthSpec spec;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output .cleb path")->required();
  synth->add_option("--classes", spec.num_classes, "Number of classes")->capture_default_str();
  synth->add_option("--dim", spec.dim, "Embedding width")->capture_default_str();
  synth->add_option("--train-per-class", spec.train_per_class)->capture_default_str();
  synth->add_option("--test-per-class", spec.test_per_class)->capture_default_str();
  synth->add_option("--radius", spec.mean_radius, "Class-mean radius")->capture_default_str();
  synth->add_option("--sigma", spec.noise_sigma, "Per-component noise")->capture_default_str();
  synth->add_option("--seed", spec.seed)->capture_default_str();

  // run
  auto* run = app.add_subcommand("run", "Run an experiment over one or more seeds");
  std::string config_file, store, dataset, scenario, policy, strategy, out;
  int tasks = 0;
  std::size_t memory = 0, batch_size = 0;
  int epochs = -1;
  double lr_max = 0, lr_min = 0, weight_decay = -1, mix_prob = -1;
  std::vector<std::uint64_t> seeds;
  bool dump_memory = false, save_models = false, quiet = false;
  run->add_option("--config", config_file, "Run-config JSON; flags override it");
  run->add_option("--store", store, "Embedding store (.cleb)");
  run->add_option("--dataset", dataset, "Dataset label (default: store file name)");
  run->add_option("--scenario", scenario, "unreal | semireal | real")
      ->check(CLI::IsMember({"unreal", "semireal", "real", "unrealistic", "semirealcl", "realcl"}));
  run->add_option("--tasks", tasks, "Number of tasks K");
  run->add_option("--memory", memory, "Memory capacity M");
  run->add_option("--policy", policy, "random | herding")->check(CLI::IsMember({"random", "herding"}));
  run->add_option("--strategy", strategy, "scratch | finetune")
      ->check(CLI::IsMember({"scratch", "finetune"}));
  run->add_option("--epochs", epochs, "Epochs per task");
  run->add_option("--seeds", seeds, "Seeds (space or comma separated)")->delimiter(',');
  run->add_option("--out", out, "Output directory");
  run->add_option("--batch-size", batch_size);
  run->add_option("--lr-max", lr_max);
  run->add_option("--lr-min", lr_min);
  run->add_option("--weight-decay", weight_decay);
  run->add_option("--mix-prob", mix_prob);
  run->add_flag("--dump-memory", dump_memory, "Add buffer snapshots to the manifests");
  run->add_flag("--save-models", save_models, "Write the final model of each seed");
  run->add_flag("--quiet", quiet, "No per-task progress");

  // validate
  auto* validate = app.add_subcommand("validate", "Check a task stream against a store");
  std::string v_store, v_manifest, v_scenario = "real";
  int v_tasks = 5;
  std::uint64_t v_seed = 1;
  validate->add_option("--store", v_store)->required();
  validate->add_option("--manifest", v_manifest, "Stream manifest JSON (else generate one)");
  validate->add_option("--scenario", v_scenario)->capture_default_str();
  validate->add_option("--tasks", v_tasks)->capture_default_str();
  validate->add_option("--seed", v_seed)->capture_default_str();

  // report
  auto* report = app.add_subcommand("report", "Re-aggregate run records into a CSV");
  std::vector<std::string> inputs;
  std::string report_out = "aggregate.csv";
  report->add_option("inputs", inputs, "Directories holding run JSON records")->required();
  report->add_option("--out", report_out)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const auto s = clare::generate_synthetic(spec);
      clare::save_store(s, synth_out);
      std::cout << "wrote " << s.records().size() << " records (" << s.num_classes()
                << " classes, dim " << s.dim() << ") to " << synth_out << '\n';
    } else if (*run) {
      clare::RunConfig config;
      if (!config_file.empty()) config.merge_json(read_json_file(config_file));
      if (!store.empty()) config.store_path = store;
      if (!dataset.empty()) config.dataset = dataset;
      if (!scenario.empty()) config.scenario = clare::parse_scenario(scenario);
      if (tasks != 0) config.tasks = tasks;
      if (memory != 0) config.memory_capacity = memory;
      if (!policy.empty()) config.policy = clare::parse_policy(policy);
      if (!strategy.empty()) config.strategy = clare::parse_strategy(strategy);
      if (epochs >= 0) config.optim.epochs_per_task = epochs;
      if (!seeds.empty()) config.seeds = seeds;
      if (!out.empty()) config.output_dir = out;
      if (batch_size != 0) config.optim.batch_size = batch_size;
      if (lr_max > 0) config.optim.lr_max = lr_max;
      if (lr_min > 0) config.optim.lr_min = lr_min;
      if (weight_decay >= 0) config.optim.weight_decay = weight_decay;
      if (mix_prob >= 0) config.optim.mix_prob = mix_prob;
      if (dump_memory) config.dump_memory = true;
      if (save_models) config.save_models = true;
      if (config.store_path.empty()) throw clare::ConfigError("no store given (--store or config)");
      config.resolve();
      const auto result = clare::run_experiment(config, quiet ? nullptr : &std::cerr);
      print_summary(config, result.aggregate);
    } else if (*validate) {
      const auto s = clare::load_store(v_store);
      const auto stream =
          v_manifest.empty()
              ? clare::generate_stream(clare::parse_scenario(v_scenario), s, v_tasks, v_seed)
              : clare::stream_from_manifest(read_json_file(v_manifest), s);
      const auto violations = clare::validate_stream(stream, s);
      if (violations.empty()) {
        std::cout << "ok: " << clare::to_string(stream.kind) << " stream, " << stream.size()
                  << " tasks\n";
        return 0;
      }
      for (const auto& v : violations) std::cout << "violation: " << v << '\n';
      return 1;
    } else if (*report) {
      std::vector<json> records;
      for (const auto& dir : inputs) {
        auto part = clare::load_run_records(dir);
        records.insert(records.end(), part.begin(), part.end());
      }
      const auto rows = clare::write_aggregate_csv(records, report_out);
      std::cout << "wrote " << rows << " configuration rows from " << records.size()
                << " run records to " << report_out << '\n';
    }
  } catch (const clare::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
