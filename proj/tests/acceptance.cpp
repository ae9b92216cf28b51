// Acceptance run: one PASS/FAIL/SKIP line per criterion, exit status 1 if
// anything failed. Real-embedding checks look for cifar10.cleb and
// cifar100.cleb under $CLARE_DATA_DIR and are skipped when absent.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <tuple>

#include "clare/dynnan.hpp"
#include "clare/memory.hpp"
#include "clare/metrics.hpp"
#include "clare/optim.hpp"
#include "clare/runner.hpp"
#include "clare/scenario.hpp"
#include "oracles.hpp"

using namespace clare;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Tally {
  int passed = 0, failed = 0, skipped = 0;

  bool report(bool ok, const std::string& name, const std::string& detail) {
    std::printf("%s  %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    ++(ok ? passed : failed);
    return ok;
  }
  void skip(const std::string& name, const std::string& why) {
    std::printf("SKIP  %s: %s\n", name.c_str(), why.c_str());
    std::fflush(stdout);
    ++skipped;
  }
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

// --- property suite -------------------------------------------------------

bool scenario_invariants(Tally& t) {
  const auto store = generate_synthetic({.num_classes = 20, .dim = 16, .train_per_class = 12,
                                         .test_per_class = 2, .seed = 5});
  int streams = 0, bad = 0, bad_as_real = 0;
  for (const auto kind : {ScenarioKind::Unrealistic, ScenarioKind::SemiRealCL, ScenarioKind::RealCL}) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const int k = 1 + static_cast<int>(seed % 10);
      auto stream = generate_stream(kind, store, k, seed);
      ++streams;
      if (!validate_stream(stream, store).empty()) ++bad;
      stream.kind = ScenarioKind::RealCL;
      if (kind != ScenarioKind::RealCL && !validate_stream(stream, store).empty()) ++bad_as_real;
    }
  }
  const bool a = t.report(bad == 0, "scenario partition/disjointness/balance",
                          fmt("%d streams over 3 generators x 100 seeds, %d violations", streams, bad));
  const bool b = t.report(bad_as_real == 0, "unrealistic and SemiRealCL streams are valid RealCL streams",
                          fmt("200 streams re-checked as RealCL, %d rejected", bad_as_real));
  return a && b;
}

bool memory_invariants(Tally& t) {
  const auto store = generate_synthetic({.num_classes = 12, .dim = 4, .train_per_class = 15,
                                         .test_per_class = 1, .seed = 8});
  Rng meta(2024);
  int trials = 0, violations = 0;
  for (; trials < 1000; ++trials) {
    const auto kind = static_cast<ScenarioKind>(meta.below(3));
    const auto stream = generate_stream(kind, store, 1 + static_cast<int>(meta.below(6)), meta.next());
    const auto cap = static_cast<std::size_t>(1 + meta.below(200));
    MemoryBuffer buffer(cap, trials % 10 == 0 ? MemoryPolicy::Herding : MemoryPolicy::RandomBalanced);
    Rng rng(meta.next());
    std::set<ClassId> seen;
    std::size_t offered = 0;
    for (const auto& task : stream.tasks) {
      buffer.update(task, store, rng);
      offered += task.train_ids().size();
      seen.insert(task.label_space().begin(), task.label_space().end());
      std::set<ClassId> held;
      std::set<SampleId> ids;
      bool ok = buffer.size() == std::min(cap, offered);
      for (const auto& e : buffer.entries()) {
        held.insert(e.label);
        ok = ok && ids.insert(e.sample_id).second && e.task <= task.index();
      }
      if (cap >= seen.size()) ok = ok && held == seen;
      if (!ok) ++violations;
    }
  }
  return t.report(violations == 0, "memory capacity and class coverage",
                  fmt("%d randomized update sequences, %d violating snapshots", trials, violations));
}

bool gradient_check(Tally& t) {
  Rng rng(77);
  const double eps = 1e-4;
  int instances = 0;
  long checked = 0;
  double worst = 0.0;
  for (; instances < 24; ++instances) {
    const std::size_t in = 3 + rng.below(6), hidden = 4 + rng.below(8), classes = 2 + rng.below(5);
    const std::size_t rows = 1 + rng.below(6);
    std::vector<ClassId> cmap;
    for (std::size_t c = 0; c < classes; ++c) cmap.push_back(static_cast<ClassId>(c));
    auto m = BasicDynNan<double>::init(in, cmap, rng.next(), hidden);
    for (auto& l : m.layers()) {
      for (auto& b : l.bias) b = 0.1 * rng.normal();
    }
    std::vector<double> x(rows * in);
    for (auto& v : x) v = 2.0 * rng.normal();
    std::vector<MixedTarget> targets;
    for (std::size_t r = 0; r < rows; ++r) targets.push_back({rng.below(classes), rng.below(classes), rng.uniform()});
    const double wd = instances % 2 == 0 ? 0.0 : 1e-2;
    const auto base = m.forward(x, rows);
    const auto grad = m.loss_and_grad(base, targets, wd).grad;
    auto mask = [](const ForwardPass<double>& p) {
      std::vector<bool> out;
      for (const double h : p.hidden1) out.push_back(h > 0.0);
      for (const double h : p.hidden2) out.push_back(h > 0.0);
      return out;
    };
    const auto active = mask(base);
    for (std::size_t li = 0; li < 3; ++li) {
      for (const bool bias : {false, true}) {
        auto& p = bias ? m.layers()[li].bias : m.layers()[li].weight;
        const auto& g = bias ? grad[li].bias : grad[li].weight;
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double saved = p[i];
          p[i] = saved + eps;
          const auto fp = m.forward(x, rows);
          const double lp = m.loss_and_grad(fp, targets, wd).loss;
          p[i] = saved - eps;
          const auto fm = m.forward(x, rows);
          const double lm = m.loss_and_grad(fm, targets, wd).loss;
          p[i] = saved;
          if (mask(fp) != active || mask(fm) != active) continue;  // straddles a ReLU kink
          const double num = (lp - lm) / (2.0 * eps);
          worst = std::max(worst, std::abs(num - g[i]) / std::max({std::abs(num), std::abs(g[i]), 1e-3}));
          ++checked;
        }
      }
    }
  }
  return t.report(worst < 1e-5 && instances >= 20, "gradient check (64-bit)",
                  fmt("%d instances, %ld coordinates, max relative error %.2e (< 1e-5)", instances, checked, worst));
}

bool expansion_preservation(Tally& t) {
  Rng rng(31);
  int cases = 0, changed = 0;
  for (; cases < 100; ++cases) {
    std::vector<ClassId> classes;
    const auto n0 = 1 + rng.below(8);
    for (std::size_t c = 0; c < n0; ++c) classes.push_back(static_cast<ClassId>(2 * c));
    auto m = DynNanModel::init(24, classes, rng.next(), 32);
    std::vector<float> x(5 * 24);
    for (auto& v : x) v = static_cast<float>(rng.normal());
    const auto before = m.forward(x, 5).logits;
    std::vector<ClassId> extra;
    const auto n1 = 1 + rng.below(6);
    for (std::size_t c = 0; c < n1; ++c) extra.push_back(static_cast<ClassId>(101 + c));
    m.expand(extra, rng.next());
    const auto after = m.forward(x, 5).logits;
    for (std::size_t r = 0; r < 5; ++r) {
      if (std::memcmp(&before[r * n0], &after[r * (n0 + n1)], n0 * sizeof(float)) != 0) {
        ++changed;
        break;
      }
    }
  }
  return t.report(changed == 0, "expansion preserves old-class logits bitwise",
                  fmt("%d random expansions, %d changed", cases, changed));
}

bool metric_oracle(Tally& t) {
  Rng rng(4);
  int matrices = 0;
  double worst = 0.0, worst_tele = 0.0;
  for (; matrices < 1000; ++matrices) {
    const int K = 1 + static_cast<int>(rng.below(8));
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(K));
    AccuracyMatrix m(K);
    for (int j = 1; j <= K; ++j) {
      for (int k = 1; k <= j; ++k) {
        const double v = rng.uniform();
        rows[static_cast<std::size_t>(j - 1)].push_back(v);
        m.set(j, k, v);
      }
    }
    const auto got = compute_metrics(m);
    const auto want = oracle::metrics(rows);
    for (const double d : {got.last_task_accuracy - want.a_last, got.average_accuracy - want.a_avg,
                           got.avg_global_forgetting - want.f_avg_g, got.avg_task_forgetting - want.f_avg_t}) {
      worst = std::max(worst, std::abs(d));
    }
    const double tele = (rows.front().front() - rows.back().back()) / K;
    worst_tele = std::max(worst_tele, std::abs(got.avg_global_forgetting - tele));
  }
  return t.report(worst <= 1e-12 && worst_tele <= 1e-12, "metric oracle and telescoping identity",
                  fmt("%d matrices (K <= 8), max deviation %.1e, telescoping %.1e", matrices, worst, worst_tele));
}

bool sgdr_schedule(Tally& t) {
  const OptimConfig c;
  const auto starts = cycle_starts(c);
  bool exact = true;
  double end_err = 0.0;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    exact = exact && lr_at(c, starts[i]) == 0.005;
    const double end = i + 1 < starts.size() ? starts[i + 1] : c.epochs_per_task;
    end_err = std::max(end_err, std::abs(lr_at(c, std::nextafter(end, 0.0)) - 5e-5));
  }
  std::vector<double> offsets;
  for (const double s : starts) offsets.push_back(s - c.warmup_epochs);
  const bool bounds = offsets == std::vector<double>{0, 1, 3, 7};
  const bool ok = exact && end_err <= 1e-12 && bounds;
  return t.report(ok, "SGDR schedule",
                  fmt("restarts exactly 0.005: %s; cycle-end error %.1e; boundaries warm+{0,1,3,7} "
                      "(next at warm+15 = epoch 16 = end of task): %s",
                      exact ? "yes" : "no", end_err, bounds ? "yes" : "no"));
}

// --- end-to-end ------------------------------------------------------------

void synthetic_end_to_end(Tally& t) {
  const auto start = Clock::now();
  const auto store = generate_synthetic({.num_classes = 10, .dim = 64, .train_per_class = 200,
                                         .test_per_class = 100, .mean_radius = 10.0,
                                         .noise_sigma = 1.0, .seed = 0});
  RunConfig c;
  c.dataset = "synthetic";
  c.scenario = ScenarioKind::RealCL;
  c.tasks = 5;
  c.memory_capacity = 1000;
  c.strategy = TrainStrategy::Scratch;
  c.seeds = {1, 2, 3};
  const auto result = run_experiment(store, c);
  const double elapsed = seconds_since(start);
  bool ok = elapsed < 120.0;
  std::string per_seed;
  for (const auto& r : result.runs) {
    ok = ok && r.metrics.last_task_accuracy >= 0.99 && std::abs(r.metrics.avg_global_forgetting) <= 0.005;
    per_seed += fmt(" [seed %llu: A_K %.4f, F_AvgG %+.4f]", static_cast<unsigned long long>(r.seed),
                    r.metrics.last_task_accuracy, r.metrics.avg_global_forgetting);
  }
  t.report(ok, "synthetic end-to-end (RealCL, K=5, M=1000, Scratch)",
           fmt("A_K %s, F_AvgG %s, %.1f s (< 120 s);", format_percent(result.aggregate.last_task_accuracy).c_str(),
               format_percent(result.aggregate.avg_global_forgetting).c_str(), elapsed) +
               per_seed);
}

// --- real embeddings --------------------------------------------------------

struct RealRuns {
  EmbeddingStore store;
  std::string name;
  std::map<std::tuple<ScenarioKind, std::size_t, TrainStrategy>, AggregateMetrics> cache;

  const AggregateMetrics& get(ScenarioKind kind, std::size_t memory, TrainStrategy strategy, int tasks) {
    const auto key = std::make_tuple(kind, memory, strategy);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    RunConfig c;
    c.dataset = name;
    c.scenario = kind;
    c.tasks = tasks;
    c.memory_capacity = memory;
    c.strategy = strategy;
    c.seeds = {1, 2, 3, 4, 5};
    return cache[key] = run_experiment(store, c).aggregate;
  }
};

void real_data(Tally& t) {
  const char* dir = std::getenv("CLARE_DATA_DIR");
  const fs::path root = dir ? dir : "";
  const auto c10 = root / "cifar10.cleb";
  const auto c100 = root / "cifar100.cleb";
  const std::string why = "needs extractor output ($CLARE_DATA_DIR/cifar10.cleb, cifar100.cleb)";
  const double pts = 0.01;

  if (dir && fs::exists(c10)) {
    RealRuns r{load_store(c10), "cifar10", {}};
    const auto& a = r.get(ScenarioKind::RealCL, 1000, TrainStrategy::Scratch, 5);
    t.report(std::abs(a.last_task_accuracy.mean - 0.8990) <= 3.0 * pts, "CIFAR-10 RealCL M=1K K=5 A_K",
             fmt("%s vs 89.90 (+-3.0)", format_percent(a.last_task_accuracy).c_str()));
    t.report(std::abs(a.avg_global_forgetting.mean) <= 0.5 * pts, "CIFAR-10 RealCL |F_AvgG|",
             fmt("%s (<= 0.5 points)", format_percent(a.avg_global_forgetting).c_str()));
  } else {
    t.skip("CIFAR-10 RealCL M=1K K=5 A_K", why);
    t.skip("CIFAR-10 RealCL |F_AvgG|", why);
  }

  if (dir && fs::exists(c100)) {
    RealRuns r{load_store(c100), "cifar100", {}};
    const auto acc = [&](ScenarioKind k, std::size_t m, TrainStrategy s = TrainStrategy::Scratch) {
      return r.get(k, m, s, 20).last_task_accuracy.mean;
    };
    const double base = acc(ScenarioKind::RealCL, 2000);
    t.report(std::abs(base - 0.6311) <= 3.0 * pts, "CIFAR-100 RealCL M=2K K=20 A_K",
             fmt("%.2f vs 63.11 (+-3.0)", 100.0 * base));
    bool ordered = true;
    std::string detail;
    for (const std::size_t m : {2000u, 4000u, 8000u}) {
      const double u = acc(ScenarioKind::Unrealistic, m), rl = acc(ScenarioKind::RealCL, m),
                   s = acc(ScenarioKind::SemiRealCL, m);
      ordered = ordered && u >= rl && rl >= s;
      detail += fmt(" M=%zu: %.2f/%.2f/%.2f", m, 100 * u, 100 * rl, 100 * s);
    }
    t.report(ordered, "CIFAR-100 ordering unrealistic >= RealCL >= SemiRealCL", detail);
    const double m2 = acc(ScenarioKind::RealCL, 2000), m4 = acc(ScenarioKind::RealCL, 4000),
                 m8 = acc(ScenarioKind::RealCL, 8000);
    t.report(m2 < m4 && m4 < m8, "CIFAR-100 RealCL A_K increases with M",
             fmt("%.2f -> %.2f -> %.2f", 100 * m2, 100 * m4, 100 * m8));
    const double ft = acc(ScenarioKind::RealCL, 2000, TrainStrategy::FineTune);
    t.report(ft - base >= 1.0 * pts, "CIFAR-100 RealCL FineTune beats Scratch by >= 1 point",
             fmt("%.2f vs %.2f", 100 * ft, 100 * base));
  } else {
    for (const char* name : {"CIFAR-100 RealCL M=2K K=20 A_K", "CIFAR-100 ordering unrealistic >= RealCL >= SemiRealCL",
                             "CIFAR-100 RealCL A_K increases with M", "CIFAR-100 RealCL FineTune beats Scratch by >= 1 point"}) {
      t.skip(name, why);
    }
  }
}

}  // namespace

int main() {
  Tally t;
  const auto start = Clock::now();
  bool suite = true;
  for (const auto& check : std::initializer_list<std::function<bool(Tally&)>>{
           scenario_invariants, memory_invariants, gradient_check, expansion_preservation,
           metric_oracle, sgdr_schedule}) {
    suite = check(t) && suite;
  }
  const double suite_time = seconds_since(start);
  t.report(suite && suite_time < 300.0, "property suite",
           fmt("all properties %s in %.1f s (< 300 s)", suite ? "hold" : "do NOT hold", suite_time));

  synthetic_end_to_end(t);
  real_data(t);

  std::printf("acceptance: %d passed, %d failed, %d skipped\n", t.passed, t.failed, t.skipped);
  return t.failed == 0 ? 0 : 1;
}
