#include <doctest.h>

#include <cmath>

#include "clare/errors.hpp"
#include "clare/metrics.hpp"
#include "oracles.hpp"

using namespace clare;

namespace {

AccuracyMatrix from_rows(const std::vector<std::vector<double>>& rows) {
  AccuracyMatrix m(static_cast<int>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (std::size_t k = 0; k <= j; ++k) m.set(static_cast<int>(j + 1), static_cast<int>(k + 1), rows[j][k]);
  }
  return m;
}

// Model with zero weights whose output biases make `winner` the prediction.
DynNanModel constant_model(std::uint32_t dim, std::vector<ClassId> classes, ClassId winner) {
  LayerStack<float> layers{DenseLayer<float>::zeros(dim, 4), DenseLayer<float>::zeros(4, 4),
                           DenseLayer<float>::zeros(4, classes.size())};
  for (std::size_t c = 0; c < classes.size(); ++c) layers[2].bias[c] = classes[c] == winner ? 1.0f : 0.0f;
  return DynNanModel(layers, classes);
}

}  // namespace

TEST_CASE("accuracy matrix") {
  AccuracyMatrix m(3);
  CHECK_FALSE(m.complete());
  CHECK(std::isnan(m.at(2, 1)));
  CHECK_THROWS_AS(m.set(1, 2, 0.5), MetricError);
  CHECK_THROWS_AS(m.set(4, 1, 0.5), MetricError);
  CHECK_THROWS_AS(m.set(1, 1, 1.5), MetricError);
  CHECK_THROWS_AS(m.set(1, 1, std::nan("")), MetricError);
  CHECK_THROWS_AS(compute_metrics(m), MetricError);
  CHECK_THROWS_AS(AccuracyMatrix(0), MetricError);

  const auto full = from_rows({{0.5}, {0.25, 0.75}, {0.0, 1.0, 0.125}});
  CHECK(full.complete());
  const auto j = full.to_json();
  CHECK(j.dump() == "[[0.5],[0.25,0.75],[0.0,1.0,0.125]]");
  const auto back = AccuracyMatrix::from_json(j);
  CHECK(back.at(3, 3) == 0.125);
  CHECK_THROWS_AS(AccuracyMatrix::from_json(nlohmann::json::parse("[[0.5],[0.1]]")), MetricError);
}

TEST_CASE("metric examples") {
  const auto flat = compute_metrics(from_rows({{0.8}, {0.8, 0.8}, {0.8, 0.8, 0.8}, {0.8, 0.8, 0.8, 0.8}}));
  CHECK(flat.average_accuracy == doctest::Approx(0.8));
  CHECK(flat.avg_global_forgetting == 0.0);
  CHECK(flat.avg_task_forgetting == 0.0);

  // Diagonal 0.9, 0.8, 0.7.
  const auto r = compute_metrics(from_rows({{0.9}, {0.85, 0.8}, {0.6, 0.75, 0.7}}));
  CHECK(r.last_task_accuracy == doctest::Approx(0.7));
  CHECK(r.average_accuracy == doctest::Approx(0.8));
  CHECK(r.avg_global_forgetting == doctest::Approx(0.2 / 3.0).epsilon(1e-12));
  CHECK(r.avg_global_forgetting == doctest::Approx((0.9 - 0.7) / 3.0).epsilon(1e-12));
  REQUIRE(r.global_forgetting.size() == 3);
  CHECK(r.global_forgetting[0] == 0.0);
  CHECK(r.global_forgetting[1] == doctest::Approx(0.1));
  CHECK(r.global_forgetting[2] == doctest::Approx(0.1));
  // Task forgetting uses acc(k+1, k): (0.9 - 0.85) + (0.8 - 0.75), over K.
  CHECK(r.avg_task_forgetting == doctest::Approx(0.1 / 3.0).epsilon(1e-12));
  CHECK(r.task_forgetting.size() == 3);
  CHECK(r.task_forgetting[0] == 0.0);

  // Improvement shows up as negative forgetting and is not clipped.
  const auto up = compute_metrics(from_rows({{0.5}, {0.6, 0.9}}));
  CHECK(up.avg_global_forgetting == doctest::Approx(-0.2));
  CHECK(up.avg_task_forgetting == doctest::Approx(-0.05));

  const auto one = compute_metrics(from_rows({{0.42}}));
  CHECK(one.last_task_accuracy == 0.42);
  CHECK(one.avg_global_forgetting == 0.0);
  CHECK(one.avg_task_forgetting == 0.0);
}

TEST_CASE("metrics agree with the reference definitions on random matrices") {
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t K = 1 + rng.below(25);
    std::vector<std::vector<double>> rows(K);
    for (std::size_t j = 0; j < K; ++j) {
      for (std::size_t k = 0; k <= j; ++k) rows[j].push_back(rng.uniform());
    }
    const auto got = compute_metrics(from_rows(rows));
    const auto want = oracle::metrics(rows);
    REQUIRE(got.tasks() == static_cast<int>(K));
    CHECK(std::abs(got.last_task_accuracy - want.a_last) <= 1e-12);
    CHECK(std::abs(got.average_accuracy - want.a_avg) <= 1e-12);
    CHECK(std::abs(got.avg_global_forgetting - want.f_avg_g) <= 1e-12);
    CHECK(std::abs(got.avg_task_forgetting - want.f_avg_t) <= 1e-12);
    // Telescoping identity.
    CHECK(std::abs(got.avg_global_forgetting - (rows[0][0] - rows[K - 1][K - 1]) / K) <= 1e-12);
    const auto rt = RunMetrics::from_json(got.to_json());
    CHECK(rt.avg_task_forgetting == got.avg_task_forgetting);
    CHECK(rt.task_accuracy == got.task_accuracy);
  }
}

TEST_CASE("aggregation across runs") {
  auto run = [](double a_last) {
    return compute_metrics(from_rows({{1.0}, {1.0, a_last}}));
  };
  const std::vector<RunMetrics> two{run(0.6), run(0.8)};
  const auto agg = aggregate_runs(two);
  CHECK(agg.runs == 2);
  CHECK(agg.tasks == 2);
  CHECK(agg.last_task_accuracy.mean == doctest::Approx(0.7));
  CHECK(agg.last_task_accuracy.std == doctest::Approx(std::sqrt(0.02)).epsilon(1e-12));
  CHECK(agg.last_task_accuracy.std == doctest::Approx(0.1414).epsilon(1e-3));
  CHECK(agg.task_accuracy.size() == 2);

  const std::vector<RunMetrics> single{run(0.6)};
  const auto s = aggregate_runs(single);
  CHECK(s.last_task_accuracy.mean == 0.6);
  CHECK(s.last_task_accuracy.std == 0.0);

  const std::vector<RunMetrics> mismatched{run(0.6), compute_metrics(from_rows({{0.4}}))};
  CHECK_THROWS_AS(aggregate_runs(mismatched), AggregationError);
  CHECK_THROWS_AS(aggregate_runs(std::vector<RunMetrics>{}), AggregationError);

  const std::vector<double> v{2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0};
  CHECK(mean_std(v).mean == 5.0);
  CHECK(mean_std(v).std == doctest::Approx(std::sqrt(32.0 / 7.0)));

  CHECK(format_percent({0.8990, 0.0018}) == "89.90 \xC2\xB1" "0.18");
  CHECK(format_percent({0.6311, 0.0}) == "63.11 \xC2\xB1" "0.00");
  CHECK(format_percent({-0.0123, 0.004}) == "-1.23 \xC2\xB1" "0.40");
}

TEST_CASE("snapshot evaluation") {
  // Single-class test set, model always says that class.
  auto store = generate_synthetic({.num_classes = 3, .dim = 5, .train_per_class = 2, .test_per_class = 10, .seed = 1});
  const auto model = constant_model(5, {0, 1, 2}, 1);
  const std::vector<ClassId> only1{1};
  CHECK(evaluate_snapshot(model, store, only1) == 1.0);
  const std::vector<ClassId> all{0, 1, 2};
  CHECK(evaluate_snapshot(model, store, all) == doctest::Approx(1.0 / 3.0));

  const std::vector<std::vector<ClassId>> prefixes{{1}, {0, 1}, {0, 1, 2}};
  const auto row = evaluate_row(model, store, prefixes);
  REQUIRE(row.size() == 3);
  CHECK(row[0] == 1.0);
  CHECK(row[1] == 0.5);
  CHECK(row[2] == doctest::Approx(1.0 / 3.0));

  // Seen class without a head, and no eligible test samples.
  const auto small = constant_model(5, {0, 1}, 0);
  CHECK_THROWS_AS(evaluate_snapshot(small, store, all), EvaluationError);
  const std::vector<ClassId> missing{};
  CHECK_THROWS_AS(evaluate_snapshot(model, store, missing), EvaluationError);

  // Labels drawn independently of the features: a fixed predictor scores
  // Binomial(n, 1/10) / n.
  Rng rng(5);
  const std::size_t n = 5000;
  std::vector<EmbeddingRecord> recs;
  for (SampleId i = 0; i < n; ++i) {
    std::vector<float> v(8);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    recs.push_back({i, Split::Test, static_cast<ClassId>(rng.below(10)), v});
  }
  std::vector<std::string> names;
  for (int c = 0; c < 10; ++c) names.push_back("c" + std::to_string(c));
  const EmbeddingStore noise(8, names, recs);
  std::vector<ClassId> ten{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  const auto net = DynNanModel::init(8, ten, 3, 32);
  const double acc = evaluate_snapshot(net, noise, ten);
  const double sigma = std::sqrt(0.1 * 0.9 / static_cast<double>(n));
  CHECK(std::abs(acc - 0.1) <= 3.0 * sigma);
}
