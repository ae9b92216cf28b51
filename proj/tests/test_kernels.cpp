#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "clare/kernels.hpp"
#include "clare/random.hpp"

using namespace clare;

namespace {

std::vector<float> random_vec(std::size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

bool bitwise_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

void check_close(const std::vector<float>& got, const std::vector<float>& ref, std::size_t fan) {
  REQUIRE(got.size() == ref.size());
  // Summation-order differences grow like sqrt(fan) * eps * |terms|.
  const float tol = 1e-5f * std::sqrt(static_cast<float>(fan)) * 4.0f;
  for (std::size_t i = 0; i < got.size(); ++i) {
    REQUIRE(std::abs(got[i] - ref[i]) <= tol * (1.0f + std::abs(ref[i])));
  }
}

struct Shape {
  std::size_t rows, in, out;
};

const Shape kShapes[] = {{1, 1, 1},   {3, 5, 7},    {17, 33, 65},  {64, 512, 100},
                         {5, 64, 130}, {64, 100, 3}, {2, 1030, 19}, {70, 16, 16}};

}  // namespace

TEST_CASE("parallel kernels agree with the serial reference") {
  Rng rng(5);
  for (const auto& s : kShapes) {
    CAPTURE(s.rows);
    CAPTURE(s.in);
    CAPTURE(s.out);
    const auto x = random_vec(s.rows * s.in, rng);
    const auto w = random_vec(s.out * s.in, rng);
    const auto b = random_vec(s.out, rng);
    const auto g = random_vec(s.rows * s.out, rng);

    std::vector<float> y(s.rows * s.out), y_ref(y.size());
    kernels::affine_forward<float>(x, s.rows, w, b, y);
    kernels::serial::affine_forward<float>(x, s.rows, w, b, y_ref);
    check_close(y, y_ref, s.in);

    std::vector<float> gi(s.rows * s.in), gi_ref(gi.size());
    kernels::affine_backward_input<float>(g, s.rows, w, gi);
    kernels::serial::affine_backward_input<float>(g, s.rows, w, gi_ref);
    check_close(gi, gi_ref, s.out);

    std::vector<float> gw(s.out * s.in, 99.0f), gw_ref(gw.size());
    std::vector<float> gb(s.out, 99.0f), gb_ref(gb.size());
    kernels::affine_backward_params<float>(g, x, s.rows, gw, gb);
    kernels::serial::affine_backward_params<float>(g, x, s.rows, gw_ref, gb_ref);
    check_close(gw, gw_ref, s.rows);
    check_close(gb, gb_ref, s.rows);
  }
}

TEST_CASE("double instantiation matches a hand computation") {
  const std::vector<double> x{1, 2, -1, 0.5, 0, 3};  // 2 x 3
  const std::vector<double> w{1, 0, 2, -1, 1, 1};    // 2 x 3
  const std::vector<double> b{0.5, -0.5};
  std::vector<double> y(4);
  kernels::affine_forward<double>(x, 2, w, b, y);
  CHECK(y == std::vector<double>{0.5 + 1 - 2, -0.5 - 1 + 2 - 1, 0.5 + 0.5 + 6, -0.5 - 0.5 + 0 + 3});

  const std::vector<double> g{1, 2, 0, -1};  // 2 x 2
  std::vector<double> gi(6);
  kernels::affine_backward_input<double>(g, 2, w, gi);
  CHECK(gi == std::vector<double>{-1, 2, 4, 1, -1, -1});

  std::vector<double> gw(6), gb(2);
  kernels::affine_backward_params<double>(g, x, 2, gw, gb);
  CHECK(gw == std::vector<double>{1, 2, -1, 1.5, 4, -5});
  CHECK(gb == std::vector<double>{1, 1});
}

TEST_CASE("relu and its backward") {
  std::vector<float> v{-1.0f, 0.0f, 2.5f, -0.0f, 1e-30f};
  kernels::relu_inplace<float>(v);
  CHECK(v == std::vector<float>{0, 0, 2.5f, 0, 1e-30f});
  std::vector<float> g{1, 1, 1, 1, 1};
  kernels::relu_backward_inplace<float>(v, g);
  CHECK(g == std::vector<float>{0, 0, 1, 0, 1});
}

TEST_CASE("results are bitwise identical for any thread count") {
  Rng rng(9);
  const std::size_t rows = 64, in = 512, out = 300;
  const auto x = random_vec(rows * in, rng);
  const auto w = random_vec(out * in, rng);
  const auto b = random_vec(out, rng);
  const auto g = random_vec(rows * out, rng);

  auto run = [&](int threads) {
    omp_set_num_threads(threads);
    std::vector<float> y(rows * out), gi(rows * in), gw(out * in), gb(out);
    kernels::affine_forward<float>(x, rows, w, b, y);
    kernels::affine_backward_input<float>(g, rows, w, gi);
    kernels::affine_backward_params<float>(g, x, rows, gw, gb);
    return std::vector<std::vector<float>>{y, gi, gw, gb};
  };
  const int saved = omp_get_max_threads();
  const auto one = run(1);
  for (const int t : {2, 3, 4, 7}) {
    const auto many = run(t);
    for (std::size_t i = 0; i < one.size(); ++i) CHECK(bitwise_equal(one[i], many[i]));
  }
  omp_set_num_threads(saved);
}
