#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cubenmt/rng.hpp"
#include "cubenmt/tensor.hpp"

using namespace cubenmt;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, float lo = -2.0f, float hi = 2.0f) {
  Tensor t(std::move(shape));
  for (float& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// Independent oracle: plain triple loop at 64-bit.
Tensor matmul_oracle(const Tensor& a, const Tensor& b) {
  Tensor out({a.rows(), b.cols()});
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.cols(); ++k)
        acc += static_cast<double>(a.at2(i, k)) * static_cast<double>(b.at2(k, j));
      out.at2(i, j) = static_cast<float>(acc);
    }
  return out;
}

}  // namespace

TEST_CASE("matmul identity") {
  Tensor id({2, 2}, {1, 0, 0, 1});
  Tensor m({2, 2}, {1, 2, 3, 4});
  Tensor out = matmul(id, m);
  for (int i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(m[i]));
}

TEST_CASE("matmul hand arithmetic") {
  Tensor a({1, 2}, {1, 2});
  Tensor b({2, 1}, {3, 4});
  Tensor out = matmul(a, b);
  CHECK(out.rows() == 1);
  CHECK(out.cols() == 1);
  CHECK(out[0] == doctest::Approx(11.0f));
}

TEST_CASE("matmul matches triple-loop oracle on random inputs") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor a = random_tensor({5, 4}, rng);
    Tensor b = random_tensor({4, 3}, rng);
    Tensor got = matmul(a, b);
    Tensor want = matmul_oracle(a, b);
    for (int64_t i = 0; i < got.size(); ++i)
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-6));
  }
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  Tensor a({2, 3});
  Tensor b({2, 2});
  CHECK_THROWS_AS(matmul(a, b), DimensionError);
}

TEST_CASE("softmax of a constant vector is uniform") {
  Tensor v({4}, {0, 0, 0, 0});
  Tensor s = softmax(v);
  for (int i = 0; i < 4; ++i) CHECK(s[i] == doctest::Approx(0.25f));
}

TEST_CASE("softmax shift invariance") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    Tensor v = random_tensor({7}, rng, -4.0f, 4.0f);
    Tensor shifted = v;
    const float c = rng.uniform(-10.0f, 10.0f);
    for (float& x : shifted.data) x += c;
    Tensor a = softmax(v), b = softmax(shifted);
    for (int i = 0; i < 7; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-6));
  }
}

TEST_CASE("softmax matches direct exp/sum oracle") {
  Tensor v({3}, {1, 2, 3});
  Tensor s = softmax(v);
  double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  CHECK(s[0] == doctest::Approx(std::exp(1.0) / z).epsilon(1e-6));
  CHECK(s[1] == doctest::Approx(std::exp(2.0) / z).epsilon(1e-6));
  CHECK(s[2] == doctest::Approx(std::exp(3.0) / z).epsilon(1e-6));
}

TEST_CASE("softmax output sums to one and survives extreme inputs") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor v = random_tensor({9}, rng, -80.0f, 80.0f);
    Tensor s = softmax(v);
    double sum = 0.0;
    for (float x : s.data) {
      CHECK(x >= 0.0f);
      CHECK(std::isfinite(x));
      sum += x;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("softmax rejects empty shapes") {
  CHECK_THROWS_AS(Tensor({0}), DimensionError);
  CHECK_THROWS_AS(softmax(Tensor({2, 2})), DimensionError);
}

TEST_CASE("sigmoid and tanh fixed points and saturation") {
  Tensor z({1}, {0.0f});
  CHECK(sigmoid(z)[0] == doctest::Approx(0.5f));
  CHECK(tanh(z)[0] == doctest::Approx(0.0f));

  Tensor big({2}, {500.0f, -500.0f});
  Tensor t = tanh(big);
  Tensor s = sigmoid(big);
  CHECK(t[0] > 0.999f);
  CHECK(t[0] <= 1.0f);
  CHECK(t[1] < -0.999f);
  CHECK(t[1] >= -1.0f);
  CHECK(std::isfinite(t[0]));
  CHECK(std::isfinite(s[0]));
  CHECK(std::isfinite(s[1]));
  CHECK(s[1] >= 0.0f);
}

TEST_CASE("add and mul are elementwise and shape-checked") {
  Tensor a({2}, {1, 2});
  Tensor b({2}, {3, 5});
  CHECK(add(a, b)[1] == doctest::Approx(7.0f));
  CHECK(mul(a, b)[1] == doctest::Approx(10.0f));
  CHECK_THROWS_AS(add(a, Tensor({3})), DimensionError);
  CHECK_THROWS_AS(mul(a, Tensor({2, 1})), DimensionError);
}

TEST_CASE("concat joins along the last dimension") {
  Tensor a({2}, {1, 2});
  Tensor b({1}, {3});
  Tensor c = concat(a, b);
  CHECK(c.shape == std::vector<int>{3});
  CHECK(c[0] == 1.0f);
  CHECK(c[2] == 3.0f);

  Tensor m1({2, 1}, {1, 3});
  Tensor m2({2, 2}, {4, 5, 6, 7});
  Tensor m = concat(m1, m2);
  CHECK(m.shape == std::vector<int>{2, 3});
  CHECK(m.at2(0, 0) == 1.0f);
  CHECK(m.at2(0, 2) == 5.0f);
  CHECK(m.at2(1, 1) == 6.0f);
  CHECK_THROWS_AS(concat(m1, Tensor({3, 1})), DimensionError);
}

TEST_CASE("finite_diff_grad on sum of squares") {
  std::function<float(const Tensor&)> f = [](const Tensor& t) {
    double acc = 0.0;
    for (float v : t.data) acc += static_cast<double>(v) * v;
    return static_cast<float>(acc);
  };
  Tensor x({2}, {1, 2});
  Tensor g = finite_diff_grad(f, x, 1e-3f);
  CHECK(g[0] == doctest::Approx(2.0f).epsilon(1e-3));
  CHECK(g[1] == doctest::Approx(4.0f).epsilon(1e-3));
}

TEST_CASE("finite_diff_grad of a constant is zero") {
  std::function<float(const Tensor&)> f = [](const Tensor&) { return 3.5f; };
  Tensor x({4}, {1, -1, 2, 0});
  Tensor g = finite_diff_grad(f, x, 1e-3f);
  for (float v : g.data) CHECK(v == doctest::Approx(0.0f));
}

TEST_CASE("finite_diff_grad rejects bad eps and non-finite values") {
  std::function<float(const Tensor&)> f = [](const Tensor&) {
    return std::numeric_limits<float>::quiet_NaN();
  };
  Tensor x({1}, {0.0f});
  CHECK_THROWS_AS(finite_diff_grad(f, x, 0.0f), NumericError);
  CHECK_THROWS_AS(finite_diff_grad(f, x, 1e-3f), NumericError);
}

TEST_CASE("tensor shape/data consistency is enforced") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor({-1}), DimensionError);
  Tensor t({2, 3});
  CHECK(t.size() == 6);
}
