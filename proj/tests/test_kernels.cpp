#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "usted/kernels.hpp"
#include "usted/random.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using usted::RandomStream;
namespace K = usted::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, RandomStream& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

// Independent oracle: naive i/j/k triple loop. Accumulation over k matches
// the kernels' fixed per-element order, so comparisons are exact.
std::vector<double> naive_matmul(const std::vector<double>& a,
                                 const std::vector<double>& b, int m, int k, int n) {
  std::vector<double> y(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int kk = 0; kk < k; ++kk)
      for (int j = 0; j < n; ++j)
        y[i * n + j] += a[i * k + kk] * b[kk * n + j];
  return y;
}

}  // namespace

TEST_CASE("matmul matches naive oracle exactly") {
  RandomStream rng(7);
  for (auto [m, k, n] : {std::tuple{1, 5, 3}, {4, 4, 4}, {3, 17, 9}, {2, 1, 6}}) {
    auto a = random_vec(static_cast<std::size_t>(m) * k, rng);
    auto b = random_vec(static_cast<std::size_t>(k) * n, rng);
    std::vector<double> y(static_cast<std::size_t>(m) * n);
    K::matmul(a.data(), b.data(), y.data(), m, k, n);
    CHECK(y == naive_matmul(a, b, m, k, n));
  }
}

TEST_CASE("transposed matmul variants match plain matmul on materialized transposes") {
  RandomStream rng(11);
  const int m = 6, k = 9, n = 5;
  auto a = random_vec(m * k, rng);
  auto b = random_vec(k * n, rng);

  // a * b^T with b stored as [n x k]
  std::vector<double> bt(static_cast<std::size_t>(n) * k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < n; ++j) bt[j * k + i] = b[i * n + j];
  std::vector<double> y1(m * n), y2(m * n);
  K::matmul(a.data(), b.data(), y1.data(), m, k, n);
  K::matmul_nt(a.data(), bt.data(), y2.data(), m, k, n);
  for (std::size_t i = 0; i < y1.size(); ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-14));

  // a^T * b with a stored as [k x m]
  std::vector<double> at(static_cast<std::size_t>(k) * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < k; ++j) at[j * m + i] = a[i * k + j];
  std::vector<double> y3(m * n);
  K::matmul_tn(at.data(), b.data(), y3.data(), m, k, n);
  std::vector<double> y4 = naive_matmul(a, b, m, k, n);
  for (std::size_t i = 0; i < y3.size(); ++i) CHECK(y3[i] == doctest::Approx(y4[i]).epsilon(1e-14));
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
#ifdef _OPENMP
  omp_set_num_threads(3);
#endif
  RandomStream rng(23);
  // Sizes straddle the parallel-dispatch threshold.
  for (auto [m, k, n] : {std::tuple{8, 8, 8}, {96, 64, 96}, {130, 70, 90}}) {
    auto a = random_vec(static_cast<std::size_t>(m) * k, rng);
    auto b = random_vec(static_cast<std::size_t>(k) * n, rng);
    std::vector<double> y_par(static_cast<std::size_t>(m) * n), y_ser(y_par.size());
    K::matmul(a.data(), b.data(), y_par.data(), m, k, n);
    K::serial::matmul(a.data(), b.data(), y_ser.data(), m, k, n);
    CHECK(y_par == y_ser);

    std::vector<double> bt(b.size());
    // reuse b as [n x k] content for the nt variant; only equality matters
    K::matmul_nt(a.data(), b.data(), y_par.data(), m, k, n == k ? n : k == n ? n : n);
    K::serial::matmul_nt(a.data(), b.data(), y_ser.data(), m, k, n == k ? n : k == n ? n : n);
    CHECK(y_par == y_ser);
  }

  const std::size_t big = 1 << 16;
  auto x = random_vec(big, rng);
  auto y = random_vec(big, rng);
  std::vector<double> r_par(big), r_ser(big);
  K::add(x.data(), y.data(), r_par.data(), big);
  K::serial::add(x.data(), y.data(), r_ser.data(), big);
  CHECK(r_par == r_ser);
  K::mul(x.data(), y.data(), r_par.data(), big);
  K::serial::mul(x.data(), y.data(), r_ser.data(), big);
  CHECK(r_par == r_ser);
  K::tanh_v(x.data(), r_par.data(), big);
  K::serial::tanh_v(x.data(), r_ser.data(), big);
  CHECK(r_par == r_ser);
  K::sigmoid_v(x.data(), r_par.data(), big);
  K::serial::sigmoid_v(x.data(), r_ser.data(), big);
  CHECK(r_par == r_ser);

  const int rows = 300, cols = 250;
  auto sx = random_vec(static_cast<std::size_t>(rows) * cols, rng);
  std::vector<double> s_par(sx.size()), s_ser(sx.size());
  K::softmax_rows(sx.data(), s_par.data(), rows, cols);
  K::serial::softmax_rows(sx.data(), s_ser.data(), rows, cols);
  CHECK(s_par == s_ser);
#ifdef _OPENMP
  omp_set_num_threads(1);
#endif
}

TEST_CASE("softmax rows sum to one and stay stable under large offsets") {
  RandomStream rng(5);
  const int rows = 4, cols = 7;
  auto x = random_vec(static_cast<std::size_t>(rows) * cols, rng);
  for (double& v : x) v += 1e4;  // max-subtraction keeps exp in range
  std::vector<double> y(x.size());
  K::softmax_rows(x.data(), y.data(), rows, cols);
  for (int i = 0; i < rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < cols; ++j) {
      CHECK(y[i * cols + j] > 0.0);
      s += y[i * cols + j];
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-13));
  }
}
