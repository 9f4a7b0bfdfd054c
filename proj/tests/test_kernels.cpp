#include <cstring>
#include <numeric>
#include <vector>

#include "doctest.h"

#include "calens/kernels.hpp"
#include "calens/rng.hpp"

using namespace calens;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed, double scale) {
  std::vector<double> v(n);
  StreamRng rng(seed, 0, 0);
  for (auto& x : v) x = scale * (2.0 * rng.uniform() - 1.0);
  return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("serial and omp kernels agree bitwise") {
  for (std::size_t k : {2u, 5u, 17u}) {
    const std::size_t n = 20000;
    const auto in = random_values(n * k, 100 + k, 40.0);

    std::vector<double> a(n * k), b(n * k);
    kernels::serial::softmax_rows(in, k, a);
    kernels::omp::softmax_rows(in, k, b);
    CHECK(bitwise_equal(a, b));

    kernels::serial::log_softmax_rows(in, k, a);
    kernels::omp::log_softmax_rows(in, k, b);
    CHECK(bitwise_equal(a, b));

    std::vector<int> ia(n), ib(n);
    kernels::serial::argmax_rows(in, k, ia);
    kernels::omp::argmax_rows(in, k, ib);
    CHECK(ia == ib);

    std::vector<double> ca(n), cb(n);
    kernels::serial::max_softmax_rows(in, k, 3.5, ca);
    kernels::omp::max_softmax_rows(in, k, 3.5, cb);
    CHECK(bitwise_equal(ca, cb));

    std::vector<int> other(ia);
    for (std::size_t i = 0; i < n; i += 7) other[i] = (other[i] + 1) % static_cast<int>(k);
    CHECK(kernels::serial::count_mismatches(ia, other) == kernels::omp::count_mismatches(ia, other));
    CHECK(kernels::serial::count_mismatches(ia, other) == (n + 6) / 7);
  }
}

TEST_CASE("pairwise_sum") {
  CHECK(kernels::pairwise_sum(std::vector<double>{}) == 0.0);
  CHECK(kernels::pairwise_sum(std::vector<double>{1.5}) == 1.5);
  std::vector<double> ints(1000);
  std::iota(ints.begin(), ints.end(), 1.0);
  CHECK(kernels::pairwise_sum(ints) == 500500.0);

  // 1e6 copies of 0.1: naive summation drifts by ~1e-6, pairwise stays near eps * log n
  std::vector<double> tenths(1000000, 0.1);
  CHECK(std::abs(kernels::pairwise_sum(tenths) - 100000.0) < 1e-8);
}

TEST_CASE("row routines") {
  const std::vector<double> x = {std::log(9.0), 0.0};
  CHECK(kernels::max_softmax_row(x, 1.0) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(kernels::max_softmax_row(x, 2.0) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(kernels::log_sum_exp_row(x) == doctest::Approx(std::log(10.0)).epsilon(1e-15));
  CHECK(kernels::argmax_row(std::vector<double>{1, 3, 3}) == 1);
}
