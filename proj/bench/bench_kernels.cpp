// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <vector>

#include "calens/kernels.hpp"
#include "calens/rng.hpp"

namespace {

constexpr std::size_t kClasses = 10;

std::vector<double> make_input(std::size_t rows) {
  std::vector<double> v(rows * kClasses);
  calens::StreamRng rng(1, 0, 0);
  for (auto& x : v) x = 20.0 * rng.uniform() - 10.0;
  return v;
}

template <void (*Kernel)(std::span<const double>, std::size_t, std::span<double>)>
void softmax(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto in = make_input(rows);
  std::vector<double> out(in.size());
  for (auto _ : state) {
    Kernel(in, kClasses, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * rows));
}

template <void (*Kernel)(std::span<const double>, std::size_t, double, std::span<double>)>
void confidence(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto in = make_input(rows);
  std::vector<double> out(rows);
  for (auto _ : state) {
    Kernel(in, kClasses, 2.0, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * rows));
}

template <void (*Kernel)(std::span<const double>, std::size_t, std::span<int>)>
void argmax(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto in = make_input(rows);
  std::vector<int> out(rows);
  for (auto _ : state) {
    Kernel(in, kClasses, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * rows));
}

}  // namespace

BENCHMARK(softmax<calens::kernels::serial::softmax_rows>)->Name("softmax/serial")->Range(1 << 10, 1 << 20);
BENCHMARK(softmax<calens::kernels::omp::softmax_rows>)->Name("softmax/omp")->Range(1 << 10, 1 << 20);
BENCHMARK(softmax<calens::kernels::serial::log_softmax_rows>)->Name("log_softmax/serial")->Range(1 << 10, 1 << 20);
BENCHMARK(softmax<calens::kernels::omp::log_softmax_rows>)->Name("log_softmax/omp")->Range(1 << 10, 1 << 20);
BENCHMARK(confidence<calens::kernels::serial::max_softmax_rows>)->Name("max_softmax/serial")->Range(1 << 10, 1 << 20);
BENCHMARK(confidence<calens::kernels::omp::max_softmax_rows>)->Name("max_softmax/omp")->Range(1 << 10, 1 << 20);
BENCHMARK(argmax<calens::kernels::serial::argmax_rows>)->Name("argmax/serial")->Range(1 << 10, 1 << 20);
BENCHMARK(argmax<calens::kernels::omp::argmax_rows>)->Name("argmax/omp")->Range(1 << 10, 1 << 20);

BENCHMARK_MAIN();
