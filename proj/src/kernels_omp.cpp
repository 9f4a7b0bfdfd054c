#include "calens/kernels.hpp"

#include <cstdint>

namespace calens::kernels::omp {

namespace {
// Below this many rows the thread fork costs more than the loop.
constexpr std::int64_t kMinParallelRows = 2048;
}

void softmax_rows(std::span<const double> in, std::size_t k, std::span<double> out) {
  const auto n = static_cast<std::int64_t>(in.size() / k);
#pragma omp parallel for schedule(static) if (n >= kMinParallelRows)
  for (std::int64_t i = 0; i < n; ++i)
    softmax_row(in.subspan(static_cast<std::size_t>(i) * k, k), out.subspan(static_cast<std::size_t>(i) * k, k));
}

void log_softmax_rows(std::span<const double> in, std::size_t k, std::span<double> out) {
  const auto n = static_cast<std::int64_t>(in.size() / k);
#pragma omp parallel for schedule(static) if (n >= kMinParallelRows)
  for (std::int64_t i = 0; i < n; ++i)
    log_softmax_row(in.subspan(static_cast<std::size_t>(i) * k, k), out.subspan(static_cast<std::size_t>(i) * k, k));
}

void argmax_rows(std::span<const double> in, std::size_t k, std::span<int> out) {
  const auto n = static_cast<std::int64_t>(in.size() / k);
#pragma omp parallel for schedule(static) if (n >= kMinParallelRows)
  for (std::int64_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = static_cast<int>(argmax_row(in.subspan(static_cast<std::size_t>(i) * k, k)));
}

void max_softmax_rows(std::span<const double> in, std::size_t k, double t, std::span<double> out) {
  const auto n = static_cast<std::int64_t>(in.size() / k);
#pragma omp parallel for schedule(static) if (n >= kMinParallelRows)
  for (std::int64_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = max_softmax_row(in.subspan(static_cast<std::size_t>(i) * k, k), t);
}

std::size_t count_mismatches(std::span<const int> a, std::span<const int> b) {
  const auto n = static_cast<std::int64_t>(a.size());
  std::int64_t c = 0;
#pragma omp parallel for schedule(static) reduction(+ : c) if (n >= kMinParallelRows)
  for (std::int64_t i = 0; i < n; ++i) c += (a[static_cast<std::size_t>(i)] != b[static_cast<std::size_t>(i)]);
  return static_cast<std::size_t>(c);
}

}  // namespace calens::kernels::omp
