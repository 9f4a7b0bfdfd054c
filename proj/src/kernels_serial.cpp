#include "calens/kernels.hpp"

namespace calens::kernels {

double pairwise_sum(std::span<const double> x) {
  constexpr std::size_t kBlock = 64;
  if (x.size() <= kBlock) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

namespace serial {

void softmax_rows(std::span<const double> in, std::size_t k, std::span<double> out) {
  const std::size_t n = in.size() / k;
  for (std::size_t i = 0; i < n; ++i) softmax_row(in.subspan(i * k, k), out.subspan(i * k, k));
}

void log_softmax_rows(std::span<const double> in, std::size_t k, std::span<double> out) {
  const std::size_t n = in.size() / k;
  for (std::size_t i = 0; i < n; ++i) log_softmax_row(in.subspan(i * k, k), out.subspan(i * k, k));
}

void argmax_rows(std::span<const double> in, std::size_t k, std::span<int> out) {
  const std::size_t n = in.size() / k;
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<int>(argmax_row(in.subspan(i * k, k)));
}

void max_softmax_rows(std::span<const double> in, std::size_t k, double t, std::span<double> out) {
  const std::size_t n = in.size() / k;
  for (std::size_t i = 0; i < n; ++i) out[i] = max_softmax_row(in.subspan(i * k, k), t);
}

std::size_t count_mismatches(std::span<const int> a, std::span<const int> b) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < a.size(); ++i) c += (a[i] != b[i]);
  return c;
}

}  // namespace serial
}  // namespace calens::kernels
