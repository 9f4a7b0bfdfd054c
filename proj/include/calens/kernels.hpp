#pragma once

// Row-wise numeric kernels. Each kernel exists twice: a plain serial loop kept as
// the reference, and an OpenMP version that splits rows across threads. Both call
// the same per-row routine, so their outputs are bitwise identical.

#include <cmath>
#include <cstddef>
#include <span>

namespace calens::kernels {

inline std::size_t argmax_row(std::span<const double> x) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < x.size(); ++j)
    if (x[j] > x[best]) best = j;
  return best;
}

inline double max_row(std::span<const double> x) { return x[argmax_row(x)]; }

// out = exp(x - max) / sum
inline void softmax_row(std::span<const double> x, std::span<double> out) {
  const double mx = max_row(x);
  double z = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    out[j] = std::exp(x[j] - mx);
    z += out[j];
  }
  for (std::size_t j = 0; j < x.size(); ++j) out[j] /= z;
}

inline double log_sum_exp_row(std::span<const double> x) {
  const double mx = max_row(x);
  double z = 0.0;
  for (double v : x) z += std::exp(v - mx);
  return mx + std::log(z);
}

inline void log_softmax_row(std::span<const double> x, std::span<double> out) {
  const double mx = max_row(x);
  double z = 0.0;
  for (double v : x) z += std::exp(v - mx);
  const double lz = std::log(z);
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mx) - lz;
}

// max_j softmax(x / t)_j, evaluated as 1 / sum_j exp((x_j - max) / t).
inline double max_softmax_row(std::span<const double> x, double t) {
  const double mx = max_row(x);
  double z = 0.0;
  for (double v : x) z += std::exp((v - mx) / t);
  return 1.0 / z;
}

// Pairwise (cascade) summation. Fixed tree shape, so the result depends only on
// the input order and not on how the inputs were produced.
double pairwise_sum(std::span<const double> x);

namespace serial {
void softmax_rows(std::span<const double> in, std::size_t k, std::span<double> out);
void log_softmax_rows(std::span<const double> in, std::size_t k, std::span<double> out);
void argmax_rows(std::span<const double> in, std::size_t k, std::span<int> out);
void max_softmax_rows(std::span<const double> in, std::size_t k, double t, std::span<double> out);
std::size_t count_mismatches(std::span<const int> a, std::span<const int> b);
}  // namespace serial

namespace omp {
void softmax_rows(std::span<const double> in, std::size_t k, std::span<double> out);
void log_softmax_rows(std::span<const double> in, std::size_t k, std::span<double> out);
void argmax_rows(std::span<const double> in, std::size_t k, std::span<int> out);
void max_softmax_rows(std::span<const double> in, std::size_t k, double t, std::span<double> out);
std::size_t count_mismatches(std::span<const int> a, std::span<const int> b);
}  // namespace omp

}  // namespace calens::kernels
