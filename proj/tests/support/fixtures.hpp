#pragma once

// Shared test fixtures: a corpus of feasible joint tables and small score sets.

#include <cmath>
#include <string>
#include <vector>

#include "calens/core.hpp"
#include "calens/oracle.hpp"
#include "calens/rng.hpp"

namespace calens::testing {

struct TableFixture {
  std::string name;
  std::size_t classes;
  JointTable::Support s_support;
  JointTable::Support r_support;
  std::vector<double> marginals;
  bool uniform;
};

inline std::vector<double> log_of(const std::vector<double>& p) {
  std::vector<double> out;
  for (double v : p) out.push_back(std::log(v));
  return out;
}

// Cyclic shifts of a probability vector, as log-probabilities.
inline JointTable::Support cyclic_support(const std::vector<double>& p) {
  JointTable::Support out;
  const std::size_t k = p.size();
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> q(k);
    for (std::size_t j = 0; j < k; ++j) q[j] = p[(j + k - c) % k];
    out.push_back(log_of(q));
  }
  return out;
}

// Rows (1 - eps) e_c + eps / K: their convex hull contains every marginal with
// all entries above eps / K.
inline JointTable::Support sharp_support(std::size_t k, double eps) {
  std::vector<double> p(k, eps / static_cast<double>(k));
  p[0] += 1.0 - eps;
  return cyclic_support(p);
}

inline std::vector<double> random_simplex(StreamRng& rng, std::size_t k, double floor) {
  std::vector<double> p(k);
  double total = 0.0;
  for (auto& v : p) {
    v = floor + rng.uniform();
    total += v;
  }
  for (auto& v : p) v /= total;
  return p;
}

// Marginal implied by weights over a support: sum_i w_i softmax(s_i).
inline std::vector<double> implied_marginal(const JointTable::Support& sup, const std::vector<double>& w) {
  const std::size_t k = sup.front().size();
  std::vector<double> p(k, 0.0);
  for (std::size_t i = 0; i < sup.size(); ++i) {
    double z = 0.0;
    for (double v : sup[i]) z += std::exp(v);
    for (std::size_t y = 0; y < k; ++y) p[y] += w[i] * std::exp(sup[i][y]) / z;
  }
  return p;
}

// 24 feasible tables: 6 with uniform marginals, 18 without. All but the K = 4,
// |S| = 4 ones have at most 12 cells.
inline std::vector<TableFixture> table_corpus() {
  std::vector<TableFixture> out;
  out.push_back({"k2-single-point", 2, {{0.0, 0.0}}, {{0.0, 0.0}}, {0.5, 0.5}, true});
  out.push_back({"k2-symmetric-log3", 2, {{std::log(3.0), 0.0}, {0.0, std::log(3.0)}},
                 {{std::log(3.0), 0.0}, {0.0, std::log(3.0)}}, {0.5, 0.5}, true});
  out.push_back({"k2-symmetric-mixed", 2, cyclic_support({0.8, 0.2}), cyclic_support({0.6, 0.4}), {0.5, 0.5}, true});
  out.push_back({"k3-cyclic", 3, cyclic_support({0.7, 0.2, 0.1}), cyclic_support({0.5, 0.3, 0.2}),
                 {1.0 / 3, 1.0 / 3, 1.0 / 3}, true});
  out.push_back({"k3-cyclic-sharp", 3, cyclic_support({0.9, 0.05, 0.05}), sharp_support(3, 0.4),
                 {1.0 / 3, 1.0 / 3, 1.0 / 3}, true});
  out.push_back({"k4-cyclic", 4, cyclic_support({0.4, 0.3, 0.2, 0.1}), cyclic_support({0.7, 0.1, 0.1, 0.1}),
                 {0.25, 0.25, 0.25, 0.25}, true});

  StreamRng rng(20240601, 0, 0);
  struct Shape {
    std::size_t k, ns;
  };
  const Shape shapes[] = {{2, 1}, {2, 1}, {2, 2}, {2, 2}, {2, 2}, {3, 1}, {3, 2}, {3, 2}, {3, 3},
                          {3, 3}, {3, 3}, {3, 1}, {4, 1}, {4, 2}, {4, 3}, {4, 3}, {4, 4}, {4, 4}};
  int idx = 0;
  for (const auto& sh : shapes) {
    JointTable::Support s;
    for (std::size_t i = 0; i < sh.ns; ++i) s.push_back(log_of(random_simplex(rng, sh.k, 0.6)));
    const auto w = random_simplex(rng, sh.ns, 0.3);
    const auto p = implied_marginal(s, w);
    out.push_back({"random-" + std::to_string(idx++) + "-k" + std::to_string(sh.k), sh.k, s, sharp_support(sh.k, 0.3), p,
                   false});
  }
  return out;
}

inline JointTable build(const TableFixture& f) {
  return make_joint_table(f.classes, f.s_support, f.r_support, ClassMarginals::from_probabilities(f.marginals));
}

}  // namespace calens::testing
