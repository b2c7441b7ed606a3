#pragma once

// Independent reference computations shared by the unit and acceptance
// suites. Nothing here calls the code path it is used to check.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ceal/model.hpp"

namespace ceal::oracle {

/// Exact inclusion probabilities of sequential weighted sampling without
/// replacement, by enumerating every ordered draw of length m.
inline std::vector<double> inclusion_probabilities(const std::vector<double>& w, std::size_t m) {
  std::vector<double> inc(w.size(), 0.0);
  std::vector<std::size_t> path;
  std::vector<bool> used(w.size(), false);
  auto rec = [&](auto&& self, double prob, double remaining) -> void {
    if (path.size() == m) {
      for (std::size_t i : path) inc[i] += prob;
      return;
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (used[i] || w[i] <= 0.0) continue;
      used[i] = true;
      path.push_back(i);
      self(self, prob * w[i] / remaining, remaining - w[i]);
      path.pop_back();
      used[i] = false;
    }
  };
  rec(rec, 1.0, std::accumulate(w.begin(), w.end(), 0.0));
  return inc;
}

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t parameters = 0;
};

/// Compares backprop gradients against central differences of the loss.
inline GradCheckResult gradient_check(const Classifier& model, const Dataset& data,
                                      const std::vector<std::size_t>& rows, double step) {
  Gradients g;
  loss_and_gradients(model, data, rows, &g, nullptr);
  GradCheckResult out;
  auto relative = [](double a, double n) {
    const double scale = std::max({std::abs(a), std::abs(n), 1e-6});
    return std::abs(a - n) / scale;
  };
  Classifier probe = model;
  auto numeric = [&](double& param) {
    const double saved = param;
    param = saved + step;
    const double up = loss_and_gradients(probe, data, rows, nullptr, nullptr);
    param = saved - step;
    const double down = loss_and_gradients(probe, data, rows, nullptr, nullptr);
    param = saved;
    return (up - down) / (2.0 * step);
  };
  for (std::size_t l = 0; l < probe.num_layers(); ++l) {
    for (Eigen::Index i = 0; i < probe.weights[l].rows(); ++i)
      for (Eigen::Index j = 0; j < probe.weights[l].cols(); ++j) {
        out.max_relative_error =
            std::max(out.max_relative_error, relative(g.weights[l](i, j), numeric(probe.weights[l](i, j))));
        ++out.parameters;
      }
    for (Eigen::Index j = 0; j < probe.biases[l].size(); ++j) {
      out.max_relative_error = std::max(out.max_relative_error, relative(g.biases[l][j], numeric(probe.biases[l][j])));
      ++out.parameters;
    }
  }
  return out;
}

/// Small random problem for the gradient check: widths [4,5,3].
inline Dataset gradient_check_data(std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.num_classes = 3;
  d.name = "gradcheck";
  d.features.resize(8, 4);
  for (Eigen::Index i = 0; i < 8; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) d.features(i, j) = rng.normal();
    d.labels.push_back(static_cast<int>(i % 3));
  }
  return d;
}

}  // namespace ceal::oracle
