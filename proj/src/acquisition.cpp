#include "ceal/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ceal {

std::string_view to_string(AcquisitionKind kind) {
  switch (kind) {
    case AcquisitionKind::entropy: return "entropy";
    case AcquisitionKind::variation_ratios: return "variation_ratios";
    case AcquisitionKind::random: return "random";
  }
  return "unknown";
}

std::optional<AcquisitionKind> parse_acquisition_kind(std::string_view name) {
  if (name == "entropy") return AcquisitionKind::entropy;
  if (name == "variation_ratios" || name == "varR") return AcquisitionKind::variation_ratios;
  if (name == "random") return AcquisitionKind::random;
  return std::nullopt;
}

Eigen::RowVectorXd mean_predictive(const PredictiveSamples& samples) {
  return samples.probs.colwise().mean();
}

double entropy_score(const PredictiveSamples& samples) {
  const Eigen::RowVectorXd p = mean_predictive(samples);
  double h = 0.0;
  for (Eigen::Index c = 0; c < p.size(); ++c)
    if (p[c] > 0.0) h -= p[c] * std::log(p[c]);
  // Rounding can leave a one-hot mean at -0.0 or a hair below zero.
  return std::max(h, 0.0);
}

double variation_ratios_score(const PredictiveSamples& samples) {
  std::vector<int> counts(static_cast<std::size_t>(samples.num_classes()), 0);
  for (Eigen::Index t = 0; t < samples.probs.rows(); ++t) ++counts[static_cast<std::size_t>(argmax(samples.probs.row(t)))];
  const int mode = *std::max_element(counts.begin(), counts.end());
  return 1.0 - static_cast<double>(mode) / samples.t_passes();
}

double score(AcquisitionKind kind, const PredictiveSamples& samples, Rng& rng) {
  switch (kind) {
    case AcquisitionKind::entropy: return entropy_score(samples);
    case AcquisitionKind::variation_ratios: return variation_ratios_score(samples);
    case AcquisitionKind::random: return rng.uniform();
  }
  return 0.0;
}

}  // namespace ceal
