#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "ceal/model.hpp"
#include "ceal/rng.hpp"

namespace ceal {

enum class AcquisitionKind { entropy, variation_ratios, random };

std::string_view to_string(AcquisitionKind kind);
std::optional<AcquisitionKind> parse_acquisition_kind(std::string_view name);

/// Column mean of the per-pass distributions.
Eigen::RowVectorXd mean_predictive(const PredictiveSamples& samples);

/// Predictive entropy in nats, -sum p ln p over the MC-mean distribution.
double entropy_score(const PredictiveSamples& samples);

/// 1 - (count of the modal per-pass argmax class) / T.
double variation_ratios_score(const PredictiveSamples& samples);

/// Dispatches on kind. rng is consumed only for AcquisitionKind::random.
double score(AcquisitionKind kind, const PredictiveSamples& samples, Rng& rng);

}  // namespace ceal
