#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ceal/rng.hpp"

namespace ceal {

enum class PruneMode { none, exclude_this_round, drop_permanently };

std::string_view to_string(PruneMode mode);
std::optional<PruneMode> parse_prune_mode(std::string_view name);

/// Candidate pool size, either absolute or relative to the current unlabeled
/// pool. An absolute count wins when both are set.
struct CandidateSize {
  std::optional<std::size_t> count;
  std::optional<double> fraction;

  /// Size for a pool of `pool` eligible items, clipped to [1, pool].
  std::size_t resolve(std::size_t pool) const;
  bool operator==(const CandidateSize&) const = default;
};

struct SamplingPolicy {
  double temperature = 1.0;
  CandidateSize candidate_size{std::nullopt, 0.1};
  PruneMode prune_mode = PruneMode::none;
  double prune_quantile = 0.0;

  void validate() const;
  bool operator==(const SamplingPolicy&) const = default;
};

/// exp(v/τ) normalized, computed after subtracting the maximum.
std::vector<double> softmax_probs(std::span<const double> values, double temperature);

struct CandidateDraw {
  std::vector<std::size_t> indices;  // ascending
  std::size_t requested = 0;

  /// True when fewer than `requested` items had positive probability.
  bool reduced() const { return indices.size() < requested; }
};

/// Weighted sampling without replacement by Gumbel-perturbed top-m. One
/// Gumbel draw per item in ascending index order; zero-probability items are
/// never selected, and m is reduced to the positive support if needed.
CandidateDraw sample_candidates(std::span<const double> probs, std::size_t m, Rng& rng);

/// Same draw as sample_candidates(softmax_probs(values, τ), m, rng) but keyed
/// on v/τ directly, so tiny temperatures do not underflow the support.
CandidateDraw sample_candidates_tempered(std::span<const double> values, double temperature,
                                         std::size_t m, Rng& rng);

/// Positions of the k largest values, largest first, ties to the smaller
/// position.
std::vector<std::size_t> top_k(std::span<const double> values, std::size_t k);

struct PruneResult {
  std::vector<std::size_t> kept;    // ascending
  std::vector<std::size_t> pruned;  // ascending
};

/// Splits positions by the nearest-rank quantile threshold: the value at
/// zero-based position ceil(q*n) of the ascending sort (clamped to n-1).
/// Only values strictly below the threshold are pruned.
PruneResult prune(std::span<const double> values, const SamplingPolicy& policy);

}  // namespace ceal
