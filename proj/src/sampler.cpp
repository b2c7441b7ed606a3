#include "ceal/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ceal {

std::string_view to_string(PruneMode mode) {
  switch (mode) {
    case PruneMode::none: return "none";
    case PruneMode::exclude_this_round: return "exclude_this_round";
    case PruneMode::drop_permanently: return "drop_permanently";
  }
  return "unknown";
}

std::optional<PruneMode> parse_prune_mode(std::string_view name) {
  if (name == "none") return PruneMode::none;
  if (name == "exclude_this_round") return PruneMode::exclude_this_round;
  if (name == "drop_permanently") return PruneMode::drop_permanently;
  return std::nullopt;
}

std::size_t CandidateSize::resolve(std::size_t pool) const {
  std::size_t m = 0;
  if (count) {
    m = *count;
  } else if (fraction) {
    m = static_cast<std::size_t>(std::ceil(*fraction * static_cast<double>(pool)));
  }
  return std::clamp<std::size_t>(m, std::min<std::size_t>(1, pool), pool);
}

void SamplingPolicy::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw std::invalid_argument("sampling.temperature must be a positive finite number");
  if (candidate_size.count && *candidate_size.count < 1)
    throw std::invalid_argument("sampling.candidate_size must be >= 1");
  if (!candidate_size.count && !candidate_size.fraction)
    throw std::invalid_argument("sampling: candidate_size or candidate_fraction required");
  if (candidate_size.fraction && !(*candidate_size.fraction > 0.0 && *candidate_size.fraction <= 1.0))
    throw std::invalid_argument("sampling.candidate_fraction must be in (0,1]");
  if (!(prune_quantile >= 0.0 && prune_quantile < 1.0))
    throw std::invalid_argument("sampling.prune_quantile must be in [0,1)");
}

std::vector<double> softmax_probs(std::span<const double> values, double temperature) {
  if (values.empty()) throw std::invalid_argument("softmax_probs: empty input");
  if (!(temperature > 0.0)) throw std::invalid_argument("softmax_probs: temperature must be > 0");
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("softmax_probs: non-finite value");
  const double mx = *std::max_element(values.begin(), values.end());
  std::vector<double> p(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    p[i] = std::exp((values[i] - mx) / temperature);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

namespace {

// Takes the m largest finite keys; -inf marks an ineligible item.
CandidateDraw top_keys(const std::vector<double>& keys, std::size_t m) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < keys.size(); ++i)
    if (keys[i] != -std::numeric_limits<double>::infinity()) eligible.push_back(i);
  CandidateDraw out;
  out.requested = m;
  const std::size_t take = std::min(m, eligible.size());
  auto by_key = [&](std::size_t a, std::size_t b) { return keys[a] > keys[b] || (keys[a] == keys[b] && a < b); };
  std::partial_sort(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(take), eligible.end(), by_key);
  out.indices.assign(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(take));
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

}  // namespace

CandidateDraw sample_candidates(std::span<const double> probs, std::size_t m, Rng& rng) {
  if (m > probs.size()) throw std::invalid_argument("sample_candidates: m exceeds number of items");
  std::vector<double> keys(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= 0.0) || !std::isfinite(probs[i]))
      throw std::invalid_argument("sample_candidates: invalid probability");
    const double g = rng.gumbel();
    keys[i] = probs[i] > 0.0 ? std::log(probs[i]) + g : -std::numeric_limits<double>::infinity();
  }
  return top_keys(keys, m);
}

CandidateDraw sample_candidates_tempered(std::span<const double> values, double temperature, std::size_t m,
                                         Rng& rng) {
  if (m > values.size()) throw std::invalid_argument("sample_candidates: m exceeds number of items");
  if (!(temperature > 0.0)) throw std::invalid_argument("sample_candidates: temperature must be > 0");
  std::vector<double> keys(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw std::invalid_argument("sample_candidates: non-finite value");
    keys[i] = values[i] / temperature + rng.gumbel();
  }
  return top_keys(keys, m);
}

std::vector<std::size_t> top_k(std::span<const double> values, std::size_t k) {
  if (k > values.size()) throw std::invalid_argument("top_k: k exceeds set size");
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return values[a] > values[b] || (values[a] == values[b] && a < b); });
  idx.resize(k);
  return idx;
}

PruneResult prune(std::span<const double> values, const SamplingPolicy& policy) {
  PruneResult out;
  if (values.empty()) return out;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(values.size());
  // The small slack keeps q*n products like 0.3*10 from rounding up a rank.
  auto rank = static_cast<std::size_t>(std::ceil(policy.prune_quantile * n - 1e-9));
  rank = std::min(rank, values.size() - 1);
  const double threshold = sorted[rank];
  for (std::size_t i = 0; i < values.size(); ++i) (values[i] < threshold ? out.pruned : out.kept).push_back(i);
  return out;
}

}  // namespace ceal
