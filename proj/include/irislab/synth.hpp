#pragma once

// Synthetic iris-code populations.
//
// An identity is a block-replicated random code: one fair coin per
// block_rows x block_cols block, so impostor scores behave like averages over
// (rows/block_rows)*(cols/block_cols) independent bits. Probes copy the identity
// code, flip bits independently, rotate, and occlude a contiguous angular band.
//
// Note the effective impostor degrees of freedom seen by the matcher
// (probe vs enrollment) is larger than the block count because the per-bit
// noise decorrelates bits within a block: roughly blocks / (1 - 2*flip_prob)^2.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "irislab/errors.hpp"
#include "irislab/matcher.hpp"
#include "irislab/random.hpp"
#include "irislab/search.hpp"
#include "irislab/template.hpp"

namespace irislab {

// Cumulative probe count for the identities enrolled in a nested gallery of
// `gallery_size`. A schedule is a list of these with increasing sizes.
struct ProbeBand {
  std::size_t gallery_size = 0;
  std::size_t probe_total = 0;
};

// Left-eye gallery/probe-set sizes of the reference collection, scaled by
// scale_schedule for desk-sized runs.
inline const std::vector<ProbeBand>& reference_probe_schedule() {
  static const std::vector<ProbeBand> schedule{
      {100, 7745},   {200, 12529},  {400, 18644},  {600, 22395},
      {800, 24555},  {1000, 25582}, {1200, 26078}, {1400, 26478},
  };
  return schedule;
}

inline std::vector<ProbeBand> scale_schedule(std::span<const ProbeBand> schedule, double factor) {
  std::vector<ProbeBand> out;
  for (const auto& b : schedule)
    out.push_back({b.gallery_size, static_cast<std::size_t>(std::llround(static_cast<double>(b.probe_total) * factor))});
  return out;
}

struct SynthParams {
  std::size_t n_identities = 1400;
  // Used when probe_schedule is empty.
  std::size_t probes_per_identity = 10;
  // Optional non-uniform schedule by gallery position (see ProbeBand).
  std::vector<ProbeBand> probe_schedule;
  std::size_t rows = 20;
  std::size_t cols = 240;
  std::size_t block_rows = 4;
  std::size_t block_cols = 12;
  double flip_prob = 0.11;
  double occlusion_frac_max = 0.25;
  int rotation_offset_max = 5;
  std::uint64_t seed = 1;

  std::size_t degrees_of_freedom() const { return (rows / block_rows) * (cols / block_cols); }

  void validate() const {
    require(n_identities > 0, "n_identities must be positive");
    require(rows > 0 && cols > 0, "template geometry must be non-empty");
    require(block_rows > 0 && block_cols > 0, "block size must be positive");
    require(rows % block_rows == 0, "block_rows must divide rows");
    require(cols % block_cols == 0, "block_cols must divide cols");
    require(flip_prob >= 0.0 && flip_prob <= 0.5, "flip_prob must lie in [0, 0.5]");
    require(occlusion_frac_max >= 0.0 && occlusion_frac_max <= 0.5, "occlusion_frac_max must lie in [0, 0.5]");
    require(rotation_offset_max >= 0, "rotation_offset_max must be non-negative");
    require(2 * static_cast<std::size_t>(rotation_offset_max) < cols, "rotation_offset_max must be below cols/2");
    std::size_t prev_size = 0;
    std::size_t prev_total = 0;
    for (const auto& b : probe_schedule) {
      require(b.gallery_size > prev_size, "probe schedule sizes must increase");
      require(b.probe_total >= prev_total, "probe schedule totals must not decrease");
      require(b.gallery_size <= n_identities, "probe schedule exceeds the population");
      prev_size = b.gallery_size;
      prev_total = b.probe_total;
    }
  }
};

inline std::string identity_label(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "S%04zu", index + 1);
  return buf;
}

inline IrisTemplate generate_identity(const SynthParams& params, Rng& rng, std::string identity = {}) {
  params.validate();
  const std::size_t brows = params.rows / params.block_rows;
  const std::size_t bcols = params.cols / params.block_cols;
  IrisTemplate t(params.rows, params.cols, std::move(identity));
  t.sample_id = t.identity.empty() ? std::string{} : t.identity + "_00";
  for (std::size_t br = 0; br < brows; ++br) {
    for (std::size_t bc = 0; bc < bcols; ++bc) {
      const bool bit = (rng() >> 63) != 0;
      if (!bit) continue;
      for (std::size_t r = br * params.block_rows; r < (br + 1) * params.block_rows; ++r)
        for (std::size_t c = bc * params.block_cols; c < (bc + 1) * params.block_cols; ++c) t.code.set(r, c, true);
    }
  }
  return t;
}

// Parameters actually drawn for one probe, for tests and provenance.
struct ProbeDraw {
  int rotation = 0;
  std::size_t occluded_cols = 0;
  std::size_t occlusion_start = 0;
};

inline IrisTemplate generate_probe(const IrisTemplate& identity_template, const SynthParams& params, Rng& rng,
                                   std::string sample_id = {}, ProbeDraw* draw = nullptr) {
  IrisTemplate noisy = identity_template;
  if (params.flip_prob > 0.0) {
    for (std::size_t r = 0; r < noisy.rows(); ++r)
      for (std::size_t c = 0; c < noisy.cols(); ++c)
        if (bernoulli(rng, params.flip_prob)) noisy.code.set(r, c, !noisy.code.get(r, c));
  }

  ProbeDraw d;
  d.rotation = static_cast<int>(uniform_int(rng, -params.rotation_offset_max, params.rotation_offset_max));
  IrisTemplate probe = rotate(noisy, d.rotation);

  const double frac = uniform01(rng) * params.occlusion_frac_max;
  d.occluded_cols = static_cast<std::size_t>(std::llround(frac * static_cast<double>(probe.cols())));
  d.occlusion_start = static_cast<std::size_t>(uniform_below(rng, probe.cols()));
  for (std::size_t i = 0; i < d.occluded_cols; ++i) {
    const std::size_t c = (d.occlusion_start + i) % probe.cols();
    for (std::size_t r = 0; r < probe.rows(); ++r) probe.mask.set(r, c, false);
  }

  probe.identity = identity_template.identity;
  probe.sample_id = std::move(sample_id);
  if (draw) *draw = d;
  return probe;
}

struct Population {
  Gallery gallery;
  // Grouped by identity in generation order, then by sample number.
  std::vector<IrisTemplate> probes;
};

// Probe count for each gallery position under the params' schedule.
inline std::vector<std::size_t> probe_counts_by_position(const SynthParams& params) {
  std::vector<std::size_t> counts(params.n_identities, 0);
  if (params.probe_schedule.empty()) {
    std::fill(counts.begin(), counts.end(), params.probes_per_identity);
    return counts;
  }
  std::size_t start = 0;
  std::size_t prev_total = 0;
  for (const auto& band : params.probe_schedule) {
    const std::size_t width = band.gallery_size - start;
    const std::size_t extra = band.probe_total - prev_total;
    for (std::size_t i = 0; i < width; ++i) counts[start + i] = extra / width + (i < extra % width ? 1 : 0);
    start = band.gallery_size;
    prev_total = band.probe_total;
  }
  return counts;
}

// Enrollment is the identity template itself (the earliest sample); every later
// sample becomes a probe. Gallery order is shuffled with params.seed. Each
// identity draws from its own stream, so the result does not depend on the
// order in which identities are generated.
inline Population generate_population(const SynthParams& params, std::span<const std::size_t> gallery_sizes = {}) {
  params.validate();
  for (std::size_t s : gallery_sizes)
    if (s > params.n_identities) throw ContractViolation("gallery size schedule exceeds the population");

  const auto order = shuffled_order(params.n_identities, params.seed);
  const auto by_position = probe_counts_by_position(params);
  std::vector<std::size_t> probe_count(params.n_identities);
  for (std::size_t pos = 0; pos < order.size(); ++pos) probe_count[order[pos]] = by_position[pos];

  std::vector<IrisTemplate> enrolled;
  enrolled.reserve(params.n_identities);
  Population pop;
  for (std::size_t i = 0; i < params.n_identities; ++i) {
    Rng rng = make_stream(params.seed, i);
    enrolled.push_back(generate_identity(params, rng, identity_label(i)));
    for (std::size_t k = 0; k < probe_count[i]; ++k) {
      char suffix[16];
      std::snprintf(suffix, sizeof suffix, "_%02zu", k + 1);
      pop.probes.push_back(generate_probe(enrolled.back(), params, rng, enrolled.back().identity + suffix));
    }
  }
  pop.gallery = shuffle_gallery(std::move(enrolled), params.seed);
  return pop;
}

// Degrees of freedom implied by an impostor score sample: p(1-p)/var with the
// sample mean p and the (n-1) sample variance.
inline double estimate_dof(std::span<const double> impostor_scores) {
  require(impostor_scores.size() >= 2, "estimate_dof needs at least two scores");
  if (std::all_of(impostor_scores.begin(), impostor_scores.end(),
                  [&](double s) { return s == impostor_scores.front(); }))
    throw ContractViolation("estimate_dof: zero variance sample");
  double mean = 0.0;
  for (double s : impostor_scores) mean += s;
  mean /= static_cast<double>(impostor_scores.size());
  double ss = 0.0;
  for (double s : impostor_scores) ss += (s - mean) * (s - mean);
  const double var = ss / static_cast<double>(impostor_scores.size() - 1);
  if (!(var > 0.0)) throw ContractViolation("estimate_dof: zero variance sample");
  return mean * (1.0 - mean) / var;
}

}  // namespace irislab
