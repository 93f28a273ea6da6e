#pragma once

// Independent checks for the optimized pipeline: a per-bit reference matcher,
// a closed-form model of how often a sequential scan commits to an impostor,
// and a per-probe comparison of the two search disciplines.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "irislab/errors.hpp"
#include "irislab/matcher.hpp"
#include "irislab/random.hpp"
#include "irislab/search.hpp"
#include "irislab/template.hpp"

namespace irislab {

// Reference best-of-M. Reads every bit through BitMatrix::get with explicit
// index arithmetic; shares nothing with the word-level kernel, rotate(), or
// MatchScore's ordering.
inline MatchScore naive_best_of_m(const IrisTemplate& a, const IrisTemplate& b, ShiftRange r) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ContractViolation("templates have different dimensions");
  require(r.max_shift >= 0 && 2 * static_cast<std::size_t>(r.max_shift) < a.cols(),
          "shift range must be below half the template width");
  const long long cols = static_cast<long long>(a.cols());

  bool have_best = false;
  std::size_t best_diff = 0;
  std::size_t best_bits = 0;
  int best_k = 0;
  // 0, -1, +1, -2, +2, ...
  std::vector<int> order{0};
  for (int m = 1; m <= r.max_shift; ++m) {
    order.push_back(-m);
    order.push_back(m);
  }
  for (int k : order) {
    std::size_t diff = 0;
    std::size_t bits = 0;
    for (std::size_t row = 0; row < a.rows(); ++row) {
      for (long long j = 0; j < cols; ++j) {
        // rotate(a, k) at column j is a at column j - k.
        const auto src = static_cast<std::size_t>(((j - k) % cols + cols) % cols);
        const bool valid = a.mask.get(row, src) && b.mask.get(row, static_cast<std::size_t>(j));
        if (!valid) continue;
        ++bits;
        if (a.code.get(row, src) != b.code.get(row, static_cast<std::size_t>(j))) ++diff;
      }
    }
    if (bits == 0) continue;
    // diff/bits < best_diff/best_bits, compared exactly.
    if (!have_best || static_cast<unsigned long long>(diff) * best_bits <
                          static_cast<unsigned long long>(best_diff) * bits) {
      have_best = true;
      best_diff = diff;
      best_bits = bits;
      best_k = k;
    }
  }
  if (!have_best) return MatchScore{0, 0, 0};
  return MatchScore{best_diff, best_bits, best_k};
}

// Sequential scan abstraction: n enrollments, each impostor accepted
// independently with probability q, the mate accepted with probability g, the
// mate's position uniform over 0..n-1.
struct ScanModel {
  std::size_t n = 1;
  double q = 0.0;
  double g = 1.0;

  void validate() const {
    require(n >= 1, "scan model needs n >= 1");
    require(q >= 0.0 && q <= 1.0 && g >= 0.0 && g <= 1.0, "scan model probabilities must lie in [0, 1]");
  }
};

// Probability that a 1:First scan accepts an impostor: with the mate at
// position M, an accepted mate is preceded by M impostors; a rejected mate
// exposes all n-1.
inline double first_false_match_prob(const ScanModel& m) {
  m.validate();
  const double miss = 1.0 - m.q;
  const double all_exposed = 1.0 - std::pow(miss, static_cast<double>(m.n - 1));
  double sum = 0.0;
  double miss_pow = 1.0;  // (1-q)^M
  for (std::size_t pos = 0; pos < m.n; ++pos) {
    sum += m.g * (1.0 - miss_pow) + (1.0 - m.g) * all_exposed;
    miss_pow *= miss;
  }
  return sum / static_cast<double>(m.n);
}

// Empirical (q, g) at one operating point: q over every probe-vs-impostor
// comparison in the gallery, g over probe-vs-mate comparisons. Probes whose
// identity is not enrolled are ignored.
inline ScanModel estimate_scan_model(const Gallery& g, std::span<const IrisTemplate> probes, double threshold,
                                     ShiftRange shifts) {
  require(!g.empty(), "cannot estimate a scan model on an empty gallery");
  std::uint64_t impostor_total = 0;
  std::uint64_t impostor_accepts = 0;
  std::uint64_t mate_total = 0;
  std::uint64_t mate_accepts = 0;
  for (const auto& probe : probes) {
    const auto mate = g.index_of(probe.identity);
    if (!mate) continue;
    const RotationBank bank(probe, shifts);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const bool accepted = bank.best_of_m(g[i]).within(threshold);
      if (i == *mate) {
        ++mate_total;
        mate_accepts += accepted ? 1 : 0;
      } else {
        ++impostor_total;
        impostor_accepts += accepted ? 1 : 0;
      }
    }
  }
  ScanModel m;
  m.n = g.size();
  m.q = impostor_total ? static_cast<double>(impostor_accepts) / static_cast<double>(impostor_total) : 0.0;
  m.g = mate_total ? static_cast<double>(mate_accepts) / static_cast<double>(mate_total) : 0.0;
  return m;
}

struct EquivalenceViolation {
  std::size_t probe_index = 0;
  std::string sample_id;
  std::string identity;
  double threshold = 0.0;
  int shifts = 0;
  bool match_1n = false;
  bool match_1first = false;
};

struct EquivalenceReport {
  std::uint64_t seed = 0;
  std::size_t gallery_size = 0;
  std::size_t probes = 0;
  std::size_t matched = 0;
  double mean_comparisons_1n = 0.0;
  double mean_comparisons_1first = 0.0;
  // Means over matched probes only.
  double mean_comparisons_1first_matched = 0.0;
  double mean_comparison_delta_matched = 0.0;
  bool comparisons_1n_always_n = true;
  std::vector<EquivalenceViolation> violations;

  bool ok() const noexcept { return violations.empty() && comparisons_1n_always_n; }
};

// Runs both engines on every probe and records any Match/NonMatch disagreement
// with enough data to reproduce it.
inline EquivalenceReport decision_equivalence_check(const Gallery& g, std::span<const IrisTemplate> probes,
                                                    const SearchParams& params, std::uint64_t seed = 0) {
  EquivalenceReport rep;
  rep.seed = seed;
  rep.gallery_size = g.size();
  rep.probes = probes.size();
  double sum_n = 0.0;
  double sum_first = 0.0;
  double sum_first_matched = 0.0;
  double sum_delta_matched = 0.0;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const SearchResult a = identify_1n(g, probes[p], params);
    const SearchResult b = identify_1first(g, probes[p], params);
    sum_n += static_cast<double>(a.comparisons);
    sum_first += static_cast<double>(b.comparisons);
    if (a.comparisons != g.size()) rep.comparisons_1n_always_n = false;
    if (a.matched() != b.matched()) {
      rep.violations.push_back({p, probes[p].sample_id, probes[p].identity, params.threshold,
                                params.shifts.max_shift, a.matched(), b.matched()});
    }
    if (a.matched() && b.matched()) {
      ++rep.matched;
      sum_first_matched += static_cast<double>(b.comparisons);
      sum_delta_matched += static_cast<double>(a.comparisons) - static_cast<double>(b.comparisons);
    }
  }
  if (!probes.empty()) {
    rep.mean_comparisons_1n = sum_n / static_cast<double>(probes.size());
    rep.mean_comparisons_1first = sum_first / static_cast<double>(probes.size());
  }
  if (rep.matched > 0) {
    rep.mean_comparisons_1first_matched = sum_first_matched / static_cast<double>(rep.matched);
    rep.mean_comparison_delta_matched = sum_delta_matched / static_cast<double>(rep.matched);
  }
  return rep;
}

inline nlohmann::json to_json(const EquivalenceReport& r) {
  nlohmann::json v = nlohmann::json::array();
  for (const auto& x : r.violations) {
    v.push_back({{"probe_index", x.probe_index},
                 {"sample_id", x.sample_id},
                 {"identity", x.identity},
                 {"threshold", x.threshold},
                 {"shifts", x.shifts},
                 {"match_1n", x.match_1n},
                 {"match_1first", x.match_1first}});
  }
  return {{"seed", r.seed},
          {"gallery_size", r.gallery_size},
          {"probes", r.probes},
          {"matched", r.matched},
          {"mean_comparisons_1n", r.mean_comparisons_1n},
          {"mean_comparisons_1first", r.mean_comparisons_1first},
          {"mean_comparisons_1first_matched", r.mean_comparisons_1first_matched},
          {"mean_comparison_delta_matched", r.mean_comparison_delta_matched},
          {"comparisons_1n_always_n", r.comparisons_1n_always_n},
          {"violations", v}};
}

struct OracleReport {
  std::string name;
  std::uint64_t cases = 0;
  std::uint64_t mismatches = 0;
  std::string first_mismatch;

  bool ok() const noexcept { return mismatches == 0; }
};

inline nlohmann::json to_json(const OracleReport& r) {
  return {{"name", r.name}, {"cases", r.cases}, {"mismatches", r.mismatches}, {"first_mismatch", r.first_mismatch}};
}

namespace detail {

inline void compare_with_oracle(OracleReport& rep, const IrisTemplate& a, const IrisTemplate& b, ShiftRange r,
                                const std::string& label) {
  ++rep.cases;
  const MatchScore fast = best_of_m(a, b, r);
  const MatchScore ref = naive_best_of_m(a, b, r);
  if (fast == ref) return;
  if (rep.mismatches++ == 0) {
    rep.first_mismatch = label + ": fast " + std::to_string(fast.differing_bits) + "/" +
                         std::to_string(fast.bits_compared) + "@" + std::to_string(fast.best_shift) + " vs reference " +
                         std::to_string(ref.differing_bits) + "/" + std::to_string(ref.bits_compared) + "@" +
                         std::to_string(ref.best_shift);
  }
}

inline IrisTemplate byte_template(unsigned code, unsigned mask) {
  IrisTemplate t(1, 8);
  for (std::size_t c = 0; c < 8; ++c) {
    t.code.set(0, c, (code >> c) & 1U);
    t.mask.set(0, c, (mask >> c) & 1U);
  }
  return t;
}

}  // namespace detail

// Every pair of 8-bit codes on a 1x8 geometry with full masks, at each range.
inline OracleReport oracle_exhaustive_1x8(std::span<const int> shift_ranges) {
  OracleReport rep{"exhaustive_1x8", 0, 0, {}};
  std::vector<IrisTemplate> all;
  for (unsigned c = 0; c < 256; ++c) all.push_back(detail::byte_template(c, 0xFF));
  for (int s : shift_ranges)
    for (unsigned x = 0; x < 256; ++x)
      for (unsigned y = 0; y < 256; ++y)
        detail::compare_with_oracle(rep, all[x], all[y], ShiftRange{s},
                                    "s=" + std::to_string(s) + " a=" + std::to_string(x) + " b=" + std::to_string(y));
  return rep;
}

// Random templates with random masks (density ~3/4) at the given geometry.
inline IrisTemplate random_template(std::size_t rows, std::size_t cols, Rng& rng, double mask_density = 0.75) {
  IrisTemplate t(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      t.code.set(r, c, (rng() >> 63) != 0);
      t.mask.set(r, c, bernoulli(rng, mask_density));
    }
  }
  return t;
}

inline OracleReport oracle_random_pairs(std::size_t pairs, std::size_t rows, std::size_t cols, ShiftRange r,
                                        std::uint64_t seed) {
  OracleReport rep{"random_" + std::to_string(rows) + "x" + std::to_string(cols) + "_s" + std::to_string(r.max_shift),
                   0, 0, {}};
  Rng rng = make_stream(seed, 0, 0x6f72'6163'6c65ULL);
  for (std::size_t i = 0; i < pairs; ++i) {
    const IrisTemplate a = random_template(rows, cols, rng);
    // Half the pairs are a noisy rotated copy so the minimum is not always at 0.
    IrisTemplate b = random_template(rows, cols, rng);
    if (i % 2 == 1) {
      b.code = rotate(a, static_cast<int>(uniform_int(rng, -r.max_shift, r.max_shift))).code;
      for (std::size_t k = 0; k < rows * cols / 10; ++k) {
        const auto row = static_cast<std::size_t>(uniform_below(rng, rows));
        const auto col = static_cast<std::size_t>(uniform_below(rng, cols));
        b.code.set(row, col, !b.code.get(row, col));
      }
    }
    detail::compare_with_oracle(rep, a, b, r, "pair " + std::to_string(i));
  }
  return rep;
}

struct TrialReport {
  std::uint64_t seed = 0;
  std::uint64_t trials = 0;
  std::uint64_t matches = 0;
  std::uint64_t non_matches = 0;
  // Both engines matched but named different identities (allowed).
  std::uint64_t identity_divergences = 0;
  std::uint64_t decision_violations = 0;
  // Broken comparison-count or threshold contracts.
  std::uint64_t contract_violations = 0;
  std::string first_violation;

  bool ok() const noexcept { return decision_violations == 0 && contract_violations == 0; }
};

inline nlohmann::json to_json(const TrialReport& r) {
  return {{"seed", r.seed},
          {"trials", r.trials},
          {"matches", r.matches},
          {"non_matches", r.non_matches},
          {"identity_divergences", r.identity_divergences},
          {"decision_violations", r.decision_violations},
          {"contract_violations", r.contract_violations},
          {"first_violation", r.first_violation}};
}

// Randomized (gallery, probe, threshold, shift) trials on small geometries.
// Trial i draws from stream (seed, i), so any violation is reproducible from
// the pair alone. Most probes are noisy rotated copies of an enrolled entry,
// which keeps both Match and NonMatch outcomes frequent.
inline TrialReport randomized_equivalence_trials(std::uint64_t trials, std::uint64_t seed) {
  TrialReport rep;
  rep.seed = seed;
  for (std::uint64_t i = 0; i < trials; ++i) {
    Rng rng = make_stream(seed, i, 0x7472'6961'6cULL);
    const auto rows = static_cast<std::size_t>(uniform_int(rng, 1, 4));
    const auto cols = static_cast<std::size_t>(uniform_int(rng, 8, 48));
    const auto n = static_cast<std::size_t>(uniform_int(rng, 1, 16));
    std::vector<IrisTemplate> entries;
    for (std::size_t e = 0; e < n; ++e) {
      IrisTemplate t = random_template(rows, cols, rng, 0.9);
      t.identity = "I" + std::to_string(e);
      entries.push_back(std::move(t));
    }
    const int max_shift = static_cast<int>(std::min<std::size_t>(4, (cols - 1) / 2));
    const SearchParams params{0.05 + 0.55 * uniform01(rng), ShiftRange{static_cast<int>(uniform_int(rng, 0, max_shift))}};

    IrisTemplate probe;
    if (uniform01(rng) < 0.7) {
      const auto src = static_cast<std::size_t>(uniform_below(rng, n));
      probe = rotate(entries[src], static_cast<int>(uniform_int(rng, -max_shift, max_shift)));
      const double flip = 0.35 * uniform01(rng);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          if (bernoulli(rng, flip)) probe.code.set(r, c, !probe.code.get(r, c));
    } else {
      probe = random_template(rows, cols, rng, 0.9);
      probe.identity = "I0";
    }
    const Gallery g(std::move(entries), seed);

    const SearchResult a = identify_1n(g, probe, params);
    const SearchResult b = identify_1first(g, probe, params);
    ++rep.trials;
    auto note = [&](const std::string& what) {
      if (rep.first_violation.empty())
        rep.first_violation = "seed " + std::to_string(seed) + " trial " + std::to_string(i) + ": " + what;
    };
    if (a.matched() != b.matched()) {
      ++rep.decision_violations;
      note("decisions differ");
    }
    const bool counts_ok = a.comparisons == n && (b.matched() ? b.comparisons == *b.matched_index + 1 : b.comparisons == n) &&
                           b.comparisons <= a.comparisons &&
                           (!a.matched() || a.score->within(params.threshold)) &&
                           (!b.matched() || b.score->within(params.threshold));
    if (!counts_ok) {
      ++rep.contract_violations;
      note("comparison or threshold contract broken");
    }
    if (a.matched()) {
      ++rep.matches;
      if (b.matched() && a.matched_identity != b.matched_identity) ++rep.identity_divergences;
    } else {
      ++rep.non_matches;
    }
  }
  return rep;
}

}  // namespace irislab
