#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "irislab/errors.hpp"
#include "irislab/matcher.hpp"
#include "irislab/random.hpp"
#include "irislab/template.hpp"

namespace irislab {

// Fisher-Yates permutation of 0..n-1 driven by `seed`. Used for gallery order
// so the same seed gives the same order on every platform.
inline std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_stream(seed, 0, /*tag=*/0x6761'6c6c'6572'7921ULL);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

// Ordered, closed-set enrollment database: one template per identity.
class Gallery {
 public:
  Gallery() = default;

  // Keeps `entries` in the given order (e.g. a manifest that is already shuffled).
  explicit Gallery(std::vector<IrisTemplate> entries, std::uint64_t order_seed = 0)
      : entries_(std::move(entries)), order_seed_(order_seed) {
    std::unordered_set<std::string_view> seen;
    for (const auto& e : entries_) {
      e.validate();
      if (!seen.insert(e.identity).second)
        throw ContractViolation("duplicate identity in gallery: " + e.identity);
      if (!e.same_geometry(entries_.front()))
        throw ContractViolation("gallery templates must share one geometry");
    }
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::uint64_t order_seed() const noexcept { return order_seed_; }
  const IrisTemplate& operator[](std::size_t i) const { return entries_[i]; }
  std::span<const IrisTemplate> entries() const noexcept { return entries_; }

  // First n entries, same order. Nested galleries across sizes are prefixes.
  Gallery prefix(std::size_t n) const {
    require(n <= size(), "prefix longer than gallery");
    return Gallery(std::vector<IrisTemplate>(entries_.begin(), entries_.begin() + static_cast<std::ptrdiff_t>(n)),
                   order_seed_);
  }

  std::optional<std::size_t> index_of(std::string_view identity) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (entries_[i].identity == identity) return i;
    return std::nullopt;
  }

 private:
  std::vector<IrisTemplate> entries_;
  std::uint64_t order_seed_ = 0;
};

inline Gallery shuffle_gallery(std::vector<IrisTemplate> entries, std::uint64_t order_seed) {
  const auto order = shuffled_order(entries.size(), order_seed);
  std::vector<IrisTemplate> out;
  out.reserve(entries.size());
  for (std::size_t i : order) out.push_back(std::move(entries[i]));
  return Gallery(std::move(out), order_seed);
}

struct SearchParams {
  double threshold = 0.32;
  ShiftRange shifts{};

  void validate() const {
    require(threshold > 0.0 && threshold < 1.0, "threshold must lie strictly between 0 and 1");
    require(shifts.max_shift >= 0, "shift range must be non-negative");
  }
};

enum class Decision { Match, NonMatch };

enum class Method { OneToN, OneToFirst };

struct SearchResult {
  Decision decision = Decision::NonMatch;
  std::optional<std::string> matched_identity;
  std::optional<MatchScore> score;
  std::size_t comparisons = 0;
  std::optional<std::size_t> matched_index;

  bool matched() const noexcept { return decision == Decision::Match; }
};

enum class Outcome : std::uint8_t { TrueMatch, FalseMatch, FalseNonMatch };

// Result of a scan over positions 0..n-1, before identities are attached.
struct ScanResult {
  std::optional<std::size_t> index;
  MatchScore score;
  std::size_t comparisons = 0;
};

// Exhaustive scan: global minimum, lowest index on exact ties, accepted iff
// within threshold (inclusive).
template <class ScoreAt>
ScanResult scan_1n(std::size_t n, double threshold, ScoreAt&& score_at) {
  std::optional<std::size_t> best_index;
  MatchScore best{};
  for (std::size_t i = 0; i < n; ++i) {
    const MatchScore s = score_at(i);
    if (!best_index || s.better_than(best)) {
      best = s;
      best_index = i;
    }
  }
  if (best_index && best.within(threshold)) return {best_index, best, n};
  return {std::nullopt, {}, n};
}

// Sequential scan that stops at the first entry within threshold.
template <class ScoreAt>
ScanResult scan_1first(std::size_t n, double threshold, ScoreAt&& score_at) {
  for (std::size_t i = 0; i < n; ++i) {
    const MatchScore s = score_at(i);
    if (s.within(threshold)) return {i, s, i + 1};
  }
  return {std::nullopt, {}, n};
}

namespace detail {

inline SearchResult to_search_result(const Gallery& g, const ScanResult& scan) {
  SearchResult r;
  r.comparisons = scan.comparisons;
  if (scan.index) {
    r.decision = Decision::Match;
    r.matched_index = scan.index;
    r.matched_identity = g[*scan.index].identity;
    r.score = scan.score;
  }
  return r;
}

inline void check_search_inputs(const Gallery& g, const IrisTemplate& probe, const SearchParams& p) {
  p.validate();
  if (g.empty()) throw ContractViolation("cannot search an empty gallery");
  if (!probe.same_geometry(g[0])) throw ContractViolation("probe geometry differs from gallery");
}

}  // namespace detail

inline SearchResult identify_1n(const Gallery& g, const IrisTemplate& probe, const SearchParams& p) {
  detail::check_search_inputs(g, probe, p);
  const RotationBank bank(probe, p.shifts);
  return detail::to_search_result(
      g, scan_1n(g.size(), p.threshold, [&](std::size_t i) { return bank.best_of_m(g[i]); }));
}

inline SearchResult identify_1first(const Gallery& g, const IrisTemplate& probe, const SearchParams& p) {
  detail::check_search_inputs(g, probe, p);
  const RotationBank bank(probe, p.shifts);
  return detail::to_search_result(
      g, scan_1first(g.size(), p.threshold, [&](std::size_t i) { return bank.best_of_m(g[i]); }));
}

inline SearchResult identify(Method method, const Gallery& g, const IrisTemplate& probe, const SearchParams& p) {
  return method == Method::OneToN ? identify_1n(g, probe, p) : identify_1first(g, probe, p);
}

// Runs `method` at `first`; on NonMatch re-scans the whole gallery from index 0
// at `widened`. Comparisons accumulate across both passes.
inline SearchResult identify_two_stage(const Gallery& g, const IrisTemplate& probe, double threshold,
                                       ShiftRange first, ShiftRange widened, Method method) {
  require(first.max_shift < widened.max_shift, "two-stage search needs a strictly wider second range");
  SearchResult r = identify(method, g, probe, SearchParams{threshold, first});
  if (r.matched()) return r;
  const std::size_t spent = r.comparisons;
  r = identify(method, g, probe, SearchParams{threshold, widened});
  r.comparisons += spent;
  return r;
}

inline Outcome classify_outcome(const SearchResult& r, std::string_view true_identity) {
  if (!r.matched()) return Outcome::FalseNonMatch;
  return r.matched_identity == true_identity ? Outcome::TrueMatch : Outcome::FalseMatch;
}

// Record index over one probe's scores against a gallery in scan order: the
// positions where the running minimum strictly improves. Both disciplines on
// any prefix and threshold reduce to a binary search here:
//  - the 1:N argmin of prefix n is the last record before n;
//  - the first entry within threshold t is always a record (everything before
//    it is above t), so it is the first record whose score is within t.
class ScanRecords {
 public:
  explicit ScanRecords(std::span<const MatchScore> scores) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (records_.empty() || scores[i].better_than(records_.back().score)) records_.push_back({i, scores[i]});
    }
  }

  ScanResult one_to_n(std::size_t n, double threshold) const {
    auto it = std::partition_point(records_.begin(), records_.end(), [n](const Record& r) { return r.index < n; });
    if (it == records_.begin()) return {std::nullopt, {}, n};
    --it;
    if (it->score.within(threshold)) return {it->index, it->score, n};
    return {std::nullopt, {}, n};
  }

  ScanResult one_to_first(std::size_t n, double threshold) const {
    const auto it = std::partition_point(records_.begin(), records_.end(),
                                         [threshold](const Record& r) { return !r.score.within(threshold); });
    if (it != records_.end() && it->index < n) return {it->index, it->score, it->index + 1};
    return {std::nullopt, {}, n};
  }

  ScanResult scan(Method m, std::size_t n, double threshold) const {
    return m == Method::OneToN ? one_to_n(n, threshold) : one_to_first(n, threshold);
  }

 private:
  struct Record {
    std::size_t index;
    MatchScore score;
  };
  std::vector<Record> records_;
};

}  // namespace irislab
