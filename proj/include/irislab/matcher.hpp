#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "irislab/errors.hpp"
#include "irislab/template.hpp"

namespace irislab {

// Maximum rotation magnitude in columns. Shifts evaluated are -max_shift..+max_shift,
// so a best-of-M comparison uses M = 2 * max_shift + 1 rotations.
struct ShiftRange {
  int max_shift = 0;

  constexpr int count() const noexcept { return 2 * max_shift + 1; }
  friend constexpr bool operator==(ShiftRange, ShiftRange) = default;
};

// Masked fractional Hamming distance. Incomparable when no bit is valid in both
// masks; an incomparable score never passes a threshold.
struct MatchScore {
  std::size_t differing_bits = 0;
  std::size_t bits_compared = 0;
  int best_shift = 0;

  bool comparable() const noexcept { return bits_compared > 0; }

  std::optional<double> value() const noexcept {
    if (!comparable()) return std::nullopt;
    return static_cast<double>(differing_bits) / static_cast<double>(bits_compared);
  }

  // Incomparable maps to +infinity, above every threshold.
  double value_or_inf() const noexcept {
    return comparable() ? *value() : std::numeric_limits<double>::infinity();
  }

  bool within(double threshold) const noexcept { return comparable() && *value() <= threshold; }

  // Strict order on the exact ratio; incomparable scores are worse than everything.
  bool better_than(const MatchScore& other) const noexcept {
    if (!comparable()) return false;
    if (!other.comparable()) return true;
    return static_cast<std::uint64_t>(differing_bits) * other.bits_compared <
           static_cast<std::uint64_t>(other.differing_bits) * bits_compared;
  }

  friend bool operator==(const MatchScore&, const MatchScore&) = default;
};

namespace detail {

inline MatchScore count_masked(std::span<const BitMatrix::Word> code_a, std::span<const BitMatrix::Word> mask_a,
                               std::span<const BitMatrix::Word> code_b, std::span<const BitMatrix::Word> mask_b) {
  std::size_t diff = 0;
  std::size_t valid = 0;
  const std::size_t n = code_a.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto joint = mask_a[i] & mask_b[i];
    valid += static_cast<std::size_t>(std::popcount(joint));
    diff += static_cast<std::size_t>(std::popcount((code_a[i] ^ code_b[i]) & joint));
  }
  return MatchScore{diff, valid, 0};
}

inline void require_same_geometry(const IrisTemplate& a, const IrisTemplate& b) {
  if (!a.same_geometry(b)) throw ContractViolation("templates have different dimensions");
}

inline void rotate_bits(const BitMatrix& in, BitMatrix& out, std::size_t k) {
  const std::size_t cols = in.cols();
  for (std::size_t r = 0; r < in.rows(); ++r) {
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t src = (j + cols - k) % cols;
      out.set(r, j, in.get(r, src));
    }
  }
}

}  // namespace detail

inline MatchScore fractional_hd(const IrisTemplate& a, const IrisTemplate& b) {
  detail::require_same_geometry(a, b);
  return detail::count_masked(a.code.words(), a.mask.words(), b.code.words(), b.mask.words());
}

// Circular column shift of code and mask together: result column j holds input
// column (j - k) mod cols. Rows never move.
inline IrisTemplate rotate(const IrisTemplate& t, int k) {
  const auto cols = static_cast<long long>(t.cols());
  const auto shift = static_cast<std::size_t>(((k % cols) + cols) % cols);
  if (shift == 0) return t;
  IrisTemplate out(t.rows(), t.cols(), t.identity, t.sample_id);
  detail::rotate_bits(t.code, out.code, shift);
  detail::rotate_bits(t.mask, out.mask, shift);
  return out;
}

// Degrees of eye rotation represented by a shift of k columns.
inline double shift_degrees(int k, std::size_t cols) {
  require(cols > 0, "shift_degrees: cols must be positive");
  return static_cast<double>(k) * 360.0 / static_cast<double>(cols);
}

// Shifts in evaluation order: 0, -1, +1, -2, +2, ... Taking the first strict
// minimum in this order breaks ties toward the smallest |k|, negative first.
inline int shift_at(int position) noexcept {
  if (position == 0) return 0;
  const int magnitude = (position + 1) / 2;
  return position % 2 == 1 ? -magnitude : magnitude;
}

// Every rotation of one template within a shift range, precomputed so a probe
// can be scored against a whole gallery without re-rotating.
class RotationBank {
 public:
  RotationBank(const IrisTemplate& base, ShiftRange range) : range_(range) {
    base.validate();
    require(range.max_shift >= 0, "shift range must be non-negative");
    require(2 * static_cast<std::size_t>(range.max_shift) < base.cols(),
            "shift range must be below half the template width");
    rotations_.reserve(static_cast<std::size_t>(range.count()));
    for (int pos = 0; pos < range.count(); ++pos) rotations_.push_back(rotate(base, shift_at(pos)));
  }

  ShiftRange range() const noexcept { return range_; }
  const IrisTemplate& base() const noexcept { return rotations_.front(); }

  // Rotation at evaluation-order position `pos` (see shift_at).
  const IrisTemplate& at_position(int pos) const { return rotations_[static_cast<std::size_t>(pos)]; }

  // Best score against `other` for each nested range in `ranges` (ascending,
  // each <= range().max_shift), from a single pass over the shifts.
  void best_nested(const IrisTemplate& other, std::span<const int> ranges, std::span<MatchScore> out) const {
    detail::require_same_geometry(base(), other);
    MatchScore best{0, 0, 0};
    std::size_t next = 0;
    const auto oc = other.code.words();
    const auto om = other.mask.words();
    const int last = ranges.empty() ? -1 : 2 * ranges.back();
    for (int pos = 0; pos <= last; ++pos) {
      const IrisTemplate& rot = rotations_[static_cast<std::size_t>(pos)];
      MatchScore s = detail::count_masked(rot.code.words(), rot.mask.words(), oc, om);
      s.best_shift = shift_at(pos);
      if (s.better_than(best)) best = s;
      // Range r is complete once both +r and -r have been evaluated.
      while (next < ranges.size() && pos == 2 * ranges[next]) out[next++] = best;
    }
  }

  MatchScore best_of_m(const IrisTemplate& other, ShiftRange r) const {
    require(r.max_shift >= 0 && r.max_shift <= range_.max_shift, "shift range exceeds rotation bank");
    MatchScore out;
    const int ranges[] = {r.max_shift};
    best_nested(other, ranges, std::span<MatchScore>(&out, 1));
    return out;
  }

  MatchScore best_of_m(const IrisTemplate& other) const { return best_of_m(other, range_); }

 private:
  ShiftRange range_;
  std::vector<IrisTemplate> rotations_;
};

// Best-of-M: minimum fractional HD of rotate(a, k) against b over k in
// [-s, +s]. Incomparable only when every shift is.
inline MatchScore best_of_m(const IrisTemplate& a, const IrisTemplate& b, ShiftRange r) {
  detail::require_same_geometry(a, b);
  return RotationBank(a, r).best_of_m(b);
}

}  // namespace irislab
