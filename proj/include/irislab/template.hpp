#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "irislab/errors.hpp"

namespace irislab {

// Row-major bit matrix, each row packed LSB-first into 64-bit words.
// Pad bits past `cols` in the last word of every row are always zero, so
// word-wise popcounts over a whole row never see them.
class BitMatrix {
 public:
  using Word = std::uint64_t;
  static constexpr std::size_t kWordBits = 64;

  BitMatrix() = default;

  BitMatrix(std::size_t rows, std::size_t cols, bool fill = false)
      : rows_(rows), cols_(cols), words_per_row_((cols + kWordBits - 1) / kWordBits),
        words_(rows * words_per_row_, fill ? ~Word{0} : Word{0}) {
    if (fill) clear_padding();
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t words_per_row() const noexcept { return words_per_row_; }

  bool get(std::size_t r, std::size_t c) const noexcept {
    return (words_[r * words_per_row_ + c / kWordBits] >> (c % kWordBits)) & 1U;
  }

  void set(std::size_t r, std::size_t c, bool value) noexcept {
    Word& w = words_[r * words_per_row_ + c / kWordBits];
    const Word bit = Word{1} << (c % kWordBits);
    w = value ? (w | bit) : (w & ~bit);
  }

  void fill(bool value) noexcept {
    for (auto& w : words_) w = value ? ~Word{0} : Word{0};
    if (value) clear_padding();
  }

  std::span<const Word> words() const noexcept { return words_; }
  std::span<Word> words() noexcept { return words_; }

  std::span<const Word> row(std::size_t r) const noexcept {
    return std::span<const Word>(words_).subspan(r * words_per_row_, words_per_row_);
  }
  std::span<Word> row(std::size_t r) noexcept {
    return std::span<Word>(words_).subspan(r * words_per_row_, words_per_row_);
  }

  std::size_t count() const noexcept {
    std::size_t n = 0;
    for (Word w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  BitMatrix complement() const {
    BitMatrix out = *this;
    for (auto& w : out.words_) w = ~w;
    out.clear_padding();
    return out;
  }

  // Zeroes the bits beyond `cols` in each row.
  void clear_padding() noexcept {
    const std::size_t tail = cols_ % kWordBits;
    if (tail == 0 || words_per_row_ == 0) return;
    const Word keep = (Word{1} << tail) - 1;
    for (std::size_t r = 0; r < rows_; ++r) words_[r * words_per_row_ + words_per_row_ - 1] &= keep;
  }

  friend bool operator==(const BitMatrix&, const BitMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t words_per_row_ = 0;
  std::vector<Word> words_;
};

// An iris code with its validity mask and labels. code bit 1 = phase bit set;
// mask bit 1 = bit valid (not occluded).
struct IrisTemplate {
  BitMatrix code;
  BitMatrix mask;
  std::string identity;
  std::string sample_id;

  IrisTemplate() = default;

  IrisTemplate(std::size_t rows, std::size_t cols, std::string identity_label = {},
               std::string sample_label = {})
      : code(rows, cols, false), mask(rows, cols, true), identity(std::move(identity_label)),
        sample_id(std::move(sample_label)) {}

  IrisTemplate(BitMatrix code_bits, BitMatrix mask_bits, std::string identity_label,
               std::string sample_label = {})
      : code(std::move(code_bits)), mask(std::move(mask_bits)), identity(std::move(identity_label)),
        sample_id(std::move(sample_label)) {
    validate();
  }

  std::size_t rows() const noexcept { return code.rows(); }
  std::size_t cols() const noexcept { return code.cols(); }

  bool same_geometry(const IrisTemplate& other) const noexcept {
    return rows() == other.rows() && cols() == other.cols();
  }

  void validate() const {
    require(code.rows() > 0 && code.cols() > 0, "template geometry must be non-empty");
    require(code.rows() == mask.rows() && code.cols() == mask.cols(),
            "code and mask must have identical dimensions");
  }

  friend bool operator==(const IrisTemplate&, const IrisTemplate&) = default;
};

}  // namespace irislab
