#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "treecast/error.hpp"

namespace treecast {

/// Bit-packed +/-1 values of one generation. Bit 1 encodes +1, bit 0 encodes
/// -1. Indices are flat and 0-based; bits past size() are kept clear.
class GenerationSignals {
 public:
  GenerationSignals() = default;

  GenerationSignals(int level, std::uint64_t size, bool plus = true)
      : level_(level), size_(size), words_((size + 63) / 64, plus ? ~std::uint64_t{0} : 0) {
    clear_tail();
  }

  static GenerationSignals from_values(int level, std::span<const int> values) {
    GenerationSignals g(level, values.size(), false);
    for (std::uint64_t i = 0; i < values.size(); ++i) {
      detail::require(values[i] == 1 || values[i] == -1, "signal values must be +1 or -1");
      if (values[i] == 1) g.set(i, true);
    }
    return g;
  }

  [[nodiscard]] int level() const noexcept { return level_; }
  void set_level(int level) noexcept { level_ = level; }
  [[nodiscard]] std::uint64_t size() const noexcept { return size_; }
  [[nodiscard]] bool empty() const noexcept { return size_ == 0; }

  [[nodiscard]] bool is_plus(std::uint64_t i) const noexcept { return ((words_[i >> 6] >> (i & 63)) & 1U) != 0; }
  [[nodiscard]] int operator[](std::uint64_t i) const noexcept { return is_plus(i) ? 1 : -1; }

  void set(std::uint64_t i, bool plus) noexcept {
    const std::uint64_t bit = std::uint64_t{1} << (i & 63);
    if (plus) {
      words_[i >> 6] |= bit;
    } else {
      words_[i >> 6] &= ~bit;
    }
  }

  // Sets indices [first, first + count) to one sign.
  void fill(std::uint64_t first, std::uint64_t count, bool plus) noexcept {
    std::uint64_t i = first;
    const std::uint64_t end = first + count;
    while (i < end) {
      const std::uint64_t offset = i & 63;
      const std::uint64_t n = std::min<std::uint64_t>(64 - offset, end - i);
      const std::uint64_t mask = (n == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1)) << offset;
      if (plus) {
        words_[i >> 6] |= mask;
      } else {
        words_[i >> 6] &= ~mask;
      }
      i += n;
    }
  }

  // Number of +1 entries among [first, first + count).
  [[nodiscard]] std::uint64_t plus_count(std::uint64_t first, std::uint64_t count) const noexcept {
    std::uint64_t total = 0;
    std::uint64_t i = first;
    const std::uint64_t end = first + count;
    while (i < end) {
      const std::uint64_t offset = i & 63;
      const std::uint64_t n = std::min<std::uint64_t>(64 - offset, end - i);
      const std::uint64_t mask = (n == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1)) << offset;
      total += static_cast<std::uint64_t>(std::popcount(words_[i >> 6] & mask));
      i += n;
    }
    return total;
  }

  [[nodiscard]] std::uint64_t plus_count() const noexcept {
    std::uint64_t total = 0;
    for (const auto w : words_) total += static_cast<std::uint64_t>(std::popcount(w));
    return total;
  }

  void flip_all() noexcept {
    for (auto& w : words_) w = ~w;
    clear_tail();
  }

  [[nodiscard]] std::span<const std::uint64_t> words() const noexcept { return words_; }
  [[nodiscard]] std::span<std::uint64_t> words() noexcept { return words_; }

  // Re-establishes the clear-tail invariant after raw word writes.
  void clear_tail() noexcept {
    if (const std::uint64_t rem = size_ & 63; rem != 0 && !words_.empty()) {
      words_.back() &= (std::uint64_t{1} << rem) - 1;
    }
  }

  // Keeps only the first n entries.
  void truncate(std::uint64_t n) {
    if (n >= size_) return;
    size_ = n;
    words_.resize((n + 63) / 64);
    clear_tail();
  }

  [[nodiscard]] std::vector<int> values() const {
    std::vector<int> out(size_);
    for (std::uint64_t i = 0; i < size_; ++i) out[i] = (*this)[i];
    return out;
  }

  friend bool operator==(const GenerationSignals& a, const GenerationSignals& b) {
    return a.level_ == b.level_ && a.size_ == b.size_ && a.words_ == b.words_;
  }

 private:
  int level_ = 0;
  std::uint64_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace treecast
