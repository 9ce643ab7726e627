#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "parmark/errors.hpp"
#include "parmark/rng.hpp"
#include "parmark/token.hpp"

namespace parmark {

enum class StepMode { Fixed, PerStep };

// Secret key controlling which vocabulary subset carries the watermark.
// Fixed mode uses one list for every generation step; PerStep mixes the step
// index into the seed (detection for PerStep is only meaningful on unmodified,
// offset-aligned text, so Fixed is the working default).
struct WatermarkKey {
  std::vector<std::uint8_t> bytes;
  StepMode step_mode = StepMode::Fixed;

  static WatermarkKey from_string(std::string_view s, StepMode mode = StepMode::Fixed) {
    WatermarkKey k;
    k.bytes.assign(s.begin(), s.end());
    k.step_mode = mode;
    return k;
  }
};

// Pinned construction: FNV-1a-64 over the key bytes gives the base seed; in
// PerStep mode the step index is mixed in with one SplitMix64 round. Any keyed
// PRF would do, but tests and cross-implementation checks need one canonical
// answer.
inline std::uint64_t derive_seed(const WatermarkKey& key, std::uint64_t step = 0) {
  if (key.bytes.empty()) throw ParamError("watermark key must be nonempty");
  const std::uint64_t base = fnv1a64(key.bytes.data(), key.bytes.size());
  if (key.step_mode == StepMode::Fixed) return base;
  return splitmix_mix(base ^ step);
}

// The keyed vocabulary subset whose output-layer parameters get amplified.
// |members| = floor(gamma * vocab_size); membership is O(1).
class GreenList {
 public:
  GreenList(std::uint32_t vocab_size, double gamma, std::vector<TokenId> members)
      : vocab_size_(vocab_size), gamma_(gamma), members_(std::move(members)),
        mask_(vocab_size, 0) {
    std::sort(members_.begin(), members_.end());
    for (TokenId t : members_) {
      if (t >= vocab_size_) throw ParamError("green member out of vocabulary");
      mask_[t] = 1;
    }
  }

  std::uint32_t vocab_size() const noexcept { return vocab_size_; }
  double gamma() const noexcept { return gamma_; }
  std::size_t size() const noexcept { return members_.size(); }
  const std::vector<TokenId>& members() const noexcept { return members_; }

  bool contains(TokenId t) const {
    if (t >= vocab_size_) throw ParamError("token id " + std::to_string(t) + " out of vocabulary");
    return mask_[t] != 0;
  }

  bool operator==(const GreenList& other) const {
    return vocab_size_ == other.vocab_size_ && members_ == other.members_;
  }

 private:
  std::uint32_t vocab_size_;
  double gamma_;
  std::vector<TokenId> members_;  // sorted
  std::vector<std::uint8_t> mask_;
};

inline std::size_t green_list_size(std::uint32_t vocab_size, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ParamError("gamma must be in (0,1)");
  const auto size = static_cast<std::size_t>(std::floor(gamma * static_cast<double>(vocab_size)));
  if (size < 1 || size > vocab_size - 1) {
    throw ParamError("degenerate green list: floor(gamma*|V|)=" + std::to_string(size));
  }
  return size;
}

// First floor(gamma*|V|) entries of the seed-determined Fisher-Yates
// permutation of [0, |V|). Positions below i are final after step i, so the
// shuffle stops once the prefix is settled; the result is identical to
// shuffling the whole array.
inline GreenList select_green(std::uint32_t vocab_size, double gamma, std::uint64_t seed) {
  if (vocab_size < 2) throw ParamError("vocab_size must be at least 2");
  const std::size_t size = green_list_size(vocab_size, gamma);

  std::vector<TokenId> perm(vocab_size);
  std::iota(perm.begin(), perm.end(), 0);
  SplitMix64 rng(seed);
  const std::size_t steps = std::min<std::size_t>(size, vocab_size - 1);
  for (std::size_t i = 0; i < steps; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next_below(vocab_size - i));
    std::swap(perm[i], perm[j]);
  }
  perm.resize(size);
  return GreenList(vocab_size, gamma, std::move(perm));
}

inline GreenList green_list_for(const WatermarkKey& key, std::uint32_t vocab_size, double gamma,
                                std::uint64_t step = 0) {
  return select_green(vocab_size, gamma, derive_seed(key, step));
}

// Audit export: sorted ids, one per line.
inline void write_green_list(const std::filesystem::path& path, const GreenList& green) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (TokenId t : green.members()) out << t << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace parmark
