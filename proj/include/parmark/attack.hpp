#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "parmark/errors.hpp"
#include "parmark/rng.hpp"
#include "parmark/token.hpp"

namespace parmark {

enum class AttackKind { Mask, Delete, Insert };

struct AttackSpec {
  AttackKind kind = AttackKind::Mask;
  double ratio = 0.0;  // proportion of tokens affected
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(ratio >= 0.0 && ratio < 1.0)) throw ParamError("attack ratio must be in [0,1)");
  }
};

namespace detail {

// First n entries of a seeded Fisher-Yates permutation of [0, size), sorted.
inline std::vector<std::size_t> pick_positions(std::size_t size, std::size_t n, SplitMix64& rng) {
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t steps = std::min(n, size > 0 ? size - 1 : 0);
  for (std::size_t i = 0; i < steps; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next_below(size - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

// Applies one text perturbation. n = round-half-up(ratio * T) positions are
// chosen without replacement from the seeded stream. Mask replaces each
// chosen token by a uniformly random one (the byte vocabulary reserves no
// mask symbol); Delete removes the chosen positions; Insert splices n uniform
// tokens at uniform slots, one after another. Deterministic in (tokens, spec).
inline TokenSequence apply_attack(const TokenSequence& tokens, const AttackSpec& spec,
                                  std::uint32_t vocab_size) {
  spec.validate();
  if (tokens.empty()) throw ParamError("cannot attack an empty sequence");
  for (TokenId t : tokens) {
    if (t >= vocab_size) throw ParamError("token out of vocabulary");
  }

  const auto n = static_cast<std::size_t>(
      std::floor(spec.ratio * static_cast<double>(tokens.size()) + 0.5));
  if (n == 0) return tokens;

  SplitMix64 rng(spec.rng_seed ^ stream::kAttack);
  switch (spec.kind) {
    case AttackKind::Mask: {
      TokenSequence out = tokens;
      const auto positions = detail::pick_positions(out.size(), n, rng);
      for (std::size_t pos : positions) {
        out[pos] = static_cast<TokenId>(rng.next_below(vocab_size));
      }
      return out;
    }
    case AttackKind::Delete: {
      const auto positions = detail::pick_positions(tokens.size(), n, rng);
      TokenSequence out;
      out.reserve(tokens.size() - n);
      std::size_t next_removed = 0;
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (next_removed < positions.size() && positions[next_removed] == i) {
          ++next_removed;
          continue;
        }
        out.push_back(tokens[i]);
      }
      return out;
    }
    case AttackKind::Insert: {
      TokenSequence out = tokens;
      out.reserve(tokens.size() + n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto slot = static_cast<std::size_t>(rng.next_below(out.size() + 1));
        const auto token = static_cast<TokenId>(rng.next_below(vocab_size));
        out.insert(out.begin() + static_cast<std::ptrdiff_t>(slot), token);
      }
      return out;
    }
  }
  throw ParamError("unknown attack kind");
}

inline const char* attack_kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::Mask: return "mask";
    case AttackKind::Delete: return "delete";
    case AttackKind::Insert: return "insert";
  }
  return "unknown";
}

inline AttackKind parse_attack_kind(std::string_view name) {
  if (name == "mask") return AttackKind::Mask;
  if (name == "delete") return AttackKind::Delete;
  if (name == "insert") return AttackKind::Insert;
  throw ParamError("unknown attack kind: '" + std::string(name) + "'");
}

}  // namespace parmark
