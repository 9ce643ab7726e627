#include "parmark/attack.hpp"

#include <algorithm>
#include <map>
#include <vector>

#include "gtest/gtest.h"
#include "parmark/detect.hpp"
#include "parmark/errors.hpp"
#include "parmark/greenlist.hpp"

namespace parmark {
namespace {

TokenSequence iota_tokens(std::size_t n, std::uint32_t vocab) {
  TokenSequence seq(n);
  for (std::size_t i = 0; i < n; ++i) seq[i] = static_cast<TokenId>(i % vocab);
  return seq;
}

TEST(Attack, ZeroRatioIsIdentity) {
  const TokenSequence tokens = iota_tokens(10, 16);
  for (AttackKind kind : {AttackKind::Mask, AttackKind::Delete, AttackKind::Insert}) {
    EXPECT_EQ(apply_attack(tokens, {kind, 0.0, 7}, 16), tokens);
  }
}

TEST(Attack, DeleteLengthArithmetic) {
  const TokenSequence tokens = iota_tokens(10, 16);
  EXPECT_EQ(apply_attack(tokens, {AttackKind::Delete, 0.3, 7}, 16).size(), 7u);
}

TEST(Attack, InsertLengthArithmetic) {
  const TokenSequence tokens = iota_tokens(10, 16);
  EXPECT_EQ(apply_attack(tokens, {AttackKind::Insert, 0.3, 7}, 16).size(), 13u);
}

TEST(Attack, MaskPreservesLengthAndBoundsChanges) {
  const TokenSequence tokens = iota_tokens(40, 64);
  const TokenSequence attacked = apply_attack(tokens, {AttackKind::Mask, 0.25, 3}, 64);
  ASSERT_EQ(attacked.size(), tokens.size());
  std::size_t changed = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (attacked[i] != tokens[i]) ++changed;
  }
  EXPECT_LE(changed, 10u);  // a masked position may redraw its own value
  EXPECT_GT(changed, 0u);
}

TEST(Attack, RoundHalfUpAffectedCount) {
  const TokenSequence tokens = iota_tokens(10, 16);
  // 0.25 * 10 = 2.5 rounds up to 3
  EXPECT_EQ(apply_attack(tokens, {AttackKind::Delete, 0.25, 7}, 16).size(), 7u);
  // 0.24 * 10 = 2.4 rounds down to 2
  EXPECT_EQ(apply_attack(tokens, {AttackKind::Delete, 0.24, 7}, 16).size(), 8u);
}

TEST(Attack, DeterministicInSpec) {
  const TokenSequence tokens = iota_tokens(100, 256);
  for (AttackKind kind : {AttackKind::Mask, AttackKind::Delete, AttackKind::Insert}) {
    const AttackSpec spec{kind, 0.4, 1234};
    EXPECT_EQ(apply_attack(tokens, spec, 256), apply_attack(tokens, spec, 256));
  }
}

TEST(Attack, SeedsChangePerturbation) {
  const TokenSequence tokens = iota_tokens(100, 256);
  const TokenSequence a = apply_attack(tokens, {AttackKind::Mask, 0.4, 1}, 256);
  const TokenSequence b = apply_attack(tokens, {AttackKind::Mask, 0.4, 2}, 256);
  EXPECT_NE(a, b);
}

TEST(Attack, DeleteOutputIsMultisetContained) {
  const TokenSequence tokens = iota_tokens(60, 7);
  const TokenSequence attacked = apply_attack(tokens, {AttackKind::Delete, 0.35, 99}, 7);
  std::map<TokenId, int> have;
  for (TokenId t : tokens) ++have[t];
  for (TokenId t : attacked) {
    ASSERT_GT(have[t], 0);
    --have[t];
  }
}

TEST(Attack, DeletePreservesRelativeOrder) {
  TokenSequence tokens(50);
  for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] = static_cast<TokenId>(i);
  const TokenSequence attacked = apply_attack(tokens, {AttackKind::Delete, 0.4, 5}, 64);
  EXPECT_TRUE(std::is_sorted(attacked.begin(), attacked.end()));
}

TEST(Attack, InsertKeepsOriginalAsSubsequence) {
  const TokenSequence tokens = iota_tokens(30, 5);
  const TokenSequence attacked = apply_attack(tokens, {AttackKind::Insert, 0.5, 17}, 5);
  std::size_t pos = 0;
  for (TokenId t : attacked) {
    if (pos < tokens.size() && t == tokens[pos]) ++pos;
  }
  EXPECT_EQ(pos, tokens.size());
}

TEST(Attack, ValidatesInputs) {
  const TokenSequence tokens = iota_tokens(10, 16);
  EXPECT_THROW(apply_attack(tokens, {AttackKind::Mask, 1.0, 0}, 16), ParamError);
  EXPECT_THROW(apply_attack(tokens, {AttackKind::Mask, -0.1, 0}, 16), ParamError);
  EXPECT_THROW(apply_attack(TokenSequence{}, {AttackKind::Mask, 0.1, 0}, 16), ParamError);
  EXPECT_THROW(apply_attack(TokenSequence{20}, {AttackKind::Mask, 0.1, 0}, 16), ParamError);
}

TEST(Attack, MaskDilutesSaturatedGreenSignal) {
  // A fully green sequence masked at ratio 0.5 must lose green mass: random
  // replacements are green only at rate gamma.
  const GreenList green = select_green(256, 0.5, 42);
  TokenSequence tokens(200, green.members().front());
  const std::uint64_t before = count_green(tokens, green);
  ASSERT_EQ(before, 200u);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const TokenSequence attacked = apply_attack(tokens, {AttackKind::Mask, 0.5, seed}, 256);
    EXPECT_LT(count_green(attacked, green), before);
  }
}

TEST(Attack, KindNamesRoundTrip) {
  for (AttackKind kind : {AttackKind::Mask, AttackKind::Delete, AttackKind::Insert}) {
    EXPECT_EQ(parse_attack_kind(attack_kind_name(kind)), kind);
  }
  EXPECT_THROW(parse_attack_kind("paraphrase"), ParamError);
}

}  // namespace
}  // namespace parmark
