#include "parmark/embed.hpp"

#include <cmath>
#include <filesystem>
#include <optional>
#include <vector>

#include "gtest/gtest.h"
#include "parmark/errors.hpp"
#include "parmark/model.hpp"

namespace parmark {
namespace {

// Single-byte key whose fixed green list over vocab_size=2 is exactly {want}.
WatermarkKey key_with_green(TokenId want) {
  for (int c = 0; c < 256; ++c) {
    WatermarkKey key;
    key.bytes = {static_cast<std::uint8_t>(c)};
    if (select_green(2, 0.5, derive_seed(key)).members().front() == want) return key;
  }
  throw std::logic_error("no single-byte key found");
}

ModelParams ones_model() {
  ModelParams p;
  p.vocab_size = 2;
  p.hidden_dim = 2;
  p.context_width = 1;
  p.embedding = Matrix(2, 2, 0.5);
  p.mixer = Matrix::identity(2);
  p.mixer_offset = {0.0, 0.0};
  p.output_weight = Matrix(2, 2, 1.0);
  p.output_bias = {1.0, 1.0};
  return p;
}

WatermarkConfig config_for(const WatermarkKey& key, double alpha_up) {
  WatermarkConfig c;
  c.key = key;
  c.gamma = 0.5;
  c.alpha_up = alpha_up;
  return c;
}

TEST(EmbedWatermark, IdentityFactorsLeaveModelBitIdentical) {
  const ModelParams source = synth_model(9, 16, 8);
  WatermarkConfig config = config_for(WatermarkKey::from_string("k"), 1.0);
  const MarkedModel marked = embed_watermark(source, config);
  EXPECT_EQ(marked.params.output_weight.data, source.output_weight.data);
  EXPECT_EQ(marked.params.output_bias, source.output_bias);
}

TEST(EmbedWatermark, ScalesGreenRowsOnly) {
  const auto key = key_with_green(0);
  const MarkedModel marked = embed_watermark(ones_model(), config_for(key, 2.0));
  EXPECT_EQ(marked.params.output_weight(0, 0), 2.0);
  EXPECT_EQ(marked.params.output_weight(0, 1), 2.0);
  EXPECT_EQ(marked.params.output_weight(1, 0), 1.0);
  EXPECT_EQ(marked.params.output_weight(1, 1), 1.0);
  EXPECT_EQ(marked.params.output_bias, (std::vector<double>{1.0, 1.0}));  // beta_up = 1
}

TEST(EmbedWatermark, SourceModelUntouched) {
  const ModelParams source = ones_model();
  const auto key = key_with_green(0);
  (void)embed_watermark(source, config_for(key, 3.0));
  EXPECT_EQ(source.output_weight(0, 0), 1.0);
}

TEST(EmbedWatermark, LocalityOutsideOutputLayer) {
  const ModelParams source = synth_model(10, 16, 8);
  const MarkedModel marked =
      embed_watermark(source, config_for(WatermarkKey::from_string("lock"), 1.7));
  EXPECT_EQ(marked.params.embedding.data, source.embedding.data);
  EXPECT_EQ(marked.params.mixer.data, source.mixer.data);
  EXPECT_EQ(marked.params.mixer_offset, source.mixer_offset);
  EXPECT_NE(marked.params.output_weight.data, source.output_weight.data);
}

TEST(EmbedWatermark, ZeroBiasStaysZero) {
  ModelParams source = ones_model();
  source.output_bias = {0.0, 0.0};
  WatermarkConfig config = config_for(key_with_green(0), 1.5);
  config.beta_up = 4.0;
  const MarkedModel marked = embed_watermark(source, config);
  EXPECT_EQ(marked.params.output_bias, (std::vector<double>{0.0, 0.0}));
}

TEST(EmbedWatermark, PartitionScalesEveryRowExactlyOnce) {
  ModelParams source = synth_model(4, 32, 8);
  source.output_weight = Matrix(32, 8, 1.0);
  WatermarkConfig config = config_for(WatermarkKey::from_string("part"), 2.0);
  config.alpha_down = 0.5;
  const MarkedModel marked = embed_watermark(source, config);
  for (std::uint32_t t = 0; t < 32; ++t) {
    const double expected = marked.green.contains(t) ? 2.0 : 0.5;
    for (double w : marked.params.output_weight.row(t)) EXPECT_EQ(w, expected);
  }
}

TEST(EmbedWatermark, CompositionIsMultiplicative) {
  const ModelParams source = synth_model(21, 16, 8);
  WatermarkConfig once = config_for(WatermarkKey::from_string("pow"), 1.3);
  WatermarkConfig squared = once;
  squared.alpha_up = 1.3 * 1.3;
  const MarkedModel twice = embed_watermark(embed_watermark(source, once).params, once);
  const MarkedModel direct = embed_watermark(source, squared);
  for (std::size_t i = 0; i < direct.params.output_weight.data.size(); ++i) {
    EXPECT_NEAR(twice.params.output_weight.data[i], direct.params.output_weight.data[i], 1e-9);
  }
}

TEST(EmbedWatermark, PositiveGreenArgmaxSurvives) {
  // With alpha_down = beta_down = 1 and alpha_up >= 1, a green argmax with a
  // positive logit can only grow relative to unscaled rows.
  const ModelParams source = synth_model(33, 32, 8);
  WatermarkConfig config = config_for(WatermarkKey::from_string("argmax"), 1.4);
  const MarkedModel marked = embed_watermark(source, config);
  SplitMix64 rng(5);
  int checked = 0;
  while (checked < 25) {
    std::vector<double> h(8);
    for (double& x : h) x = rng.next_gaussian();
    const auto before = logits(source, h);
    const std::size_t argmax =
        static_cast<std::size_t>(std::max_element(before.begin(), before.end()) - before.begin());
    if (before[argmax] <= 0.0 || !marked.green.contains(static_cast<TokenId>(argmax))) continue;
    const auto after = logits(marked.params, h);
    const std::size_t argmax_after =
        static_cast<std::size_t>(std::max_element(after.begin(), after.end()) - after.begin());
    EXPECT_EQ(argmax_after, argmax);
    ++checked;
  }
}

TEST(EmbedWatermark, RejectsInvalidConfigs) {
  const ModelParams source = ones_model();
  WatermarkConfig config = config_for(WatermarkKey::from_string("k"), 0.9);
  EXPECT_THROW(embed_watermark(source, config), ParamError);  // alpha_up < 1
  config.alpha_up = 1.1;
  config.alpha_down = 1.2;
  EXPECT_THROW(embed_watermark(source, config), ParamError);  // alpha_down > 1
  config.alpha_down = 1.0;
  config.beta_down = 1.5;
  EXPECT_THROW(embed_watermark(source, config), ParamError);  // beta_down > 1
  config = config_for(WatermarkKey::from_string("k", StepMode::PerStep), 1.1);
  EXPECT_THROW(embed_watermark(source, config), ParamError);  // per-step key
  config = config_for(WatermarkKey::from_string("k"), 1.1);
  config.mode = WatermarkMode::AdditiveBaseline;
  EXPECT_THROW(embed_watermark(source, config), ParamError);  // wrong mode
  WatermarkConfig empty_key;
  EXPECT_THROW(embed_watermark(source, empty_key), ParamError);
}

TEST(StepLogitAdjust, IdentityFactorsAddBias) {
  const GreenList green = select_green(4, 0.5, 7);
  WatermarkConfig config = config_for(WatermarkKey::from_string("k"), 1.0);
  const std::vector<double> lw{1.0, -2.0, 0.5, 3.0};
  const std::vector<double> bias{0.1, 0.2, -0.3, 0.0};
  const auto adjusted = step_logit_adjust(lw, bias, green, config);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(adjusted[j], lw[j] + bias[j]);
}

TEST(StepLogitAdjust, MatchesPersistedWeights) {
  const ModelParams source = synth_model(14, 24, 10);
  WatermarkConfig config = config_for(WatermarkKey::from_string("equiv"), 1.25);
  config.alpha_down = 0.8;
  config.beta_up = 1.5;
  config.beta_down = 0.5;
  const MarkedModel marked = embed_watermark(source, config);
  SplitMix64 rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> h(10);
    for (double& x : h) x = rng.next_gaussian();
    const auto persisted = logits(marked.params, h);
    const auto stepwise = step_logit_adjust(weight_logits(source, h), source.output_bias,
                                            marked.green, config);
    for (std::size_t j = 0; j < persisted.size(); ++j) {
      EXPECT_NEAR(persisted[j], stepwise[j], 1e-9);
    }
  }
}

TEST(StepLogitAdjust, RejectsLengthMismatch) {
  const GreenList green = select_green(4, 0.5, 7);
  WatermarkConfig config = config_for(WatermarkKey::from_string("k"), 1.0);
  const std::vector<double> lw{1.0, 2.0, 3.0};
  const std::vector<double> bias{0.0, 0.0, 0.0, 0.0};
  EXPECT_THROW(step_logit_adjust(lw, bias, green, config), ParamError);
}

TEST(AdditiveBaseline, ZeroDeltaIsIdentity) {
  const GreenList green = select_green(2, 0.5, 3);
  const std::vector<double> l{0.4, -0.2};
  EXPECT_EQ(additive_baseline_adjust(l, green, 0.0), l);
}

TEST(AdditiveBaseline, AddsDeltaToGreenEntries) {
  const GreenList green(2, 0.5, {1});
  const std::vector<double> l{0.0, 0.0};
  const auto adjusted = additive_baseline_adjust(l, green, 2.0);
  EXPECT_EQ(adjusted[0], 0.0);
  EXPECT_EQ(adjusted[1], 2.0);
}

TEST(AdditiveBaseline, UniformBiasEquivalence) {
  // With b == b0 > 0 everywhere, scaling beta_up = 1 + delta/b0 reproduces
  // the additive baseline exactly.
  const double b0 = 0.7;
  const double delta = 0.8;
  ModelParams source = synth_model(55, 24, 10);
  source.output_bias.assign(24, b0);
  WatermarkConfig config = config_for(WatermarkKey::from_string("equiv2"), 1.0);
  config.beta_up = 1.0 + delta / b0;
  const MarkedModel marked = embed_watermark(source, config);
  SplitMix64 rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> h(10);
    for (double& x : h) x = rng.next_gaussian();
    const auto multiplicative = logits(marked.params, h);
    const auto additive = additive_baseline_adjust(logits(source, h), marked.green, delta);
    for (std::size_t j = 0; j < multiplicative.size(); ++j) {
      EXPECT_NEAR(multiplicative[j], additive[j], 1e-9);
    }
  }
}

TEST(MarkModel, AdditiveKeepsWeights) {
  const ModelParams source = synth_model(2, 8, 4);
  WatermarkConfig config;
  config.key = WatermarkKey::from_string("k");
  config.mode = WatermarkMode::AdditiveBaseline;
  config.delta = 2.0;
  const MarkedModel marked = mark_model(source, config);
  EXPECT_EQ(marked.params.output_weight.data, source.output_weight.data);
  EXPECT_EQ(marked.params.output_bias, source.output_bias);
  EXPECT_EQ(marked.green.size(), 4u);
}

TEST(ConfigFile, RoundTrip) {
  WatermarkConfig c;
  c.key = WatermarkKey::from_string("secret-key");
  c.gamma = 0.25;
  c.alpha_up = 1.15;
  c.alpha_down = 0.95;
  c.beta_up = 2.0;
  c.beta_down = 0.5;
  c.mode = WatermarkMode::Multiplicative;
  const auto path = std::filesystem::temp_directory_path() / "parmark_config_test.cfg";
  save_watermark_config(c, path);
  const WatermarkConfig loaded = load_watermark_config(path);
  EXPECT_EQ(loaded.key.bytes, c.key.bytes);
  EXPECT_EQ(loaded.gamma, c.gamma);
  EXPECT_EQ(loaded.alpha_up, c.alpha_up);
  EXPECT_EQ(loaded.alpha_down, c.alpha_down);
  EXPECT_EQ(loaded.beta_up, c.beta_up);
  EXPECT_EQ(loaded.beta_down, c.beta_down);
  EXPECT_EQ(loaded.mode, c.mode);
  EXPECT_EQ(loaded.delta, c.delta);
  std::filesystem::remove(path);
}

TEST(ConfigFile, RejectsMalformedInput) {
  EXPECT_THROW(parse_watermark_config("gamma=0.5\n"), ParamError);          // no key
  EXPECT_THROW(parse_watermark_config("key_hex=ab\nwhat=1\n"), ParamError); // unknown key
  EXPECT_THROW(parse_watermark_config("key_hex=xz\n"), ParamError);         // bad hex
  EXPECT_THROW(parse_watermark_config("key_hex=ab\ngamma=2\n"), ParamError);
}

}  // namespace
}  // namespace parmark
