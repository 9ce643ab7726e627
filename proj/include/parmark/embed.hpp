#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "parmark/errors.hpp"
#include "parmark/format.hpp"
#include "parmark/greenlist.hpp"
#include "parmark/model.hpp"
#include "parmark/token.hpp"

namespace parmark {

enum class WatermarkMode { Multiplicative, AdditiveBaseline };

// Multiplicative mode scales green output rows by alpha_up and their bias
// entries by beta_up, and non-green ones by alpha_down / beta_down.
// AdditiveBaseline reproduces the older fixed-offset scheme (adds delta to
// every green logit at sampling time) and ignores the four scaling factors.
struct WatermarkConfig {
  WatermarkKey key;
  double gamma = 0.5;
  double alpha_up = 1.0;
  double alpha_down = 1.0;
  double beta_up = 1.0;
  double beta_down = 1.0;
  WatermarkMode mode = WatermarkMode::Multiplicative;
  double delta = 0.0;

  void validate() const {
    if (key.bytes.empty()) throw ParamError("watermark key must be nonempty");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ParamError("gamma must be in (0,1)");
    if (mode == WatermarkMode::Multiplicative) {
      if (!(std::isfinite(alpha_up) && std::isfinite(alpha_down) && std::isfinite(beta_up) &&
            std::isfinite(beta_down))) {
        throw ParamError("scaling factors must be finite");
      }
      if (alpha_up < 1.0) throw ParamError("alpha_up must satisfy alpha_up >= 1");
      if (beta_up < 1.0) throw ParamError("beta_up must satisfy beta_up >= 1");
      if (alpha_down > 1.0) throw ParamError("alpha_down must satisfy alpha_down <= 1");
      if (beta_down > 1.0) throw ParamError("beta_down must satisfy beta_down <= 1");
    } else {
      if (!std::isfinite(delta)) throw ParamError("delta must be finite");
    }
  }
};

// A model plus the watermark applied to it. Multiplicative configs persist
// the scaled weights; AdditiveBaseline keeps the source weights untouched and
// adjusts logits per step during generation.
struct MarkedModel {
  ModelParams params;
  WatermarkConfig config;
  GreenList green;
};

// Scales the green / non-green partitions of (W, b). The source model is
// left untouched; only output_weight and output_bias of the copy differ.
inline MarkedModel embed_watermark(const ModelParams& source, const WatermarkConfig& config) {
  config.validate();
  if (config.mode != WatermarkMode::Multiplicative) {
    throw ParamError("embed_watermark applies only to multiplicative configs");
  }
  if (config.key.step_mode != StepMode::Fixed) {
    throw ParamError("persisted weights require a fixed-key green list; "
                     "use step_logit_adjust for per-step keys");
  }

  GreenList green = green_list_for(config.key, source.vocab_size, config.gamma);
  ModelParams marked = source;
  for (std::uint32_t token = 0; token < source.vocab_size; ++token) {
    const bool is_green = green.contains(token);
    const double row_scale = is_green ? config.alpha_up : config.alpha_down;
    const double bias_scale = is_green ? config.beta_up : config.beta_down;
    for (double& w : marked.output_weight.row(token)) w *= row_scale;
    marked.output_bias[token] *= bias_scale;
  }
  return MarkedModel{std::move(marked), config, std::move(green)};
}

// Mode dispatch: multiplicative configs go through embed_watermark;
// additive-baseline configs keep the weights and only carry the green list.
inline MarkedModel mark_model(const ModelParams& source, const WatermarkConfig& config) {
  config.validate();
  if (config.mode == WatermarkMode::Multiplicative) return embed_watermark(source, config);
  GreenList green = green_list_for(config.key, source.vocab_size, config.gamma);
  return MarkedModel{source, config, std::move(green)};
}

// Per-step equivalent of embed_watermark, applied to logits computed without
// the bias: l'_j = alpha*l_j + beta*b_j with (alpha_up, beta_up) on green
// entries. For a fixed green list this matches the persisted-weights path.
inline std::vector<double> step_logit_adjust(std::span<const double> weight_logits,
                                             std::span<const double> bias,
                                             const GreenList& green,
                                             const WatermarkConfig& config) {
  config.validate();
  if (config.mode != WatermarkMode::Multiplicative) {
    throw ParamError("step_logit_adjust applies only to multiplicative configs");
  }
  if (weight_logits.size() != bias.size() || weight_logits.size() != green.vocab_size()) {
    throw ParamError("logit/bias/green-list length mismatch");
  }
  std::vector<double> adjusted(weight_logits.size());
  for (std::size_t j = 0; j < adjusted.size(); ++j) {
    const bool is_green = green.contains(static_cast<TokenId>(j));
    const double alpha = is_green ? config.alpha_up : config.alpha_down;
    const double beta = is_green ? config.beta_up : config.beta_down;
    adjusted[j] = alpha * weight_logits[j] + beta * bias[j];
  }
  return adjusted;
}

// The fixed-offset baseline: add delta to every green logit.
inline std::vector<double> additive_baseline_adjust(std::span<const double> logits,
                                                    const GreenList& green, double delta) {
  if (logits.size() != green.vocab_size()) throw ParamError("logit/green-list length mismatch");
  std::vector<double> adjusted(logits.begin(), logits.end());
  for (TokenId t : green.members()) adjusted[t] += delta;
  return adjusted;
}

inline const char* watermark_mode_name(WatermarkMode mode) {
  return mode == WatermarkMode::Multiplicative ? "multiplicative" : "additive";
}

inline WatermarkMode parse_watermark_mode(std::string_view name) {
  if (name == "multiplicative") return WatermarkMode::Multiplicative;
  if (name == "additive") return WatermarkMode::AdditiveBaseline;
  throw ParamError("unknown watermark mode: '" + std::string(name) + "'");
}

// Flat key=value config format, one entry per line.
inline std::string format_watermark_config(const WatermarkConfig& c) {
  std::string out;
  out += "key_hex=" + hex_encode(c.key.bytes) + "\n";
  out += "gamma=" + double_to_string(c.gamma) + "\n";
  out += "alpha_up=" + double_to_string(c.alpha_up) + "\n";
  out += "alpha_down=" + double_to_string(c.alpha_down) + "\n";
  out += "beta_up=" + double_to_string(c.beta_up) + "\n";
  out += "beta_down=" + double_to_string(c.beta_down) + "\n";
  out += std::string("mode=") + watermark_mode_name(c.mode) + "\n";
  out += "delta=" + double_to_string(c.delta) + "\n";
  return out;
}

inline WatermarkConfig parse_watermark_config(std::string_view text) {
  WatermarkConfig c;
  bool saw_key = false;
  for (const std::string& line : split(text, '\n')) {
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParamError("malformed config line: '" + line + "'");
    const std::string name = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (name == "key_hex") {
      c.key.bytes = hex_decode(value);
      saw_key = true;
    } else if (name == "gamma") {
      c.gamma = parse_double(value);
    } else if (name == "alpha_up") {
      c.alpha_up = parse_double(value);
    } else if (name == "alpha_down") {
      c.alpha_down = parse_double(value);
    } else if (name == "beta_up") {
      c.beta_up = parse_double(value);
    } else if (name == "beta_down") {
      c.beta_down = parse_double(value);
    } else if (name == "mode") {
      c.mode = parse_watermark_mode(value);
    } else if (name == "delta") {
      c.delta = parse_double(value);
    } else {
      throw ParamError("unknown config key: '" + name + "'");
    }
  }
  if (!saw_key) throw ParamError("config missing key_hex");
  c.validate();
  return c;
}

inline void save_watermark_config(const WatermarkConfig& c, const std::filesystem::path& path) {
  write_text_file(path, format_watermark_config(c));
}

inline WatermarkConfig load_watermark_config(const std::filesystem::path& path) {
  return parse_watermark_config(read_text_file(path));
}

}  // namespace parmark
