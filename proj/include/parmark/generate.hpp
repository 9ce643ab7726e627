#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "parmark/embed.hpp"
#include "parmark/errors.hpp"
#include "parmark/model.hpp"
#include "parmark/rng.hpp"
#include "parmark/token.hpp"

namespace parmark {

enum class SamplerKind { Greedy, Temperature, Nucleus };

struct SamplerSpec {
  SamplerKind kind = SamplerKind::Temperature;
  double param = 1.0;  // temperature t, or nucleus mass p; ignored for greedy
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (kind == SamplerKind::Temperature && !(param > 0.0)) {
      throw ParamError("temperature must be positive");
    }
    if (kind == SamplerKind::Nucleus && !(param > 0.0 && param <= 1.0)) {
      throw ParamError("nucleus mass must be in (0,1]");
    }
  }
};

struct GenerationRequest {
  TokenSequence prompt;
  std::uint32_t length = 0;
  SamplerSpec sampler;

  void validate() const {
    if (length < 1) throw ParamError("generation length must be at least 1");
    sampler.validate();
  }
};

// softmax(l / t), max-shifted. t -> 0 collapses onto the argmax.
inline std::vector<double> temperature_probs(std::span<const double> logits, double t) {
  if (!(t > 0.0)) throw ParamError("temperature must be positive");
  std::vector<double> p(logits.size());
  double max = -std::numeric_limits<double>::infinity();
  for (double x : logits) max = std::max(max, x);
  double sum = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    p[j] = std::exp((logits[j] - max) / t);
    sum += p[j];
  }
  const double inv = 1.0 / sum;
  for (double& x : p) x *= inv;
  return p;
}

// Nucleus cut: order tokens by probability (descending, ties to the lowest
// id), keep the minimal prefix whose cumulative mass reaches p (the crossing
// token included), renormalize within the prefix.
inline std::pair<std::vector<TokenId>, std::vector<double>> nucleus_candidates(
    std::span<const double> probs, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ParamError("nucleus mass must be in (0,1]");
  std::vector<TokenId> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&probs](TokenId a, TokenId b) {
    if (probs[a] != probs[b]) return probs[a] > probs[b];
    return a < b;
  });
  double cumulative = 0.0;
  std::size_t keep = order.size();
  for (std::size_t i = 0; i < order.size(); ++i) {
    cumulative += probs[order[i]];
    if (cumulative >= p) {
      keep = i + 1;
      break;
    }
  }
  order.resize(keep);
  std::vector<double> kept(keep);
  double mass = 0.0;
  for (std::size_t i = 0; i < keep; ++i) mass += probs[order[i]];
  const double inv = 1.0 / mass;
  for (std::size_t i = 0; i < keep; ++i) kept[i] = probs[order[i]] * inv;
  return {std::move(order), std::move(kept)};
}

namespace detail {

// Inverse-CDF draw over an explicit candidate list; consumes one uniform.
inline TokenId draw(std::span<const TokenId> ids, std::span<const double> probs, SplitMix64& rng) {
  const double u = rng.next_double();
  double cumulative = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    cumulative += probs[i];
    if (u < cumulative) return ids[i];
  }
  return ids.back();  // guards against cumulative rounding below 1
}

}  // namespace detail

inline TokenId greedy_token(std::span<const double> logits) {
  // max_element takes the first maximum, which is the lowest token id.
  const auto it = std::max_element(logits.begin(), logits.end());
  return static_cast<TokenId>(it - logits.begin());
}

inline TokenId sample_from_logits(std::span<const double> logits, const SamplerSpec& sampler,
                                  SplitMix64& rng) {
  sampler.validate();
  if (logits.empty()) throw ParamError("cannot sample from empty logits");
  switch (sampler.kind) {
    case SamplerKind::Greedy:
      return greedy_token(logits);
    case SamplerKind::Temperature: {
      const std::vector<double> probs = temperature_probs(logits, sampler.param);
      std::vector<TokenId> ids(probs.size());
      std::iota(ids.begin(), ids.end(), 0);
      return detail::draw(ids, probs, rng);
    }
    case SamplerKind::Nucleus: {
      const std::vector<double> probs = temperature_probs(logits, 1.0);
      const auto [ids, kept] = nucleus_candidates(probs, sampler.param);
      return detail::draw(ids, kept, rng);
    }
  }
  throw ParamError("unknown sampler kind");
}

inline std::vector<double> marked_logits(const MarkedModel& m, std::span<const TokenId> context) {
  const std::vector<double> h = hidden_state(m.params, context);
  if (m.config.mode == WatermarkMode::AdditiveBaseline) {
    return additive_baseline_adjust(logits(m.params, h), m.green, m.config.delta);
  }
  return logits(m.params, h);  // multiplicative weights are already persisted
}

inline TokenId next_token(const ModelParams& p, std::span<const TokenId> context,
                          const SamplerSpec& sampler, SplitMix64& rng) {
  return sample_from_logits(logits(p, hidden_state(p, context)), sampler, rng);
}

inline TokenId next_token(const MarkedModel& m, std::span<const TokenId> context,
                          const SamplerSpec& sampler, SplitMix64& rng) {
  return sample_from_logits(marked_logits(m, context), sampler, rng);
}

namespace detail {

template <typename LogitsFn>
TokenSequence generate_with(LogitsFn&& step_logits, const GenerationRequest& request) {
  request.validate();
  SplitMix64 rng(request.sampler.rng_seed ^ stream::kGeneration);
  TokenSequence context = request.prompt;
  context.reserve(context.size() + request.length);
  for (std::uint32_t i = 0; i < request.length; ++i) {
    const std::vector<double> l = step_logits(std::span<const TokenId>(context));
    context.push_back(sample_from_logits(l, request.sampler, rng));
  }
  return TokenSequence(context.begin() + static_cast<std::ptrdiff_t>(request.prompt.size()),
                       context.end());
}

}  // namespace detail

// Returns exactly request.length newly generated tokens (the continuation).
inline TokenSequence generate(const ModelParams& p, const GenerationRequest& request) {
  return detail::generate_with(
      [&p](std::span<const TokenId> ctx) { return logits(p, hidden_state(p, ctx)); }, request);
}

inline TokenSequence generate(const MarkedModel& m, const GenerationRequest& request) {
  return detail::generate_with(
      [&m](std::span<const TokenId> ctx) { return marked_logits(m, ctx); }, request);
}

inline const char* sampler_kind_name(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::Greedy: return "greedy";
    case SamplerKind::Temperature: return "temperature";
    case SamplerKind::Nucleus: return "nucleus";
  }
  return "unknown";
}

inline SamplerKind parse_sampler_kind(std::string_view name) {
  if (name == "greedy") return SamplerKind::Greedy;
  if (name == "temperature") return SamplerKind::Temperature;
  if (name == "nucleus") return SamplerKind::Nucleus;
  throw ParamError("unknown sampler kind: '" + std::string(name) + "'");
}

}  // namespace parmark
