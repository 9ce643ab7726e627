#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include "parmark/errors.hpp"
#include "parmark/model.hpp"
#include "parmark/token.hpp"

namespace parmark {

struct PplReport {
  double nll_sum = 0.0;        // natural-log units
  std::uint64_t scored = 0;    // positions after the prompt
  double ppl = 0.0;            // exp(nll_sum / scored)
  bool zero_probability = false;

  bool operator==(const PplReport&) const = default;
};

// Perplexity of tokens[prompt_len..] under the reference model, each position
// conditioned on everything before it, temperature 1. The reference should be
// the unmarked model: judging marked text with marked weights would hide the
// quality loss the watermark causes. A zero-probability token makes the
// report infinite and is flagged rather than clamped.
inline PplReport perplexity(const ModelParams& reference, std::span<const TokenId> tokens,
                            std::size_t prompt_len) {
  if (tokens.size() <= prompt_len) {
    throw ParamError("nothing to score: need at least one token after the prompt");
  }
  PplReport report;
  report.scored = tokens.size() - prompt_len;
  for (std::size_t i = prompt_len; i < tokens.size(); ++i) {
    const std::vector<double> h = hidden_state(reference, tokens.subspan(0, i));
    const std::vector<double> p = softmax(logits(reference, h));
    const TokenId actual = tokens[i];
    if (actual >= reference.vocab_size) throw ParamError("scored token out of vocabulary");
    const double prob = p[actual];
    if (!(prob > 0.0)) {
      report.zero_probability = true;
      report.nll_sum = std::numeric_limits<double>::infinity();
      break;
    }
    report.nll_sum -= std::log(prob);
  }
  report.ppl = std::exp(report.nll_sum / static_cast<double>(report.scored));
  return report;
}

}  // namespace parmark
