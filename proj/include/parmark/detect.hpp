#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "parmark/errors.hpp"
#include "parmark/format.hpp"
#include "parmark/greenlist.hpp"
#include "parmark/token.hpp"

namespace parmark {

inline constexpr double kDefaultZThreshold = 2.33;  // one-sided ~99% confidence

struct DetectionReport {
  std::uint64_t green_count = 0;
  std::uint64_t length = 0;
  double gamma = 0.0;
  double z = 0.0;
  double threshold = kDefaultZThreshold;
  bool detected = false;

  // green_count,T,gamma,z,threshold,detected
  std::string csv_row() const {
    return std::to_string(green_count) + "," + std::to_string(length) + "," +
           double_to_string(gamma) + "," + double_to_string(z) + "," +
           double_to_string(threshold) + "," + (detected ? "1" : "0");
  }

  bool operator==(const DetectionReport&) const = default;
};

inline std::uint64_t count_green(std::span<const TokenId> tokens, const GreenList& green) {
  std::uint64_t count = 0;
  for (TokenId t : tokens) {
    if (green.contains(t)) ++count;  // contains() rejects out-of-vocabulary ids
  }
  return count;
}

// One-proportion statistic: standardized deviation of the green count from
// its expectation gamma*T under the no-watermark null.
inline double z_score(std::uint64_t green_count, std::uint64_t length, double gamma) {
  if (length < 1) throw ParamError("z-score needs at least one token");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ParamError("gamma must be in (0,1)");
  const double t = static_cast<double>(length);
  const double expected = gamma * t;
  return (static_cast<double>(green_count) - expected) / std::sqrt(t * gamma * (1.0 - gamma));
}

// Scores a token sequence against a green list. The caller must pass only the
// generated continuation; prompt tokens would dilute the statistic. Detection
// is one-sided with a strict inequality: z == threshold is not a detection,
// and negative z is reported as-is.
inline DetectionReport detect(std::span<const TokenId> tokens, const GreenList& green,
                              double gamma, double threshold = kDefaultZThreshold) {
  if (tokens.empty()) throw ParamError("cannot score an empty sequence");
  DetectionReport report;
  report.green_count = count_green(tokens, green);
  report.length = tokens.size();
  report.gamma = gamma;
  report.z = z_score(report.green_count, report.length, gamma);
  report.threshold = threshold;
  report.detected = report.z > threshold;
  return report;
}

}  // namespace parmark
