#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "parmark/errors.hpp"
#include "parmark/matrix.hpp"
#include "parmark/rng.hpp"
#include "parmark/token.hpp"

namespace parmark {

enum class ModelFlavor : std::uint32_t { Generic = 0, Synthetic = 1, Bigram = 2 };

// Mixer scale for the bigram flavor: small enough that tanh is effectively
// linear, with the inverse factor folded into the output weights.
inline constexpr double kBigramMixerScale = 1e-2;

// Minimal autoregressive backbone: the hidden state is tanh(A*m + c) where m
// is the mean embedding of the last min(k, len) context tokens, and the
// output layer maps it to vocabulary logits l = W*h + b. Only W and b ever
// carry a watermark; the backbone exists to produce a usable h.
struct ModelParams {
  std::uint32_t vocab_size = 0;
  std::uint32_t hidden_dim = 0;
  std::uint32_t context_width = 1;  // k
  ModelFlavor flavor = ModelFlavor::Generic;

  Matrix embedding;                  // |V| x d
  Matrix mixer;                      // d x d
  std::vector<double> mixer_offset;  // d
  Matrix output_weight;              // |V| x d
  std::vector<double> output_bias;   // |V|

  void validate() const {
    if (vocab_size < 2) throw ParamError("vocab_size must be at least 2");
    if (hidden_dim < 1) throw ParamError("hidden_dim must be at least 1");
    if (context_width < 1) throw ParamError("context_width must be at least 1");
    const std::size_t v = vocab_size, d = hidden_dim;
    if (embedding.rows != v || embedding.cols != d) throw ParamError("embedding shape mismatch");
    if (mixer.rows != d || mixer.cols != d) throw ParamError("mixer shape mismatch");
    if (mixer_offset.size() != d) throw ParamError("mixer offset length mismatch");
    if (output_weight.rows != v || output_weight.cols != d) throw ParamError("output weight shape mismatch");
    if (output_bias.size() != v) throw ParamError("output bias length mismatch");
    auto all_finite = [](std::span<const double> xs) {
      return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
    };
    if (!all_finite(embedding.data) || !all_finite(mixer.data) || !all_finite(mixer_offset) ||
        !all_finite(output_weight.data) || !all_finite(output_bias)) {
      throw ParamError("model parameters must be finite");
    }
  }
};

inline std::vector<double> hidden_state(const ModelParams& p, std::span<const TokenId> context) {
  const std::size_t d = p.hidden_dim;
  std::vector<double> mean(d, 0.0);
  const std::size_t window = std::min<std::size_t>(p.context_width, context.size());
  if (window > 0) {
    for (std::size_t i = context.size() - window; i < context.size(); ++i) {
      const TokenId t = context[i];
      if (t >= p.vocab_size) throw ParamError("context token out of vocabulary");
      const auto row = p.embedding.row(t);
      for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
    }
    const double inv = 1.0 / static_cast<double>(window);
    for (double& x : mean) x *= inv;
  }
  std::vector<double> h(d);
  matvec(p.mixer, mean, h);
  for (std::size_t j = 0; j < d; ++j) h[j] = std::tanh(h[j] + p.mixer_offset[j]);
  return h;
}

// l = W*h + b
inline std::vector<double> logits(const ModelParams& p, std::span<const double> h) {
  if (h.size() != p.hidden_dim) throw ParamError("hidden state dimension mismatch");
  std::vector<double> l(p.vocab_size);
  matvec(p.output_weight, h, l);
  for (std::size_t j = 0; j < l.size(); ++j) l[j] += p.output_bias[j];
  return l;
}

// W*h without the bias, for the per-step embedding path.
inline std::vector<double> weight_logits(const ModelParams& p, std::span<const double> h) {
  if (h.size() != p.hidden_dim) throw ParamError("hidden state dimension mismatch");
  std::vector<double> l(p.vocab_size);
  matvec(p.output_weight, h, l);
  return l;
}

inline std::vector<double> softmax(std::span<const double> l) {
  std::vector<double> p(l.size());
  double max = -std::numeric_limits<double>::infinity();
  for (double x : l) max = std::max(max, x);
  double sum = 0.0;
  for (std::size_t j = 0; j < l.size(); ++j) {
    p[j] = std::exp(l[j] - max);
    sum += p[j];
  }
  const double inv = 1.0 / sum;
  for (double& x : p) x *= inv;
  return p;
}

// Seeded stand-in for a pretrained model. Entries are drawn in a pinned
// order (E, A, c, W, b) from one SplitMix64 stream, so the same seed gives
// bit-identical parameters everywhere.
inline ModelParams synth_model(std::uint64_t seed, std::uint32_t vocab_size,
                               std::uint32_t hidden_dim, std::uint32_t context_width = 4) {
  if (vocab_size < 2) throw ParamError("vocab_size must be at least 2");
  if (hidden_dim < 1) throw ParamError("hidden_dim must be at least 1");
  if (context_width < 1) throw ParamError("context_width must be at least 1");

  ModelParams p;
  p.vocab_size = vocab_size;
  p.hidden_dim = hidden_dim;
  p.context_width = context_width;
  p.flavor = ModelFlavor::Synthetic;

  SplitMix64 rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  auto fill = [&rng](std::span<double> xs, double s) {
    for (double& x : xs) x = s * rng.next_gaussian();
  };
  p.embedding = Matrix(vocab_size, hidden_dim);
  fill(p.embedding.data, scale);
  p.mixer = Matrix(hidden_dim, hidden_dim);
  fill(p.mixer.data, scale);
  p.mixer_offset.resize(hidden_dim);
  fill(p.mixer_offset, scale);
  p.output_weight = Matrix(vocab_size, hidden_dim);
  fill(p.output_weight.data, scale);
  p.output_bias.resize(vocab_size);
  fill(p.output_bias, 0.1);
  return p;
}

// Add-lambda bigram fit with wrap-around transition counts (the final token's
// successor is the first token, so every occurrence has a successor and the
// smoothed rows normalize exactly). The log-probabilities are column-centered
// so per-context logits carry both signs, then scaled by 1/tanh(mixer scale)
// so that softmax(logits) reproduces the smoothed bigram distribution.
inline ModelParams fit_bigram_model(const TokenSequence& corpus, double smoothing,
                                    std::uint32_t vocab_size = kByteVocabSize) {
  if (corpus.size() < 2) throw ParamError("bigram fit needs a corpus of at least 2 tokens");
  if (!(smoothing > 0.0)) throw ParamError("smoothing must be positive");
  for (TokenId t : corpus) {
    if (t >= vocab_size) throw ParamError("corpus token out of vocabulary");
  }

  const std::size_t v = vocab_size;
  std::vector<std::uint64_t> counts(v * v, 0);  // counts[from * v + to]
  std::vector<std::uint64_t> occurrences(v, 0);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const TokenId from = corpus[i];
    const TokenId to = corpus[(i + 1) % corpus.size()];
    ++counts[static_cast<std::size_t>(from) * v + to];
    ++occurrences[from];
  }

  ModelParams p;
  p.vocab_size = vocab_size;
  p.hidden_dim = vocab_size;
  p.context_width = 1;
  p.flavor = ModelFlavor::Bigram;
  p.embedding = Matrix::identity(v);
  p.mixer = Matrix::identity(v, kBigramMixerScale);
  p.mixer_offset.assign(v, 0.0);
  p.output_bias.assign(v, 0.0);
  p.output_weight = Matrix(v, v);

  const double gain = 1.0 / std::tanh(kBigramMixerScale);
  std::vector<double> column(v);
  for (std::size_t ctx = 0; ctx < v; ++ctx) {
    const double denom = static_cast<double>(occurrences[ctx]) + smoothing * static_cast<double>(v);
    double mean = 0.0;
    for (std::size_t g = 0; g < v; ++g) {
      const double prob = (static_cast<double>(counts[ctx * v + g]) + smoothing) / denom;
      column[g] = std::log(prob);
      mean += column[g];
    }
    mean /= static_cast<double>(v);
    for (std::size_t g = 0; g < v; ++g) {
      p.output_weight(g, ctx) = (column[g] - mean) * gain;
    }
  }
  return p;
}

namespace detail {

inline constexpr char kModelMagic[4] = {'P', 'M', 'K', '1'};
inline constexpr std::uint64_t kMaxModelElements = 1ull << 28;

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 24));
}

inline void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline void put_f64(std::vector<unsigned char>& out, double d) {
  put_u64(out, std::bit_cast<std::uint64_t>(d));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline double get_f64(const unsigned char* p) {
  return std::bit_cast<double>(get_u64(p));
}

}  // namespace detail

// Weight file layout: magic "PMK1"; little-endian u32 |V|, d, k, flavor;
// E, A, c, W, b as row-major little-endian f64; FNV-1a-64 checksum of all
// preceding bytes.
inline void save_model(const ModelParams& p, const std::filesystem::path& path) {
  p.validate();
  const std::size_t v = p.vocab_size, d = p.hidden_dim;
  std::vector<unsigned char> buf;
  buf.reserve(4 + 16 + 8 * (2 * v * d + d * d + d + v) + 8);
  buf.insert(buf.end(), detail::kModelMagic, detail::kModelMagic + 4);
  detail::put_u32(buf, p.vocab_size);
  detail::put_u32(buf, p.hidden_dim);
  detail::put_u32(buf, p.context_width);
  detail::put_u32(buf, static_cast<std::uint32_t>(p.flavor));
  auto put_all = [&buf](std::span<const double> xs) {
    for (double x : xs) detail::put_f64(buf, x);
  };
  put_all(p.embedding.data);
  put_all(p.mixer.data);
  put_all(p.mixer_offset);
  put_all(p.output_weight.data);
  put_all(p.output_bias);
  detail::put_u64(buf, fnv1a64(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());

  if (buf.size() < 4 || std::memcmp(buf.data(), detail::kModelMagic, 4) != 0) {
    if (buf.size() < 4) throw FormatError(FormatError::Kind::Truncated, "file shorter than magic");
    throw FormatError(FormatError::Kind::BadMagic, "not a PMK1 model file");
  }
  if (buf.size() < 20) throw FormatError(FormatError::Kind::Truncated, "header truncated");

  ModelParams p;
  p.vocab_size = detail::get_u32(buf.data() + 4);
  p.hidden_dim = detail::get_u32(buf.data() + 8);
  p.context_width = detail::get_u32(buf.data() + 12);
  const std::uint32_t flavor = detail::get_u32(buf.data() + 16);

  const std::uint64_t v = p.vocab_size, d = p.hidden_dim;
  if (v < 2 || v > (1u << 24) || d < 1 || d > (1u << 24) || p.context_width < 1 ||
      p.context_width > (1u << 16)) {
    throw FormatError(FormatError::Kind::BadDimensions, "dimensions out of range");
  }
  const std::uint64_t elements = 2 * v * d + d * d + d + v;
  if (elements > detail::kMaxModelElements) {
    throw FormatError(FormatError::Kind::BadDimensions, "dimension overflow");
  }
  if (flavor > static_cast<std::uint32_t>(ModelFlavor::Bigram)) {
    throw FormatError(FormatError::Kind::BadHeader, "unknown flavor tag");
  }
  p.flavor = static_cast<ModelFlavor>(flavor);

  const std::uint64_t expected = 20 + 8 * elements + 8;
  if (buf.size() < expected) {
    throw FormatError(FormatError::Kind::Truncated, "file truncated mid-matrix");
  }
  if (buf.size() > expected) {
    throw FormatError(FormatError::Kind::BadHeader, "trailing bytes after checksum");
  }

  const std::uint64_t stored = detail::get_u64(buf.data() + buf.size() - 8);
  const std::uint64_t actual = fnv1a64(buf.data(), buf.size() - 8);
  if (stored != actual) {
    throw FormatError(FormatError::Kind::BadChecksum, "checksum mismatch");
  }

  const unsigned char* cursor = buf.data() + 20;
  auto get_all = [&cursor](std::span<double> xs) {
    for (double& x : xs) {
      x = detail::get_f64(cursor);
      cursor += 8;
    }
  };
  p.embedding = Matrix(v, d);
  get_all(p.embedding.data);
  p.mixer = Matrix(d, d);
  get_all(p.mixer.data);
  p.mixer_offset.resize(d);
  get_all(p.mixer_offset);
  p.output_weight = Matrix(v, d);
  get_all(p.output_weight.data);
  p.output_bias.resize(v);
  get_all(p.output_bias);
  p.validate();
  return p;
}

}  // namespace parmark
