#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "parmark/errors.hpp"
#include "parmark/format.hpp"

namespace parmark {

// A token id is an index into some model's vocabulary.
using TokenId = std::uint32_t;
using TokenSequence = std::vector<TokenId>;

// Byte-level mode: one token per byte, id == byte value. No out-of-vocabulary
// case exists, which keeps perturbation attacks and detokenization total.
inline constexpr std::uint32_t kByteVocabSize = 256;

inline TokenSequence tokenize_bytes(std::string_view text) {
  TokenSequence seq;
  seq.reserve(text.size());
  for (unsigned char c : text) seq.push_back(static_cast<TokenId>(c));
  return seq;
}

inline std::string detokenize_bytes(std::span<const TokenId> seq) {
  std::string out;
  out.reserve(seq.size());
  for (TokenId t : seq) {
    if (t >= kByteVocabSize) {
      throw ParamError("token id " + std::to_string(t) + " not representable as a byte");
    }
    out.push_back(static_cast<char>(static_cast<unsigned char>(t)));
  }
  return out;
}

// On-disk form: decimal ids separated by single spaces, no newlines.
inline std::string format_token_line(std::span<const TokenId> seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += std::to_string(seq[i]);
  }
  return out;
}

inline TokenSequence parse_token_line(std::string_view line) {
  TokenSequence seq;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\n' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\n' && line[j] != '\r') ++j;
    const std::uint64_t v = parse_u64(line.substr(i, j - i));
    if (v > 0xFFFFFFFFull) throw ParamError("token id out of range: " + std::to_string(v));
    seq.push_back(static_cast<TokenId>(v));
    i = j;
  }
  return seq;
}

inline void write_token_file(const std::filesystem::path& path, std::span<const TokenId> seq) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const std::string line = format_token_line(seq);
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline TokenSequence read_token_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_token_line(ss.str());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace parmark
