#pragma once

#include <stdexcept>
#include <string>

namespace parmark {

// Invalid parameter values, malformed configs, violated preconditions.
class ParamError : public std::invalid_argument {
 public:
  explicit ParamError(const std::string& what) : std::invalid_argument(what) {}
};

// Filesystem-level failures: cannot open, read, or write.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Structurally broken model or config files.
class FormatError : public IoError {
 public:
  enum class Kind {
    BadMagic,
    BadDimensions,
    Truncated,
    BadChecksum,
    BadHeader,
  };

  FormatError(Kind kind, const std::string& what) : IoError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace parmark
