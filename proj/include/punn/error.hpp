#pragma once

#include <stdexcept>
#include <string>

namespace punn {

enum class ErrorKind {
  InputShape,
  Numeric,
  Config,
  Parse,
  Domain,
  Split,
  Unsupported,
  Internal,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base class for every error raised by the library. The kind drives the
/// CLI exit code (config -> 2, numeric -> 3, everything else -> 1).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define PUNN_DEFINE_ERROR(Name, Kind)                              \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what) : Error(Kind, what) {}  \
  };

PUNN_DEFINE_ERROR(InputShapeError, ErrorKind::InputShape)
PUNN_DEFINE_ERROR(NumericError, ErrorKind::Numeric)
PUNN_DEFINE_ERROR(ConfigError, ErrorKind::Config)
PUNN_DEFINE_ERROR(ParseError, ErrorKind::Parse)
PUNN_DEFINE_ERROR(DomainError, ErrorKind::Domain)
PUNN_DEFINE_ERROR(SplitError, ErrorKind::Split)
PUNN_DEFINE_ERROR(UnsupportedError, ErrorKind::Unsupported)
PUNN_DEFINE_ERROR(InternalError, ErrorKind::Internal)

#undef PUNN_DEFINE_ERROR

}  // namespace punn
