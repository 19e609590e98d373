#pragma once

#include <cassert>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace trustloc {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidDevice,
  kAuthenticityFailure,
  kIntegrityFailure,
  kParseError,
  kUnauthorized,
  kNotFound,
  kDuplicateCollection,
  kDuplicateDevice,
  kTargetExists,
  kEmptyUpdate,
  kSelfNeighbor,
  kInvalidConfidence,
  kNotUpdated,
  kInsufficientAnchors,
  kNotComputable,
  kUnknownOperation,
  kUnknownDevice,
  kUnknownAnchor,
  kNegativeRange,
  kChainBroken,
  kIoError,
};

std::string_view ErrorName(ErrorCode code);

struct Error {
  ErrorCode code;
  std::string detail;

  std::string ToString() const;
};

inline Error MakeError(ErrorCode code, std::string detail = {}) {
  return Error{code, std::move(detail)};
}

// Value-or-error return type. Every fallible operation in the library
// reports its failure through this instead of throwing.
template <typename T>
class Result {
 public:
  Result(T value) : data_(std::move(value)) {}  // NOLINT(implicit)
  Result(Error error) : data_(std::move(error)) {}  // NOLINT(implicit)

  bool ok() const { return std::holds_alternative<T>(data_); }
  explicit operator bool() const { return ok(); }

  const T& value() const& {
    assert(ok());
    return std::get<T>(data_);
  }
  T& value() & {
    assert(ok());
    return std::get<T>(data_);
  }
  T&& value() && {
    assert(ok());
    return std::get<T>(std::move(data_));
  }
  const T& operator*() const& { return value(); }
  T& operator*() & { return value(); }
  const T* operator->() const { return &value(); }
  T* operator->() { return &value(); }

  const Error& error() const {
    assert(!ok());
    return std::get<Error>(data_);
  }
  ErrorCode code() const { return error().code; }

 private:
  std::variant<T, Error> data_;
};

struct Ok {};

using Status = Result<Ok>;

inline Status OkStatus() { return Ok{}; }

}  // namespace trustloc
