#pragma once

#include <stdexcept>
#include <string>

namespace dia {

enum class ErrorKind {
  parameter,
  io,
  format,
  dimension,
  range,
  undefined,
  transport,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Failure talking to the model sidecar. 4xx responses are permanent,
// connection failures and 5xx responses are retriable.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int status, bool retriable)
      : Error(ErrorKind::transport, what), status_(status), retriable_(retriable) {}

  int status() const noexcept { return status_; }
  bool retriable() const noexcept { return retriable_; }

 private:
  int status_;
  bool retriable_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

}  // namespace dia
