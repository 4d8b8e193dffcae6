#pragma once

#include <stdexcept>
#include <string>

namespace curate {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad JSONL line, bad tag, bad config.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Contract violation by the caller (k < 1, missing gold answer, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Replay mode was asked for a request that is not in the store.
class ReplayMiss : public Error {
 public:
  explicit ReplayMiss(std::string digest)
      : Error("replay miss for cache key " + digest), digest_(std::move(digest)) {}
  const std::string& digest() const noexcept { return digest_; }

 private:
  std::string digest_;
};

class TransportError : public Error {
 public:
  TransportError(const std::string& what, bool transient)
      : Error(what), transient_(transient) {}
  bool transient() const noexcept { return transient_; }

 private:
  bool transient_;
};

/// A stage's existing output no longer matches its manifest or its input.
class DigestMismatch : public Error {
 public:
  using Error::Error;
};

class InfeasibleBudget : public Error {
 public:
  InfeasibleBudget(const std::string& what, std::size_t achievable)
      : Error(what), achievable_(achievable) {}
  std::size_t achievable() const noexcept { return achievable_; }

 private:
  std::size_t achievable_;
};

}  // namespace curate
