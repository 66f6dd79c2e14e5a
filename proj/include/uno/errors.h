// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef UNO_ERRORS_H_
#define UNO_ERRORS_H_

#include <stdexcept>
#include <string>

namespace uno {

// Root of every exception thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform to the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain (log of a non-positive value...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A forward evaluation on finite inputs produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Caller violated an API precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration, dataset spec or model setup.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class MagicMismatchError : public IoError {
 public:
  using IoError::IoError;
};

class VersionUnsupportedError : public IoError {
 public:
  using IoError::IoError;
};

class TruncatedPayloadError : public IoError {
 public:
  using IoError::IoError;
};

class MalformedManifestError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace uno

#endif  // UNO_ERRORS_H_
