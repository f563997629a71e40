// Copyright 2026 The HKG Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace hkg {

/// Base class for every error raised by the library. The CLI maps the
/// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument is outside its documented domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// An input sequence is too short (or empty) for the requested operation.
class EmptyInputError : public Error {
 public:
  using Error::Error;
};

/// An input is well-formed but carries no usable information
/// (all-zero magnitudes, single-class labels, zero counts, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// The label tree is malformed (cycle, duplicate name, several roots, ...).
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// A label refers to an unknown class or to an internal node where a leaf
/// is required.
class LabelError : public Error {
 public:
  using Error::Error;
};

/// A file does not follow its expected layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A token lookup failed under a strict policy.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// Tensor or matrix dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A division by zero in a derived quantity.
class DivisionError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared where only finite values are valid.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or gradient.
class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(const std::string& what, std::string last_checkpoint = {})
      : Error(what), last_checkpoint_(std::move(last_checkpoint)) {}

  const std::string& last_checkpoint() const noexcept { return last_checkpoint_; }

 private:
  std::string last_checkpoint_;
};

/// Operating point violates the pressure-model preconditions.
class PhysicsInputError : public Error {
 public:
  using Error::Error;
};

/// A dataset cannot be split as requested.
class SplitError : public Error {
 public:
  using Error::Error;
};

/// A run configuration is invalid or inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A checkpoint was produced for a different label tree.
class TreeMismatchError : public Error {
 public:
  using Error::Error;
};

/// Built matrices fail a structural check.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace hkg
