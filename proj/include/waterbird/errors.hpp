/* Copyright 2026 The Waterbird Count Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace waterbird {

/// Base class for every error raised by the library. Input errors (bad files,
/// malformed rows, unknown ids) derive from InputError; broken internal
/// invariants derive from InvariantViolation.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class InvariantViolation : public Error {
 public:
  using Error::Error;
};

class InvalidBox : public InputError {
 public:
  using InputError::InputError;
};

class NonInvertibleTransform : public InputError {
 public:
  NonInvertibleTransform() : InputError("affine transform is not invertible") {}
};

/// Malformed row in a text input. line is 1-based; 0 when unknown.
class ParseError : public InputError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : InputError(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class OutOfBounds : public InputError {
 public:
  using InputError::InputError;
};

class BadRatios : public InputError {
 public:
  using InputError::InputError;
};

class ImageSmallerThanTile : public InputError {
 public:
  using InputError::InputError;
};

class DecodeError : public InputError {
 public:
  using InputError::InputError;
};

class DimensionMismatch : public InputError {
 public:
  using InputError::InputError;
};

class NonSquareRotation : public InputError {
 public:
  NonSquareRotation() : InputError("rotate_90 requires a square tile") {}
};

class UnknownTile : public InputError {
 public:
  explicit UnknownTile(const std::string& tile_id)
      : InputError("unknown tile: " + tile_id) {}
};

class MixedFrames : public InputError {
 public:
  MixedFrames() : InputError("detections are not all in the same coordinate frame") {}
};

class MissingGeoreference : public InputError {
 public:
  explicit MissingGeoreference(const std::string& image_id)
      : InputError("missing georeference for image: " + image_id) {}
};

class NoGroundTruth : public InputError {
 public:
  explicit NoGroundTruth(const std::string& class_name)
      : InputError("no ground truth for class: " + class_name) {}
};

}  // namespace waterbird
