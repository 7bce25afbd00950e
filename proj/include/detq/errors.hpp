// Copyright 2026 The detq Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DETQ_ERRORS_HPP
#define DETQ_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace detq {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer geometry does not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An integer accumulator left the N_A-bit signed range. Always a quantizer
/// bug: the shift derivation is supposed to make this impossible.
class OverflowError : public Error {
 public:
  using Error::Error;
};

/// A channel cannot be quantized to 16-bit weights without clipping or
/// without breaking the accumulator bound.
class RepresentabilityError : public Error {
 public:
  RepresentabilityError(const std::string& what, int channel)
      : Error(what), channel_(channel) {}
  int channel() const { return channel_; }

 private:
  int channel_;
};

/// Malformed bitstream, manifest or data file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace detq

#endif  // DETQ_ERRORS_HPP
