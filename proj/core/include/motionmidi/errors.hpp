#pragma once

#include <stdexcept>
#include <string>

namespace motionmidi {

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor shape disagreement (both shapes are quoted in the message).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Token or class index outside the vocabulary.
class VocabularyError : public Error {
 public:
  using Error::Error;
};

/// MIDI pitch / velocity / transposition outside the supported range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Malformed bytes in an external file format; message names the byte offset
/// where applicable.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Keypoint JSON that does not match the expected per-frame schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Unusable skeleton layout (disconnected graph, bad edge indices).
class LayoutError : public Error {
 public:
  using Error::Error;
};

/// Clip that cannot be normalized (no confident keypoints, zero spread).
class DegenerateClipError : public Error {
 public:
  using Error::Error;
};

/// Sequence or transform length outside what an operation supports.
class LengthError : public Error {
 public:
  using Error::Error;
};

/// Bad run-configuration file or unknown key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable, truncated, or version/hash-mismatched checkpoint.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradients; carries the training step that diverged.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, std::size_t step)
      : Error(msg + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_ = 0;
};

/// Invalid evaluation-metric setup (e.g. k larger than the training set).
class MetricError : public Error {
 public:
  using Error::Error;
};

/// Overlapping train/validation seed ranges.
class SplitError : public Error {
 public:
  using Error::Error;
};

/// Filesystem problem (missing input, failed atomic write).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace motionmidi
