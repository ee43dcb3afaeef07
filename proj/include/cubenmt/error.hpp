#pragma once

#include <stdexcept>
#include <string>

namespace cubenmt {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes disagree or an index lies outside a tensor extent.
struct DimensionError : Error {
  using Error::Error;
};

// A word index falls outside the vocabulary, or a vocab file is malformed.
struct VocabError : Error {
  using Error::Error;
};

// Malformed caller input: empty source, missing EOS, mismatched line counts.
struct InputError : Error {
  using Error::Error;
};

// A computation produced a non-finite value where one is not allowed.
struct NumericError : Error {
  using Error::Error;
};

// Training diverged; the message carries epoch and batch.
struct TrainingError : Error {
  using Error::Error;
};

// File could not be read or written, or has an invalid format.
struct IoError : Error {
  using Error::Error;
};

}  // namespace cubenmt
