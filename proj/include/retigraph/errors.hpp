#pragma once

#include <stdexcept>
#include <string>

namespace retigraph {

// Base for all pipeline errors. Subclasses map onto CLI exit codes:
// argument/format/io/degenerate -> 2 (data error), numeric/internal -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ArgumentError : Error {
  using Error::Error;
};

struct FormatError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct DegenerateInputError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

struct InternalError : Error {
  using Error::Error;
};

}  // namespace retigraph
