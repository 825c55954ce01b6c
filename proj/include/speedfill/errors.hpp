#pragma once

#include <stdexcept>
#include <string>

namespace speedfill {

// Base of every domain error raised by the library. The CLI maps these to
// exit status 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class Unreachable : public Error {
 public:
  using Error::Error;
};

class NotCovered : public Error {
 public:
  using Error::Error;
};

class DegenerateSeries : public Error {
 public:
  using Error::Error;
};

class InsufficientHistory : public Error {
 public:
  using Error::Error;
};

class VacantEntry : public Error {
 public:
  using Error::Error;
};

class NoTraversals : public Error {
 public:
  using Error::Error;
};

class NotCalculable : public Error {
 public:
  using Error::Error;
};

class AllDegenerate : public Error {
 public:
  using Error::Error;
};

class SingularPoint : public Error {
 public:
  using Error::Error;
};

class EmptyR0 : public Error {
 public:
  using Error::Error;
};

class DegeneratePredictor : public Error {
 public:
  using Error::Error;
};

class NoNeighbors : public Error {
 public:
  using Error::Error;
};

class SingularSystem : public Error {
 public:
  using Error::Error;
};

class ZeroTruthNorm : public Error {
 public:
  using Error::Error;
};

}  // namespace speedfill
