#pragma once

#include <stdexcept>
#include <string>

namespace cpop {

// Base of every error raised by the library. Callers that only need a
// message can catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class MissingMoment : public Error {
 public:
  using Error::Error;
};

// A constraint's variables do not fit inside any clique.
class CoverageError : public Error {
 public:
  CoverageError(std::string what, std::size_t constraint)
      : Error(std::move(what)), constraint_(constraint) {}
  std::size_t constraint() const { return constraint_; }

 private:
  std::size_t constraint_;
};

class OrderError : public Error {
 public:
  using Error::Error;
};

class InvalidAssignment : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cpop
