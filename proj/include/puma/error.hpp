#pragma once

#include <stdexcept>
#include <string>

namespace puma {

/// Base class for every error raised by the toolchain.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class CodecError : public Error {
 public:
  CodecError(const std::string& what, std::size_t byte_offset)
      : Error(what + " (at byte offset " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}
  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

class AssemblyError : public Error {
 public:
  AssemblyError(const std::string& what, int line, int column)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class CompileError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class SimulationError : public Error {
 public:
  using Error::Error;
};

class ClassAccessError : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

/// Raised when every live agent is blocked, or the step limit is hit.
/// `diagnosis()` lists what each blocked core/tile is waiting on.
class DeadlockError : public SimulationError {
 public:
  DeadlockError(const std::string& what, std::string diagnosis, bool step_limit)
      : SimulationError(what + "\n" + diagnosis), diagnosis_(std::move(diagnosis)), step_limit_(step_limit) {}
  const std::string& diagnosis() const { return diagnosis_; }
  bool step_limit_exceeded() const { return step_limit_; }

 private:
  std::string diagnosis_;
  bool step_limit_;
};

}  // namespace puma
