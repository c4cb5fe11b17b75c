#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace relstance {

/// Malformed input file. `row()` is the 1-based data row, or 0 for file-level problems.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : std::runtime_error(row == 0 ? what : "row " + std::to_string(row) + ": " + what), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t epoch, const std::string& stage)
      : std::runtime_error(stage + " diverged at epoch " + std::to_string(epoch)), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace relstance
