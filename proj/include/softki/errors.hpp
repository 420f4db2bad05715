#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace softki {

// Base class for every failure the library reports. `kind()` is a stable
// machine-readable tag used by the CLI error records.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "Error"; }
};

#define SOFTKI_DECLARE_ERROR(Name)                                       \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what) : Error(what) {}              \
    const char* kind() const noexcept override { return #Name; }         \
  }

SOFTKI_DECLARE_ERROR(InvalidArgument);
SOFTKI_DECLARE_ERROR(DimensionMismatch);
SOFTKI_DECLARE_ERROR(NotPositiveDefinite);
SOFTKI_DECLARE_ERROR(RankDeficient);
SOFTKI_DECLARE_ERROR(SingularTriangular);
SOFTKI_DECLARE_ERROR(NonPositiveTemperature);
SOFTKI_DECLARE_ERROR(TooFewPoints);
SOFTKI_DECLARE_ERROR(TooLarge);
SOFTKI_DECLARE_ERROR(ObjectiveFailed);
SOFTKI_DECLARE_ERROR(EmptyFile);
SOFTKI_DECLARE_ERROR(FileNotFound);
SOFTKI_DECLARE_ERROR(ChecksumOrVersionMismatch);

#undef SOFTKI_DECLARE_ERROR

class ParseError : public Error {
 public:
  // `row` and `col` are 1-based and count data rows (a header row is not
  // counted).
  ParseError(std::size_t row, std::size_t col, const std::string& detail);
  const char* kind() const noexcept override { return "ParseError"; }
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

// Raised by the training loop; carries where the objective gave up.
class TrainingFailed : public Error {
 public:
  TrainingFailed(int epoch, int batch, const std::string& detail);
  const char* kind() const noexcept override { return "ObjectiveFailed"; }
  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }

 private:
  int epoch_;
  int batch_;
};

}  // namespace softki
