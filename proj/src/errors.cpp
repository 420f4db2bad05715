#include "softki/errors.hpp"

namespace softki {

ParseError::ParseError(std::size_t row, std::size_t col,
                       const std::string& detail)
    : Error("parse error at row " + std::to_string(row) + ", col " +
            std::to_string(col) + ": " + detail),
      row_(row),
      col_(col) {}

TrainingFailed::TrainingFailed(int epoch, int batch, const std::string& detail)
    : Error("objective failed at epoch " + std::to_string(epoch) +
            ", batch " + std::to_string(batch) + ": " + detail),
      epoch_(epoch),
      batch_(batch) {}

}  // namespace softki
