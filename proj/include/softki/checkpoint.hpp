#pragma once

// Single-file model checkpoint: a text header of `key value` lines ending in
// `end_header`, then length-prefixed little-endian float64 arrays
// (uint64 count, then values) for z, T, lengthscales, U_zz, R, alpha.
// Matrices are stored row-major. The header carries an FNV-1a checksum of
// the binary payload.

#include <cstdint>
#include <string>

#include "softki/data.hpp"
#include "softki/exact_gp.hpp"
#include "softki/posterior.hpp"
#include "softki/sgpr.hpp"

namespace softki {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointMagic = "SOFTKI-CHECKPOINT";

enum class ModelKind { kSoftKI, kSGPR, kExact };
const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct Checkpoint {
  ModelKind model = ModelKind::kSoftKI;
  Index n = 0;  // training points
  Standardization stats;
  double noise = 0;
  double outputscale = 0;
  double jitter = 0;
  DenseMatrix z;             // interpolation / inducing points; exact: train X
  DenseVector temperature;   // softki only
  DenseVector lengthscales;
  DenseMatrix uzz;           // exact: chol(K + beta^2 I)
  DenseMatrix r;             // may be empty
  DenseVector alpha;

  Index m() const { return z.rows(); }
  Index d() const { return z.cols(); }
};

std::uint64_t fnv1a(const std::string& bytes);

void write_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::string& path);

Checkpoint make_checkpoint(const FittedPosterior& post, Index n,
                           const Standardization& stats);
Checkpoint make_checkpoint(const SGPRPosterior& post, Index n,
                           const Standardization& stats);
Checkpoint make_checkpoint(const ExactGPPosterior& post,
                           const Standardization& stats);

// Predictions on the standardized scale. `var` is empty when the
// checkpoint carries no triangular factor for it.
struct Prediction {
  DenseVector mean;
  DenseVector var;
};
Prediction predict(const Checkpoint& ck, const DenseMatrix& xs);

}  // namespace softki
