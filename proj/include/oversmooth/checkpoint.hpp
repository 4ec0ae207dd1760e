#pragma once

#include <stdexcept>
#include <string>

#include "oversmooth/model.hpp"

namespace oversmooth {

struct CheckpointError : std::runtime_error {
  explicit CheckpointError(const std::string& w) : std::runtime_error(w) {}
};
// Unreadable/garbled header or truncated tensor payload.
struct CheckpointCorrupt : CheckpointError {
  using CheckpointError::CheckpointError;
};
// Header version this build does not understand.
struct CheckpointVersion : CheckpointError {
  using CheckpointError::CheckpointError;
};
// Tensor shape disagrees with the header's config.
struct CheckpointShape : CheckpointError {
  using CheckpointError::CheckpointError;
};

// Format: one text header line (key=value pairs), then per tensor a name
// line, a "rows cols" line, and row-major little-endian doubles.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

// Additionally validates vocabulary sizes against the supplied vocabularies.
ModelParams load_checkpoint(const std::string& path, const Vocabulary& src, const Vocabulary& tgt);

}  // namespace oversmooth
