#pragma once

#include <vector>

namespace oversmooth {

using TokenSeq = std::vector<int>;

// One training/evaluation unit. Both sides end with exactly one <eos>;
// pad/bos never appear, eos never appears in interior positions.
struct SentencePair {
  TokenSeq source;
  TokenSeq target;
  bool operator==(const SentencePair&) const = default;
};

}  // namespace oversmooth
