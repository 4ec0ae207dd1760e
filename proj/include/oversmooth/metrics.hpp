#pragma once

#include <vector>

#include "oversmooth/types.hpp"

namespace oversmooth {

// Corpus BLEU in [0, 100]: geometric mean of corpus-pooled modified
// n-gram precisions (n = 1..4) times the brevity penalty. No smoothing:
// any zero precision gives 0. The terminal <eos> is excluded from both
// n-gram counting and the length totals. Single reference per hypothesis.
double corpus_bleu(const std::vector<TokenSeq>& references, const std::vector<TokenSeq>& hypotheses);

// Mean over pairs of reference length / hypothesis length, lengths
// excluding the terminal <eos> and floored at 1.
double length_ratio(const std::vector<TokenSeq>& references, const std::vector<TokenSeq>& hypotheses);

}  // namespace oversmooth
