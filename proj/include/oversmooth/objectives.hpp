#pragma once

#include <utility>
#include <vector>

#include "oversmooth/tape.hpp"
#include "oversmooth/tensor.hpp"
#include "oversmooth/types.hpp"

namespace oversmooth {

// Knobs of the mixed training objective. Label smoothing is only legal
// while alpha == 0 (it is switched off for fine-tuning).
struct LossConfig {
  double alpha = 0.0;
  double margin = 1e-4;
  double label_smoothing = 0.0;

  void validate() const;
};

struct OversmoothingReport {
  double rate = 0.0;                     // mean of violations over positions 1..T-1
  std::vector<bool> violations;          // one flag per premature position
  double mean_eos_logprob = 0.0;         // over positions 1..T-1
  double mean_normalized_rank = 0.0;     // 1 = least probable in the vocabulary
  bool degenerate_length = false;        // T == 1: rate defined as 0, stats omitted
};

// Sequence-sum negative log-likelihood with uniform label smoothing:
// sum_t [ -(1-eps) * slp[t, y_t] - (eps/V) * sum_v slp[t, v] ].
double nll_loss(const Tensor& slp, const TokenSeq& target, double epsilon);

// Entry t holds the log-probability of the gold suffix starting at t;
// entry 0 is the total sequence log-probability.
std::vector<double> suffix_log_probs(const Tensor& slp, const TokenSeq& target);

// Fraction of premature positions whose suffix log-probability falls
// below the <eos> log-probability at that position.
OversmoothingReport oversmoothing_rate(const Tensor& slp, const TokenSeq& target);

// Hinge relaxation: (1/T) * sum_t max(0, slp[t,eos] - suffix[t] + m).
// Upper-bounds the oversmoothing rate for m >= 1.
double oversmoothing_loss(const Tensor& slp, const TokenSeq& target, double margin);

// (1-alpha) * nll + alpha * oversmoothing loss.
double mixed_loss(const Tensor& slp, const TokenSeq& target, const LossConfig& config);

struct EosPrefixStats {
  double mean_eos_logprob = 0.0;
  double mean_normalized_rank = 0.0;
  bool degenerate = false;  // T < 2
};

// Mean <eos> log-probability and mean normalized descending rank of
// <eos> over premature positions. Ties rank the smaller token index first.
EosPrefixStats eos_prefix_stats(const Tensor& slp, const TokenSeq& target);

// Corpus perplexity on gold tokens (no smoothing), token-weighted.
double perplexity(const std::vector<std::pair<const Tensor*, const TokenSeq*>>& corpus);

// Tape-side versions of the differentiable losses; `slp` is a T x V
// variable produced by TapedModel::sequence_log_probs.
Var taped_nll_loss(Tape& tape, Var slp, const TokenSeq& target, double epsilon);
Var taped_oversmoothing_loss(Tape& tape, Var slp, const TokenSeq& target, double margin);
Var taped_mixed_loss(Tape& tape, Var slp, const TokenSeq& target, const LossConfig& config);

}  // namespace oversmooth
