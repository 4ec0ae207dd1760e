#pragma once

#include <functional>
#include <vector>

#include "oversmooth/model.hpp"
#include "oversmooth/types.hpp"

namespace oversmooth {

struct DecodeConfig {
  int beam_width = 5;
  double max_len_slope = 1.2;  // max decode length = floor(slope * l_x) + offset
  int max_len_offset = 10;

  void validate() const;
};

struct Hypothesis {
  TokenSeq tokens;        // ends with <eos> iff finished
  double log_prob = 0.0;  // sum of chosen per-step log-probabilities
  bool finished = false;
  bool force_finished = false;  // <eos> appended at the length bound
};

// Decoder abstraction beam search runs against: given the carried state
// and the previously emitted token, produce the next log-prob row and
// state. Lets tests drive the search with hand-specified table models.
struct Stepper {
  Tensor init_state;
  int vocab_size = 0;
  std::function<StepResult(const Tensor& state, int prev_token)> step;
};

Stepper make_model_stepper(const ModelParams& params, const TokenSeq& source);

// Plain beam search, no length normalization. pad/bos are masked out;
// ranking is by raw cumulative log-prob with lexicographic tie-breaks.
// Survivors at the length bound are force-finished with <eos>.
std::vector<Hypothesis> beam_search(const Stepper& stepper, int max_len, const DecodeConfig& config);
std::vector<Hypothesis> beam_search(const ModelParams& params, const TokenSeq& source,
                                    const DecodeConfig& config);

int max_decode_length(const DecodeConfig& config, size_t source_len);

// Exact MAP by enumeration of every <eos>-terminated sequence up to
// max_len. Guarded to at most 10^6 candidate sequences.
Hypothesis exhaustive_map(const Stepper& stepper, int max_len);
Hypothesis exhaustive_map(const ModelParams& params, const TokenSeq& source, int max_len);

}  // namespace oversmooth
