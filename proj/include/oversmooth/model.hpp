#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "oversmooth/rng.hpp"
#include "oversmooth/tape.hpp"
#include "oversmooth/tensor.hpp"
#include "oversmooth/types.hpp"
#include "oversmooth/vocab.hpp"

namespace oversmooth {

struct ModelConfig {
  int d_embed = 32;
  int d_hidden = 32;
  double dropout_rate = 0.3;
  int vocab_src = 64;
  int vocab_tgt = 64;
  uint64_t seed = 1;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// All learnable tensors, addressed by name. The name set is closed and
// fully determined by the config; checkpoints round-trip it bit-exactly.
struct ModelParams {
  ModelConfig config;
  std::map<std::string, Tensor> tensors;
  uint64_t update_count = 0;
  double alpha = 0.0;  // oversmoothing-loss weight this model was trained with

  const Tensor& t(const std::string& name) const;
  Tensor& t(const std::string& name);
};

// Fixed parameter order; initialization draws follow it.
std::vector<std::pair<std::string, std::pair<int, int>>> param_shapes(const ModelConfig& config);

// Glorot-uniform weights, zero biases; deterministic in config.seed.
ModelParams init_params(const ModelConfig& config);

// Encoder states, one row per source token (unidirectional recurrence).
// Inference mode: no dropout.
Tensor encode(const ModelParams& params, const TokenSeq& source);

// Documented decoder start state: tanh of the final encoder state.
Tensor initial_decoder_state(const Tensor& encoder_states);

struct StepResult {
  Tensor log_probs;  // 1 x V_tgt, logsumexp == 0
  Tensor state;      // 1 x d_hidden
};

// One decoder step. Attention scores are dot products of the incoming
// decoder state against every encoder state; the context is the
// softmax-weighted sum. Output projection sees [new state; context].
StepResult decode_step(const ModelParams& params, const Tensor& encoder_states, const Tensor& state,
                       int prev_token);

// T x V_tgt log-probabilities under teacher forcing, inference mode.
// Row t conditions on <bos> followed by the gold tokens before t.
// Bit-exact with chaining decode_step over the gold target.
Tensor sequence_log_probs(const ModelParams& params, const SentencePair& pair);

// Train-mode forward on a tape: same architecture, parameters entered as
// named leaves, dropout masks sampled from `dropout_rng` and applied to
// embeddings and to the pre-projection concatenation.
class TapedModel {
 public:
  TapedModel(Tape& tape, const ModelParams& params, bool train, Rng* dropout_rng);

  Var sequence_log_probs(const SentencePair& pair);
  const std::map<std::string, Var>& leaves() const { return leaves_; }

 private:
  Var gru_step(const std::string& prefix, Var x, Var h);
  Var maybe_dropout(Var x);

  Tape& tape_;
  const ModelParams& params_;
  bool train_;
  Rng* rng_;
  std::map<std::string, Var> leaves_;
  Var ones_hidden_;  // constant 1 x d_hidden of ones, for (1 - z)
};

}  // namespace oversmooth
