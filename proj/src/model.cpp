#include "oversmooth/model.hpp"

#include <cmath>
#include <stdexcept>

namespace oversmooth {

void ModelConfig::validate() const {
  if (d_embed < 1 || d_hidden < 1) throw std::invalid_argument("ModelConfig: widths must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw std::invalid_argument("ModelConfig: dropout_rate must be in [0,1)");
  if (vocab_src < Vocabulary::kNumReserved || vocab_tgt < Vocabulary::kNumReserved)
    throw std::invalid_argument("ModelConfig: vocab sizes must cover reserved tokens");
}

const Tensor& ModelParams::t(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::out_of_range("ModelParams: no tensor named " + name);
  return it->second;
}

Tensor& ModelParams::t(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::out_of_range("ModelParams: no tensor named " + name);
  return it->second;
}

std::vector<std::pair<std::string, std::pair<int, int>>> param_shapes(const ModelConfig& c) {
  const int de = c.d_embed, dh = c.d_hidden;
  std::vector<std::pair<std::string, std::pair<int, int>>> shapes;
  shapes.push_back({"src_embed", {c.vocab_src, de}});
  shapes.push_back({"tgt_embed", {c.vocab_tgt, de}});
  for (const char* side : {"enc", "dec"})
    for (const char* gate : {"z", "r", "h"}) {
      const std::string g(gate);
      shapes.push_back({std::string(side) + ".W" + g, {de, dh}});
      shapes.push_back({std::string(side) + ".U" + g, {dh, dh}});
      shapes.push_back({std::string(side) + ".b" + g, {1, dh}});
    }
  shapes.push_back({"out.W", {2 * dh, c.vocab_tgt}});
  shapes.push_back({"out.b", {1, c.vocab_tgt}});
  return shapes;
}

ModelParams init_params(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;
  Rng rng(config.seed);
  for (const auto& [name, shape] : param_shapes(config)) {
    Tensor t(shape.first, shape.second);
    const bool is_bias = name.find(".b") != std::string::npos;
    if (!is_bias) {
      const double s = std::sqrt(6.0 / (shape.first + shape.second));
      for (double& x : t.v) x = rng.uniform_symmetric(s);
    }
    p.tensors.emplace(name, std::move(t));
  }
  return p;
}

namespace {

// z = sigmoid(x Wz + h Uz + bz); r = sigmoid(x Wr + h Ur + br)
// hh = tanh(x Wh + (r*h) Uh + bh); h' = (1-z)*h + z*hh
Tensor gru_step_raw(const ModelParams& p, const std::string& side, const Tensor& x, const Tensor& h) {
  using namespace kernel;
  Tensor z = sigmoid(add(add(matmul(x, p.t(side + ".Wz")), matmul(h, p.t(side + ".Uz"))), p.t(side + ".bz")));
  Tensor r = sigmoid(add(add(matmul(x, p.t(side + ".Wr")), matmul(h, p.t(side + ".Ur"))), p.t(side + ".br")));
  Tensor hh = tanh(add(add(matmul(x, p.t(side + ".Wh")), matmul(mul(r, h), p.t(side + ".Uh"))), p.t(side + ".bh")));
  Tensor out = h;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = (1.0 - z.v[i]) * h.v[i] + z.v[i] * hh.v[i];
  return out;
}

void check_tokens(const TokenSeq& seq, int vocab_size, const char* what) {
  if (seq.empty()) throw std::invalid_argument(std::string(what) + ": empty token sequence");
  for (int tok : seq)
    if (tok < 0 || tok >= vocab_size)
      throw std::out_of_range(std::string(what) + ": token id " + std::to_string(tok) + " outside vocabulary of " +
                              std::to_string(vocab_size));
}

}  // namespace

Tensor encode(const ModelParams& params, const TokenSeq& source) {
  check_tokens(source, params.config.vocab_src, "encode");
  const Tensor& embed = params.t("src_embed");
  Tensor h = Tensor::zeros(1, params.config.d_hidden);
  Tensor states(static_cast<int>(source.size()), params.config.d_hidden);
  for (size_t i = 0; i < source.size(); ++i) {
    Tensor x = kernel::gather_rows(embed, {source[i]});
    h = gru_step_raw(params, "enc", x, h);
    for (int j = 0; j < h.cols; ++j) states.at(static_cast<int>(i), j) = h.v[j];
  }
  return states;
}

Tensor initial_decoder_state(const Tensor& encoder_states) {
  return kernel::tanh(kernel::slice(encoder_states, encoder_states.rows - 1, encoder_states.rows, 0,
                                    encoder_states.cols));
}

StepResult decode_step(const ModelParams& params, const Tensor& encoder_states, const Tensor& state,
                       int prev_token) {
  if (prev_token < 0 || prev_token >= params.config.vocab_tgt)
    throw std::out_of_range("decode_step: token id " + std::to_string(prev_token) + " outside vocabulary of " +
                            std::to_string(params.config.vocab_tgt));
  using namespace kernel;
  Tensor x = gather_rows(params.t("tgt_embed"), {prev_token});
  Tensor new_state = gru_step_raw(params, "dec", x, state);

  // Dot-product attention against the incoming state.
  const int S = encoder_states.rows, dh = encoder_states.cols;
  Tensor scores(1, S);
  for (int i = 0; i < S; ++i) {
    double s = 0.0;
    for (int j = 0; j < dh; ++j) s += state.v[j] * encoder_states.at(i, j);
    scores.v[i] = s;
  }
  Tensor weights = exp(log_softmax(scores));
  Tensor context = matmul(weights, encoder_states);

  Tensor joint = concat_cols({&new_state, &context});
  Tensor logits = add(matmul(joint, params.t("out.W")), params.t("out.b"));
  return StepResult{log_softmax(logits), std::move(new_state)};
}

Tensor sequence_log_probs(const ModelParams& params, const SentencePair& pair) {
  if (pair.target.empty()) throw std::invalid_argument("sequence_log_probs: empty target");
  check_tokens(pair.target, params.config.vocab_tgt, "sequence_log_probs");
  Tensor enc = encode(params, pair.source);
  Tensor state = initial_decoder_state(enc);
  int prev = Vocabulary::kBos;
  Tensor slp(static_cast<int>(pair.target.size()), params.config.vocab_tgt);
  for (size_t t = 0; t < pair.target.size(); ++t) {
    StepResult step = decode_step(params, enc, state, prev);
    for (int j = 0; j < slp.cols; ++j) slp.at(static_cast<int>(t), j) = step.log_probs.v[j];
    state = std::move(step.state);
    prev = pair.target[t];
  }
  return slp;
}

TapedModel::TapedModel(Tape& tape, const ModelParams& params, bool train, Rng* dropout_rng)
    : tape_(tape), params_(params), train_(train), rng_(dropout_rng) {
  if (train_ && params_.config.dropout_rate > 0.0 && rng_ == nullptr)
    throw std::invalid_argument("TapedModel: train mode with dropout needs an rng");
  for (const auto& [name, tensor] : params_.tensors) leaves_.emplace(name, tape_.leaf(tensor, name));
  ones_hidden_ = tape_.constant(Tensor::full(1, params_.config.d_hidden, 1.0));
}

Var TapedModel::maybe_dropout(Var x) {
  const double p = params_.config.dropout_rate;
  if (!train_ || p <= 0.0) return x;
  const Tensor& v = tape_.value(x);
  Tensor mask(v.rows, v.cols);
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& m : mask.v) m = rng_->bernoulli(p) ? 0.0 : keep_scale;
  return tape_.dropout_mask(x, std::move(mask));
}

Var TapedModel::gru_step(const std::string& side, Var x, Var h) {
  auto L = [&](const std::string& n) { return leaves_.at(side + "." + n); };
  Var z = tape_.sigmoid(tape_.add(tape_.add(tape_.matmul(x, L("Wz")), tape_.matmul(h, L("Uz"))), L("bz")));
  Var r = tape_.sigmoid(tape_.add(tape_.add(tape_.matmul(x, L("Wr")), tape_.matmul(h, L("Ur"))), L("br")));
  Var hh = tape_.tanh(
      tape_.add(tape_.add(tape_.matmul(x, L("Wh")), tape_.matmul(tape_.mul(r, h), L("Uh"))), L("bh")));
  Var one_minus_z = tape_.add(ones_hidden_, tape_.scale(z, -1.0));
  return tape_.add(tape_.mul(one_minus_z, h), tape_.mul(z, hh));
}

Var TapedModel::sequence_log_probs(const SentencePair& pair) {
  if (pair.target.empty()) throw std::invalid_argument("sequence_log_probs: empty target");
  check_tokens(pair.source, params_.config.vocab_src, "sequence_log_probs");
  check_tokens(pair.target, params_.config.vocab_tgt, "sequence_log_probs");

  Var h = tape_.constant(Tensor::zeros(1, params_.config.d_hidden));
  std::vector<Var> enc_rows;
  for (int tok : pair.source) {
    Var x = maybe_dropout(tape_.gather_rows(leaves_.at("src_embed"), {tok}));
    h = gru_step("enc", x, h);
    enc_rows.push_back(h);
  }
  Var enc = tape_.concat_rows(enc_rows);
  Var state = tape_.tanh(enc_rows.back());

  std::vector<Var> rows;
  int prev = Vocabulary::kBos;
  for (size_t t = 0; t < pair.target.size(); ++t) {
    Var x = maybe_dropout(tape_.gather_rows(leaves_.at("tgt_embed"), {prev}));
    Var new_state = gru_step("dec", x, state);

    // scores[i] = <incoming state, enc row i>
    Var scores = tape_.matmul(state, tape_.transpose(enc));
    Var weights = tape_.exp(tape_.log_softmax(scores));
    Var context = tape_.matmul(weights, enc);

    Var joint = maybe_dropout(tape_.concat_cols({new_state, context}));
    Var logits = tape_.add(tape_.matmul(joint, leaves_.at("out.W")), leaves_.at("out.b"));
    rows.push_back(tape_.log_softmax(logits));
    state = new_state;
    prev = pair.target[t];
  }
  return tape_.concat_rows(rows);
}

}  // namespace oversmooth
