#include "oversmooth/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "oversmooth/vocab.hpp"

namespace oversmooth {

namespace {

void check_target(const Tensor& slp, const TokenSeq& target, const char* op) {
  if (static_cast<int>(target.size()) != slp.rows)
    throw std::invalid_argument(std::string(op) + ": target length " + std::to_string(target.size()) +
                                " vs log-prob rows " + std::to_string(slp.rows));
  for (int tok : target)
    if (tok < 0 || tok >= slp.cols)
      throw std::out_of_range(std::string(op) + ": token id " + std::to_string(tok) + " outside vocabulary of " +
                              std::to_string(slp.cols));
}

void check_eos_terminated(const TokenSeq& target, const char* op) {
  if (target.empty() || target.back() != Vocabulary::kEos)
    throw std::invalid_argument(std::string(op) + ": target must be <eos>-terminated");
}

}  // namespace

void LossConfig::validate() const {
  if (alpha < 0.0 || alpha >= 1.0) throw std::invalid_argument("LossConfig: alpha must be in [0,1)");
  if (margin < 0.0) throw std::invalid_argument("LossConfig: margin must be >= 0");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0)
    throw std::invalid_argument("LossConfig: label_smoothing must be in [0,1)");
  if (alpha > 0.0 && label_smoothing != 0.0)
    throw std::invalid_argument("LossConfig: label smoothing must be 0 when alpha > 0");
}

double nll_loss(const Tensor& slp, const TokenSeq& target, double epsilon) {
  check_target(slp, target, "nll_loss");
  if (epsilon < 0.0 || epsilon >= 1.0) throw std::invalid_argument("nll_loss: epsilon must be in [0,1)");
  double loss = 0.0;
  for (int t = 0; t < slp.rows; ++t) {
    loss -= (1.0 - epsilon) * slp.at(t, target[t]);
    if (epsilon > 0.0) {
      double rowsum = 0.0;
      for (int v = 0; v < slp.cols; ++v) rowsum += slp.at(t, v);
      loss -= epsilon / slp.cols * rowsum;
    }
  }
  return loss;
}

std::vector<double> suffix_log_probs(const Tensor& slp, const TokenSeq& target) {
  check_target(slp, target, "suffix_log_probs");
  std::vector<double> suffix(target.size());
  double acc = 0.0;
  for (int t = slp.rows - 1; t >= 0; --t) {
    acc += slp.at(t, target[t]);
    suffix[t] = acc;
  }
  return suffix;
}

OversmoothingReport oversmoothing_rate(const Tensor& slp, const TokenSeq& target) {
  check_eos_terminated(target, "oversmoothing_rate");
  check_target(slp, target, "oversmoothing_rate");
  OversmoothingReport report;
  const int T = slp.rows;
  if (T == 1) {
    report.degenerate_length = true;
    return report;
  }
  const std::vector<double> suffix = suffix_log_probs(slp, target);
  int violated = 0;
  report.violations.resize(T - 1);
  for (int t = 0; t < T - 1; ++t) {
    const bool v = suffix[t] < slp.at(t, Vocabulary::kEos);
    report.violations[t] = v;
    violated += v;
  }
  report.rate = static_cast<double>(violated) / (T - 1);
  const EosPrefixStats stats = eos_prefix_stats(slp, target);
  report.mean_eos_logprob = stats.mean_eos_logprob;
  report.mean_normalized_rank = stats.mean_normalized_rank;
  return report;
}

double oversmoothing_loss(const Tensor& slp, const TokenSeq& target, double margin) {
  check_target(slp, target, "oversmoothing_loss");
  if (margin < 0.0) throw std::invalid_argument("oversmoothing_loss: margin must be >= 0");
  const std::vector<double> suffix = suffix_log_probs(slp, target);
  double loss = 0.0;
  for (int t = 0; t < slp.rows; ++t)
    loss += std::max(0.0, slp.at(t, Vocabulary::kEos) - suffix[t] + margin);
  return loss / slp.rows;
}

double mixed_loss(const Tensor& slp, const TokenSeq& target, const LossConfig& config) {
  config.validate();
  if (config.alpha == 0.0) return nll_loss(slp, target, config.label_smoothing);
  return (1.0 - config.alpha) * nll_loss(slp, target, config.label_smoothing) +
         config.alpha * oversmoothing_loss(slp, target, config.margin);
}

EosPrefixStats eos_prefix_stats(const Tensor& slp, const TokenSeq& target) {
  check_target(slp, target, "eos_prefix_stats");
  EosPrefixStats stats;
  const int T = slp.rows, V = slp.cols;
  if (T < 2) {
    stats.degenerate = true;
    return stats;
  }
  double lp_sum = 0.0, rank_sum = 0.0;
  for (int t = 0; t < T - 1; ++t) {
    const double eos_lp = slp.at(t, Vocabulary::kEos);
    lp_sum += eos_lp;
    // 1-based descending rank; ties broken by smaller token index first.
    int rank = 1;
    for (int v = 0; v < V; ++v) {
      if (v == Vocabulary::kEos) continue;
      const double lp = slp.at(t, v);
      if (lp > eos_lp || (lp == eos_lp && v < Vocabulary::kEos)) ++rank;
    }
    rank_sum += static_cast<double>(rank) / V;
  }
  stats.mean_eos_logprob = lp_sum / (T - 1);
  stats.mean_normalized_rank = rank_sum / (T - 1);
  return stats;
}

double perplexity(const std::vector<std::pair<const Tensor*, const TokenSeq*>>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("perplexity: empty corpus");
  double total_lp = 0.0;
  long total_tokens = 0;
  for (const auto& [slp, target] : corpus) {
    check_target(*slp, *target, "perplexity");
    for (int t = 0; t < slp->rows; ++t) total_lp += slp->at(t, (*target)[t]);
    total_tokens += slp->rows;
  }
  return std::exp(-total_lp / total_tokens);
}

namespace {

// T x 1 column of gold-token log-probabilities.
Var taped_gold_column(Tape& tape, Var slp, const TokenSeq& target) {
  std::vector<Var> entries;
  entries.reserve(target.size());
  for (size_t t = 0; t < target.size(); ++t)
    entries.push_back(tape.slice(slp, static_cast<int>(t), static_cast<int>(t) + 1, target[t], target[t] + 1));
  return tape.concat_rows(entries);
}

}  // namespace

Var taped_nll_loss(Tape& tape, Var slp, const TokenSeq& target, double epsilon) {
  check_target(tape.value(slp), target, "nll_loss");
  if (epsilon < 0.0 || epsilon >= 1.0) throw std::invalid_argument("nll_loss: epsilon must be in [0,1)");
  Var gold_sum = tape.reduce_sum(taped_gold_column(tape, slp, target));
  Var loss = tape.scale(gold_sum, -(1.0 - epsilon));
  if (epsilon > 0.0)
    loss = tape.add(loss, tape.scale(tape.reduce_sum(slp), -epsilon / tape.value(slp).cols));
  return loss;
}

Var taped_oversmoothing_loss(Tape& tape, Var slp, const TokenSeq& target, double margin) {
  const Tensor& v = tape.value(slp);
  check_target(v, target, "oversmoothing_loss");
  if (margin < 0.0) throw std::invalid_argument("oversmoothing_loss: margin must be >= 0");
  const int T = v.rows;

  // suffix = M * gold, with M upper-triangular ones (suffix cumulative sum).
  Tensor tri(T, T);
  for (int i = 0; i < T; ++i)
    for (int j = i; j < T; ++j) tri.at(i, j) = 1.0;
  Var suffix = tape.matmul(tape.constant(std::move(tri)), taped_gold_column(tape, slp, target));

  Var eos_col = tape.slice(slp, 0, T, Vocabulary::kEos, Vocabulary::kEos + 1);
  Var hinge = tape.relu(
      tape.add(tape.add(eos_col, tape.scale(suffix, -1.0)), tape.constant(Tensor::full(T, 1, margin))));
  return tape.reduce_mean(hinge);
}

Var taped_mixed_loss(Tape& tape, Var slp, const TokenSeq& target, const LossConfig& config) {
  config.validate();
  if (config.alpha == 0.0) return taped_nll_loss(tape, slp, target, config.label_smoothing);
  return tape.add(tape.scale(taped_nll_loss(tape, slp, target, config.label_smoothing), 1.0 - config.alpha),
                  tape.scale(taped_oversmoothing_loss(tape, slp, target, config.margin), config.alpha));
}

}  // namespace oversmooth
