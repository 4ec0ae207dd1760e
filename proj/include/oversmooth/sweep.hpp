#pragma once

#include <string>
#include <vector>

#include "oversmooth/data.hpp"
#include "oversmooth/decoding.hpp"
#include "oversmooth/training.hpp"

namespace oversmooth {

struct SweepRow {
  double alpha = 0.0;
  uint64_t seed = 0;
  int beam = 1;
  double os_rate = 0.0;
  double eos_logprob = 0.0;
  double eos_rank = 0.0;
  double ppl = 0.0;
  double len_ratio = 0.0;
  double bleu = 0.0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
};

// Mean and standard deviation over seeds for one (alpha, beam) cell.
struct SweepAggregate {
  double alpha = 0.0;
  int beam = 1;
  int n = 0;
  double os_rate_mean = 0, os_rate_sd = 0;
  double eos_logprob_mean = 0, eos_logprob_sd = 0;
  double eos_rank_mean = 0, eos_rank_sd = 0;
  double ppl_mean = 0, ppl_sd = 0;
  double len_ratio_mean = 0, len_ratio_sd = 0;
  double bleu_mean = 0, bleu_sd = 0;
};
std::vector<SweepAggregate> aggregate_rows(const SweepReport& report);

// Teacher-forced metrics on the references (oversmoothing rate, <eos>
// prefix stats, perplexity; macro-averaged per sentence, degenerate
// length-1 sentences excluded from the <eos> stats) plus per-beam
// decoding metrics (BLEU, length ratio). One row per beam width.
std::vector<SweepRow> evaluate_checkpoint(const ModelParams& params, const Corpus& test,
                                          const std::vector<int>& beams, uint64_t seed);

struct SweepConfig {
  std::vector<double> alphas = {0.0, 0.3, 0.6, 0.9};
  int num_seeds = 3;
  std::vector<int> beams = {1, 5, 25, 100};
  ModelConfig model;
  TrainConfig train;
  int workers = 1;
};

struct CellFailure {
  double alpha = 0.0;
  uint64_t seed = 0;
  std::string message;
};

struct SweepResult {
  SweepReport report;
  std::vector<CellFailure> failures;
  int cells_trained = 0;  // cells that actually ran training this invocation
};

// Pretrains once per seed, fine-tunes per (alpha, seed), evaluates per
// beam, and writes <out_dir>/sweep.csv. Resumable: finished cells leave
// marker files under <out_dir>/cells and are skipped on rerun. Cell
// failures are recorded and the sweep continues.
SweepResult run_sweep(const CorpusSet& data, const SweepConfig& config, const std::string& out_dir);

void save_sweep_csv(const SweepReport& report, const std::string& path);
SweepReport load_sweep_csv(const std::string& path);

// sweep.csv plus one SVG chart per figure analogue, with +-1 standard
// deviation bands across seeds.
void emit_report(const SweepReport& report, const std::string& out_dir);

}  // namespace oversmooth
