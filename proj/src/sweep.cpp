#include "oversmooth/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "oversmooth/checkpoint.hpp"
#include "oversmooth/metrics.hpp"
#include "oversmooth/objectives.hpp"

namespace fs = std::filesystem;

namespace oversmooth {

std::vector<SweepRow> evaluate_checkpoint(const ModelParams& params, const Corpus& test,
                                          const std::vector<int>& beams, uint64_t seed) {
  if (test.pairs.empty()) throw std::invalid_argument("evaluate_checkpoint: empty test corpus");

  // Teacher-forced pass over the references, shared by all beams.
  double rate_sum = 0.0, eos_lp_sum = 0.0, eos_rank_sum = 0.0;
  long eos_count = 0;
  double total_lp = 0.0;
  long total_tokens = 0;
  for (const SentencePair& pair : test.pairs) {
    const Tensor slp = sequence_log_probs(params, pair);
    const OversmoothingReport rep = oversmoothing_rate(slp, pair.target);
    rate_sum += rep.rate;
    if (!rep.degenerate_length) {
      eos_lp_sum += rep.mean_eos_logprob;
      eos_rank_sum += rep.mean_normalized_rank;
      ++eos_count;
    }
    for (int t = 0; t < slp.rows; ++t) total_lp += slp.at(t, pair.target[t]);
    total_tokens += slp.rows;
  }
  const double n = static_cast<double>(test.pairs.size());

  SweepRow base;
  base.alpha = params.alpha;
  base.seed = seed;
  base.os_rate = rate_sum / n;
  base.eos_logprob = eos_count ? eos_lp_sum / eos_count : 0.0;
  base.eos_rank = eos_count ? eos_rank_sum / eos_count : 0.0;
  base.ppl = std::exp(-total_lp / total_tokens);

  std::vector<TokenSeq> refs;
  refs.reserve(test.pairs.size());
  for (const SentencePair& pair : test.pairs) refs.push_back(pair.target);

  std::vector<SweepRow> rows;
  for (int beam : beams) {
    DecodeConfig dc;
    dc.beam_width = beam;
    std::vector<TokenSeq> hyps;
    hyps.reserve(test.pairs.size());
    for (const SentencePair& pair : test.pairs) {
      const std::vector<Hypothesis> pool = beam_search(params, pair.source, dc);
      hyps.push_back(pool.front().tokens);
    }
    SweepRow row = base;
    row.beam = beam;
    row.len_ratio = length_ratio(refs, hyps);
    row.bleu = corpus_bleu(refs, hyps);
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string fmt_alpha(double alpha) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", alpha);
  return buf;
}

std::string row_line(const SweepRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%llu,%d,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f", fmt_alpha(r.alpha).c_str(),
                static_cast<unsigned long long>(r.seed), r.beam, r.os_rate, r.eos_logprob, r.eos_rank, r.ppl,
                r.len_ratio, r.bleu);
  return buf;
}

SweepRow parse_row(const std::string& line, const std::string& where) {
  SweepRow r;
  unsigned long long seed = 0;
  if (std::sscanf(line.c_str(), "%lf,%llu,%d,%lf,%lf,%lf,%lf,%lf,%lf", &r.alpha, &seed, &r.beam, &r.os_rate,
                  &r.eos_logprob, &r.eos_rank, &r.ppl, &r.len_ratio, &r.bleu) != 9)
    throw std::runtime_error("sweep csv: malformed row in " + where + ": " + line);
  r.seed = seed;
  return r;
}

constexpr const char* kCsvHeader = "alpha,seed,beam,os_rate,eos_logprob,eos_rank,ppl,len_ratio,bleu";

}  // namespace

void save_sweep_csv(const SweepReport& report, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_sweep_csv: cannot write " + path);
  f << kCsvHeader << "\n";
  for (const SweepRow& r : report.rows) f << row_line(r) << "\n";
}

SweepReport load_sweep_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_sweep_csv: cannot read " + path);
  std::string line;
  if (!std::getline(f, line) || line != kCsvHeader)
    throw std::runtime_error("load_sweep_csv: bad header in " + path);
  SweepReport report;
  while (std::getline(f, line))
    if (!line.empty()) report.rows.push_back(parse_row(line, path));
  return report;
}

std::vector<SweepAggregate> aggregate_rows(const SweepReport& report) {
  std::vector<SweepAggregate> aggs;
  for (const SweepRow& r : report.rows) {
    auto it = std::find_if(aggs.begin(), aggs.end(),
                           [&](const SweepAggregate& a) { return a.alpha == r.alpha && a.beam == r.beam; });
    if (it == aggs.end()) {
      aggs.push_back(SweepAggregate{});
      it = aggs.end() - 1;
      it->alpha = r.alpha;
      it->beam = r.beam;
    }
    ++it->n;
  }
  // Two passes: means, then population standard deviations.
  for (SweepAggregate& a : aggs) {
    std::vector<const SweepRow*> members;
    for (const SweepRow& r : report.rows)
      if (r.alpha == a.alpha && r.beam == a.beam) members.push_back(&r);
    auto stats = [&](auto field, double& mean, double& sd) {
      double s = 0.0;
      for (auto* m : members) s += m->*field;
      mean = s / members.size();
      double q = 0.0;
      for (auto* m : members) q += (m->*field - mean) * (m->*field - mean);
      sd = std::sqrt(q / members.size());
    };
    stats(&SweepRow::os_rate, a.os_rate_mean, a.os_rate_sd);
    stats(&SweepRow::eos_logprob, a.eos_logprob_mean, a.eos_logprob_sd);
    stats(&SweepRow::eos_rank, a.eos_rank_mean, a.eos_rank_sd);
    stats(&SweepRow::ppl, a.ppl_mean, a.ppl_sd);
    stats(&SweepRow::len_ratio, a.len_ratio_mean, a.len_ratio_sd);
    stats(&SweepRow::bleu, a.bleu_mean, a.bleu_sd);
  }
  std::sort(aggs.begin(), aggs.end(), [](const SweepAggregate& a, const SweepAggregate& b) {
    return a.alpha != b.alpha ? a.alpha < b.alpha : a.beam < b.beam;
  });
  return aggs;
}

SweepResult run_sweep(const CorpusSet& data, const SweepConfig& config, const std::string& out_dir) {
  if (config.num_seeds < 1) throw std::invalid_argument("run_sweep: num_seeds must be >= 1");
  if (config.alphas.empty() || config.beams.empty())
    throw std::invalid_argument("run_sweep: empty alpha or beam grid");
  fs::create_directories(out_dir + "/cells");
  fs::create_directories(out_dir + "/ckpt");

  std::vector<uint64_t> seeds;
  for (int i = 0; i < config.num_seeds; ++i) seeds.push_back(config.train.seed + static_cast<uint64_t>(i));

  SweepResult result;
  std::mutex mu;
  std::atomic<int> trained{0};

  auto pretrain_path = [&](uint64_t seed) {
    return out_dir + "/ckpt/pretrain_s" + std::to_string(seed) + ".ckpt";
  };

  auto ensure_pretrained = [&](uint64_t seed) {
    const std::string path = pretrain_path(seed);
    if (fs::exists(path)) return;
    ModelConfig mc = config.model;
    mc.seed = seed;
    TrainConfig tc = config.train;
    tc.seed = seed;
    TrainResult tr = pretrain(mc, data, tc);
    if (tr.diverged) throw std::runtime_error("pretraining diverged at seed " + std::to_string(seed));
    save_checkpoint(tr.params, path);
    save_train_log(tr.log, out_dir + "/ckpt/pretrain_s" + std::to_string(seed) + ".log.csv");
    ++trained;
  };

  struct Cell {
    double alpha;
    uint64_t seed;
  };
  std::vector<Cell> cells;
  for (double alpha : config.alphas)
    for (uint64_t seed : seeds) cells.push_back(Cell{alpha, seed});

  auto run_cell = [&](const Cell& cell) {
    const std::string tag = "a" + fmt_alpha(cell.alpha) + "_s" + std::to_string(cell.seed);
    const std::string cell_path = out_dir + "/cells/" + tag + ".csv";
    if (fs::exists(cell_path)) {
      SweepReport cached = load_sweep_csv(cell_path);
      std::lock_guard<std::mutex> lock(mu);
      result.report.rows.insert(result.report.rows.end(), cached.rows.begin(), cached.rows.end());
      return;
    }
    try {
      const std::string ft_path = out_dir + "/ckpt/finetune_" + tag + ".ckpt";
      ModelParams tuned;
      if (cell.alpha == 0.0) {
        // α=0 is the pretrained baseline: continuing plain-NLL training past
        // the early-stopped checkpoint only suppresses the premature-eos mass
        // that the α>0 comparisons measure against.
        tuned = load_checkpoint(pretrain_path(cell.seed));
      } else if (fs::exists(ft_path)) {
        tuned = load_checkpoint(ft_path);
      } else {
        ModelParams pre = load_checkpoint(pretrain_path(cell.seed));
        TrainConfig tc = config.train;
        tc.seed = cell.seed;
        tc.label_smoothing = 0.0;
        TrainResult tr = finetune(pre, data, tc, cell.alpha);
        if (tr.diverged) throw std::runtime_error("fine-tuning diverged");
        tuned = tr.params;
        save_checkpoint(tuned, ft_path);
        save_train_log(tr.log, out_dir + "/ckpt/finetune_" + tag + ".log.csv");
        ++trained;
      }
      SweepReport cell_report;
      cell_report.rows = evaluate_checkpoint(tuned, data.test, config.beams, cell.seed);
      save_sweep_csv(cell_report, cell_path);
      std::lock_guard<std::mutex> lock(mu);
      result.report.rows.insert(result.report.rows.end(), cell_report.rows.begin(), cell_report.rows.end());
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(mu);
      result.failures.push_back(CellFailure{cell.alpha, cell.seed, e.what()});
    }
  };

  const int workers = std::max(1, config.workers);
  auto parallel_for = [&](auto&& items, auto&& fn) {
    if (workers == 1) {
      for (const auto& item : items) fn(item);
      return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w)
      threads.emplace_back([&] {
        for (size_t i = next++; i < items.size(); i = next++) fn(items[i]);
      });
    for (auto& t : threads) t.join();
  };

  // Pretraining failures abort the whole sweep: every cell needs them.
  parallel_for(seeds, ensure_pretrained);
  parallel_for(cells, run_cell);

  std::sort(result.report.rows.begin(), result.report.rows.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.alpha != b.alpha) return a.alpha < b.alpha;
    if (a.seed != b.seed) return a.seed < b.seed;
    return a.beam < b.beam;
  });
  save_sweep_csv(result.report, out_dir + "/sweep.csv");
  result.cells_trained = trained.load();
  return result;
}

}  // namespace oversmooth
