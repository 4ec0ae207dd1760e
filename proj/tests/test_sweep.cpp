#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "oversmooth/objectives.hpp"
#include "oversmooth/sweep.hpp"

using namespace oversmooth;
namespace fs = std::filesystem;

namespace {

CorpusSet micro_data() {
  TaskConfig t;
  t.vocab_src = 12;
  t.vocab_tgt = 12;
  t.min_len = 2;
  t.max_len = 5;
  t.train_size = 24;
  t.dev_size = 8;
  t.test_size = 8;
  t.seed = 4;
  return generate_corpus(t);
}

SweepConfig micro_sweep() {
  SweepConfig c;
  c.alphas = {0.0};
  c.num_seeds = 1;
  c.beams = {1};
  c.model.d_embed = 8;
  c.model.d_hidden = 8;
  c.train.warmup = 4;
  c.train.batch_size = 8;
  c.train.validate_every = 3;
  c.train.patience = 2;
  c.train.max_updates = 6;
  c.train.dropout = 0.0;
  c.train.seed = 1;
  return c;
}

std::string fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("osmooth_sweep_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d.string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

SweepRow make_row(double alpha, uint64_t seed, int beam, double os_rate, double bleu) {
  SweepRow r;
  r.alpha = alpha;
  r.seed = seed;
  r.beam = beam;
  r.os_rate = os_rate;
  r.eos_logprob = -2.0;
  r.eos_rank = 0.5;
  r.ppl = 4.0;
  r.len_ratio = 1.0;
  r.bleu = bleu;
  return r;
}

}  // namespace

TEST_CASE("sweep csv round trip") {
  SweepReport report;
  report.rows.push_back(make_row(0.0, 1, 5, 0.25, 90.0));
  report.rows.push_back(make_row(0.9, 2, 100, 0.05, 88.5));
  const std::string path = fresh_dir("csv") + "/sweep.csv";
  save_sweep_csv(report, path);

  SUBCASE("header plus one line per row") {
    std::ifstream f(path);
    std::string line;
    REQUIRE(std::getline(f, line));
    CHECK(line == "alpha,seed,beam,os_rate,eos_logprob,eos_rank,ppl,len_ratio,bleu");
    int rows = 0;
    while (std::getline(f, line)) rows += !line.empty();
    CHECK(rows == 2);
  }
  SUBCASE("round trip preserves every field") {
    SweepReport back = load_sweep_csv(path);
    REQUIRE(back.rows.size() == 2);
    CHECK(back.rows[0].alpha == 0.0);
    CHECK(back.rows[0].seed == 1);
    CHECK(back.rows[0].beam == 5);
    CHECK(back.rows[0].os_rate == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(back.rows[1].bleu == doctest::Approx(88.5).epsilon(1e-12));
  }
  SUBCASE("bad header rejected") {
    const std::string bad = fresh_dir("csvbad") + "/sweep.csv";
    std::ofstream(bad) << "not,a,header\n";
    CHECK_THROWS_AS(load_sweep_csv(bad), std::runtime_error);
  }
}

TEST_CASE("aggregate_rows computes means and population deviations per (alpha, beam)") {
  SweepReport report;
  report.rows.push_back(make_row(0.0, 1, 5, 0.30, 90.0));
  report.rows.push_back(make_row(0.0, 2, 5, 0.10, 94.0));
  report.rows.push_back(make_row(0.9, 1, 5, 0.05, 89.0));
  std::vector<SweepAggregate> aggs = aggregate_rows(report);
  REQUIRE(aggs.size() == 2);
  CHECK(aggs[0].alpha == 0.0);
  CHECK(aggs[0].n == 2);
  CHECK(aggs[0].os_rate_mean == doctest::Approx(0.20).epsilon(1e-12));
  CHECK(aggs[0].os_rate_sd == doctest::Approx(0.10).epsilon(1e-12));
  CHECK(aggs[0].bleu_mean == doctest::Approx(92.0).epsilon(1e-12));
  CHECK(aggs[1].alpha == 0.9);
  CHECK(aggs[1].n == 1);
  CHECK(aggs[1].os_rate_sd == 0.0);
}

TEST_CASE("evaluate_checkpoint") {
  CorpusSet data = micro_data();
  ModelConfig mc;
  mc.d_embed = 8;
  mc.d_hidden = 8;
  mc.vocab_src = data.src_vocab.size();
  mc.vocab_tgt = data.tgt_vocab.size();
  mc.seed = 2;
  ModelParams params = init_params(mc);
  params.alpha = 0.3;

  std::vector<SweepRow> rows = evaluate_checkpoint(params, data.test, {1, 2}, 7);
  REQUIRE(rows.size() == 2);

  SUBCASE("row keys and shared teacher-forced metrics") {
    CHECK(rows[0].alpha == 0.3);
    CHECK(rows[0].seed == 7);
    CHECK(rows[0].beam == 1);
    CHECK(rows[1].beam == 2);
    CHECK(rows[0].os_rate == rows[1].os_rate);
    CHECK(rows[0].ppl == rows[1].ppl);
  }
  SUBCASE("deterministic across calls") {
    std::vector<SweepRow> again = evaluate_checkpoint(params, data.test, {1, 2}, 7);
    for (size_t i = 0; i < rows.size(); ++i) {
      CHECK(rows[i].os_rate == again[i].os_rate);
      CHECK(rows[i].bleu == again[i].bleu);
      CHECK(rows[i].len_ratio == again[i].len_ratio);
    }
  }
  SUBCASE("rate equals independent per-sentence recomputation") {
    double rate = 0.0;
    for (const SentencePair& pair : data.test.pairs)
      rate += oversmoothing_rate(sequence_log_probs(params, pair), pair.target).rate;
    rate /= data.test.pairs.size();
    CHECK(rows[0].os_rate == doctest::Approx(rate).epsilon(1e-12));
  }
}

TEST_CASE("run_sweep on a micro configuration") {
  CorpusSet data = micro_data();
  SweepConfig cfg = micro_sweep();
  const std::string dir = fresh_dir("run");

  SweepResult first = run_sweep(data, cfg, dir);
  REQUIRE(first.failures.empty());
  REQUIRE(first.report.rows.size() == 1);  // 1 alpha x 1 seed x 1 beam
  CHECK(first.cells_trained > 0);
  CHECK(fs::exists(dir + "/sweep.csv"));

  SUBCASE("rerun is idempotent: no retraining, identical csv bytes") {
    const std::string bytes = slurp(dir + "/sweep.csv");
    SweepResult second = run_sweep(data, cfg, dir);
    CHECK(second.failures.empty());
    CHECK(second.cells_trained == 0);
    CHECK(second.report.rows.size() == 1);
    CHECK(slurp(dir + "/sweep.csv") == bytes);
  }
  SUBCASE("a fresh directory reproduces the same rows") {
    const std::string dir2 = fresh_dir("run2");
    SweepResult again = run_sweep(data, cfg, dir2);
    REQUIRE(again.failures.empty());
    CHECK(slurp(dir2 + "/sweep.csv") == slurp(dir + "/sweep.csv"));
  }
}

TEST_CASE("emit_report renders the csv and chart set") {
  SweepReport report;
  for (uint64_t seed : {1ull, 2ull})
    for (double alpha : {0.0, 0.5})
      for (int beam : {1, 5})
        report.rows.push_back(make_row(alpha, seed, beam, 0.3 - 0.2 * alpha, 90.0 - 5.0 * alpha));
  const std::string dir = fresh_dir("report");
  emit_report(report, dir);

  CHECK(fs::exists(dir + "/sweep.csv"));
  for (const char* name : {"os_rate_vs_alpha.svg", "eos_logprob_vs_alpha.svg", "eos_rank_vs_alpha.svg",
                           "ppl_vs_alpha.svg", "len_ratio_vs_alpha.svg", "bleu_vs_alpha.svg"}) {
    const std::string svg = slurp(dir + "/" + name);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
  }
  SweepReport back = load_sweep_csv(dir + "/sweep.csv");
  CHECK(back.rows.size() == report.rows.size());
}
