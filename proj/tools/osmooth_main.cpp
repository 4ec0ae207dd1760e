// Command-line front end: data generation, training, decoding,
// evaluation, the alpha x beam sweep, and report rendering.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oversmooth/checkpoint.hpp"
#include "oversmooth/data.hpp"
#include "oversmooth/decoding.hpp"
#include "oversmooth/sweep.hpp"
#include "oversmooth/training.hpp"

using namespace oversmooth;

namespace {

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

std::vector<int> parse_ints(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

void add_train_options(CLI::App* cmd, TrainConfig& tc, ModelConfig& mc) {
  cmd->add_option("--seed", tc.seed, "training seed");
  cmd->add_option("--warmup", tc.warmup, "warmup steps");
  cmd->add_option("--lr", tc.base_lr, "base learning rate");
  cmd->add_option("--dropout", tc.dropout, "dropout rate");
  cmd->add_option("--batch", tc.batch_size, "batch size");
  cmd->add_option("--patience", tc.patience, "early-stop patience (validations)");
  cmd->add_option("--validate-every", tc.validate_every, "updates between validations");
  cmd->add_option("--max-updates", tc.max_updates, "update cap");
  cmd->add_option("--weight-decay", tc.weight_decay, "decoupled weight decay rate");
  cmd->add_option("--d-embed", mc.d_embed, "embedding width");
  cmd->add_option("--d-hidden", mc.d_hidden, "recurrent width");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Oversmoothing laboratory for autoregressive sequence models"};
  app.require_subcommand(1);

  // gen-data
  TaskConfig task;
  std::string out_dir;
  auto* gen = app.add_subcommand("gen-data", "generate the synthetic translation corpus");
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--seed", task.seed, "generation seed");
  gen->add_option("--rho", task.truncation_rate, "train-target truncation rate");
  gen->add_option("--vocab", task.vocab_src, "vocabulary size (source and target)");
  gen->add_option("--min-len", task.min_len, "min source content length");
  gen->add_option("--max-len", task.max_len, "max source content length");
  gen->add_option("--train", task.train_size, "train pairs");
  gen->add_option("--dev", task.dev_size, "dev pairs");
  gen->add_option("--test", task.test_size, "test pairs");

  // train
  std::string data_dir, ckpt_out;
  TrainConfig train_cfg;
  ModelConfig model_cfg;
  auto* train_cmd = app.add_subcommand("train", "pretrain with label-smoothed NLL");
  train_cmd->add_option("--data", data_dir, "corpus directory")->required();
  train_cmd->add_option("--out", ckpt_out, "output checkpoint")->required();
  train_cmd->add_option("--label-smoothing", train_cfg.label_smoothing, "label smoothing epsilon");
  add_train_options(train_cmd, train_cfg, model_cfg);

  // finetune
  std::string ckpt_in;
  double alpha = 0.0;
  auto* ft = app.add_subcommand("finetune", "fine-tune with the mixed objective");
  ft->add_option("--ckpt", ckpt_in, "pretrained checkpoint")->required();
  ft->add_option("--data", data_dir, "corpus directory")->required();
  ft->add_option("--alpha", alpha, "oversmoothing loss weight")->required();
  ft->add_option("--margin", train_cfg.margin, "hinge margin");
  ft->add_option("--out", ckpt_out, "output checkpoint")->required();
  add_train_options(ft, train_cfg, model_cfg);

  // decode
  std::string split = "test", decode_out;
  int beam = 5;
  auto* dec = app.add_subcommand("decode", "beam-search a corpus split");
  dec->add_option("--ckpt", ckpt_in, "checkpoint")->required();
  dec->add_option("--data", data_dir, "corpus directory")->required();
  dec->add_option("--split", split, "train|dev|test");
  dec->add_option("--beam", beam, "beam width");
  dec->add_option("--out", decode_out, "output file")->required();

  // evaluate
  std::string beams_csv = "1,5,25,100", eval_out;
  auto* ev = app.add_subcommand("evaluate", "teacher-forced and decoding metrics for one checkpoint");
  ev->add_option("--ckpt", ckpt_in, "checkpoint")->required();
  ev->add_option("--data", data_dir, "corpus directory")->required();
  ev->add_option("--beams", beams_csv, "comma-separated beam widths");
  ev->add_option("--out", eval_out, "output CSV")->required();

  // sweep
  std::string alphas_csv = "0,0.3,0.6,0.9";
  int num_seeds = 3, workers = 1;
  auto* sw = app.add_subcommand("sweep", "full alpha x seed x beam sweep");
  sw->add_option("--data", data_dir, "corpus directory")->required();
  sw->add_option("--alphas", alphas_csv, "comma-separated alpha grid");
  sw->add_option("--seeds", num_seeds, "number of training seeds");
  sw->add_option("--beams", beams_csv, "comma-separated beam widths");
  sw->add_option("--out", out_dir, "sweep output directory")->required();
  sw->add_option("--workers", workers, "concurrent sweep cells");
  add_train_options(sw, train_cfg, model_cfg);

  // report
  std::string sweep_dir;
  auto* rep = app.add_subcommand("report", "render sweep.csv and figure analogues");
  rep->add_option("--sweep", sweep_dir, "sweep directory (containing sweep.csv)")->required();
  rep->add_option("--out", out_dir, "report output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      task.vocab_tgt = task.vocab_src;
      CorpusSet set = generate_corpus(task);
      save_corpus_dir(set, out_dir);
      std::cout << "wrote " << set.train.pairs.size() << "/" << set.dev.pairs.size() << "/"
                << set.test.pairs.size() << " pairs to " << out_dir << " (train fingerprint "
                << set.train.fingerprint << ")\n";
    } else if (train_cmd->parsed()) {
      CorpusSet data = load_corpus_dir(data_dir);
      model_cfg.seed = train_cfg.seed;
      TrainResult r = pretrain(model_cfg, data, train_cfg);
      if (r.diverged) throw std::runtime_error("training diverged");
      save_checkpoint(r.params, ckpt_out);
      save_train_log(r.log, ckpt_out + ".log.csv");
      std::cout << "checkpoint " << ckpt_out << " after " << r.params.update_count << " updates, dev objective "
                << (r.log.empty() ? 0.0 : r.log.back().dev_objective) << "\n";
    } else if (ft->parsed()) {
      CorpusSet data = load_corpus_dir(data_dir);
      ModelParams pre = load_checkpoint(ckpt_in, data.src_vocab, data.tgt_vocab);
      train_cfg.label_smoothing = 0.0;
      TrainResult r = finetune(pre, data, train_cfg, alpha);
      if (r.diverged) throw std::runtime_error("fine-tuning diverged");
      save_checkpoint(r.params, ckpt_out);
      save_train_log(r.log, ckpt_out + ".log.csv");
      std::cout << "checkpoint " << ckpt_out << " (alpha " << alpha << ")\n";
    } else if (dec->parsed()) {
      CorpusSet data = load_corpus_dir(data_dir);
      ModelParams params = load_checkpoint(ckpt_in, data.src_vocab, data.tgt_vocab);
      const Corpus& corpus = split == "train" ? data.train : split == "dev" ? data.dev : data.test;
      DecodeConfig dc;
      dc.beam_width = beam;
      std::ofstream f(decode_out);
      if (!f) throw std::runtime_error("cannot write " + decode_out);
      for (const SentencePair& pair : corpus.pairs) {
        const Hypothesis best = beam_search(params, pair.source, dc).front();
        f << pair.source.size() - 1 << "\t";
        for (size_t i = 0; i + 1 < best.tokens.size(); ++i)
          f << (i ? " " : "") << data.tgt_vocab.surface(best.tokens[i]);
        char lp[32];
        std::snprintf(lp, sizeof lp, "%.9f", best.log_prob);
        f << "\t" << lp << "\t" << (best.force_finished ? 1 : 0) << "\n";
      }
      std::cout << "decoded " << corpus.pairs.size() << " sentences at beam " << beam << "\n";
    } else if (ev->parsed()) {
      CorpusSet data = load_corpus_dir(data_dir);
      ModelParams params = load_checkpoint(ckpt_in, data.src_vocab, data.tgt_vocab);
      SweepReport report;
      report.rows = evaluate_checkpoint(params, data.test, parse_ints(beams_csv), params.config.seed);
      save_sweep_csv(report, eval_out);
      std::cout << "wrote " << report.rows.size() << " rows to " << eval_out << "\n";
    } else if (sw->parsed()) {
      CorpusSet data = load_corpus_dir(data_dir);
      SweepConfig sc;
      sc.alphas = parse_doubles(alphas_csv);
      sc.beams = parse_ints(beams_csv);
      sc.num_seeds = num_seeds;
      sc.model = model_cfg;
      sc.train = train_cfg;
      sc.workers = workers;
      SweepResult r = run_sweep(data, sc, out_dir);
      std::cout << "sweep: " << r.report.rows.size() << " rows, " << r.cells_trained << " cells trained, "
                << r.failures.size() << " failures\n";
      for (const CellFailure& cf : r.failures)
        std::cerr << "ERROR\tcell alpha=" << cf.alpha << " seed=" << cf.seed << ": " << cf.message << "\n";
      if (!r.failures.empty()) return 1;
    } else if (rep->parsed()) {
      SweepReport report = load_sweep_csv(sweep_dir + "/sweep.csv");
      emit_report(report, out_dir);
      std::cout << "report written to " << out_dir << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "ERROR\t" << e.what() << "\n";
    return 1;
  }
  return 0;
}
