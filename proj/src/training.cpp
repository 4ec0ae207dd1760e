#include "oversmooth/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace oversmooth {

void TrainConfig::validate() const {
  if (warmup < 1) throw std::invalid_argument("TrainConfig: warmup must be >= 1");
  if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (validate_every < 1) throw std::invalid_argument("TrainConfig: validate_every must be >= 1");
  if (max_updates < 1) throw std::invalid_argument("TrainConfig: max_updates must be >= 1");
  if (base_lr < 0 || weight_decay < 0 || dropout < 0 || label_smoothing < 0 || margin < 0 || adam_eps <= 0)
    throw std::invalid_argument("TrainConfig: rates must be non-negative");
  if (dropout >= 1.0 || label_smoothing >= 1.0) throw std::invalid_argument("TrainConfig: rate out of range");
}

double lr_at(long step, const TrainConfig& config) {
  if (step < 1) throw std::invalid_argument("lr_at: step must be >= 1");
  const double s = static_cast<double>(step), w = static_cast<double>(config.warmup);
  return config.base_lr * std::min(s / w, std::sqrt(w / s));
}

void adam_step(ModelParams& params, const Gradients& grads, OptimizerState& state, const TrainConfig& config) {
  ++state.step;
  const double lr = lr_at(state.step, config);
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));

  for (auto& [name, theta] : params.tensors) {
    const Tensor* g = nullptr;
    if (auto it = grads.find(name); it != grads.end()) {
      g = &it->second;
      if (!g->same_shape(theta))
        throw std::invalid_argument("adam_step: gradient shape mismatch for " + name);
      if (!g->all_finite()) throw std::runtime_error("adam_step: non-finite gradient for " + name);
    }
    Tensor& m = state.first_moment.try_emplace(name, Tensor::zeros(theta.rows, theta.cols)).first->second;
    Tensor& v = state.second_moment.try_emplace(name, Tensor::zeros(theta.rows, theta.cols)).first->second;

    for (size_t i = 0; i < theta.v.size(); ++i) {
      const double gi = g ? g->v[i] : 0.0;
      theta.v[i] -= lr * config.weight_decay * theta.v[i];
      m.v[i] = config.beta1 * m.v[i] + (1.0 - config.beta1) * gi;
      v.v[i] = config.beta2 * v.v[i] + (1.0 - config.beta2) * gi * gi;
      const double mhat = m.v[i] / bc1;
      const double vhat = v.v[i] / bc2;
      theta.v[i] -= lr * mhat / (std::sqrt(vhat) + config.adam_eps);
    }
  }
  params.update_count = static_cast<uint64_t>(state.step);
}

bool EarlyStopper::observe(double objective) {
  improved_last_ = !has_best_ || objective < best_ - 1e-6;
  if (improved_last_) {
    best_ = objective;
    has_best_ = true;
    since_improvement_ = 0;
    return false;
  }
  return ++since_improvement_ >= patience_;
}

DevMetrics evaluate_dev(const ModelParams& params, const Corpus& corpus, const LossConfig& loss) {
  if (corpus.pairs.empty()) throw std::invalid_argument("evaluate_dev: empty corpus");
  DevMetrics m;
  double total_lp = 0.0;
  long total_tokens = 0;
  for (const SentencePair& pair : corpus.pairs) {
    const Tensor slp = sequence_log_probs(params, pair);
    m.objective += mixed_loss(slp, pair.target, loss);
    m.os_rate += oversmoothing_rate(slp, pair.target).rate;
    for (int t = 0; t < slp.rows; ++t) total_lp += slp.at(t, pair.target[t]);
    total_tokens += slp.rows;
  }
  const double n = static_cast<double>(corpus.pairs.size());
  m.objective /= n;
  m.os_rate /= n;
  m.ppl = std::exp(-total_lp / total_tokens);
  return m;
}

namespace {

TrainResult run_training(ModelParams params, const CorpusSet& data, const TrainConfig& cfg, double alpha,
                         double label_smoothing) {
  cfg.validate();
  if (data.train.pairs.empty()) throw std::invalid_argument("train: empty training corpus");
  LossConfig loss{alpha, cfg.margin, label_smoothing};
  loss.validate();

  params.config.dropout_rate = cfg.dropout;
  params.alpha = alpha;

  TrainResult result;
  result.params = params;  // fallback if no validation ever runs
  OptimizerState opt;
  EarlyStopper stopper(cfg.patience);
  Rng dropout_rng(Rng::mix(cfg.seed, 0x6472u));

  const auto t0 = std::chrono::steady_clock::now();
  long updates = 0;
  bool stop = false;

  for (int epoch = 0; !stop; ++epoch) {
    for (const auto& batch : epoch_batches(data.train.pairs.size(), cfg.batch_size, cfg.seed, epoch)) {
      Gradients grads;
      try {
        Tape tape;
        TapedModel model(tape, params, /*train=*/true, &dropout_rng);
        Var total{};
        bool first = true;
        for (int idx : batch) {
          const SentencePair& pair = data.train.pairs[idx];
          Var slp = model.sequence_log_probs(pair);
          Var l = taped_mixed_loss(tape, slp, pair.target, loss);
          total = first ? l : tape.add(total, l);
          first = false;
        }
        total = tape.scale(total, 1.0 / static_cast<double>(batch.size()));
        grads = tape.backward(total);
        adam_step(params, grads, opt, cfg);
      } catch (const std::runtime_error&) {
        // Divergence (non-finite loss or gradient): abort with the last
        // good checkpoint.
        result.diverged = true;
        return result;
      }
      ++updates;

      if (updates % cfg.validate_every == 0 || updates >= cfg.max_updates) {
        const DevMetrics dev = evaluate_dev(params, data.dev, loss);
        ValRecord rec;
        rec.updates = updates;
        rec.dev_objective = dev.objective;
        rec.dev_ppl = dev.ppl;
        rec.dev_os_rate = dev.os_rate;
        rec.lr = lr_at(updates, cfg);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(rec);

        const bool should_stop = stopper.observe(dev.objective);
        if (stopper.improved_last()) result.params = params;
        if (should_stop || updates >= cfg.max_updates) {
          stop = true;
          break;
        }
      }
    }
  }
  return result;
}

}  // namespace

TrainResult pretrain(const ModelConfig& model_config, const CorpusSet& data, const TrainConfig& config) {
  ModelConfig mc = model_config;
  mc.vocab_src = data.src_vocab.size();
  mc.vocab_tgt = data.tgt_vocab.size();
  return run_training(init_params(mc), data, config, /*alpha=*/0.0, config.label_smoothing);
}

TrainResult finetune(const ModelParams& pretrained, const CorpusSet& data, const TrainConfig& config,
                     double alpha) {
  if (alpha < 0.0 || alpha >= 1.0) throw std::invalid_argument("finetune: alpha must be in [0,1)");
  return run_training(pretrained, data, config, alpha, /*label_smoothing=*/0.0);
}

void save_train_log(const TrainLog& log, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_train_log: cannot write " + path);
  f << "updates,dev_objective,dev_ppl,dev_os_rate,lr,seconds\n";
  char buf[256];
  for (const ValRecord& r : log) {
    std::snprintf(buf, sizeof buf, "%ld,%.9f,%.9f,%.9f,%.9g,%.3f\n", r.updates, r.dev_objective, r.dev_ppl,
                  r.dev_os_rate, r.lr, r.seconds);
    f << buf;
  }
}

}  // namespace oversmooth
