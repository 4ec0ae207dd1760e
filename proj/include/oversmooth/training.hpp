#pragma once

#include <map>
#include <string>
#include <vector>

#include "oversmooth/data.hpp"
#include "oversmooth/model.hpp"
#include "oversmooth/objectives.hpp"

namespace oversmooth {

struct TrainConfig {
  double base_lr = 5e-4;
  int warmup = 400;  // paper-scale 4000; desk default
  double beta1 = 0.9;
  double beta2 = 0.98;
  double adam_eps = 1e-8;
  double weight_decay = 1e-4;  // decoupled
  double dropout = 0.3;
  double label_smoothing = 0.1;  // pretraining only
  int batch_size = 32;
  int validate_every = 200;
  int patience = 5;
  int max_updates = 10000;
  double margin = 1e-4;
  uint64_t seed = 1;

  void validate() const;
};

// Linear warmup to base_lr, then inverse-sqrt decay.
double lr_at(long step, const TrainConfig& config);

struct OptimizerState {
  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;
  long step = 0;
};

// Bias-corrected Adam with decoupled weight decay applied before the
// Adam delta. Missing gradient entries count as zero.
void adam_step(ModelParams& params, const Gradients& grads, OptimizerState& state, const TrainConfig& config);

// Improvement means strictly lower by at least 1e-6; stops after
// `patience` consecutive non-improving observations.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}
  // Returns true when training should stop after this observation.
  bool observe(double objective);
  bool improved_last() const { return improved_last_; }
  double best() const { return best_; }

 private:
  int patience_;
  int since_improvement_ = 0;
  double best_ = 0.0;
  bool has_best_ = false;
  bool improved_last_ = false;
};

struct ValRecord {
  long updates = 0;
  double dev_objective = 0.0;
  double dev_ppl = 0.0;
  double dev_os_rate = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};
using TrainLog = std::vector<ValRecord>;

struct TrainResult {
  ModelParams params;  // best-dev checkpoint
  TrainLog log;
  bool diverged = false;
};

// Phase 1: label-smoothed NLL from fresh parameters (alpha = 0).
TrainResult pretrain(const ModelConfig& model_config, const CorpusSet& data, const TrainConfig& config);

// Phase 2: continue from a pretrained checkpoint with the mixed
// objective at `alpha`; label smoothing off.
TrainResult finetune(const ModelParams& pretrained, const CorpusSet& data, const TrainConfig& config,
                     double alpha);

// CSV: updates,dev_objective,dev_ppl,dev_os_rate,lr,seconds
void save_train_log(const TrainLog& log, const std::string& path);

// Dev-set diagnostics shared by validation and evaluation.
struct DevMetrics {
  double objective = 0.0;  // per-sentence mean mixed loss
  double ppl = 0.0;
  double os_rate = 0.0;  // macro mean over sentences
};
DevMetrics evaluate_dev(const ModelParams& params, const Corpus& corpus, const LossConfig& loss);

}  // namespace oversmooth
