#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cubenmt/model.hpp"
#include "cubenmt/vocab.hpp"

namespace cubenmt {

struct TrainConfig {
  float alpha = 0.5f;       // self-normalization penalty weight; 0 trains plain CE
  int batch_size = 16;
  float rho = 0.95f;        // AdaDelta decay constant
  float epsilon = 1e-6f;    // AdaDelta denominator constant
  float clip_norm = 1.0f;   // global L2 gradient clip threshold
  int max_epochs = 20;
  uint32_t seed = 1;
  int d_emb = 32;           // desk-scale defaults
  int d_hid = 64;

  void validate() const;
};

struct SyntheticTask {
  enum class Kind { copy, reverse };
  Kind kind = Kind::copy;
  int vocab_size = 12;  // total size including the three reserved tokens
  int min_len = 1;
  int max_len = 8;
  int count = 2000;
  uint32_t seed = 7;
};

SyntheticTask::Kind task_kind_from_name(const std::string& name);

// Source/target word indices; the target carries no closing EOS, losses and
// the trainer append it.
struct SentencePair {
  std::vector<int> source;
  std::vector<int> target;
};

// Generated corpus with a deterministic 90/10 train/held-out split (the last
// tenth is held out).
struct TaskData {
  Vocabulary vocab;
  std::vector<SentencePair> train;
  std::vector<SentencePair> heldout;
};

TaskData generate_task(const SyntheticTask& task);

std::vector<int> with_eos(std::vector<int> words);

// ---------------------------------------------------------------------------
// Losses. Targets must end with EOS; teacher forcing throughout.
// ---------------------------------------------------------------------------

// Sum over steps of (log Z_j - score of the observed word).
template <class Real>
Real ce_loss(const ModelParamsT<Real>& p, const std::vector<int>& src,
             const std::vector<int>& tgt_with_eos);

// CE plus alpha * (log Z_j)^2 per step, pulling the normalizer toward 1.
template <class Real>
Real sn_loss(const ModelParamsT<Real>& p, const std::vector<int>& src,
             const std::vector<int>& tgt_with_eos, Real alpha);

// Forward and backward for one pair; gradients accumulate into grad (same
// layout as the parameters). alpha = 0 reproduces ce_loss exactly.
template <class Real>
Real seq_loss_grad(const ModelParamsT<Real>& p, const std::vector<int>& src,
                   const std::vector<int>& tgt_with_eos, Real alpha, ModelParamsT<Real>& grad);

// Scales all gradients so the global L2 norm is at most max_norm. Returns the
// pre-clip norm.
template <class Real>
Real clip_global_norm(ModelParamsT<Real>& grad, Real max_norm);

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;             // mean loss per pair
  double heldout_mean_abs_log_z = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> epochs;
  TaskData data;
};

// Deterministic given (config, task): init U[-0.1,0.1], batched gradients,
// global-norm clipping, AdaDelta updates. Throws TrainingError on divergence.
TrainResult train(const TrainConfig& config, const SyntheticTask& task);

// Same, for an existing corpus.
ModelParams train_on(const TrainConfig& config, const TaskData& data,
                     std::vector<EpochStats>* stats = nullptr);

struct LogZStats {
  double mean_abs = 0.0;
  double max_abs = 0.0;
  int64_t steps = 0;
};

// |log Z| statistics over all teacher-forced steps of a corpus.
template <class Real>
LogZStats log_partition_stats(const ModelParamsT<Real>& p,
                              const std::vector<SentencePair>& corpus);

// Fraction of pairs whose greedy decode reproduces the target exactly.
double exact_match_rate(const ModelParams& p, const std::vector<SentencePair>& corpus,
                        ScoreMode mode = ScoreMode::normalized);

}  // namespace cubenmt
