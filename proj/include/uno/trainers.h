// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

// Training procedures for the image-wide models:
//   TrainClosed       K-way cross-entropy on inliers
//   FinetuneReal      append a zero-initialized negative class, then K+1-way
//                     cross-entropy on balanced batches of inliers and real
//                     negatives
//   TwoStepTrain      step 1: alternate a classifier update (cross-entropy +
//                     beta * JSD on detached flow samples) with a flow update
//                     (MLE + beta * JSD through reparametrized samples);
//                     step 2: freeze the flow, append the negative class and
//                     fine-tune on balanced batches whose negatives are fresh
//                     flow samples
//   NaiveJointTrain   single phase: K+1-way cross-entropy with flow samples as
//                     negatives, optimized together with the flow loss
//
// All entry points are deterministic given the config (including seed).

#ifndef UNO_TRAINERS_H_
#define UNO_TRAINERS_H_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "uno/autodiff.h"
#include "uno/checkpoint.h"
#include "uno/flow.h"
#include "uno/model.h"
#include "uno/optim.h"
#include "uno/rng.h"
#include "uno/synth.h"

namespace uno::train {

enum class RemainderRule { kError, kTruncate };
enum class FlowOptimizer { kSgd, kAdam };
std::string_view FlowOptimizerName(FlowOptimizer o);
FlowOptimizer ParseFlowOptimizer(std::string_view name);
std::string_view RemainderRuleName(RemainderRule r);
RemainderRule ParseRemainderRule(std::string_view name);

struct TrainConfig {
  std::uint64_t seed = 0;
  std::size_t steps = 600;
  std::size_t batch_size = 64;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  // lr is multiplied by decay_factor from step decay_after on (0 disables).
  std::size_t decay_after = 0;
  double decay_factor = 0.1;

  double beta = 0.03;
  FlowOptimizer flow_optimizer = FlowOptimizer::kAdam;
  double flow_lr = 1e-3;
  double flow_momentum = 0.9;          // sgd only
  std::size_t flow_batch = 64;         // flow samples per joint step
  std::size_t flow_pretrain_steps = 0; // MLE-only steps before step 1
  double flow_clip_norm = 10.0;        // flow gradient norm cap, 0 disables

  // Fine-tuning (finetune-real and step 2 of two-step).
  std::size_t finetune_steps = 600;
  double backbone_lr = 1e-4;
  double head_lr = 0.01;
  RemainderRule remainder = RemainderRule::kError;
  // Negatives per batch; unset means batch_size / (K+1) like every class.
  std::optional<std::size_t> negatives_per_batch;

  std::size_t log_every = 10;

  void Validate() const;
};

Json ToJson(const TrainConfig& cfg);
// Overlays keys from `j` onto `base`; unknown keys are rejected by name.
TrainConfig TrainConfigFromJson(const Json& j, TrainConfig base = {});

struct LossBreakdown {
  double l_cls = 0.0;
  double l_mle = 0.0;
  double l_jsd = 0.0;
  double l_flow = 0.0;  // l_mle + beta * l_jsd
};

struct LogRow {
  std::size_t step = 0;
  std::string phase;
  LossBreakdown loss;
  double accuracy = 0.0;  // inlier accuracy on the step's batch
  std::optional<double> collapse_fraction;
};

struct TrainLog {
  std::vector<LogRow> rows;
  // step,phase,l_cls,l_mle,l_jsd,l_flow,accuracy[,collapse_fraction]
  std::string Csv() const;
};

// Inliers with labels 1..K plus negatives that all carry label K+1.
struct MixedDataset {
  std::size_t k = 0;
  Tensor inlier_x;
  std::vector<int> inlier_y;
  Tensor negative_x;  // may have zero rows when negatives are synthesized

  void Validate() const;
  static MixedDataset FromBundle(const synth::DatasetBundle& b);
};

// Per-class sample counts for a balanced batch over `num_classes` classes.
// Throws ConfigError when batch_size is not divisible and the rule is kError.
std::size_t PerClassCount(std::size_t batch_size, std::size_t num_classes,
                          RemainderRule rule);

// Draws without replacement within each class and reshuffles a class when it
// runs out, so every batch holds exactly counts[c] samples of label c+1.
class BalancedSampler {
 public:
  BalancedSampler(const std::vector<int>& labels,
                  const std::vector<std::size_t>& counts, Rng rng);

  // Indices into `labels`, grouped by class in label order.
  std::vector<std::size_t> Next();

 private:
  std::vector<std::vector<std::size_t>> pools_;
  std::vector<std::size_t> cursor_;
  std::vector<std::size_t> counts_;
  Rng rng_;
};

// Rows of `x` selected by `idx`.
Tensor Gather(const Tensor& x, const std::vector<std::size_t>& idx);
std::vector<int> Gather(const std::vector<int>& y,
                        const std::vector<std::size_t>& idx);
Tensor ConcatRows(const Tensor& a, const Tensor& b);

// Mean negative log posterior of 1-based labels under [batch, C] logits.
grad::Var CrossEntropy(grad::Tape& tape, grad::Var logits,
                       const std::vector<int>& labels);
double CrossEntropy(const Tensor& logits, const std::vector<int>& labels);

// Batch mean of JSD(U, softmax(logits)) with U uniform over the columns.
grad::Var JsdUniform(grad::Var logits);
// JSD(U, p) for a probability vector p (natural log, 0 log 0 = 0).
double JsdUniform(std::span<const double> p);

// Fraction of rows whose predicted label equals y (argmax over the first
// `limit` columns if non-zero).
double BatchAccuracy(const Tensor& logits, const std::vector<int>& y,
                     std::size_t limit = 0);

double ScheduledLr(double base, std::size_t step, const TrainConfig& cfg);

void TrainClosed(net::OpenSetModel& model, const Tensor& x,
                 const std::vector<int>& y, const TrainConfig& cfg,
                 TrainLog* log = nullptr);

net::OpenSetModel FinetuneReal(const net::OpenSetModel& pretrained,
                               const MixedDataset& data, const TrainConfig& cfg,
                               TrainLog* log = nullptr);

// Optimizer state for the alternating updates of step 1.
struct JointState {
  grad::SgdMomentum classifier;
  std::unique_ptr<grad::Optimizer> flow;
  explicit JointState(const TrainConfig& cfg);
};

std::unique_ptr<grad::Optimizer> MakeFlowOptimizer(const TrainConfig& cfg);

// One update of L_cls + L_flow on a single tape: the classifier steps with lr
// and the flow with flow_lr, and the JSD term reaches both through the
// reparametrized samples. The classifier must be K-way. `noise` is base noise
// [m, dim].
LossBreakdown JointStep(net::OpenSetModel& classifier, flow::FlowModel& flow,
                        const Tensor& x, const std::vector<int>& y,
                        const Tensor& noise, const TrainConfig& cfg,
                        JointState& state, std::size_t step,
                        double* accuracy = nullptr);

// MLE-only flow updates on the inliers.
void PretrainFlow(flow::FlowModel& flow, const Tensor& x, const TrainConfig& cfg,
                  TrainLog* log = nullptr);

struct TrainResult {
  net::OpenSetModel model;
  flow::FlowModel flow;
  TrainLog log;
};

net::FeatureConfig DefaultFeatures();

TrainResult TwoStepTrain(const MixedDataset& data, const TrainConfig& cfg,
                         const net::FeatureConfig& features = DefaultFeatures(),
                         const flow::FlowConfig& flow_cfg = {});

// The step-2 half of TwoStepTrain on an existing step-1 model and flow.
net::OpenSetModel FinetuneSynthetic(const net::OpenSetModel& step1,
                                    flow::FlowModel& flow,
                                    const MixedDataset& data,
                                    const TrainConfig& cfg,
                                    TrainLog* log = nullptr);

TrainResult NaiveJointTrain(const MixedDataset& data, const TrainConfig& cfg,
                            const net::FeatureConfig& features = DefaultFeatures(),
                            const flow::FlowConfig& flow_cfg = {});

// Fraction of `samples` whose posterior for the negative class exceeds
// `threshold`.
double CollapseFraction(const net::OpenSetModel& model, const Tensor& samples,
                        double threshold = 0.99);

// Mean Euclidean distance over all pairs of rows.
double MeanPairwiseDistance(const Tensor& z);

}  // namespace uno::train

#endif  // UNO_TRAINERS_H_
