// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

// Toy mask-level recognition.
//
// A per-pixel MLP maps scene inputs to embeddings E [P, F]. N learnable
// queries q [N, F] produce mask logits q E^T and sigmoid masks m [N, P]. Each
// query's pre-logit z_i comes from an MLP over (q_i, mask-average of E under
// m_i, mean mask value), and a linear head classifies z_i over the dense
// taxonomy. Before fine-tuning the head is K+1-way (inliers plus no-object);
// ExtendHead inserts the negative class at column K.
//
// Training matches queries to ground-truth segments with the Hungarian
// algorithm. A matched query learns its segment's class and mask; an
// unmatched query learns the no-object class.

#ifndef UNO_MASK_SEG_H_
#define UNO_MASK_SEG_H_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uno/autodiff.h"
#include "uno/checkpoint.h"
#include "uno/model.h"
#include "uno/nn.h"
#include "uno/rng.h"
#include "uno/score.h"
#include "uno/synth.h"
#include "uno/trainers.h"

namespace uno::seg {

struct DenseModelConfig {
  std::size_t in_dim = 4;         // F0
  std::size_t pixel_hidden = 32;
  std::size_t embed_dim = 16;     // F
  std::size_t num_queries = 8;    // N
  std::size_t mask_hidden = 32;
  std::size_t feature_dim = 16;   // d
  double query_init_sd = 0.1;
};

Json ToJson(const DenseModelConfig& c);

// Forward pass recorded on a tape.
struct DenseForward {
  grad::Var embed;        // [P, F]
  grad::Var mask_logits;  // [N, P]
  grad::Var masks;        // [N, P]
  grad::Var prelogits;    // [N, d]
  grad::Var logits;       // [N, C]
};

class DenseModel {
 public:
  // The head starts in the dense-closed layout (C = K+1).
  DenseModel(const DenseModelConfig& config, std::size_t k, Rng& rng);

  DenseForward Forward(grad::Tape& tape, const Tensor& pixels) const;

  const DenseModelConfig& config() const { return config_; }
  std::size_t num_inlier() const { return head.num_inlier(); }

  std::vector<grad::Parameter*> backbone_parameters();
  std::vector<grad::Parameter*> parameters();
  std::vector<const grad::Parameter*> parameters() const;

  nn::Mlp pixel_mlp;
  grad::Parameter queries;  // [N, F]
  nn::Mlp mask_mlp;
  net::ClassifierHead head;

 private:
  DenseModelConfig config_;
};

// Predictions for one scene.
struct MaskSet {
  std::size_t k = 0;
  net::HeadLayout layout = net::HeadLayout::kDenseClosed;
  std::size_t height = 0;
  std::size_t width = 0;
  Tensor queries;      // [N, F]
  Tensor embed;        // [P, F]
  Tensor mask_logits;  // [N, P]
  Tensor masks;        // [N, H, W]
  Tensor prelogits;    // [N, d]
  Tensor logits;       // [N, C]
  Tensor posteriors;   // [N, C]

  std::size_t num_queries() const { return masks.dim(0); }
  std::size_t num_pixels() const { return height * width; }
};

MaskSet PredictMasks(const DenseModel& model, const synth::DenseScene& scene);

// Per-pixel argmax over inlier classes 1..K of sum_i m_i[p] P(k | z_i). Ties
// go to the lowest class index. Returns H*W labels in row-major order.
std::vector<int> SemanticSegment(const MaskSet& set);

// One training target: a class and the pixels that carry it.
struct Segment {
  int label = 0;
  std::vector<std::size_t> pixels;
};

// One segment per label present in the scene (void excluded), in label order.
std::vector<Segment> SemanticTargets(const synth::DenseScene& scene);
std::vector<Segment> ToSegments(const std::vector<synth::Region>& regions);

// Logit column of a 1-based target label under `layout`. Throws
// ContractError for labels outside the head's taxonomy (for example K+1
// before the negative class exists).
std::size_t ColumnForLabel(net::HeadLayout layout, std::size_t k, int label);

// cost[t, i] = -log P(label_t | z_i) + mean BCE(m_i, 1[segment t]) over the
// non-void pixels. `valid` marks pixels that enter the BCE (empty = all).
Tensor MatchingCost(const MaskSet& set, const std::vector<Segment>& targets,
                    const std::vector<bool>& valid = {});
// The same cost with the class part supplied directly as log-probabilities
// [T, N] of each target's class under each query.
Tensor MatchingCostFromLogProbs(const Tensor& target_log_probs,
                                const Tensor& mask_logits,
                                const std::vector<Segment>& targets,
                                const std::vector<bool>& valid = {});

struct Assignment {
  std::vector<std::size_t> query_for_target;  // size T
  std::vector<int> target_for_query;          // size N, -1 if unmatched
  double cost = 0.0;
};

// Minimum-cost assignment of every row (target) of a [T, N] cost matrix to a
// distinct column (query). Throws ContractError if T > N.
Assignment Hungarian(const Tensor& cost);

// Hungarian matching of predicted masks to targets. Throws ContractError when
// there are more targets than queries.
Assignment MatchMasks(const MaskSet& set, const std::vector<Segment>& targets,
                      const std::vector<bool>& valid = {});

// Class term: mean over queries of the cross-entropy to the matched label or
// the no-object class. Mask term: mean over matched queries of the mean BCE
// over valid pixels. Negative pixels count as background for inlier masks.
struct DenseLoss {
  double class_term = 0.0;
  double mask_term = 0.0;
  double total = 0.0;  // class_term + mask_term
};

struct DenseLossVars {
  grad::Var class_term;
  grad::Var mask_term;
  grad::Var total;
};

DenseLossVars DenseLossOnTape(grad::Tape& tape, const DenseModel& model,
                              const DenseForward& fwd,
                              const std::vector<Segment>& targets,
                              const Assignment& assignment,
                              const std::vector<bool>& valid);

// Loss of the model's current predictions on a scene (no update).
DenseLoss EvaluateDenseLoss(const DenseModel& model,
                            const synth::DenseScene& scene);

struct DenseTrainConfig {
  std::uint64_t seed = 0;
  DenseModelConfig model;
  std::size_t closed_steps = 1500;   // one scene per step
  std::size_t finetune_steps = 3000;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double backbone_lr = 0.01;
  double head_lr = 0.01;
  std::size_t log_every = 25;

  void Validate() const;
};

Json ToJson(const DenseTrainConfig& c);
DenseTrainConfig DenseTrainConfigFromJson(const Json& j, DenseTrainConfig base = {});

struct DenseLogRow {
  std::size_t step = 0;
  std::string phase;
  DenseLoss loss;
  double pixel_accuracy = 0.0;  // inlier pixels of the step's scene
};

struct DenseTrainLog {
  std::vector<DenseLogRow> rows;
  // step,phase,class_term,mask_term,total,pixel_accuracy
  std::string Csv() const;
};

// One optimizer step on one scene. `groups` pairs parameter lists with
// learning rates. Throws ContractError if a label leaves the taxonomy of
// the model's head.
DenseLoss DenseTrainStep(DenseModel& model, const synth::DenseScene& scene,
                         grad::SgdMomentum& opt,
                         const std::vector<std::pair<std::vector<grad::Parameter*>,
                                                     double>>& groups);

// Closed-set training on clean scenes (labels 1..K only).
DenseModel TrainDenseClosed(const synth::DenseBundle& bundle,
                            const DenseTrainConfig& cfg,
                            DenseTrainLog* log = nullptr);

// Inserts the negative class and fine-tunes on mixed-content scenes: every
// step pastes fresh patches drawn from the seen negative pool onto a clean
// training scene.
DenseModel FinetuneDenseUno(const DenseModel& closed,
                            const synth::DenseBundle& bundle,
                            const DenseTrainConfig& cfg,
                            DenseTrainLog* log = nullptr);

struct DenseTrainResult {
  DenseModel model;
  DenseTrainLog log;
};

DenseTrainResult TrainDense(const synth::DenseBundle& bundle,
                            const DenseTrainConfig& cfg);

// Per-pixel score maps [H, W] for a dense UNO model.
score::DenseScoreMaps DenseScores(const DenseModel& model,
                                  const synth::DenseScene& scene,
                                  score::NoObjectPolicy policy =
                                      score::NoObjectPolicy::kInclude);

struct DenseEvaluation {
  double pixel_accuracy = 0.0;  // inlier pixels only
  double miou = 0.0;
  double ap_uno = 0.0;
  double ap_unc = 0.0;
  double ap_no = 0.0;
  double auroc_uno = 0.0;
  double fpr95_uno = 0.0;
  std::size_t n_outlier_pixels = 0;
  std::size_t n_inlier_pixels = 0;
};

// Inlier accuracy and mIoU from SemanticSegment; outlier metrics over all
// non-void pixels with K+1 pixels as positives.
DenseEvaluation EvaluateDense(const DenseModel& model,
                              const std::vector<synth::DenseScene>& scenes);

void SaveDenseModel(const std::filesystem::path& dir, const DenseModel& model);
DenseModel LoadDenseModel(const std::filesystem::path& dir);

// ------------------------------------------------------------- OOD head --

// Alternative formulation: a dense-closed model keeps its K+1-way classifier
// and a separate 3-way head over the same pre-logits predicts inlier /
// outlier / no-object.
inline constexpr std::size_t kOodInlier = 0;
inline constexpr std::size_t kOodOutlier = 1;
inline constexpr std::size_t kOodNoObject = 2;

struct DenseOodModel {
  DenseModel base;          // head stays dense-closed
  net::ClassifierHead ood;  // 3 outputs
};

DenseOodModel AttachOodHead(const DenseModel& closed, Rng& rng);

// Fine-tunes the 3-way head (and the backbone at backbone_lr) on
// mixed-content scenes. The class head only receives gradients from queries
// matched to inlier segments or left unmatched.
DenseOodModel FinetuneDenseOodHead(const DenseModel& closed,
                                   const synth::DenseBundle& bundle,
                                   const DenseTrainConfig& cfg,
                                   DenseTrainLog* log = nullptr);

// s_no from the OOD head's outlier posterior, s_unc from the class head over
// K inlier classes and no-object, both aggregated over masks.
score::DenseScoreMaps OodHeadScores(const DenseOodModel& model,
                                    const synth::DenseScene& scene);

DenseEvaluation EvaluateDenseOod(const DenseOodModel& model,
                                 const std::vector<synth::DenseScene>& scenes);

// Image-wide variant: a K-way classifier plus a binary inlier/outlier head on
// its pre-logits.
struct BinaryOodModel {
  net::OpenSetModel closed;  // K-way head
  net::ClassifierHead ood;   // 2 outputs
};

// Trains the binary head on inliers and real negatives with balanced batches;
// the K-way loss sees inliers only.
BinaryOodModel FinetuneBinaryOod(const net::OpenSetModel& pretrained,
                                 const train::MixedDataset& data,
                                 const train::TrainConfig& cfg);

// s_no = P(outlier), s_unc = -max_k softmax over the K-way head.
std::vector<score::ScoreTriple> BinaryOodScores(const BinaryOodModel& model,
                                                const Tensor& x);

}  // namespace uno::seg

#endif  // UNO_MASK_SEG_H_
