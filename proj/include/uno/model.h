// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

// Open-set discriminative model: an MLP feature extractor h producing
// pre-logits z, and a linear head g(z) = W z + b over C classes.
//
// Class indices. Labels in datasets and APIs are 1-based: 1..K are inlier
// classes, K+1 is the negative class and (in the dense case) K+2 is
// no-object. Logit columns are 0-based, so label c lives in column c-1.

#ifndef UNO_MODEL_H_
#define UNO_MODEL_H_

#include <filesystem>
#include <string>
#include <vector>

#include "uno/autodiff.h"
#include "uno/nn.h"
#include "uno/rng.h"

namespace uno::net {

// Which classes a head carries beyond the K inlier classes.
enum class HeadLayout {
  kClosed,        // C = K
  kNegative,      // C = K+1: negative at label K+1
  kDenseClosed,   // C = K+1: no-object at label K+1 (before extension)
  kDense,         // C = K+2: negative at K+1, no-object at K+2
};

std::string_view HeadLayoutName(HeadLayout layout);
HeadLayout ParseHeadLayout(std::string_view name);
std::size_t NumClasses(HeadLayout layout, std::size_t k);

struct FeatureConfig {
  std::size_t in_dim = 2;
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t feature_dim = 16;
  nn::Activation hidden_activation = nn::Activation::kTanh;
  nn::Activation output_activation = nn::Activation::kIdentity;
};

class FeatureExtractor {
 public:
  FeatureExtractor(const FeatureConfig& config, Rng& rng);

  grad::Var Forward(grad::Tape& tape, grad::Var x) const;
  Tensor Features(const Tensor& x) const;

  const FeatureConfig& config() const { return config_; }
  std::size_t in_dim() const { return config_.in_dim; }
  std::size_t feature_dim() const { return config_.feature_dim; }

  nn::Mlp& mlp() { return mlp_; }
  const nn::Mlp& mlp() const { return mlp_; }
  std::vector<grad::Parameter*> parameters() { return mlp_.parameters(); }
  std::vector<const grad::Parameter*> parameters() const {
    return mlp_.parameters();
  }

 private:
  FeatureConfig config_;
  nn::Mlp mlp_;
};

class ClassifierHead {
 public:
  // W is [C, d] (rows are class vectors), b is [C]. Initialized uniformly in
  // +-1/sqrt(d); bias starts at zero.
  ClassifierHead(std::size_t d, std::size_t k, HeadLayout layout, Rng& rng,
                 std::string name = "head");

  // logits = z W^T + b, [batch, C].
  grad::Var Forward(grad::Tape& tape, grad::Var z) const;
  Tensor Logits(const Tensor& z) const;

  std::size_t num_inlier() const { return k_; }
  std::size_t num_classes() const { return weight_.value().dim(0); }
  std::size_t feature_dim() const { return weight_.value().dim(1); }
  HeadLayout layout() const { return layout_; }
  bool has_negative() const {
    return layout_ == HeadLayout::kNegative || layout_ == HeadLayout::kDense;
  }
  bool has_no_object() const {
    return layout_ == HeadLayout::kDense || layout_ == HeadLayout::kDenseClosed;
  }
  // 0-based logit columns; throw ConfigError if the class is absent.
  std::size_t negative_column() const;
  std::size_t no_object_column() const;

  grad::Parameter& weight() { return weight_; }
  grad::Parameter& bias() { return bias_; }
  const grad::Parameter& weight() const { return weight_; }
  const grad::Parameter& bias() const { return bias_; }
  std::vector<grad::Parameter*> parameters() { return {&weight_, &bias_}; }
  std::vector<const grad::Parameter*> parameters() const {
    return {&weight_, &bias_};
  }

  // Inserts `n_new` zero rows of W and zero biases before column `at`.
  // Existing rows keep their values (and parameter identities are renewed).
  void InsertClasses(std::size_t at, std::size_t n_new, HeadLayout new_layout);

 private:
  std::string name_;
  std::size_t k_;
  HeadLayout layout_;
  grad::Parameter weight_;
  grad::Parameter bias_;
};

// Adds the negative class with zero-initialized weights: closed K -> K+1
// (appended), or dense K+1 -> K+2 (inserted before no-object). Any other
// layout, or n_new == 0, is a ConfigError.
ClassifierHead ExtendHead(const ClassifierHead& head, std::size_t n_new = 1);

struct OpenSetModel {
  FeatureExtractor features;
  ClassifierHead head;

  grad::Var Logits(grad::Tape& tape, grad::Var x) const;
  Tensor Features(const Tensor& x) const { return features.Features(x); }
  Tensor Logits(const Tensor& x) const;
  Tensor Posterior(const Tensor& x) const;

  std::vector<grad::Parameter*> parameters();
  std::vector<const grad::Parameter*> parameters() const;
};

OpenSetModel MakeOpenSetModel(const FeatureConfig& features, std::size_t k,
                              HeadLayout layout, Rng& rng);

// Row-wise softmax of [batch, C] logits via max-subtracted log-sum-exp.
Tensor Softmax(const Tensor& logits);
std::vector<double> Softmax(std::span<const double> logits);

// Row-wise argmax over the first `limit` columns (all if limit == 0), ties to
// the lowest column. Returns 1-based labels.
std::vector<int> ArgmaxLabels(const Tensor& logits, std::size_t limit = 0);

// C x C matrix of cosines between head rows. Throws DomainError naming the
// first zero-norm row.
Tensor ClassVectorCosines(const ClassifierHead& head);
// Largest |cos| off the diagonal.
double MaxOffDiagonalCosine(const Tensor& cosines);

void SaveModel(const std::filesystem::path& dir, const OpenSetModel& model);
OpenSetModel LoadModel(const std::filesystem::path& dir);

}  // namespace uno::net

#endif  // UNO_MODEL_H_
