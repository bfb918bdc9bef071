/*
 * Copyright 2026 The ehoi Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Desk-scale interaction network: convolutional encoder with a feature
// pyramid, per-hand attribute heads over a pooled hand feature vector, a
// keypoint heatmap head, a depth branch, an early-fusion state classifier,
// late fusion, an optional center-point detector, training and inference.

#include <cstdint>
#include <filesystem>
#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ehoi/annotations.hpp"
#include "ehoi/detection.hpp"
#include "ehoi/image.hpp"
#include "ehoi/loss.hpp"
#include "ehoi/metrics.hpp"
#include "ehoi/nn.hpp"

namespace ehoi::net {

using Tensor = nn::Tensor3<float>;
using MatrixF = nn::Matrix<float>;
using VectorF = nn::Vector<float>;

inline constexpr int kHfvDim = 1024;
inline constexpr int kFusionChannels = 3 + 1 + 1 + kNumKeypoints;
inline constexpr int kEncoderStride = 16;

enum class LateFusion { Mean, Weighted, AppearanceOnly, MultimodalOnly };
enum class InferMode { GtProposals, Detector };
enum class Regime { SynthOnly, RealOnly, SynthPlusReal };

const char* to_string(LateFusion f);
const char* to_string(InferMode m);
const char* to_string(Regime r);
LateFusion parse_late_fusion(const std::string& s);
InferMode parse_infer_mode(const std::string& s);
Regime parse_regime(const std::string& s);

struct ModelConfig {
  int pyramid_dim = 64;
  int head_hidden = 64;
  int roi_size = 7;
  int keypoint_roi = 8;
  int keypoint_grid = 32;
  double keypoint_sigma = 1.5;   // cells of the keypoint grid
  double keypoint_margin = 0.10; // box dilation per side for the keypoint crop
  int crop_size = 96;
  double crop_margin = 0.15;
  int num_categories = 10;
  LateFusion late_fusion = LateFusion::Mean;
  double fusion_weight = 0.5;    // appearance weight of the Weighted rule
  double detector_threshold = 0.2;
  int detector_max_per_class = 10;

  void validate() const;
};

struct TrainConfig {
  int epochs = 12;
  int batch_size = 8;
  double learning_rate = 0.02;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::vector<int> lr_steps{8, 11};  // epochs at which the rate is multiplied by lr_gamma
  double lr_gamma = 0.1;
  double grad_clip = 5.0;            // global L2 norm; 0 disables
  bool train_detector = false;       // adds the detector loss (L_backbone)
  int finetune_epochs = 6;           // second stage of synth_plus_real
  double finetune_learning_rate = 0.005;
  std::vector<int> finetune_lr_steps{4};
  double real_fraction = 1.0;
  LossOptions loss;

  void validate() const;
};

/// Encoder output: D-channel maps at strides 4, 8 and 16.
struct FeaturePyramid {
  Tensor p4, p8, p16;
};

struct KeypointResult {
  MatrixF heatmaps;  // 21 x K*K, each row sums to 1
  std::array<Point2d, kNumKeypoints> coordinates{};
};

/// One in-memory training/evaluation example.
struct Sample {
  ImageRecord record;
  RgbImage rgb;
  std::optional<Planef> depth;  // normalized inverse depth
  std::optional<Gray16Image> mask;
};

std::vector<Sample> load_samples(const std::vector<ImageRecord>& records, const std::filesystem::path& root);

/// Crop frame for early fusion (hand box dilated by the crop margin).
BBox fusion_crop_box(const BBox& hand, double margin);
/// Region the keypoint head covers (hand box dilated by the keypoint margin).
BBox keypoint_box(const BBox& hand, double margin);
/// Maps heatmap cell (row, col) of a K x K grid over `box` to image coordinates (cell center).
Point2d heatmap_cell_to_image(const BBox& box, int grid, int row, int col);
/// Normalized Gaussian target maps (21 x K*K) for keypoints inside `box`.
MatrixF keypoint_targets(const std::array<Keypoint, kNumKeypoints>& keypoints, const BBox& box, int grid,
                         double sigma);

/// Fused P(contact) for the given rule.
double late_fusion(const Eigen::Vector2d& appearance_logits, const Eigen::Vector2d& multimodal_logits,
                   LateFusion rule = LateFusion::Mean, double weight = 0.5);

/// Nested stratified subset: image indices kept for `fraction`, ascending.
/// Strata are (any gloved hand, any contact hand); each stratum is shuffled
/// once with `seed` and its first ceil(fraction * n) members are kept.
std::vector<std::size_t> stratified_subset(const std::vector<ImageRecord>& images, double fraction,
                                           std::uint64_t seed);

struct EpochLog {
  std::string stage;  // "synth" or "real"
  int epoch = 0;
  double learning_rate = 0;
  LossBreakdown loss;  // mean over batches
  double seconds = 0;
  std::optional<double> val_glove_accuracy, val_side_accuracy, val_contact_accuracy, val_depth_mae;
  std::string to_json() const;
};

struct Accuracy {
  double side = 0, glove = 0, contact_fused = 0, contact_appearance = 0, contact_multimodal = 0;
  double depth_mae = 0;
  std::size_t n_hands = 0;
};

class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }

  FeaturePyramid extract_features(const RgbImage& image) const;
  /// 1024-d hand feature vector from 7x7 RoI pooling on the stride-8 map.
  VectorF pool_hand_features(const FeaturePyramid& features, const BBox& hand) const;
  AttributePrediction predict_attributes(const VectorF& hfv) const;
  KeypointResult predict_keypoints(const FeaturePyramid& features, const BBox& hand) const;
  /// Normalized inverse depth at input resolution, in [0, 1].
  Planef predict_depth(const FeaturePyramid& features) const;
  /// 26 x C*C tensor aligned to the fusion crop of `hand`.
  Tensor fusion_input(const RgbImage& image, const Gray16Image* mask, int mask_value, const Planef& depth,
                      const MatrixF& heatmaps, const BBox& hand) const;
  Eigen::Vector2d early_fusion(const Tensor& input) const;

  /// In GT-proposal mode `gt` supplies the boxes (and instance mask when present).
  std::vector<Detection> infer(const RgbImage& image, InferMode mode, const ImageRecord* gt = nullptr,
                               const Gray16Image* mask = nullptr) const;

  std::vector<nn::Parameter<float>*> parameters();
  std::size_t num_parameters();

  void save(const std::filesystem::path& path, const std::string& extra_json = "{}");
  /// Returns the extra JSON stored alongside the parameters.
  static Model load(const std::filesystem::path& path, std::string* extra_json = nullptr);

  struct Impl;

 private:
  Model() = default;
  ModelConfig config_;
  std::shared_ptr<Impl> impl_;
  friend class Trainer;
};

using EpochCallback = std::function<void(const EpochLog&)>;

class Trainer {
 public:
  Trainer(Model& model, const TrainConfig& config, std::uint64_t seed);

  /// One stage of SGD over `train`; logs validation accuracy on `val` when non-empty.
  std::vector<EpochLog> fit(const std::vector<const Sample*>& train, const std::vector<const Sample*>& val,
                            const std::string& stage, int epochs, double learning_rate,
                            const std::vector<int>& lr_steps, const EpochCallback& callback = {});

  /// Loss and gradient of one batch; gradients are accumulated into the parameters.
  LossBreakdown batch_loss(const std::vector<const Sample*>& batch, bool backward);

 private:
  Model& model_;
  TrainConfig config_;
  std::uint64_t seed_;
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
  std::vector<std::size_t> real_subset;  // indices into the real train split
};

/// Runs one training regime. `synth` and `real` are train splits; the
/// matching validation sets are optional and only used for logging.
TrainResult train(const std::vector<Sample>* synth, const std::vector<Sample>* real, Regime regime,
                  const ModelConfig& model_config, const TrainConfig& train_config, std::uint64_t seed,
                  const std::vector<Sample>* synth_val = nullptr, const std::vector<Sample>* real_val = nullptr,
                  const EpochCallback& callback = {});

/// Chooses the Weighted late-fusion weight on a grid of 0.05 steps by
/// accuracy over `samples` (ties resolved toward 0.5).
double fit_fusion_weight(const Model& model, const std::vector<Sample>& samples);

/// GT-proposal attribute accuracies and depth error.
Accuracy evaluate_accuracy(const Model& model, const std::vector<const Sample*>& samples);

/// infer -> match, converted to the evaluation protocol's prediction form.
metrics::ImagePrediction predict_image(const Model& model, const Sample& sample, InferMode mode);

/// Hand confidence used for ranking in GT-proposal mode: product of the
/// side, glove and fused-state probabilities of the predicted classes.
double attribute_confidence(const HandPrediction& hand);

}  // namespace ehoi::net
