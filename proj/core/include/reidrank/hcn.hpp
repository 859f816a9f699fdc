#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "reidrank/matrix.hpp"

namespace reidrank::hcn {

/// Activation tensor stored (h, w, c) row-major.
class FeatureMap {
 public:
  FeatureMap() = default;
  /// Throws kShapeMismatch on a zero dimension.
  FeatureMap(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return values_[(y * width_ + x) * channels_ + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return values_[(y * width_ + x) * channels_ + c];
  }

  std::span<double> pixel(std::size_t y, std::size_t x) {
    return {values_.data() + (y * width_ + x) * channels_, channels_};
  }
  std::span<const double> pixel(std::size_t y, std::size_t x) const {
    return {values_.data() + (y * width_ + x) * channels_, channels_};
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool same_shape(const FeatureMap& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  bool operator==(const FeatureMap&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> values_;
};

/// Outputs of the four residual stages. Each stage halves height and width
/// and doubles channels.
struct StagePyramid {
  FeatureMap r2, r3, r4, r5;
};

/// Throws kShapeMismatch unless the halving/doubling law holds.
void validate_pyramid(const StagePyramid& pyramid);

/// Deterministic stand-in for backbone stage outputs. height and width must
/// be multiples of 8 (kShapeMismatch otherwise).
StagePyramid stub_backbone(std::size_t height, std::size_t width, std::size_t base_channels,
                           std::uint64_t seed);

/// Affine classifier over pooled features: logits = weights * x + bias.
struct Classifier {
  Matrix weights;  // classes x features
  std::vector<double> bias;
};

/// Channel extensions (out x in, no bias) and the three prediction heads.
struct MergeWeights {
  Matrix r3_extension;  // 2c -> 8c
  Matrix r2_extension;  // c -> 4c
  Classifier r5_head;   // 8c -> M
  Classifier c1_head;   // 8c -> M
  Classifier c2_head;   // 4c -> M
  std::uint64_t seed = 0;

  /// Entries drawn uniformly from [-scale, scale] with scale = 1/sqrt(fan_in).
  static MergeWeights seeded(std::size_t base_channels, std::size_t classes, std::uint64_t seed);
};

/// Nearest-neighbor replication to 4x height and width.
FeatureMap upsample4x(const FeatureMap& map);

/// Per-pixel linear map; projection is (out channels) x (in channels).
FeatureMap channel_project(const FeatureMap& map, const Matrix& projection);

/// Element-wise sum of two equally shaped maps.
FeatureMap add(const FeatureMap& a, const FeatureMap& b);

struct CrossMaps {
  FeatureMap c1;  // extend(R3) + up4(R5)
  FeatureMap c2;  // extend(R2) + up4(R4)
};

CrossMaps cross_merge(const StagePyramid& pyramid, const MergeWeights& weights);

enum class Mode { kTrain, kEval };

/// Inverted dropout. Eval mode and rate 0 return the input unchanged.
/// Throws kOutOfRange unless 0 <= rate < 1.
FeatureMap dropout(const FeatureMap& map, double rate, Mode mode, std::uint64_t seed);

/// Mean over (h, w) per channel.
std::vector<double> global_average_pool(const FeatureMap& map);

std::vector<double> head_logits(const FeatureMap& map, const Classifier& head);

struct IdLoss {
  double loss = 0.0;
  std::vector<double> probabilities;
  std::vector<double> gradient;  // d loss / d logits
};

/// Softmax cross-entropy against a 1-based label y in [1, M], M >= 2.
IdLoss id_loss(std::span<const double> logits, std::size_t label);

struct DropoutSettings {
  double rate = 0.5;
  Mode mode = Mode::kEval;
  std::uint64_t seed = 0;
};

struct HcnOutputs {
  CrossMaps maps;
  std::vector<double> r5_logits;
  std::vector<double> c1_logits;
  std::vector<double> c2_logits;
  std::vector<double> r5_feature;  // pooled R5, the retrieval embedding
};

HcnOutputs hcn_forward(const StagePyramid& pyramid, const MergeWeights& weights,
                       const DropoutSettings& dropout_settings);

/// Sum of the three branch losses.
double total_loss(const HcnOutputs& outputs, std::size_t label);

/// |a - n| / max(|a|, |n|, 1e-8): the floor keeps near-zero components from
/// dominating.
double relative_error(double analytic, double numeric) noexcept;

/// Largest relative error between id_loss's gradient and central differences.
double gradient_check(std::span<const double> logits, std::size_t label, double step = 1e-6);

}  // namespace reidrank::hcn
