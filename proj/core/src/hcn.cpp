#include "reidrank/hcn.hpp"

#include <algorithm>
#include <cmath>

#include "reidrank/error.hpp"
#include "reidrank/rng.hpp"

namespace reidrank::hcn {
namespace {

std::string shape_string(const FeatureMap& m) {
  return "(" + std::to_string(m.height()) + "," + std::to_string(m.width()) + "," +
         std::to_string(m.channels()) + ")";
}

void expect_shape(const FeatureMap& m, std::size_t h, std::size_t w, std::size_t c,
                  const char* name) {
  if (m.height() != h || m.width() != w || m.channels() != c) {
    fail(ErrorCode::kShapeMismatch, std::string(name) + " has shape " + shape_string(m) +
                                        ", expected (" + std::to_string(h) + "," +
                                        std::to_string(w) + "," + std::to_string(c) + ")");
  }
}

void expect_matrix(const Matrix& m, std::size_t rows, std::size_t cols, const char* name) {
  if (m.rows != rows || m.cols != cols || m.values.size() != rows * cols) {
    fail(ErrorCode::kShapeMismatch, std::string(name) + " is " + std::to_string(m.rows) + "x" +
                                        std::to_string(m.cols) + ", expected " +
                                        std::to_string(rows) + "x" + std::to_string(cols));
  }
}

FeatureMap random_map(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
  FeatureMap m(h, w, c);
  SeededRng rng(seed);
  for (double& v : m.values()) v = rng.uniform(-1.0, 1.0);
  return m;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, double scale, SeededRng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values) v = rng.uniform(-scale, scale);
  return m;
}

Classifier random_classifier(std::size_t classes, std::size_t features, std::uint64_t seed) {
  SeededRng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(features));
  Classifier head{random_matrix(classes, features, scale, rng), std::vector<double>(classes)};
  for (double& b : head.bias) b = rng.uniform(-scale, scale);
  return head;
}

}  // namespace

FeatureMap::FeatureMap(std::size_t height, std::size_t width, std::size_t channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  if (height == 0 || width == 0 || channels == 0) {
    fail(ErrorCode::kShapeMismatch, "feature map dimensions must be positive");
  }
  values_.assign(height * width * channels, fill);
}

void validate_pyramid(const StagePyramid& p) {
  const std::size_t h = p.r2.height();
  const std::size_t w = p.r2.width();
  const std::size_t c = p.r2.channels();
  if (h == 0 || w == 0 || c == 0) fail(ErrorCode::kShapeMismatch, "r2 is empty");
  if (h % 8 != 0 || w % 8 != 0) {
    fail(ErrorCode::kShapeMismatch, "r2 spatial size must be a multiple of 8");
  }
  expect_shape(p.r3, h / 2, w / 2, 2 * c, "r3");
  expect_shape(p.r4, h / 4, w / 4, 4 * c, "r4");
  expect_shape(p.r5, h / 8, w / 8, 8 * c, "r5");
}

StagePyramid stub_backbone(std::size_t height, std::size_t width, std::size_t base_channels,
                           std::uint64_t seed) {
  if (height == 0 || width == 0 || height % 8 != 0 || width % 8 != 0) {
    fail(ErrorCode::kShapeMismatch, "stub backbone needs height and width divisible by 8, got " +
                                        std::to_string(height) + "x" + std::to_string(width));
  }
  if (base_channels == 0) fail(ErrorCode::kShapeMismatch, "base channel count must be positive");
  const std::size_t c = base_channels;
  return {random_map(height, width, c, mix_seed(seed, 2)),
          random_map(height / 2, width / 2, 2 * c, mix_seed(seed, 3)),
          random_map(height / 4, width / 4, 4 * c, mix_seed(seed, 4)),
          random_map(height / 8, width / 8, 8 * c, mix_seed(seed, 5))};
}

MergeWeights MergeWeights::seeded(std::size_t base_channels, std::size_t classes,
                                  std::uint64_t seed) {
  const std::size_t c = base_channels;
  MergeWeights w;
  w.seed = seed;
  SeededRng r3(mix_seed(seed, 10));
  w.r3_extension = random_matrix(8 * c, 2 * c, 1.0 / std::sqrt(2.0 * static_cast<double>(c)), r3);
  SeededRng r2(mix_seed(seed, 11));
  w.r2_extension = random_matrix(4 * c, c, 1.0 / std::sqrt(static_cast<double>(c)), r2);
  w.r5_head = random_classifier(classes, 8 * c, mix_seed(seed, 12));
  w.c1_head = random_classifier(classes, 8 * c, mix_seed(seed, 13));
  w.c2_head = random_classifier(classes, 4 * c, mix_seed(seed, 14));
  return w;
}

FeatureMap upsample4x(const FeatureMap& map) {
  FeatureMap out(4 * map.height(), 4 * map.width(), map.channels());
  for (std::size_t y = 0; y < out.height(); ++y) {
    for (std::size_t x = 0; x < out.width(); ++x) {
      const auto src = map.pixel(y / 4, x / 4);
      std::copy(src.begin(), src.end(), out.pixel(y, x).begin());
    }
  }
  return out;
}

FeatureMap channel_project(const FeatureMap& map, const Matrix& projection) {
  if (projection.cols != map.channels() || projection.rows == 0 ||
      projection.values.size() != projection.rows * projection.cols) {
    fail(ErrorCode::kShapeMismatch, "projection is " + std::to_string(projection.rows) + "x" +
                                        std::to_string(projection.cols) + " for a map with " +
                                        std::to_string(map.channels()) + " channels");
  }
  FeatureMap out(map.height(), map.width(), projection.rows);
  for (std::size_t y = 0; y < map.height(); ++y) {
    for (std::size_t x = 0; x < map.width(); ++x) {
      const auto in = map.pixel(y, x);
      auto dst = out.pixel(y, x);
      for (std::size_t o = 0; o < projection.rows; ++o) {
        const auto weights = projection.row(o);
        double sum = 0.0;
        for (std::size_t i = 0; i < in.size(); ++i) sum += weights[i] * in[i];
        dst[o] = sum;
      }
    }
  }
  return out;
}

FeatureMap add(const FeatureMap& a, const FeatureMap& b) {
  if (!a.same_shape(b)) {
    fail(ErrorCode::kShapeMismatch,
         "cannot add maps of shape " + shape_string(a) + " and " + shape_string(b));
  }
  FeatureMap out = a;
  auto dst = out.values();
  const auto rhs = b.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += rhs[i];
  return out;
}

CrossMaps cross_merge(const StagePyramid& pyramid, const MergeWeights& weights) {
  validate_pyramid(pyramid);
  const std::size_t c = pyramid.r2.channels();
  expect_matrix(weights.r3_extension, 8 * c, 2 * c, "r3 extension");
  expect_matrix(weights.r2_extension, 4 * c, c, "r2 extension");
  return {add(channel_project(pyramid.r3, weights.r3_extension), upsample4x(pyramid.r5)),
          add(channel_project(pyramid.r2, weights.r2_extension), upsample4x(pyramid.r4))};
}

FeatureMap dropout(const FeatureMap& map, double rate, Mode mode, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    fail(ErrorCode::kOutOfRange, "dropout rate " + std::to_string(rate) + " must lie in [0, 1)");
  }
  if (mode == Mode::kEval || rate == 0.0) return map;
  FeatureMap out = map;
  SeededRng rng(seed);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& v : out.values()) v = rng.uniform() < rate ? 0.0 : v * keep_scale;
  return out;
}

std::vector<double> global_average_pool(const FeatureMap& map) {
  std::vector<double> pooled(map.channels(), 0.0);
  for (std::size_t y = 0; y < map.height(); ++y) {
    for (std::size_t x = 0; x < map.width(); ++x) {
      const auto px = map.pixel(y, x);
      for (std::size_t c = 0; c < px.size(); ++c) pooled[c] += px[c];
    }
  }
  const double area = static_cast<double>(map.height() * map.width());
  for (double& v : pooled) v /= area;
  return pooled;
}

std::vector<double> head_logits(const FeatureMap& map, const Classifier& head) {
  expect_matrix(head.weights, head.bias.size(), map.channels(), "classifier");
  const auto pooled = global_average_pool(map);
  std::vector<double> logits(head.bias.size());
  for (std::size_t m = 0; m < logits.size(); ++m) {
    const auto w = head.weights.row(m);
    double sum = 0.0;
    for (std::size_t j = 0; j < pooled.size(); ++j) sum += w[j] * pooled[j];
    logits[m] = sum + head.bias[m];
  }
  return logits;
}

IdLoss id_loss(std::span<const double> logits, std::size_t label) {
  const std::size_t classes = logits.size();
  if (classes < 2) fail(ErrorCode::kShapeMismatch, "id loss needs at least 2 classes");
  if (label < 1 || label > classes) {
    fail(ErrorCode::kOutOfRange,
         "label " + std::to_string(label) + " outside [1, " + std::to_string(classes) + "]");
  }
  if (!std::all_of(logits.begin(), logits.end(), [](double z) { return std::isfinite(z); })) {
    fail(ErrorCode::kNonFinite, "logits must be finite");
  }

  const auto top = static_cast<std::size_t>(
      std::distance(logits.begin(), std::max_element(logits.begin(), logits.end())));
  const double peak = logits[top];
  IdLoss out;
  out.probabilities.resize(classes);
  // log-sum-exp as log1p of the non-peak terms keeps tiny losses exact.
  double rest = 0.0;
  for (std::size_t i = 0; i < classes; ++i) {
    const double e = std::exp(logits[i] - peak);
    out.probabilities[i] = e;
    if (i != top) rest += e;
  }
  const double log_norm = std::log1p(rest);
  const double norm = 1.0 + rest;
  for (double& p : out.probabilities) p /= norm;
  out.loss = log_norm - (logits[label - 1] - peak);
  out.gradient = out.probabilities;
  out.gradient[label - 1] -= 1.0;
  return out;
}

HcnOutputs hcn_forward(const StagePyramid& pyramid, const MergeWeights& weights,
                       const DropoutSettings& settings) {
  HcnOutputs out;
  out.maps = cross_merge(pyramid, weights);
  const auto& d = settings;
  out.r5_logits = head_logits(dropout(pyramid.r5, d.rate, d.mode, mix_seed(d.seed, 0)),
                              weights.r5_head);
  out.c1_logits = head_logits(dropout(out.maps.c1, d.rate, d.mode, mix_seed(d.seed, 1)),
                              weights.c1_head);
  out.c2_logits = head_logits(dropout(out.maps.c2, d.rate, d.mode, mix_seed(d.seed, 2)),
                              weights.c2_head);
  out.r5_feature = global_average_pool(pyramid.r5);
  return out;
}

double total_loss(const HcnOutputs& outputs, std::size_t label) {
  return id_loss(outputs.r5_logits, label).loss + id_loss(outputs.c1_logits, label).loss +
         id_loss(outputs.c2_logits, label).loss;
}

double relative_error(double analytic, double numeric) noexcept {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

double gradient_check(std::span<const double> logits, std::size_t label, double step) {
  const IdLoss base = id_loss(logits, label);
  std::vector<double> probe(logits.begin(), logits.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + step;
    const double up = id_loss(probe, label).loss;
    probe[i] = saved - step;
    const double down = id_loss(probe, label).loss;
    probe[i] = saved;
    worst = std::max(worst, relative_error(base.gradient[i], (up - down) / (2.0 * step)));
  }
  return worst;
}

}  // namespace reidrank::hcn
