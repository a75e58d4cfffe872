#pragma once

#include <torch/torch.h>

#include <array>
#include <vector>

namespace covergraph {

inline constexpr std::int64_t kMaskSize = 32;
inline constexpr std::int64_t kCropSize = 64;
inline constexpr std::int64_t kCanvasSize = 128;

/// Normalized box corners, x0 < x1 and y0 < y1, all in [0, 1].
struct BoundingBox {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 1.0;
  double y1 = 1.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x0 + x1); }
  double center_y() const { return 0.5 * (y0 + y1); }
  bool operator==(const BoundingBox&) const = default;
};

/// Integer pixel rectangle [x0, x1) x [y0, y1) on a canvas.
struct PixelRect {
  std::int64_t x0 = 0;
  std::int64_t y0 = 0;
  std::int64_t x1 = 0;
  std::int64_t y1 = 0;

  std::int64_t width() const { return x1 - x0; }
  std::int64_t height() const { return y1 - y0; }
  bool empty() const { return width() < 1 || height() < 1; }
};

/// Box corners rounded to the nearest pixel boundary and clamped to the canvas.
PixelRect to_pixel_rect(const BoundingBox& box, std::int64_t canvas);
BoundingBox box_from_tensor(const torch::Tensor& row);
torch::Tensor box_to_tensor(const BoundingBox& box);

/// Clamp coordinates to [0, 1] and order each (min, max) pair. Rows are
/// (x0, y0, x1, y1). Coincident coordinates are separated by a tiny epsilon
/// so the result always has positive extent.
torch::Tensor normalize_boxes(const torch::Tensor& values);

// ---------------------------------------------------------------------------
// Box regression
// ---------------------------------------------------------------------------

struct BoxRegressorOptions {
  std::int64_t embedding_dim = 128;
  std::int64_t hidden_dim = 512;
};

class BoxRegressorImpl : public torch::nn::Module {
 public:
  explicit BoxRegressorImpl(const BoxRegressorOptions& options);
  /// Unbounded 4-dim output.
  torch::Tensor raw(const torch::Tensor& embeddings);
  /// [O, 4] valid boxes: sigmoid followed by normalize_boxes.
  torch::Tensor forward(const torch::Tensor& embeddings);

  torch::nn::Linear hidden{nullptr};
  torch::nn::Linear output{nullptr};
};
TORCH_MODULE(BoxRegressor);

// ---------------------------------------------------------------------------
// Mask generator
// ---------------------------------------------------------------------------

struct MaskGeneratorOptions {
  std::int64_t embedding_dim = 128;
  std::int64_t noise_dim = 64;
  std::int64_t channels = 192;
};

/// Decodes (embedding | noise) into a 32x32 soft mask. The input is
/// projected to a 4x4 seed, then five 3x3 conv layers (three of them
/// preceded by nearest-neighbour 2x upsampling) reach 32x32; a 1x1 conv and
/// sigmoid give the mask.
class MaskGeneratorImpl : public torch::nn::Module {
 public:
  explicit MaskGeneratorImpl(const MaskGeneratorOptions& options);
  /// embeddings [O, E], noise [O, Z] -> [O, 32, 32] in [0, 1].
  torch::Tensor forward(const torch::Tensor& embeddings, const torch::Tensor& noise);
  const MaskGeneratorOptions& options() const { return options_; }

  torch::nn::Linear seed{nullptr};
  torch::nn::ModuleList blocks{nullptr};
  torch::nn::Conv2d to_mask{nullptr};

 private:
  MaskGeneratorOptions options_;
};
TORCH_MODULE(MaskGenerator);

// ---------------------------------------------------------------------------
// Appearance encoder
// ---------------------------------------------------------------------------

struct AppearanceEncoderOptions {
  std::int64_t appearance_dim = 64;
  std::int64_t base_channels = 64;
  std::int64_t hidden_dim = 192;
};

/// 64x64 RGB crop -> appearance vector.
class AppearanceEncoderImpl : public torch::nn::Module {
 public:
  explicit AppearanceEncoderImpl(const AppearanceEncoderOptions& options);
  /// crops [N, 3, 64, 64] in [-1, 1] -> [N, appearance_dim]. Throws
  /// ShapeError for any other crop shape.
  torch::Tensor forward(const torch::Tensor& crops);
  const AppearanceEncoderOptions& options() const { return options_; }

  torch::nn::Sequential features{nullptr};
  torch::nn::Linear hidden{nullptr};
  torch::nn::Linear output{nullptr};

 private:
  AppearanceEncoderOptions options_;
};
TORCH_MODULE(AppearanceEncoder);

// ---------------------------------------------------------------------------
// Layout feature map
// ---------------------------------------------------------------------------

/// Places each mask into its box and broadcasts the appearance vector
/// through it.
///
/// boxes [O, 4], masks [O, 32, 32], appearances [O, D] ->
/// [D + 1, canvas, canvas]. The mask is bilinearly resampled (half-pixel
/// centres, edge clamped) onto the box's pixel rectangle; appearance
/// channels receive mask * a_o, the last channel accumulates the raw mask.
/// Overlapping objects add up. Boxes that round to less than one pixel are
/// skipped with a warning.
torch::Tensor compose_feature_map(const torch::Tensor& boxes, const torch::Tensor& masks,
                                  const torch::Tensor& appearances, std::int64_t canvas = kCanvasSize);

/// Batched form: objects are assigned to samples by `object_to_sample`.
/// Returns [B, D + 1, canvas, canvas].
torch::Tensor compose_feature_maps(const torch::Tensor& boxes, const torch::Tensor& masks,
                                   const torch::Tensor& appearances,
                                   const torch::Tensor& object_to_sample, std::int64_t batch_size,
                                   std::int64_t canvas = kCanvasSize);

/// Cuts each object's box out of its image and resizes it to size x size.
/// images [B, C, H, W]; returns [O, C, size, size]. Differentiable with
/// respect to the images.
torch::Tensor crop_boxes(const torch::Tensor& images, const torch::Tensor& boxes,
                         const torch::Tensor& object_to_sample, std::int64_t size = kCropSize);

}  // namespace covergraph
