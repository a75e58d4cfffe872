#pragma once

#include <torch/torch.h>

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace covergraph {

enum class MaskGanForm { least_squares, log };
/// How the mismatched pair (Q', R) enters the layout critic objective.
/// `as_written` treats it as a real pair; `poor_match` as a fake one.
enum class MismatchSign { as_written, poor_match };

// Mask critic on raw patch scores.
torch::Tensor mask_d_loss(const torch::Tensor& real_scores, const torch::Tensor& fake_scores, MaskGanForm form);
torch::Tensor mask_g_loss(const torch::Tensor& fake_scores, MaskGanForm form);

// Layout critic on probabilities for (Q,R), (Q,I), (F,R), (Q',R) and (F,I).
torch::Tensor layout_d_loss(const torch::Tensor& p_qr, const torch::Tensor& p_qi, const torch::Tensor& p_fr,
                            const torch::Tensor& p_mismatch, MismatchSign sign);
torch::Tensor layout_g_loss(const torch::Tensor& p_fi);

torch::Tensor book_d_loss(const torch::Tensor& p_real, const torch::Tensor& p_fake);
torch::Tensor book_g_loss(const torch::Tensor& p_fake);

// Object critic: per-object probabilities, summed over objects, averaged over
// the batch.
torch::Tensor object_d_loss(const torch::Tensor& p_real, const torch::Tensor& p_fake, std::int64_t batch_size);
torch::Tensor object_g_loss(const torch::Tensor& p_fake, std::int64_t batch_size);

/// Sum over layers of the mean absolute feature difference.
torch::Tensor mean_abs_over_layers(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b);
torch::Tensor box_loss(const torch::Tensor& predicted, const torch::Tensor& target);
torch::Tensor pixel_loss(const torch::Tensor& generated, const torch::Tensor& real);

constexpr std::size_t kLossTerms = 9;
constexpr std::array<std::string_view, kLossTerms> kLossTermNames = {
    "pixel", "box", "content", "mask", "obj", "layout", "book", "fm_mask", "fm_layout"};

struct LossWeights {
  std::array<double, kLossTerms> lambda = {1.0, 10.0, 10.0, 1.0, 0.1, 1.0, 1.0, 10.0, 10.0};

  double& operator[](std::size_t i) { return lambda.at(i); }
  double operator[](std::size_t i) const { return lambda.at(i); }
  /// Throws ConfigError for negative or non-finite weights.
  void validate() const;
};

struct LossBundle {
  std::array<double, kLossTerms> terms{};
  double total = 0.0;
  // Critic-side objectives from the same step.
  double d_mask = 0.0;
  double d_obj = 0.0;
  double d_layout = 0.0;
  double d_book = 0.0;
};

/// Weighted sum in fixed order 1..9, in double.
double weighted_total(const std::array<double, kLossTerms>& terms, const LossWeights& weights);
LossBundle make_bundle(const std::array<double, kLossTerms>& terms, const LossWeights& weights);
/// Differentiable counterpart used for the generator update.
torch::Tensor weighted_total(const std::array<torch::Tensor, kLossTerms>& terms, const LossWeights& weights);

/// Throws NumericError naming the first non-finite term.
void require_finite(std::string_view term, const torch::Tensor& value);

}  // namespace covergraph
