#include "covergraph/losses.hpp"

#include <cmath>

#include "covergraph/discriminators.hpp"
#include "covergraph/errors.hpp"

namespace covergraph {

namespace {

torch::Tensor log_p(const torch::Tensor& p) { return torch::log(clamp_probability(p)); }
torch::Tensor log_not_p(const torch::Tensor& p) { return torch::log(1.0 - clamp_probability(p)); }

}  // namespace

torch::Tensor mask_d_loss(const torch::Tensor& real_scores, const torch::Tensor& fake_scores, MaskGanForm form) {
  if (form == MaskGanForm::least_squares) {
    return (real_scores - 1.0).pow(2).mean() + fake_scores.pow(2).mean();
  }
  return -(log_p(torch::sigmoid(real_scores)).mean() + log_not_p(torch::sigmoid(fake_scores)).mean());
}

torch::Tensor mask_g_loss(const torch::Tensor& fake_scores, MaskGanForm form) {
  if (form == MaskGanForm::least_squares) {
    return (fake_scores - 1.0).pow(2).mean();
  }
  return -log_p(torch::sigmoid(fake_scores)).mean();
}

torch::Tensor layout_d_loss(const torch::Tensor& p_qr, const torch::Tensor& p_qi, const torch::Tensor& p_fr,
                            const torch::Tensor& p_mismatch, MismatchSign sign) {
  auto mismatch = sign == MismatchSign::as_written ? log_p(p_mismatch) : log_not_p(p_mismatch);
  return -(log_p(p_qr).mean() + log_not_p(p_qi).mean() + log_not_p(p_fr).mean() + mismatch.mean());
}

torch::Tensor layout_g_loss(const torch::Tensor& p_fi) { return -log_p(p_fi).mean(); }

torch::Tensor book_d_loss(const torch::Tensor& p_real, const torch::Tensor& p_fake) {
  return -(log_p(p_real).mean() + log_not_p(p_fake).mean());
}

torch::Tensor book_g_loss(const torch::Tensor& p_fake) { return -log_p(p_fake).mean(); }

torch::Tensor object_d_loss(const torch::Tensor& p_real, const torch::Tensor& p_fake, std::int64_t batch_size) {
  if (p_real.sizes() != p_fake.sizes()) {
    throw ShapeError("object critic needs one real and one generated crop per object");
  }
  return (log_p(p_fake) - log_p(p_real)).sum() / static_cast<double>(std::max<std::int64_t>(batch_size, 1));
}

torch::Tensor object_g_loss(const torch::Tensor& p_fake, std::int64_t batch_size) {
  return -log_p(p_fake).sum() / static_cast<double>(std::max<std::int64_t>(batch_size, 1));
}

torch::Tensor mean_abs_over_layers(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeError("feature lists must be non-empty and of equal length");
  }
  auto total = (a[0] - b[0]).abs().mean();
  for (std::size_t i = 1; i < a.size(); ++i) {
    if (a[i].sizes() != b[i].sizes()) {
      throw ShapeError("feature layer " + std::to_string(i) + " shapes differ");
    }
    total = total + (a[i] - b[i]).abs().mean();
  }
  return total;
}

torch::Tensor box_loss(const torch::Tensor& predicted, const torch::Tensor& target) {
  if (predicted.sizes() != target.sizes()) {
    throw ShapeError("predicted and target boxes are not aligned: " + c10::str(predicted.sizes()) + " vs " +
                     c10::str(target.sizes()));
  }
  return (predicted - target).abs().mean();
}

torch::Tensor pixel_loss(const torch::Tensor& generated, const torch::Tensor& real) {
  if (generated.sizes() != real.sizes()) {
    throw ShapeError("generated and real images differ in shape");
  }
  return (generated - real).abs().mean();
}

void LossWeights::validate() const {
  for (std::size_t i = 0; i < kLossTerms; ++i) {
    if (!std::isfinite(lambda[i]) || lambda[i] < 0.0) {
      throw ConfigError("loss weight for " + std::string(kLossTermNames[i]) + " must be finite and >= 0");
    }
  }
}

double weighted_total(const std::array<double, kLossTerms>& terms, const LossWeights& weights) {
  double total = 0.0;
  for (std::size_t i = 0; i < kLossTerms; ++i) {
    total += weights[i] * terms[i];
  }
  return total;
}

LossBundle make_bundle(const std::array<double, kLossTerms>& terms, const LossWeights& weights) {
  LossBundle bundle;
  bundle.terms = terms;
  bundle.total = weighted_total(terms, weights);
  return bundle;
}

torch::Tensor weighted_total(const std::array<torch::Tensor, kLossTerms>& terms, const LossWeights& weights) {
  auto total = terms[0] * weights[0];
  for (std::size_t i = 1; i < kLossTerms; ++i) {
    total = total + terms[i] * weights[i];
  }
  return total;
}

void require_finite(std::string_view term, const torch::Tensor& value) {
  if (!torch::isfinite(value).all().item<bool>()) {
    throw NumericError(std::string(term), "loss term '" + std::string(term) + "' is not finite");
  }
}

}  // namespace covergraph
