#pragma once

// Central finite differences against autograd, in double precision.

#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace covergraph::testing {

struct GradientReport {
  double worst_relative = 0.0;
  double largest_gradient = 0.0;
  std::size_t checked = 0;
};

/// `loss` must be a pure function of `params` (double tensors with
/// requires_grad). Relative error uses max(|a|, |n|, floor) as denominator.
inline GradientReport compare_gradients(std::vector<torch::Tensor> params,
                                        const std::function<torch::Tensor()>& loss, double step = 1e-6,
                                        double floor = 1e-6) {
  for (auto& p : params) {
    if (p.grad().defined()) {
      p.grad().zero_();
    }
  }
  loss().backward();
  GradientReport report;
  for (auto& p : params) {
    auto analytic = p.grad().clone();
    auto flat = p.data().view(-1);
    auto grad_flat = analytic.view(-1);
    for (std::int64_t i = 0; i < flat.numel(); ++i) {
      const double original = flat[i].item<double>();
      double plus = 0.0;
      double minus = 0.0;
      {
        torch::NoGradGuard guard;
        flat[i] = original + step;
        plus = loss().item<double>();
        flat[i] = original - step;
        minus = loss().item<double>();
        flat[i] = original;
      }
      const double numeric = (plus - minus) / (2 * step);
      const double a = grad_flat[i].item<double>();
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      report.worst_relative = std::max(report.worst_relative, std::abs(a - numeric) / denom);
      report.largest_gradient = std::max(report.largest_gradient, std::abs(a));
      ++report.checked;
    }
  }
  return report;
}

}  // namespace covergraph::testing
