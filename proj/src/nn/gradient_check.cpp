#include "eyedrive/nn/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace eyedrive::nn {

namespace {

std::vector<std::size_t> pick_indices(std::size_t n, std::size_t limit, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (limit == 0 || limit >= n) return idx;
  rng.shuffle(idx.begin(), idx.end());
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric) + 1e-12);
}

}  // namespace

GradientCheckResult gradient_check(BasicNetwork<double>& net, const BasicTensor<double>& input,
                                   const GradientCheckOptions& options) {
  Rng rng(options.seed);
  const bool use_ce = !net.specs().empty() && net.specs().back().kind == LayerKind::kSoftmax;

  BasicTensor<double> projection(net.output_shape());
  for (double& v : projection.values()) v = rng.uniform(-1.0, 1.0);

  auto loss_of = [&](const BasicTensor<double>& out) {
    if (use_ce) return cross_entropy(out, options.target);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += projection[i] * out[i];
    return acc;
  };

  net.zero_grad();
  net.forward(input, Mode::kTraining);
  BasicTensor<double> input_grad =
      use_ce ? net.backward_cross_entropy(options.target, 1.0, options.include_input)
             : net.backward(projection, options.include_input);

  auto params = net.parameters();
  std::vector<std::vector<double>> analytic;
  for (std::size_t i = 0; i < params.size(); ++i) {
    analytic.push_back(params[i]->grad);
    if (options.tamper) options.tamper(i, analytic.back());
  }

  const std::vector<std::uint32_t> base_pattern = net.branch_pattern();

  GradientCheckResult result;
  const double h = options.step;
  auto record = [&](double a, double n, bool smooth, const std::string& where) {
    if (!smooth) {
      ++result.skipped_kinks;
      return;
    }
    if (std::abs(a) < options.resolution && std::abs(n) < options.resolution) {
      ++result.skipped_unresolved;
      return;
    }
    const double err = relative_error(a, n);
    if (result.checked++ == 0 || err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst = where;
    }
  };

  for (std::size_t i = 0; i < params.size(); ++i) {
    BasicTensor<double>& value = params[i]->value;
    for (std::size_t j : pick_indices(value.size(), options.samples_per_tensor, rng)) {
      const double saved = value[j];
      value[j] = saved + h;
      const double up = loss_of(net.forward(input, Mode::kReplay));
      bool smooth = net.branch_pattern() == base_pattern;
      value[j] = saved - h;
      const double down = loss_of(net.forward(input, Mode::kReplay));
      smooth = smooth && net.branch_pattern() == base_pattern;
      value[j] = saved;
      record(analytic[i][j], (up - down) / (2.0 * h), smooth,
             "param " + std::to_string(i) + "[" + std::to_string(j) + "]");
    }
  }

  if (options.include_input) {
    BasicTensor<double> x = input;
    for (std::size_t j : pick_indices(x.size(), options.samples_per_tensor, rng)) {
      const double saved = x[j];
      x[j] = saved + h;
      const double up = loss_of(net.forward(x, Mode::kReplay));
      bool smooth = net.branch_pattern() == base_pattern;
      x[j] = saved - h;
      const double down = loss_of(net.forward(x, Mode::kReplay));
      smooth = smooth && net.branch_pattern() == base_pattern;
      x[j] = saved;
      record(input_grad[j], (up - down) / (2.0 * h), smooth, "input[" + std::to_string(j) + "]");
    }
  }
  return result;
}

}  // namespace eyedrive::nn
