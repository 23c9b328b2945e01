#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gatas/tensor.hpp"

namespace gatas::nn {

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-6;
  /// Denominator floor: relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-4;
  std::uint64_t seed = 7;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_input;
  Index worst_entry = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
  bool passed = true;
};

/// Builds a graph from inputs; the result may be any shape.
using GraphBuilder = std::function<Var<double>(Tape<double>&, std::span<const Var<double>>)>;

/// Compares reverse-mode gradients of sum(out * R), R fixed random, against
/// central differences for every input entry.
GradCheckReport finite_difference_check(const GraphBuilder& build,
                                        std::vector<Matrix<double>> inputs,
                                        const GradCheckOptions& options = {});

/// Same check for a scalar loss over every entry of every parameter in `params`.
GradCheckReport finite_difference_check(ParameterStore<double>& params,
                                        const std::function<Var<double>(Tape<double>&)>& loss,
                                        const GradCheckOptions& options = {});

}  // namespace gatas::nn
