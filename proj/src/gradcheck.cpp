#include "gatas/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "gatas/error.hpp"

namespace gatas::nn {

namespace {

void compare(GradCheckReport& report, const std::string& name, Index entry, double analytic,
             double numeric, const GradCheckOptions& options) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
  double rel = std::abs(analytic - numeric) / denom;
  if (std::isnan(rel)) rel = INFINITY;
  ++report.entries_checked;
  if (report.worst_entry < 0 || rel > report.max_relative_error) {
    report.max_relative_error = rel;
    report.worst_input = name;
    report.worst_entry = entry;
    report.analytic = analytic;
    report.numeric = numeric;
  }
}

}  // namespace

GradCheckReport finite_difference_check(ParameterStore<double>& params,
                                        const std::function<Var<double>(Tape<double>&)>& loss,
                                        const GradCheckOptions& options) {
  params.zero_grad();
  {
    Tape<double> tape;
    tape.backward(loss(tape));
  }
  std::vector<Matrix<double>> analytic;
  for (std::size_t k = 0; k < params.size(); ++k) analytic.push_back(params[k].grad);

  auto evaluate = [&] {
    Tape<double> tape;
    return loss(tape).value()(0, 0);
  };

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix<double>& value = params[k].value;
    for (Index e = 0; e < value.size(); ++e) {
      const double saved = value.data()[e];
      value.data()[e] = saved + options.epsilon;
      const double up = evaluate();
      value.data()[e] = saved - options.epsilon;
      const double down = evaluate();
      value.data()[e] = saved;
      compare(report, params[k].name, e, analytic[k].data()[e], (up - down) / (2 * options.epsilon),
              options);
    }
  }
  report.passed = report.max_relative_error < options.tolerance;
  params.zero_grad();
  return report;
}

GradCheckReport finite_difference_check(const GraphBuilder& build,
                                        std::vector<Matrix<double>> inputs,
                                        const GradCheckOptions& options) {
  ParameterStore<double> params;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    params.add("input" + std::to_string(k), std::move(inputs[k]));
  }

  // Fixed random projection so every output entry contributes.
  Matrix<double> projection;
  auto loss = [&](Tape<double>& tape) {
    std::vector<Var<double>> vars;
    for (std::size_t k = 0; k < params.size(); ++k) vars.push_back(tape.parameter(params[k]));
    Var<double> out = build(tape, vars);
    if (projection.size() == 0) {
      Rng rng(options.seed);
      projection.resize(out.rows(), out.cols());
      for (Index e = 0; e < projection.size(); ++e) projection.data()[e] = 2 * open_unit(rng) - 1;
    }
    if (out.rows() != projection.rows() || out.cols() != projection.cols()) {
      throw ShapeError("gradient check: output shape changed between evaluations");
    }
    return sum(mul(out, tape.constant(projection)));
  };
  return finite_difference_check(params, loss, options);
}

}  // namespace gatas::nn
