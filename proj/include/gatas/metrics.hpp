#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace gatas {

/// Fraction of rows whose arg-max column equals the label.
double accuracy(const Eigen::MatrixXd& logits, std::span<const std::uint32_t> labels);

/// Pooled F1 over every (row, label) decision; a logit above 0 (probability
/// above 0.5) predicts the label. Returns 0 when there are no true positives.
double micro_f1(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& targets);

/// Area under the ROC curve via average ranks (ties share their rank).
/// Requires both classes to be present.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// F1 when the top-k scores are predicted positive, k being the number of
/// positives.
double top_k_f1(std::span<const double> scores, std::span<const std::uint8_t> labels);

}  // namespace gatas
