#include "gatas/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "gatas/error.hpp"

namespace gatas {

double accuracy(const Eigen::MatrixXd& logits, std::span<const std::uint32_t> labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) throw ShapeError("accuracy: row count differs from labels");
  if (labels.empty()) throw DataError("accuracy of an empty set");
  std::size_t hits = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    if (labels[r] >= logits.cols()) throw DataError("label out of range");
    Eigen::Index best = 0;
    logits.row(r).maxCoeff(&best);
    hits += static_cast<std::uint32_t>(best) == labels[r];
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double micro_f1(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw ShapeError("micro_f1: logits and targets differ in shape");
  }
  double tp = 0, fp = 0, fn = 0;
  for (Eigen::Index k = 0; k < logits.size(); ++k) {
    const bool pred = logits.data()[k] > 0;
    const bool truth = targets.data()[k] > 0.5;
    tp += pred && truth;
    fp += pred && !truth;
    fn += !pred && truth;
  }
  return tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
}

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw ShapeError("roc_auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) {
        positive_rank_sum += rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) throw DataError("roc_auc needs positive and negative examples");
  const double p = static_cast<double>(positives);
  return (positive_rank_sum - p * (p + 1) / 2) / (p * static_cast<double>(negatives));
}

double top_k_f1(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw ShapeError("top_k_f1: scores and labels differ in length");
  const auto positives = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](auto l) { return l != 0; }));
  if (positives == 0) return 0.0;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t tp = 0;
  for (std::size_t k = 0; k < positives; ++k) tp += labels[order[k]] != 0;
  // precision and recall share the denominator k = positives
  return static_cast<double>(tp) / static_cast<double>(positives);
}

}  // namespace gatas
