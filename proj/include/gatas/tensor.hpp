#pragma once

// Dense 2-D tensors with tape-based reverse-mode differentiation.
//
// Every op records its forward value on a Tape together with a closure that
// propagates adjoints to its inputs. Tapes are single-use and single-threaded;
// independent tapes can run concurrently. Parameters outlive tapes and receive
// accumulated gradients when Tape::backward() finishes.

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gatas/sampler.hpp"

namespace gatas::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

template <typename T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
  bool regularized = true;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Named parameters with stable addresses, kept in insertion order.
template <typename T>
class ParameterStore {
 public:
  Parameter<T>& add(std::string name, Matrix<T> init, bool regularized = true);
  Parameter<T>& get(const std::string& name);
  const Parameter<T>& get(const std::string& name) const;
  Parameter<T>* find(const std::string& name);
  const Parameter<T>* find(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  Parameter<T>& operator[](std::size_t k) { return *params_[k]; }
  const Parameter<T>& operator[](std::size_t k) const { return *params_[k]; }

  void zero_grad();
  std::size_t num_values() const;

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
};

template <typename T>
class Tape;

/// Handle to a value recorded on a tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape<T>& tape() const { return *tape_; }
  std::size_t index() const { return index_; }
  const Matrix<T>& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t index_ = 0;
};

template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape<T>&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Matrix<T> value);
  /// Leaf bound to `param`; its adjoint is added to param.grad by backward().
  Var<T> parameter(Parameter<T>& param);
  /// Records an op result. `backward` runs only when some input needs gradients.
  Var<T> record(Matrix<T> value, std::span<const Var<T>> inputs, Backward backward);
  Var<T> record(Matrix<T> value, std::initializer_list<Var<T>> inputs, Backward backward) {
    return record(std::move(value), std::span<const Var<T>>(inputs.begin(), inputs.size()),
                  std::move(backward));
  }

  const Matrix<T>& value(std::size_t k) const { return nodes_[k].value; }
  bool requires_grad(std::size_t k) const { return nodes_[k].requires_grad; }
  /// Adjoint slot of node k, zero-initialized on first access.
  Matrix<T>& grad(std::size_t k);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every reachable parameter.
  void backward(Var<T> loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix<T> value;
    Matrix<T> grad;
    bool has_grad = false;
    bool requires_grad = false;
    Backward backward;
    Parameter<T>* param = nullptr;
  };
  std::vector<Node> nodes_;
};

/// Row-wise boolean mask, 1 = keep.
using Mask = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
template <typename T> Var<T> transpose(Var<T> a);
/// Elementwise sum; `b` may also be a 1 x cols row broadcast over rows of `a`.
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> a, T factor);
/// Multiplies row r of `a` (rows x cols) by w(r, 0) of `w` (rows x 1).
template <typename T> Var<T> scale_rows(Var<T> a, Var<T> w);
/// Concatenation along the last axis.
template <typename T> Var<T> concat(std::span<const Var<T>> parts);
template <typename T> Var<T> gather_rows(Var<T> a, std::vector<Index> rows);
/// out(r, 0) = a(r, columns[r]).
template <typename T> Var<T> pick(Var<T> a, std::vector<Index> columns);
template <typename T> Var<T> reshape(Var<T> a, Index rows, Index cols);
/// Natural log with inputs clamped below at `floor`.
template <typename T> Var<T> log(Var<T> a, T floor = T(1e-12));
template <typename T> Var<T> sum(Var<T> a);
/// out.row(segment[r]) += a.row(r); `count` output rows.
template <typename T> Var<T> segment_sum(Var<T> a, std::vector<Index> segment, Index count);
/// out.row(index[r]) = a.row(r) in a zero matrix of `rows` rows; indices must be distinct.
template <typename T> Var<T> scatter_rows(Var<T> a, std::vector<Index> index, Index rows);
/// Softmax along the last axis over entries where mask == 1; masked entries are 0.
template <typename T> Var<T> masked_softmax(Var<T> a, const Mask& mask);
template <typename T> Var<T> elu(Var<T> a);
/// Zeroes each entry independently with probability `rate` (no rescaling);
/// identity when !train.
template <typename T> Var<T> mask_inputs(Var<T> a, double rate, Rng& rng, bool train);
/// Inverted dropout; identity when !train or rate == 0.
template <typename T> Var<T> dropout(Var<T> a, double rate, Rng& rng, bool train);
/// (x - mean) / sqrt(var + eps) along the last axis, without affine terms.
template <typename T> Var<T> layer_norm(Var<T> a, T eps = T(1e-6));
/// lambda * sum of squares over all `params`.
template <typename T> Var<T> l2_penalty(std::span<const Var<T>> params, double lambda);
/// Mean over rows of -log softmax(logits)[label].
template <typename T> Var<T> softmax_cross_entropy(Var<T> logits, std::vector<Index> labels);
/// Mean over entries of the logistic loss against 0/1 targets.
template <typename T> Var<T> sigmoid_cross_entropy(Var<T> logits, const Matrix<T>& targets);

/// Log of a learnable mixture: for every row r computes ln(sum_t w(r, t) q_t)
/// with q = softmax(logits), minus the largest such value among rows sharing
/// r's segment. Evaluated in 64-bit regardless of T, so the result does not
/// change when all weights of a segment are scaled by a common factor.
/// `logits` is 1 x K and `weights` is rows x K.
template <typename T>
Var<T> log_mixture(Var<T> logits, const Eigen::MatrixXd& weights, std::vector<Index> segment,
                   Index count);

}  // namespace gatas::nn
