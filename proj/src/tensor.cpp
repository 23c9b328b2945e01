#include "gatas/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gatas/error.hpp"

namespace gatas::nn {

namespace {

std::string shape_of(Index rows, Index cols) {
  return "[" + std::to_string(rows) + " x " + std::to_string(cols) + "]";
}

template <typename T>
void require_same_tape(Var<T> a, Var<T> b) {
  if (&a.tape() != &b.tape()) throw ShapeError("operands recorded on different tapes");
}

template <typename T>
void require_same_shape(Var<T> a, Var<T> b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_of(a.rows(), a.cols()) +
                     " vs " + shape_of(b.rows(), b.cols()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// ParameterStore

template <typename T>
Parameter<T>& ParameterStore<T>::add(std::string name, Matrix<T> init, bool regularized) {
  if (find(name) != nullptr) throw ConfigError("duplicate parameter " + name);
  auto p = std::make_unique<Parameter<T>>();
  p->name = std::move(name);
  p->value = std::move(init);
  p->regularized = regularized;
  p->zero_grad();
  params_.push_back(std::move(p));
  return *params_.back();
}

template <typename T>
Parameter<T>* ParameterStore<T>::find(const std::string& name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

template <typename T>
const Parameter<T>* ParameterStore<T>::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

template <typename T>
Parameter<T>& ParameterStore<T>::get(const std::string& name) {
  if (Parameter<T>* p = find(name)) return *p;
  throw ConfigError("unknown parameter " + name);
}

template <typename T>
const Parameter<T>& ParameterStore<T>::get(const std::string& name) const {
  if (const Parameter<T>* p = find(name)) return *p;
  throw ConfigError("unknown parameter " + name);
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

template <typename T>
std::size_t ParameterStore<T>::num_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

// ---------------------------------------------------------------------------
// Tape

template <typename T>
const Matrix<T>& Var<T>::value() const {
  return tape_->value(index_);
}

template <typename T>
Var<T> Tape<T>::constant(Matrix<T> value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::parameter(Parameter<T>& param) {
  Node node;
  node.value = param.value;
  node.requires_grad = true;
  node.param = &param;
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::record(Matrix<T> value, std::span<const Var<T>> inputs, Backward backward) {
  Node node;
  node.value = std::move(value);
  for (const Var<T>& in : inputs) {
    if (&in.tape() != this) throw ShapeError("operand recorded on a different tape");
    node.requires_grad = node.requires_grad || nodes_[in.index()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Matrix<T>& Tape<T>::grad(std::size_t k) {
  Node& node = nodes_[k];
  if (!node.has_grad) {
    node.grad.setZero(node.value.rows(), node.value.cols());
    node.has_grad = true;
  }
  return node.grad;
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (&loss.tape() != this) throw ShapeError("loss recorded on a different tape");
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw ShapeError("backward() needs a scalar loss, got " + shape_of(loss.rows(), loss.cols()));
  }
  grad(loss.index())(0, 0) += T(1);
  for (std::size_t k = loss.index() + 1; k-- > 0;) {
    Node& node = nodes_[k];
    if (!node.has_grad || !node.requires_grad) continue;
    if (node.backward) node.backward(*this, k);
    if (node.param != nullptr) node.param->grad += node.grad;
  }
}

// ---------------------------------------------------------------------------
// Ops

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  require_same_tape(a, b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_of(a.rows(), a.cols()) + " x " +
                     shape_of(b.rows(), b.cols()));
  }
  Matrix<T> out = a.value() * b.value();
  const std::size_t ia = a.index(), ib = b.index();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<T>& t, std::size_t self) {
    const Matrix<T>& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia).noalias() += g * t.value(ib).transpose();
    if (t.requires_grad(ib)) t.grad(ib).noalias() += t.value(ia).transpose() * g;
  });
}

template <typename T>
Var<T> transpose(Var<T> a) {
  Matrix<T> out = a.value().transpose();
  const std::size_t ia = a.index();
  return a.tape().record(std::move(out), {a}, [ia](Tape<T>& t, std::size_t self) {
    t.grad(ia) += t.grad(self).transpose();
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_tape(a, b);
  const std::size_t ia = a.index(), ib = b.index();
  if (b.rows() == 1 && a.rows() != 1 && b.cols() == a.cols()) {
    Matrix<T> out = a.value().rowwise() + b.value().row(0);
    return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<T>& t, std::size_t self) {
      const Matrix<T>& g = t.grad(self);
      if (t.requires_grad(ia)) t.grad(ia) += g;
      if (t.requires_grad(ib)) t.grad(ib) += g.colwise().sum();
    });
  }
  require_same_shape(a, b, "add");
  Matrix<T> out = a.value() + b.value();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<T>& t, std::size_t self) {
    const Matrix<T>& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia) += g;
    if (t.requires_grad(ib)) t.grad(ib) += g;
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "mul");
  Matrix<T> out = a.value().cwiseProduct(b.value());
  const std::size_t ia = a.index(), ib = b.index();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<T>& t, std::size_t self) {
    const Matrix<T>& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia) += g.cwiseProduct(t.value(ib));
    if (t.requires_grad(ib)) t.grad(ib) += g.cwiseProduct(t.value(ia));
  });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  Matrix<T> out = a.value() * factor;
  const std::size_t ia = a.index();
  return a.tape().record(std::move(out), {a}, [ia, factor](Tape<T>& t, std::size_t self) {
    t.grad(ia) += t.grad(self) * factor;
  });
}

template <typename T>
Var<T> scale_rows(Var<T> a, Var<T> w) {
  require_same_tape(a, w);
  if (w.cols() != 1 || w.rows() != a.rows()) {
    throw ShapeError("scale_rows: weights " + shape_of(w.rows(), w.cols()) + " for " +
                     shape_of(a.rows(), a.cols()));
  }
  Matrix<T> out = a.value().array().colwise() * w.value().col(0).array();
  const std::size_t ia = a.index(), iw = w.index();
  return a.tape().record(std::move(out), {a, w}, [ia, iw](Tape<T>& t, std::size_t self) {
    const Matrix<T>& g = t.grad(self);
    if (t.requires_grad(ia)) {
      t.grad(ia).array() += g.array().colwise() * t.value(iw).col(0).array();
    }
    if (t.requires_grad(iw)) {
      t.grad(iw).col(0) += g.cwiseProduct(t.value(ia)).rowwise().sum();
    }
  });
}

template <typename T>
Var<T> concat(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  const Index rows = parts[0].rows();
  Index cols = 0;
  for (const Var<T>& p : parts) {
    require_same_tape(parts[0], p);
    if (p.rows() != rows) {
      throw ShapeError("concat: row count " + std::to_string(p.rows()) + " vs " +
                       std::to_string(rows));
    }
    cols += p.cols();
  }
  Matrix<T> out(rows, cols);
  std::vector<std::size_t> ids;
  std::vector<Index> offsets;
  Index offset = 0;
  for (const Var<T>& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    ids.push_back(p.index());
    offsets.push_back(offset);
    offset += p.cols();
  }
  return parts[0].tape().record(std::move(out), parts,
                     [ids = std::move(ids), offsets = std::move(offsets)](Tape<T>& t,
                                                                          std::size_t self) {
                       const Matrix<T>& g = t.grad(self);
                       for (std::size_t k = 0; k < ids.size(); ++k) {
                         if (!t.requires_grad(ids[k])) continue;
                         t.grad(ids[k]) += g.middleCols(offsets[k], t.value(ids[k]).cols());
                       }
                     });
}

template <typename T>
Var<T> gather_rows(Var<T> a, std::vector<Index> rows) {
  Matrix<T> out(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= a.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[r]) + " outside " +
                       shape_of(a.rows(), a.cols()));
    }
    out.row(static_cast<Index>(r)) = a.value().row(rows[r]);
  }
  const std::size_t ia = a.index();
  return a.tape().record(std::move(out), {a},
                         [ia, rows = std::move(rows)](Tape<T>& t, std::size_t self) {
                           const Matrix<T>& g = t.grad(self);
                           Matrix<T>& ga = t.grad(ia);
                           for (std::size_t r = 0; r < rows.size(); ++r) {
                             ga.row(rows[r]) += g.row(static_cast<Index>(r));
                           }
                         });
}

template <typename T>
Var<T> pick(Var<T> a, std::vector<Index> columns) {
  if (static_cast<Index>(columns.size()) != a.rows()) {
    throw ShapeError("pick: " + std::to_string(columns.size()) + " columns for " +
                     shape_of(a.rows(), a.cols()));
  }
  Matrix<T> out(a.rows(), 1);
  for (Index r = 0; r < a.rows(); ++r) {
    if (columns[r] < 0 || columns[r] >= a.cols()) {
      throw ShapeError("pick: column " + std::to_string(columns[r]) + " outside " +
                       shape_of(a.rows(), a.cols()));
    }
    out(r, 0) = a.value()(r, columns[r]);
  }
  const std::size_t ia = a.index();
  return a.tape().record(std::move(out), {a},
                         [ia, columns = std::move(columns)](Tape<T>& t, std::size_t self) {
                           const Matrix<T>& g = t.grad(self);
                           Matrix<T>& ga = t.grad(ia);
                           for (Index r = 0; r < g.rows(); ++r) ga(r, columns[r]) += g(r, 0);
                         });
}

template <typename T>
Var<T> reshape(Var<T> a, Index rows, Index cols) {
  if (rows * cols != a.value().size()) {
    throw ShapeError("reshape: " + shape_of(a.rows(), a.cols()) + " to " + shape_of(rows, cols));
  }
  Matrix<T> out = Eigen::Map<const Matrix<T>>(a.value().data(), rows, cols);
  const std::size_t ia = a.index();
  const Index r0 = a.rows(), c0 = a.cols();
  return a.tape().record(std::move(out), {a}, [ia, r0, c0](Tape<T>& t, std::size_t self) {
    t.grad(ia) += Eigen::Map<const Matrix<T>>(t.grad(self).data(), r0, c0);
  });
}

template <typename T>
Var<T> log(Var<T> a, T floor) {
  Matrix<T> out = a.value().array().max(floor).log().matrix();
  const std::size_t ia = a.index();
  return a.tape().record(std::move(out), {a}, [ia, floor](Tape<T>& t, std::size_t self) {
    const Matrix<T>& x = t.value(ia);
    t.grad(ia).array() +=
        (x.array() > floor).select(t.grad(self).array() / x.array(), T(0));
  });
}

template <typename T>
Var<T> sum(Var<T> a) {
  Matrix<T> out(1, 1);
  out(0, 0) = a.value().sum();
  const std::size_t ia = a.index();
  return a.tape().record(std::move(out), {a}, [ia](Tape<T>& t, std::size_t self) {
    t.grad(ia).array() += t.grad(self)(0, 0);
  });
}

template <typename T>
Var<T> segment_sum(Var<T> a, std::vector<Index> segment, Index count) {
  if (static_cast<Index>(segment.size()) != a.rows() || count < 0) {
    throw ShapeError("segment_sum: " + std::to_string(segment.size()) + " segment ids for " +
                     shape_of(a.rows(), a.cols()));
  }
  Matrix<T> out = Matrix<T>::Zero(count, a.cols());
  for (Index r = 0; r < a.rows(); ++r) {
    if (segment[r] < 0 || segment[r] >= count) {
      throw ShapeError("segment_sum: segment " + std::to_string(segment[r]) + " outside [0, " +
                       std::to_string(count) + ")");
    }
    out.row(segment[r]) += a.value().row(r);
  }
  const std::size_t ia = a.index();
  return a.tape().record(std::move(out), {a},
                         [ia, segment = std::move(segment)](Tape<T>& t, std::size_t self) {
                           const Matrix<T>& g = t.grad(self);
                           Matrix<T>& ga = t.grad(ia);
                           for (Index r = 0; r < ga.rows(); ++r) ga.row(r) += g.row(segment[r]);
                         });
}

template <typename T>
Var<T> scatter_rows(Var<T> a, std::vector<Index> index, Index rows) {
  if (static_cast<Index>(index.size()) != a.rows()) {
    throw ShapeError("scatter_rows: " + std::to_string(index.size()) + " indices for " +
                     shape_of(a.rows(), a.cols()));
  }
  Matrix<T> out = Matrix<T>::Zero(rows, a.cols());
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(rows), 0);
  for (Index r = 0; r < a.rows(); ++r) {
    if (index[r] < 0 || index[r] >= rows || seen[index[r]]) {
      throw ShapeError("scatter_rows: invalid or repeated target row " + std::to_string(index[r]));
    }
    seen[index[r]] = 1;
    out.row(index[r]) = a.value().row(r);
  }
  const std::size_t ia = a.index();
  return a.tape().record(std::move(out), {a},
                         [ia, index = std::move(index)](Tape<T>& t, std::size_t self) {
                           const Matrix<T>& g = t.grad(self);
                           Matrix<T>& ga = t.grad(ia);
                           for (Index r = 0; r < ga.rows(); ++r) ga.row(r) += g.row(index[r]);
                         });
}

template <typename T>
Var<T> masked_softmax(Var<T> a, const Mask& mask) {
  if (mask.rows() != a.rows() || mask.cols() != a.cols()) {
    throw ShapeError("masked_softmax: mask " + shape_of(mask.rows(), mask.cols()) + " for " +
                     shape_of(a.rows(), a.cols()));
  }
  const Matrix<T>& x = a.value();
  Matrix<T> out = Matrix<T>::Zero(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    T peak = -std::numeric_limits<T>::infinity();
    bool any = false;
    for (Index c = 0; c < x.cols(); ++c) {
      if (!mask(r, c)) continue;
      if (!std::isfinite(x(r, c))) throw NumericError("masked_softmax: non-finite logit in row " + std::to_string(r));
      peak = std::max(peak, x(r, c));
      any = true;
    }
    if (!any) throw ShapeError("masked_softmax: row " + std::to_string(r) + " is fully masked");
    T total = 0;
    for (Index c = 0; c < x.cols(); ++c) {
      if (mask(r, c)) {
        out(r, c) = std::exp(x(r, c) - peak);
        total += out(r, c);
      }
    }
    out.row(r) /= total;
  }
  const std::size_t ia = a.index();
  return a.tape().record(std::move(out), {a}, [ia](Tape<T>& t, std::size_t self) {
    const Matrix<T>& y = t.value(self);
    const Matrix<T>& g = t.grad(self);
    Matrix<T>& ga = t.grad(ia);
    for (Index r = 0; r < y.rows(); ++r) {
      const T dot = y.row(r).dot(g.row(r));
      ga.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
    }
  });
}

template <typename T>
Var<T> elu(Var<T> a) {
  Matrix<T> out = (a.value().array() > T(0)).select(a.value().array(), a.value().array().exp() - T(1));
  const std::size_t ia = a.index();
  return a.tape().record(std::move(out), {a}, [ia](Tape<T>& t, std::size_t self) {
    const Matrix<T>& x = t.value(ia);
    const Matrix<T>& y = t.value(self);
    t.grad(ia).array() +=
        (x.array() > T(0)).select(t.grad(self).array(), t.grad(self).array() * (y.array() + T(1)));
  });
}

template <typename T>
Var<T> mask_inputs(Var<T> a, double rate, Rng& rng, bool train) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("input noise rate must lie in [0, 1)");
  if (!train || rate == 0.0) return a;
  Matrix<T> keep(a.rows(), a.cols());
  for (Index k = 0; k < keep.size(); ++k) keep.data()[k] = open_unit(rng) >= rate ? T(1) : T(0);
  Matrix<T> out = a.value().cwiseProduct(keep);
  const std::size_t ia = a.index();
  return a.tape().record(std::move(out), {a},
                         [ia, keep = std::move(keep)](Tape<T>& t, std::size_t self) {
                           t.grad(ia) += t.grad(self).cwiseProduct(keep);
                         });
}

template <typename T>
Var<T> dropout(Var<T> a, double rate, Rng& rng, bool train) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");
  if (!train || rate == 0.0) return a;
  const T keep_scale = T(1.0 / (1.0 - rate));
  Matrix<T> keep(a.rows(), a.cols());
  for (Index k = 0; k < keep.size(); ++k) {
    keep.data()[k] = open_unit(rng) >= rate ? keep_scale : T(0);
  }
  Matrix<T> out = a.value().cwiseProduct(keep);
  const std::size_t ia = a.index();
  return a.tape().record(std::move(out), {a},
                         [ia, keep = std::move(keep)](Tape<T>& t, std::size_t self) {
                           t.grad(ia) += t.grad(self).cwiseProduct(keep);
                         });
}

template <typename T>
Var<T> layer_norm(Var<T> a, T eps) {
  const Matrix<T>& x = a.value();
  const Index n = x.cols();
  if (n == 0) throw ShapeError("layer_norm: empty last axis");
  Matrix<T> out(x.rows(), n);
  Matrix<T> inv_std(x.rows(), 1);
  for (Index r = 0; r < x.rows(); ++r) {
    const T mean = x.row(r).mean();
    const T var = (x.row(r).array() - mean).square().mean();
    inv_std(r, 0) = T(1) / std::sqrt(var + eps);
    out.row(r) = (x.row(r).array() - mean) * inv_std(r, 0);
  }
  const std::size_t ia = a.index();
  return a.tape().record(std::move(out), {a},
                         [ia, inv_std = std::move(inv_std)](Tape<T>& t, std::size_t self) {
                           const Matrix<T>& y = t.value(self);
                           const Matrix<T>& g = t.grad(self);
                           Matrix<T>& ga = t.grad(ia);
                           for (Index r = 0; r < y.rows(); ++r) {
                             const T g_mean = g.row(r).mean();
                             const T gy_mean = g.row(r).dot(y.row(r)) / T(y.cols());
                             ga.row(r).array() += inv_std(r, 0) * (g.row(r).array() - g_mean -
                                                                   y.row(r).array() * gy_mean);
                           }
                         });
}

template <typename T>
Var<T> l2_penalty(std::span<const Var<T>> params, double lambda) {
  if (params.empty()) throw ShapeError("l2_penalty: no parameters");
  Tape<T>& tape = params[0].tape();
  Matrix<T> out(1, 1);
  out(0, 0) = 0;
  std::vector<std::size_t> ids;
  for (const Var<T>& p : params) {
    require_same_tape(params[0], p);
    out(0, 0) += p.value().squaredNorm();
    ids.push_back(p.index());
  }
  out(0, 0) *= T(lambda);
  return tape.record(std::move(out), params,
                     [ids = std::move(ids), lambda](Tape<T>& t, std::size_t self) {
                       const T g = t.grad(self)(0, 0) * T(2.0 * lambda);
                       for (std::size_t id : ids) {
                         if (t.requires_grad(id)) t.grad(id) += g * t.value(id);
                       }
                     });
}

template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, std::vector<Index> labels) {
  const Matrix<T>& x = logits.value();
  if (static_cast<Index>(labels.size()) != x.rows() || x.rows() == 0) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     shape_of(x.rows(), x.cols()));
  }
  Matrix<T> probs(x.rows(), x.cols());
  T loss = 0;
  for (Index r = 0; r < x.rows(); ++r) {
    if (labels[r] < 0 || labels[r] >= x.cols()) {
      throw DataError("label " + std::to_string(labels[r]) + " outside [0, " +
                      std::to_string(x.cols()) + ")");
    }
    const T peak = x.row(r).maxCoeff();
    probs.row(r) = (x.row(r).array() - peak).exp();
    const T total = probs.row(r).sum();
    probs.row(r) /= total;
    loss += -(x(r, labels[r]) - peak - std::log(total));
  }
  Matrix<T> out(1, 1);
  out(0, 0) = loss / T(x.rows());
  const std::size_t ia = logits.index();
  return logits.tape().record(
      std::move(out), {logits},
      [ia, labels = std::move(labels), probs = std::move(probs)](Tape<T>& t, std::size_t self) {
        const T g = t.grad(self)(0, 0) / T(probs.rows());
        Matrix<T>& ga = t.grad(ia);
        for (Index r = 0; r < probs.rows(); ++r) {
          ga.row(r) += g * probs.row(r);
          ga(r, labels[r]) -= g;
        }
      });
}

template <typename T>
Var<T> sigmoid_cross_entropy(Var<T> logits, const Matrix<T>& targets) {
  const Matrix<T>& x = logits.value();
  if (targets.rows() != x.rows() || targets.cols() != x.cols() || x.size() == 0) {
    throw ShapeError("sigmoid_cross_entropy: targets " + shape_of(targets.rows(), targets.cols()) +
                     " for " + shape_of(x.rows(), x.cols()));
  }
  const T count = T(x.size());
  Matrix<T> out(1, 1);
  out(0, 0) = (x.array().max(T(0)) - x.array() * targets.array() +
               (T(1) + (-x.array().abs()).exp()).log())
                  .sum() /
              count;
  const std::size_t ia = logits.index();
  return logits.tape().record(std::move(out), {logits},
                              [ia, targets, count](Tape<T>& t, std::size_t self) {
                                const Matrix<T>& z = t.value(ia);
                                const T g = t.grad(self)(0, 0) / count;
                                Matrix<T> sig = (T(1) + (-z.array()).exp()).inverse().matrix();
                                t.grad(ia) += g * (sig - targets);
                              });
}

template <typename T>
Var<T> log_mixture(Var<T> logits, const Eigen::MatrixXd& weights, std::vector<Index> segment,
                   Index count) {
  if (logits.rows() != 1 || logits.cols() != weights.cols()) {
    throw ShapeError("log_mixture: logits " + shape_of(logits.rows(), logits.cols()) +
                     " for weights " + shape_of(weights.rows(), weights.cols()));
  }
  if (static_cast<Index>(segment.size()) != weights.rows()) {
    throw ShapeError("log_mixture: segment ids do not match weight rows");
  }
  const Index rows = weights.rows(), steps = weights.cols();
  std::vector<double> logit_values(static_cast<std::size_t>(steps));
  for (Index k = 0; k < steps; ++k) logit_values[k] = static_cast<double>(logits.value()(0, k));
  const std::vector<double> q_values = softmax(logit_values);
  const Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(q_values.data(), steps);

  const Eigen::VectorXd mixture = weights * q;
  Eigen::VectorXd log_p(rows);
  std::vector<Index> argmax(static_cast<std::size_t>(count), -1);
  for (Index r = 0; r < rows; ++r) {
    if (segment[r] < 0 || segment[r] >= count) throw ShapeError("log_mixture: bad segment id");
    if (!(mixture(r) > 0.0)) throw DataError("log_mixture: row outside the support of P");
    log_p(r) = std::log(mixture(r));
    Index& best = argmax[segment[r]];
    if (best < 0 || log_p(r) > log_p(best)) best = r;
  }
  Matrix<T> out(rows, 1);
  for (Index r = 0; r < rows; ++r) out(r, 0) = static_cast<T>(log_p(r) - log_p(argmax[segment[r]]));

  const std::size_t ia = logits.index();
  return logits.tape().record(
      std::move(out), {logits},
      [ia, weights, segment = std::move(segment), q, mixture, argmax = std::move(argmax)](
          Tape<T>& t, std::size_t self) {
        const Matrix<T>& g = t.grad(self);
        // Coefficient of d ln(P_r) / d logits per row; d ln(P_r)/d logit_u = q_u (w_ru - P_r) / P_r.
        Eigen::VectorXd coeff = Eigen::VectorXd::Zero(weights.rows());
        for (Index r = 0; r < g.rows(); ++r) {
          const double gr = static_cast<double>(g(r, 0));
          coeff(r) += gr;
          coeff(argmax[segment[r]]) -= gr;
        }
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(q.size());
        for (Index r = 0; r < weights.rows(); ++r) {
          if (coeff(r) == 0.0) continue;
          acc += (coeff(r) / mixture(r)) *
                 (weights.row(r).transpose() - Eigen::VectorXd::Constant(q.size(), mixture(r)))
                     .cwiseProduct(q);
        }
        Matrix<T>& ga = t.grad(ia);
        for (Index u = 0; u < q.size(); ++u) ga(0, u) += static_cast<T>(acc(u));
      });
}

#define GATAS_INSTANTIATE(T)                                                                  \
  template struct Parameter<T>;                                                               \
  template class ParameterStore<T>;                                                           \
  template class Var<T>;                                                                      \
  template class Tape<T>;                                                                     \
  template Var<T> matmul(Var<T>, Var<T>);                                                     \
  template Var<T> transpose(Var<T>);                                                          \
  template Var<T> add(Var<T>, Var<T>);                                                        \
  template Var<T> mul(Var<T>, Var<T>);                                                        \
  template Var<T> scale(Var<T>, T);                                                           \
  template Var<T> scale_rows(Var<T>, Var<T>);                                                 \
  template Var<T> concat(std::span<const Var<T>>);                                            \
  template Var<T> gather_rows(Var<T>, std::vector<Index>);                                    \
  template Var<T> pick(Var<T>, std::vector<Index>);                                           \
  template Var<T> reshape(Var<T>, Index, Index);                                              \
  template Var<T> log(Var<T>, T);                                                             \
  template Var<T> sum(Var<T>);                                                                \
  template Var<T> segment_sum(Var<T>, std::vector<Index>, Index);                            \
  template Var<T> scatter_rows(Var<T>, std::vector<Index>, Index);                            \
  template Var<T> mask_inputs(Var<T>, double, Rng&, bool);                                    \
  template Var<T> masked_softmax(Var<T>, const Mask&);                                        \
  template Var<T> elu(Var<T>);                                                                \
  template Var<T> dropout(Var<T>, double, Rng&, bool);                                        \
  template Var<T> layer_norm(Var<T>, T);                                                      \
  template Var<T> l2_penalty(std::span<const Var<T>>, double);                                \
  template Var<T> softmax_cross_entropy(Var<T>, std::vector<Index>);                          \
  template Var<T> sigmoid_cross_entropy(Var<T>, const Matrix<T>&);                            \
  template Var<T> log_mixture(Var<T>, const Eigen::MatrixXd&, std::vector<Index>, Index);

GATAS_INSTANTIATE(float)
GATAS_INSTANTIATE(double)

}  // namespace gatas::nn
