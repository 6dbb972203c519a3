#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hprn {

/// Thrown when operand shapes are incompatible.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a caller violates an operation's precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims);
  explicit Shape(std::vector<std::size_t> dims);

  std::size_t rank() const { return dims_.size(); }
  std::size_t numel() const;
  std::size_t operator[](std::size_t axis) const { return dims_.at(axis); }
  const std::vector<std::size_t>& dims() const { return dims_; }

  bool operator==(const Shape& other) const { return dims_ == other.dims_; }
  bool operator!=(const Shape& other) const { return dims_ != other.dims_; }

  /// Human readable form, e.g. "[31x64x64]".
  std::string str() const;

 private:
  std::vector<std::size_t> dims_;
};

/// Graph recording switch. Recording is on by default; NoGradGuard disables
/// it for the current thread (inference, validation, finite differences).
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool on);
};

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Reads this node's grad and accumulates into parents' grad buffers.
  std::function<void(TensorNode&)> backward_fn;

  bool is_leaf() const { return !backward_fn; }
  void ensure_grad();
};

/// Dense row-major tensor with an optional reverse-mode gradient record.
///
/// Copies are shallow: two Tensor handles may refer to the same node. Values
/// are immutable once produced by an op; only leaf tensors (parameters) are
/// mutated, and only through mutable_data() between optimizer steps.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, T value, bool requires_grad = false);
  static Tensor from(const Shape& shape, std::vector<T> values, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.rank(); }
  std::size_t dim(std::size_t axis) const { return node_->shape[axis]; }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const T> data() const { return node_->data; }
  std::span<T> mutable_data() { return node_->data; }
  T item() const;
  T operator[](std::size_t flat) const { return node_->data[flat]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);

  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient buffer; empty span when no gradient has been accumulated.
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad();
  void zero_grad();

  /// Populates gradients of every leaf reachable from this scalar.
  /// Intermediate gradients are reset on each call; leaf gradients accumulate.
  void backward() const;

  /// Same values, no gradient history.
  Tensor detach() const;

  const std::shared_ptr<TensorNode<T>>& node() const { return node_; }
  static Tensor wrap(std::shared_ptr<TensorNode<T>> node);

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

/// Builds an op result. When recording is enabled and any parent requires a
/// gradient, the backward rule and parent links are attached.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::vector<Tensor<T>> parents,
                      std::function<void(TensorNode<T>&)> backward_fn);

/// Counts denominators clamped by the division guard since the last reset.
std::uint64_t division_guard_hits();
void reset_division_guard_hits();
void record_division_guard_hit(std::uint64_t n);

/// Sign trace of non-smooth op inputs (abs, prelu) used by gradient checks to
/// detect perturbations that cross a kink. Active only while a KinkTrace
/// scope exists on the current thread.
class KinkTrace {
 public:
  KinkTrace();
  ~KinkTrace();
  KinkTrace(const KinkTrace&) = delete;
  KinkTrace& operator=(const KinkTrace&) = delete;

  const std::vector<std::uint8_t>& signs() const { return signs_; }
  static void record(bool positive);
  static bool active();

 private:
  std::vector<std::uint8_t> signs_;
  KinkTrace* previous_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template struct TensorNode<float>;
extern template struct TensorNode<double>;

}  // namespace hprn
