#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "emgnn/error.hpp"

namespace emgnn::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::uint64_t id = 0;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

inline std::uint64_t next_node_id() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

/// Dense row-major float64 array that can take part in a Tape.
///
/// Copies share the underlying node; use clone() for an independent value.
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
      : node_(std::make_shared<Node>()) {
    if (shape_size(shape) != values.size()) {
      throw DimensionError("tensor: shape " + shape_str(shape) + " holds " +
                           std::to_string(shape_size(shape)) +
                           " values, got " + std::to_string(values.size()));
    }
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
    node_->id = next_node_id();
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const std::size_t n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor vector(std::vector<double> values, bool requires_grad = false) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values), requires_grad);
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return Tensor({}, {v}, requires_grad);
  }

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values, bool requires_grad = false) {
    return Tensor({rows, cols}, std::move(values), requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }

  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double item() const {
    if (size() != 1) {
      throw DimensionError("item: tensor " + shape_str(shape()) +
                           " is not a scalar");
    }
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.clear(); }

  std::uint64_t id() const { return node_->id; }

  Tensor clone() const {
    return Tensor(node_->shape, node_->value, node_->requires_grad);
  }

  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& handle() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Ordered record of differentiable operations for one forward pass.
///
/// Operations are appended as they execute, so inputs always precede the
/// operations that consume them; backward() walks the records in exact
/// reverse order and accumulates additively into inputs.
class Tape {
 public:
  using BackwardFn = std::function<void(Node& out)>;

  struct Record {
    std::vector<std::shared_ptr<Node>> inputs;
    std::shared_ptr<Node> output;
    BackwardFn backward;
  };

  Tape() = default;
  /// With `record_grad` false nothing is recorded and every result is a
  /// constant, which is what evaluation wants.
  explicit Tape(bool record_grad) : record_grad_(record_grad) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// Wraps a freshly computed value as the output of an operation. When no
  /// input requires a gradient the result is a constant and nothing is
  /// recorded.
  Tensor record(Shape shape, std::vector<double> values,
                std::initializer_list<Tensor> inputs, BackwardFn backward) {
    return record(std::move(shape), std::move(values),
                  std::vector<Tensor>(inputs), std::move(backward));
  }

  Tensor record(Shape shape, std::vector<double> values,
                const std::vector<Tensor>& inputs, BackwardFn backward) {
    bool needs = false;
    if (record_grad_) {
      for (const auto& t : inputs) needs = needs || t.requires_grad();
    }
    Tensor out(std::move(shape), std::move(values), needs);
    if (needs) {
      Record rec;
      rec.inputs.reserve(inputs.size());
      for (const auto& t : inputs) rec.inputs.push_back(t.handle());
      rec.output = out.handle();
      rec.backward = std::move(backward);
      records_.push_back(std::move(rec));
    }
    return out;
  }

  /// Reverse pass from a scalar loss.
  void backward(const Tensor& loss) {
    if (loss.size() != 1) {
      throw DimensionError("backward: loss must be a scalar, got " +
                           shape_str(loss.shape()));
    }
    if (!loss.requires_grad()) return;
    loss.node().grad_buffer()[0] += 1.0;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
      if (it->output->grad.empty()) continue;
      it->backward(*it->output);
    }
  }

  std::size_t size() const { return records_.size(); }
  const std::vector<Record>& records() const { return records_; }

  /// Hash of every ReLU on/off decision made on this tape, in order. Two
  /// evaluations with equal signatures took the same piecewise-linear branch.
  std::uint64_t kink_signature() const { return kink_hash_; }

  void note_branch(bool active) {
    kink_hash_ ^= active ? 0x9e3779b97f4a7c15ULL : 0x7f4a7c159e3779b9ULL;
    kink_hash_ *= 0x100000001b3ULL;
  }

 private:
  std::vector<Record> records_;
  bool record_grad_ = true;
  std::uint64_t kink_hash_ = 0xcbf29ce484222325ULL;
};

// Accumulates into an input's gradient only when that input participates.
inline double* grad_of(Node& n) {
  return n.requires_grad ? n.grad_buffer().data() : nullptr;
}

}  // namespace emgnn::ad
