#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lowlight/error.hpp"

namespace lowlight {

namespace detail {
struct TensorNode {
    std::vector<std::size_t> shape;
    std::vector<double> values;
    std::vector<double> grad;  // empty until touched
    bool requires_grad = false;
};
}  // namespace detail

// Dense row-major f64 tensor. Value-semantics handle onto a shared node so
// that tape entries and parameter stores refer to the same storage.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false);
    static Tensor from(std::vector<std::size_t> shape, std::vector<double> values,
                       bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return node_->shape; }
    std::size_t size() const { return node_ ? node_->values.size() : 0; }
    std::size_t rank() const { return node_->shape.size(); }

    // Accessors are const because the handle, not the storage, is what the
    // qualifier protects: copies share one node.
    std::span<double> values() const { return node_->values; }
    double& operator[](std::size_t i) const { return node_->values[i]; }
    double item() const;  // size-1 tensors only

    bool requires_grad() const { return node_ && node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }

    // allocates (zeroed) on first access
    std::span<double> grad() const;
    bool has_grad() const { return node_ && !node_->grad.empty(); }
    void zero_grad() const;

    bool all_finite() const;

    std::shared_ptr<detail::TensorNode> node() const { return node_; }

    static std::size_t numel(const std::vector<std::size_t>& shape);

  private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::TensorNode> node_;
};

// Reverse-mode tape. Operations append entries in execution order, so the
// list is topologically sorted by construction; backward() walks it once in
// reverse, giving each recorded node exactly one visit.
class Tape {
  public:
    void record(std::vector<Tensor> inputs, Tensor output, std::function<void()> backward_fn);

    // seeds d(output)/d(output)=1 and fills .grad for every requires_grad
    // tensor reachable through the recorded entries
    void backward(const Tensor& output);

    std::size_t size() const { return entries_.size(); }
    void clear() { entries_.clear(); }

  private:
    struct Entry {
        std::vector<Tensor> inputs;
        Tensor output;
        std::function<void()> backward_fn;
    };
    std::vector<Entry> entries_;
};

}  // namespace lowlight
