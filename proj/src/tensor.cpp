#include "lowlight/tensor.hpp"

#include <cmath>

namespace lowlight {

std::size_t Tensor::numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    auto node = std::make_shared<detail::TensorNode>();
    node->values.assign(numel(shape), 0.0);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& v : t.values()) v = value;
    return t;
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> values,
                    bool requires_grad) {
    if (numel(shape) != values.size())
        throw DimensionError("Tensor::from: shape does not match value count");
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({1}, {value}, requires_grad);
}

double Tensor::item() const {
    if (size() != 1) throw ContractError("Tensor::item: tensor is not size-1");
    return node_->values[0];
}

std::span<double> Tensor::grad() const {
    if (node_->grad.size() != node_->values.size()) node_->grad.assign(node_->values.size(), 0.0);
    return node_->grad;
}

void Tensor::zero_grad() const {
    if (!node_->grad.empty()) node_->grad.assign(node_->values.size(), 0.0);
}

bool Tensor::all_finite() const {
    if (!node_) return true;
    for (double v : node_->values)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tape::record(std::vector<Tensor> inputs, Tensor output, std::function<void()> backward_fn) {
    entries_.push_back({std::move(inputs), std::move(output), std::move(backward_fn)});
}

void Tape::backward(const Tensor& output) {
    if (output.size() != 1) throw ContractError("Tape::backward: seed must be a scalar tensor");
    Tensor seed = output;
    seed.grad()[0] = 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        if (it->backward_fn) it->backward_fn();
    }
}

}  // namespace lowlight
