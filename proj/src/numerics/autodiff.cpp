#include "beatforge/autodiff.hpp"

#include "beatforge/error.hpp"

#include <algorithm>

namespace beatforge::nn {

ParamStore::ParamStore(const ParamStore& other) : params_(other.params_), index_(other.index_) {}

ParamStore& ParamStore::operator=(const ParamStore& other) {
    if (this != &other) {
        params_ = other.params_;
        index_ = other.index_;
    }
    return *this;
}

Parameter& ParamStore::add(std::string name, Tensor init) {
    if (index_.contains(name)) {
        throw ContractError("duplicate parameter name '" + name + "'");
    }
    Tensor grad(init.shape(), 0.0);
    index_.emplace(name, params_.size());
    params_.push_back(Parameter{std::move(name), std::move(init), std::move(grad)});
    return params_.back();
}

Parameter& ParamStore::at(std::string_view name) {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw ContractError("unknown parameter '" + std::string(name) + "'");
    }
    return params_[it->second];
}

const Parameter& ParamStore::at(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw ContractError("unknown parameter '" + std::string(name) + "'");
    }
    return params_[it->second];
}

bool ParamStore::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) {
        n += p.value.size();
    }
    return n;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) {
        if (p.grad.shape() != p.value.shape()) {
            p.grad = Tensor(p.value.shape(), 0.0);
        } else {
            p.grad.fill(0.0);
        }
    }
}

std::string_view op_name(OpKind kind) {
    switch (kind) {
        case OpKind::constant: return "constant";
        case OpKind::parameter: return "parameter";
        case OpKind::matmul: return "matmul";
        case OpKind::matmul_nt: return "matmul_nt";
        case OpKind::add: return "add";
        case OpKind::mul: return "mul";
        case OpKind::scale: return "scale";
        case OpKind::add_bias: return "add_bias";
        case OpKind::sum: return "sum";
        case OpKind::mean_rows: return "mean_rows";
        case OpKind::slice_rows: return "slice_rows";
        case OpKind::slice_cols: return "slice_cols";
        case OpKind::concat_rows: return "concat_rows";
        case OpKind::concat_cols: return "concat_cols";
        case OpKind::gelu: return "gelu";
        case OpKind::softmax: return "softmax";
        case OpKind::layer_norm: return "layer_norm";
        case OpKind::causal_mask: return "causal_mask";
        case OpKind::embedding: return "embedding";
        case OpKind::spatial_avg_pool: return "spatial_avg_pool";
        case OpKind::normalize_rows: return "normalize_rows";
        case OpKind::cross_entropy: return "cross_entropy";
    }
    return "unknown";
}

const Tensor& Var::value() const { return graph->value(id); }

Var Graph::constant(Tensor value) {
    if (!value.all_finite()) {
        throw NumericError("non-finite value in constant input");
    }
    nodes_.push_back(Node{OpKind::constant, std::move(value), {}, {}, {}, nullptr, false});
    return Var{this, nodes_.size() - 1};
}

Var Graph::parameter(Parameter& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) {
        return Var{this, it->second};
    }
    if (!p.value.all_finite()) {
        throw NumericError("non-finite value in parameter '" + p.name + "'");
    }
    nodes_.push_back(Node{OpKind::parameter, p.value, {}, {}, {}, &p, true});
    param_nodes_.emplace(&p, nodes_.size() - 1);
    return Var{this, nodes_.size() - 1};
}

Var Graph::record(OpKind kind, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
    if (!value.all_finite()) {
        throw NumericError("non-finite output from op " + std::string(op_name(kind)));
    }
    const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                   [this](std::size_t i) { return nodes_[i].requires_grad; });
    nodes_.push_back(Node{kind, std::move(value), {}, std::move(inputs), needs ? std::move(backward) : BackwardFn{},
                          nullptr, needs});
    return Var{this, nodes_.size() - 1};
}

Tensor& Graph::grad(std::size_t id) {
    Node& node = nodes_[id];
    if (node.grad.empty() && !node.value.empty()) {
        node.grad = Tensor(node.value.shape(), 0.0);
    }
    return node.grad;
}

void Graph::backward(Var loss) {
    if (loss.graph != this) {
        throw ContractError("loss variable belongs to a different graph");
    }
    if (value(loss.id).size() != 1) {
        throw ContractError("backward() requires a scalar loss, got shape " + shape_string(value(loss.id).shape()));
    }
    if (backward_done_) {
        throw ContractError("backward() already ran on this graph");
    }
    backward_done_ = true;
    if (!nodes_[loss.id].requires_grad) {
        return;
    }
    grad(loss.id).fill(1.0);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& node = nodes_[i];
        if (!node.requires_grad || node.grad.empty()) {
            continue;
        }
        if (node.backward) {
            node.backward(*this, i);
        }
    }
    for (auto& [param, id] : param_nodes_) {
        const Node& node = nodes_[id];
        if (node.grad.empty()) {
            continue;
        }
        if (param->grad.shape() != param->value.shape()) {
            param->grad = Tensor(param->value.shape(), 0.0);
        }
        for (std::size_t j = 0; j < node.grad.size(); ++j) {
            param->grad[j] += node.grad[j];
        }
    }
}

}  // namespace beatforge::nn
