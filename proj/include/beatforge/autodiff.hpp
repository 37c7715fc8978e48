#pragma once

// Tape-based reverse-mode differentiation over Tensor values.
//
// A Graph records every op as it is evaluated. Node ids are assigned in
// creation order, which is a topological order, so backward() walks ids in
// reverse and visits each node once. A Graph is confined to one thread.

#include "beatforge/tensor.hpp"

#include <deque>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace beatforge::nn {

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
};

// Named, insertion-ordered parameter collection. Element addresses are stable.
class ParamStore {
public:
    ParamStore() = default;
    ParamStore(const ParamStore& other);
    ParamStore& operator=(const ParamStore& other);
    ParamStore(ParamStore&&) noexcept = default;
    ParamStore& operator=(ParamStore&&) noexcept = default;

    Parameter& add(std::string name, Tensor init);
    Parameter& at(std::string_view name);
    const Parameter& at(std::string_view name) const;
    bool contains(std::string_view name) const;

    std::deque<Parameter>& all() noexcept { return params_; }
    const std::deque<Parameter>& all() const noexcept { return params_; }
    std::size_t size() const noexcept { return params_.size(); }
    std::size_t scalar_count() const;
    void zero_grad();

private:
    std::deque<Parameter> params_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

enum class OpKind {
    constant,
    parameter,
    matmul,
    matmul_nt,
    add,
    mul,
    scale,
    add_bias,
    sum,
    mean_rows,
    slice_rows,
    slice_cols,
    concat_rows,
    concat_cols,
    gelu,
    softmax,
    layer_norm,
    causal_mask,
    embedding,
    spatial_avg_pool,
    normalize_rows,
    cross_entropy,
};

std::string_view op_name(OpKind kind);

class Graph;

struct Var {
    Graph* graph = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
};

class Graph {
public:
    // Receives the graph and the node's own id; adds into the inputs' gradients.
    using BackwardFn = std::function<void(Graph&, std::size_t)>;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // A leaf that never receives gradient.
    Var constant(Tensor value);
    // A leaf bound to a parameter; backward() adds its gradient into p.grad.
    // Registering the same parameter twice returns the same node.
    Var parameter(Parameter& p);

    Var record(OpKind kind, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    // Gradient buffer of a node, allocated (zeroed) on first access.
    Tensor& grad(std::size_t id);
    bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }
    OpKind kind(std::size_t id) const { return nodes_[id].kind; }
    std::size_t size() const noexcept { return nodes_.size(); }

    // Populate gradients of everything upstream of a scalar loss and
    // accumulate them into the bound parameters. May be called once.
    void backward(Var loss);

private:
    struct Node {
        OpKind kind = OpKind::constant;
        Tensor value;
        Tensor grad;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        Parameter* param = nullptr;
        bool requires_grad = false;
    };

    std::vector<Node> nodes_;
    std::map<Parameter*, std::size_t> param_nodes_;
    bool backward_done_ = false;
};

}  // namespace beatforge::nn
