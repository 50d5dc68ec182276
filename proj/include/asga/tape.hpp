#pragma once

#include <functional>
#include <vector>

#include "asga/quantize.hpp"
#include "asga/tensor.hpp"

namespace asga {

// Handle into a Tape; valid only for the tape that produced it.
struct Var {
    int id = -1;
};

// Reverse-mode tape. One tape per forward pass: ops append nodes in evaluation
// order, which keeps the node list topologically sorted, and backward() visits
// each node exactly once in reverse. Parameter leaves remember their source
// tensor so the sweep can accumulate into ParamSet gradients.
class Tape {
public:
    struct Node {
        Tensor value;
        Tensor grad;  // gradient lives in the values() buffer of this tensor
        Tensor* param_tensor = nullptr;
        std::function<void(Tape&, const Node&)> backward;
    };

    Var constant(Tensor value);
    Var param(ParamSet& ps, int id);
    Var param(ParamSet& ps, std::string_view name) { return param(ps, ps.index_of(name)); }

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    // a + coeff * b, elementwise.
    Var add_scaled(Var a, Var b, double coeff);
    Var mul(Var a, Var b);
    // scale * x + shift, elementwise.
    Var affine(Var x, double scale, double shift);
    Var exp(Var x);
    Var relu(Var x);
    // Row-vector softmax with max subtraction; input must be 1 x k.
    Var softmax_vec(Var x);
    // Single element as a 1x1 scalar node (flat index).
    Var entry(Var x, int i);
    Var sum(Var x);
    // Inner product with a fixed coefficient vector; result 1x1.
    Var dot_const(Var x, std::vector<double> coeffs);
    // x scaled by a 1x1 tape scalar; gradient flows into both.
    Var scale_var(Var x, Var s);
    // Fake-quantize with straight-through backward.
    Var fake_quant(Var x, QuantSpec spec);
    // Mean cross-entropy of row-wise softmax against integer labels.
    Var softmax_cross_entropy(Var logits, std::vector<int> labels);

    // Seeds d(loss)=1 and sweeps the tape once, accumulating into the grad
    // buffers of every parameter leaf's source tensor.
    void backward(Var loss);

    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }
    double scalar(Var v) const { return value(v).item(); }
    int node_count() const { return static_cast<int>(nodes_.size()); }
    int backward_visits() const { return backward_visits_; }

private:
    Var push(Tensor value, std::function<void(Tape&, const Node&)> back = nullptr);
    Node& node(Var v) { return nodes_.at(v.id); }

    std::vector<Node> nodes_;
    int backward_visits_ = 0;
};

}  // namespace asga
