#include "asga/tape.hpp"

#include <algorithm>
#include <cmath>

namespace asga {

namespace {

// dstgrad += src, where the gradient payload sits in values().
void add_into(std::span<double> dst, std::span<const double> src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

Var Tape::push(Tensor value, std::function<void(Tape&, const Node&)> back) {
    Node n;
    n.grad = Tensor::zeros_like(value);
    n.value = std::move(value);
    n.backward = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Tensor value) { return push(std::move(value)); }

Var Tape::param(ParamSet& ps, int id) {
    Var v = push(ps[id]);  // snapshot of current values
    nodes_.back().param_tensor = &ps[id];
    return v;
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require(av.cols() == bv.rows(),
            "matmul: inner dims disagree, " + av.shape_str() + " by " + bv.shape_str());
    Tensor out(av.rows(), bv.cols());
    for (int i = 0; i < av.rows(); ++i)
        for (int k = 0; k < av.cols(); ++k) {
            double aik = av(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < bv.cols(); ++j) out(i, j) += aik * bv(k, j);
        }
    return push(std::move(out), [a, b](Tape& t, const Node& n) {
        const Tensor& av = t.value(a);
        const Tensor& bv = t.value(b);
        Tensor& ga = t.node(a).grad;
        Tensor& gb = t.node(b).grad;
        const Tensor& g = n.grad;
        // dA += g * B^T, dB += A^T * g
        for (int i = 0; i < av.rows(); ++i)
            for (int j = 0; j < bv.cols(); ++j) {
                double gij = g(i, j);
                if (gij == 0.0) continue;
                for (int k = 0; k < av.cols(); ++k) {
                    ga(i, k) += gij * bv(k, j);
                    gb(k, j) += gij * av(i, k);
                }
            }
    });
}

Var Tape::add(Var a, Var b) { return add_scaled(a, b, 1.0); }

Var Tape::add_scaled(Var a, Var b, double coeff) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require(av.rows() == bv.rows() && av.cols() == bv.cols(),
            "add: shape mismatch, " + av.shape_str() + " vs " + bv.shape_str());
    Tensor out = Tensor::zeros_like(av);
    auto o = out.values();
    auto x = av.values();
    auto y = bv.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + coeff * y[i];
    return push(std::move(out), [a, b, coeff](Tape& t, const Node& n) {
        auto ga = t.node(a).grad.values();
        auto gb = t.node(b).grad.values();
        auto gv = n.grad.values();
        for (std::size_t i = 0; i < gv.size(); ++i) {
            ga[i] += gv[i];
            gb[i] += coeff * gv[i];
        }
    });
}

Var Tape::mul(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require(av.rows() == bv.rows() && av.cols() == bv.cols(),
            "mul: shape mismatch, " + av.shape_str() + " vs " + bv.shape_str());
    Tensor out = Tensor::zeros_like(av);
    auto o = out.values();
    auto x = av.values();
    auto y = bv.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
    return push(std::move(out), [a, b](Tape& t, const Node& n) {
        auto x = t.value(a).values();
        auto y = t.value(b).values();
        auto ga = t.node(a).grad.values();
        auto gb = t.node(b).grad.values();
        auto gv = n.grad.values();
        for (std::size_t i = 0; i < gv.size(); ++i) {
            ga[i] += gv[i] * y[i];
            gb[i] += gv[i] * x[i];
        }
    });
}

Var Tape::affine(Var x, double scale, double shift) {
    Tensor out = Tensor::zeros_like(value(x));
    auto o = out.values();
    auto v = value(x).values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = scale * v[i] + shift;
    return push(std::move(out), [x, scale](Tape& t, const Node& n) {
        auto gx = t.node(x).grad.values();
        auto gv = n.grad.values();
        for (std::size_t i = 0; i < gv.size(); ++i) gx[i] += scale * gv[i];
    });
}

Var Tape::exp(Var x) {
    Tensor out = Tensor::zeros_like(value(x));
    auto o = out.values();
    auto v = value(x).values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::exp(v[i]);
    return push(std::move(out), [x](Tape& t, const Node& n) {
        auto ev = n.value.values();
        auto gx = t.node(x).grad.values();
        auto gv = n.grad.values();
        for (std::size_t i = 0; i < gv.size(); ++i) gx[i] += gv[i] * ev[i];
    });
}

Var Tape::relu(Var x) {
    Tensor out = Tensor::zeros_like(value(x));
    auto o = out.values();
    auto v = value(x).values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = v[i] > 0.0 ? v[i] : 0.0;
    // Subgradient at exactly 0 is taken as 0.
    return push(std::move(out), [x](Tape& t, const Node& n) {
        auto v = t.value(x).values();
        auto gx = t.node(x).grad.values();
        auto gv = n.grad.values();
        for (std::size_t i = 0; i < gv.size(); ++i)
            if (v[i] > 0.0) gx[i] += gv[i];
    });
}

Var Tape::softmax_vec(Var x) {
    const Tensor& xv = value(x);
    require(xv.rows() == 1, "softmax_vec expects a row vector, got " + xv.shape_str());
    Tensor out = Tensor::zeros_like(xv);
    auto v = xv.values();
    auto p = out.values();
    double m = *std::max_element(v.begin(), v.end());
    double z = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        p[i] = std::exp(v[i] - m);
        z += p[i];
    }
    for (double& q : p) q /= z;
    return push(std::move(out), [x](Tape& t, const Node& n) {
        auto p = n.value.values();
        auto gx = t.node(x).grad.values();
        auto gv = n.grad.values();
        double inner = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) inner += gv[i] * p[i];
        for (std::size_t i = 0; i < p.size(); ++i) gx[i] += p[i] * (gv[i] - inner);
    });
}

Var Tape::entry(Var x, int i) {
    const Tensor& xv = value(x);
    require(i >= 0 && static_cast<std::size_t>(i) < xv.size(),
            "entry: index " + std::to_string(i) + " out of range for " + xv.shape_str());
    return push(Tensor::scalar(xv.values()[i]), [x, i](Tape& t, const Node& n) {
        t.node(x).grad.values()[i] += n.grad.values()[0];
    });
}

Var Tape::sum(Var x) {
    double s = 0.0;
    for (double v : value(x).values()) s += v;
    return push(Tensor::scalar(s), [x](Tape& t, const Node& n) {
        double gs = n.grad.values()[0];
        for (double& gx : t.node(x).grad.values()) gx += gs;
    });
}

Var Tape::dot_const(Var x, std::vector<double> coeffs) {
    const Tensor& xv = value(x);
    require(xv.size() == coeffs.size(), "dot_const: " + std::to_string(coeffs.size()) +
                                            " coeffs vs tensor " + xv.shape_str());
    double s = 0.0;
    auto v = xv.values();
    for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * coeffs[i];
    return push(Tensor::scalar(s), [x, c = std::move(coeffs)](Tape& t, const Node& n) {
        double gs = n.grad.values()[0];
        auto gx = t.node(x).grad.values();
        for (std::size_t i = 0; i < c.size(); ++i) gx[i] += gs * c[i];
    });
}

Var Tape::scale_var(Var x, Var s) {
    const Tensor& sv = value(s);
    require(sv.size() == 1, "scale_var: scale must be 1x1, got " + sv.shape_str());
    double sc = sv.values()[0];
    Tensor out = Tensor::zeros_like(value(x));
    auto o = out.values();
    auto v = value(x).values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = sc * v[i];
    return push(std::move(out), [x, s](Tape& t, const Node& n) {
        double sc = t.value(s).values()[0];
        auto v = t.value(x).values();
        auto gx = t.node(x).grad.values();
        auto gv = n.grad.values();
        double gs = 0.0;
        for (std::size_t i = 0; i < gv.size(); ++i) {
            gx[i] += sc * gv[i];
            gs += gv[i] * v[i];
        }
        t.node(s).grad.values()[0] += gs;
    });
}

Var Tape::fake_quant(Var x, QuantSpec spec) {
    spec.validate();
    return push(quantize(value(x), spec), [x, spec](Tape& t, const Node& n) {
        Tensor gx = ste_backward(n.grad, t.value(x), spec);
        add_into(t.node(x).grad.values(), gx.values());
    });
}

Var Tape::softmax_cross_entropy(Var logits, std::vector<int> labels) {
    const Tensor& z = value(logits);
    require(static_cast<int>(labels.size()) == z.rows(),
            "cross_entropy: " + std::to_string(labels.size()) + " labels vs logits " + z.shape_str());
    for (std::size_t r = 0; r < labels.size(); ++r)
        require(labels[r] >= 0 && labels[r] < z.cols(),
                "cross_entropy: label " + std::to_string(labels[r]) + " at row " +
                    std::to_string(r) + " outside [0," + std::to_string(z.cols()) + ")");
    const int n = z.rows(), c = z.cols();
    Tensor probs(n, c);
    double loss = 0.0;
    for (int r = 0; r < n; ++r) {
        double m = z(r, 0);
        for (int j = 1; j < c; ++j) m = std::max(m, z(r, j));
        double acc = 0.0;
        for (int j = 0; j < c; ++j) {
            probs(r, j) = std::exp(z(r, j) - m);
            acc += probs(r, j);
        }
        for (int j = 0; j < c; ++j) probs(r, j) /= acc;
        loss += std::log(acc) + m - z(r, labels[static_cast<std::size_t>(r)]);
    }
    loss /= n;
    return push(Tensor::scalar(loss),
                [logits, labels = std::move(labels), probs = std::move(probs)](Tape& t, const Node& n) {
                    double gs = n.grad.values()[0];
                    Tensor& gz = t.node(logits).grad;
                    const int rows = probs.rows(), c = probs.cols();
                    for (int r = 0; r < rows; ++r)
                        for (int j = 0; j < c; ++j) {
                            double d = probs(r, j) - (labels[static_cast<std::size_t>(r)] == j ? 1.0 : 0.0);
                            gz(r, j) += gs * d / rows;
                        }
                });
}

void Tape::backward(Var loss) {
    require(loss.id >= 0 && loss.id < node_count(), "backward: invalid loss var");
    require(value(loss).size() == 1,
            "backward: loss must be scalar, got " + value(loss).shape_str());
    backward_visits_ = 0;
    node(loss).grad.values()[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        ++backward_visits_;
        if (n.backward) n.backward(*this, n);
    }
    for (Node& n : nodes_)
        if (n.param_tensor) add_into(n.param_tensor->grad(), n.grad.values());
}

}  // namespace asga
