#include "asga/quantize.hpp"

#include <algorithm>
#include <cmath>

namespace asga {

double quant_scale(const Tensor& x, const QuantSpec& spec) {
    spec.validate();
    double s = 0.0;
    for (double v : x.values()) {
        double m = spec.is_signed ? std::fabs(v) : std::max(v, 0.0);
        s = std::max(s, m);
    }
    return s > 0.0 ? s : 1.0;
}

double quantize_value(double v, double scale, const QuantSpec& spec) {
    const double m = static_cast<double>(spec.level_scale());
    double lo = spec.is_signed ? -scale : 0.0;
    double t = std::clamp(v, lo, scale);
    // std::round is half-away-from-zero, which is exactly the grid convention here.
    double k = std::round(t / scale * m);
    // Return the endpoints exactly: k*scale/m rounds twice and can overshoot
    // the clamp range by an ulp.
    if (k == m) return scale;
    if (k == -m) return -scale;
    return k * scale / m;
}

Tensor quantize(const Tensor& x, const QuantSpec& spec) {
    const double s = quant_scale(x, spec);
    Tensor q = Tensor::zeros_like(x);
    auto in = x.values();
    auto out = q.values();
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = quantize_value(in[i], s, spec);
    return q;
}

Tensor ste_backward(const Tensor& upstream, const Tensor& x, const QuantSpec& spec) {
    require(upstream.rows() == x.rows() && upstream.cols() == x.cols(),
            "ste_backward: upstream shape " + upstream.shape_str() + " vs input " + x.shape_str());
    const double s = quant_scale(x, spec);
    const double lo = spec.is_signed ? -s : 0.0;
    Tensor g = Tensor::zeros_like(x);
    auto gi = upstream.values();
    auto xi = x.values();
    auto go = g.values();
    for (std::size_t i = 0; i < xi.size(); ++i)
        go[i] = (xi[i] > lo && xi[i] < s) ? gi[i] : 0.0;
    return g;
}

double quant_error(const Tensor& x, const QuantSpec& spec) {
    Tensor q = quantize(x, spec);
    double acc = 0.0;
    auto a = x.values();
    auto b = q.values();
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

}  // namespace asga
