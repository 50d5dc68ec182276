#pragma once

#include "asga/tensor.hpp"

namespace asga {

// Uniform fake-quantizer with a per-tensor absmax scale.
// Signed grids (weights) are symmetric around zero; unsigned grids (post-ReLU
// activations) start at zero. Rounding is half-away-from-zero.
struct QuantSpec {
    int bits = 8;
    bool is_signed = true;

    static QuantSpec weights(int bits) { return {bits, true}; }
    static QuantSpec activations(int bits) { return {bits, false}; }

    void validate() const {
        require(bits >= 2, "quantizer needs bits >= 2, got " + std::to_string(bits));
    }

    // Number of positive steps in the grid.
    int level_scale() const {
        return is_signed ? (1 << (bits - 1)) - 1 : (1 << bits) - 1;
    }
};

// Scale s: largest magnitude the grid must represent. A tensor with no
// representable mass (all zero, or all negative under an unsigned spec)
// falls back to s = 1 so the grid stays well defined.
double quant_scale(const Tensor& x, const QuantSpec& spec);

// Nearest grid point of clamp(x); output lies in [-s, s] (signed) or [0, s].
Tensor quantize(const Tensor& x, const QuantSpec& spec);

// Straight-through gradient: upstream passes where x is strictly inside the
// clamp range, zero elsewhere.
Tensor ste_backward(const Tensor& upstream, const Tensor& x, const QuantSpec& spec);

// Mean squared quantization error over the tensor.
double quant_error(const Tensor& x, const QuantSpec& spec);

// Scalar grid map for a fixed scale; exposed for property tests.
double quantize_value(double v, double scale, const QuantSpec& spec);

}  // namespace asga
