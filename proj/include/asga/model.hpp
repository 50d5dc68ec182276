#pragma once

#include <functional>

#include "asga/data.hpp"
#include "asga/tape.hpp"

namespace asga {

// A differentiable scalar objective: builds the loss for one batch on the
// given tape. The parameters it reads are bound inside the closure; the
// optimizer and sharpness routines manipulate that same ParamSet directly.
using LossFn = std::function<Var(Tape&, const Batch&)>;

inline Batch dummy_batch() { return {Tensor::scalar(0.0), {0}}; }

}  // namespace asga
