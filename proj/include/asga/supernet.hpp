#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asga/model.hpp"

namespace asga {

// Bitwidth menus for the weight and activation branches of every searchable layer.
struct BitCandidates {
    std::vector<int> weight_bits;
    std::vector<int> act_bits;

    void validate() const;
};

// Size factors of one layer's multiply-accumulate cost:
// comp = c_in * c_out * k_a * k_b * h_out * w_out. Dense layers leave the
// kernel and spatial factors at 1.
struct CostDims {
    int c_in = 1, c_out = 1;
    int k_a = 1, k_b = 1;
    int h_out = 1, w_out = 1;
};

double layer_comp(const CostDims& d);

// Max-subtracted softmax over branch logits; strictly positive, sums to 1.
std::vector<double> branch_probs(std::span<const double> logits);

struct FixedBits {
    int w_bits = 8;
    int a_bits = 8;
};

struct SupernetLayer {
    std::string name;
    int weights = -1;  // id in the weight ParamSet
    int alpha = -1;    // ids in the arch ParamSet; -1 when the layer is fixed
    int beta = -1;
    CostDims dims;
    std::optional<FixedBits> fixed_bits;
    bool relu_act = true;  // hidden layers: ReLU then unsigned activation quant
};

struct PolicyLayer {
    std::string name;
    int w_bits = 0;
    int a_bits = 0;
    double comp = 0.0;
};

// A concrete per-layer bitwidth assignment plus its cost accounting.
struct MpqPolicy {
    std::vector<PolicyLayer> layers;
    double total_bops = 0.0;
    double budget = 0.0;
    bool feasible = false;

    static double bops(const std::vector<PolicyLayer>& layers);
};

// Weight-sharing search network: every searchable layer evaluates one branch
// per candidate bitwidth from the same master weights and blends the results
// with softmax weights over its alpha (weights) and beta (activations) logits.
class Supernet {
public:
    static Supernet mlp(std::vector<int> layer_sizes, BitCandidates cands, bool fix_first_last,
                        int fixed_layer_bits, std::uint64_t init_seed);

    // Weight-branch mixture, then for hidden layers ReLU and the
    // activation-branch mixture. The output layer returns raw logits.
    Var mixture_forward(Tape& t, int layer_index, Var input);
    Var logits(Tape& t, Var input);
    Var data_loss(Tape& t, const Batch& batch);
    // data loss + lambda * complexity, the architecture-step objective.
    Var arch_objective(Tape& t, const Batch& batch, double lambda);
    // Expected BOPs cost, differentiable through both softmax heads.
    Var complexity(Tape& t);

    MpqPolicy extract_policy(double budget) const;
    double max_bops() const;

    Tensor logits_value(const Batch& batch);

    ParamSet& weight_params() { return weights_; }
    const ParamSet& weight_params() const { return weights_; }
    ParamSet& arch_params() { return arch_; }
    const ParamSet& arch_params() const { return arch_; }
    const std::vector<SupernetLayer>& layers() const { return layers_; }
    const BitCandidates& candidates() const { return cands_; }
    const std::vector<int>& layer_sizes() const { return sizes_; }

    // Replaces every fake-quant node with the identity; the mixture and
    // complexity graphs are then smooth end to end.
    void set_quant_bypass(bool on) { bypass_ = on; }
    bool quant_bypass() const { return bypass_; }

    LossFn weight_loss_fn() {
        return [this](Tape& t, const Batch& b) { return data_loss(t, b); };
    }

private:
    std::vector<int> sizes_;
    BitCandidates cands_;
    std::vector<SupernetLayer> layers_;
    ParamSet weights_;
    ParamSet arch_;
    bool bypass_ = false;
};

// Fixed-bitwidth network used after search: same topology, one branch per
// layer. Bits of 0 mean the stage runs in float (no fake-quant node).
class QuantizedMlp {
public:
    static QuantizedMlp from_policy(std::vector<int> layer_sizes, const MpqPolicy& policy,
                                    std::uint64_t init_seed);
    static QuantizedMlp plain(std::vector<int> layer_sizes, std::uint64_t init_seed);

    Var logits(Tape& t, Var input);
    Var loss(Tape& t, const Batch& batch);
    Tensor logits_value(const Batch& batch);

    ParamSet& weight_params() { return weights_; }
    const ParamSet& weight_params() const { return weights_; }

    LossFn loss_fn() {
        return [this](Tape& t, const Batch& b) { return loss(t, b); };
    }

private:
    std::vector<int> sizes_;
    std::vector<std::pair<int, int>> bits_;  // (w,a) per layer, 0 = float
    ParamSet weights_;
};

// Fraction of rows whose argmax logit equals the label; ties resolve to the
// smallest class index.
double accuracy_from_logits(const Tensor& logits, std::span<const int> labels);

}  // namespace asga
