#pragma once

#include <filesystem>

#include "asga/checkpoint.hpp"
#include "asga/config.hpp"
#include "asga/metrics.hpp"

namespace asga {

// Optimizer state for the bilevel loop; weights and architecture logits
// advance independently so their random streams never interleave.
struct TrainState {
    AsgaState theta;
    AsgaState arch;
};

// One bilevel update: a weight step on the train batch (dispatched on the
// method), then a plain gradient step of the architecture logits on
// data loss + lambda * complexity over the held-out batch.
StepReport alternate_update(Supernet& net, Method method, const AsgaParams& p, double arch_lr,
                            const Batch& weight_batch, const Batch& arch_batch, TrainState& state);

struct EvalResult {
    double accuracy = 0.0;
    double loss = 0.0;
};

// Whole-split single-batch evaluation. Accuracy counts per-row argmax hits,
// so permuting the rows cannot change it.
EvalResult evaluate(Supernet& net, const Dataset& ds);
EvalResult evaluate(QuantizedMlp& net, const Dataset& ds);

struct SearchResult {
    MpqPolicy policy;
    std::vector<MetricsRow> metrics;
    bool diverged = false;
    int epochs_completed = 0;
};

struct FinetuneResult {
    std::vector<MetricsRow> metrics;
    bool diverged = false;
    double final_accuracy = 0.0;
};

// Bitwidth search on the proxy dataset (80/20 train/validation split for the
// weight and architecture steps). Writes metrics.csv, steps.csv, policy.json
// and search.ckpt into out_dir; the checkpoint is refreshed after every
// completed epoch, so divergence mid-epoch restores the last completed state
// and flags the result instead of raising. Diverging before the first epoch
// completes is a numeric error.
SearchResult run_search(const ExperimentConfig& cfg, Method method,
                        const std::filesystem::path& out_dir);

// Quantization-aware finetune of the policy network on the target dataset
// with plain SGD, identical across methods so transfer differences come from
// the searched policy alone. Writes finetune_metrics.csv and finetune.ckpt
// (the policy rides along in the checkpoint header).
FinetuneResult run_finetune(const ExperimentConfig& cfg, const MpqPolicy& policy,
                            const std::filesystem::path& out_dir);

struct MethodSummary {
    std::string method;
    double target_accuracy = 0.0;
    double final_gap = 0.0;    // last search epoch, proxy validation split
    double final_sigma = 0.0;  // 2 * final_gap / rho^2 at the probe radius
    double total_bops = 0.0;
    bool feasible = false;
    bool diverged = false;
};

// search + finetune for each of {asga, sam, sgd} under the same seed. Each
// method writes into out_dir/<method>/ and the comparison lands in
// out_dir/summary.json.
std::vector<MethodSummary> run_transfer(const ExperimentConfig& cfg,
                                        const std::filesystem::path& out_dir);

json summary_to_json(const std::vector<MethodSummary>& methods);

// Rebuilds the model a checkpoint came from (kind "search" or "finetune"),
// restores the parameters and reports the gap probe plus a power-iteration
// eigenvalue estimate on the matching validation split.
json sharpness_from_checkpoint(const ExperimentConfig& cfg,
                               const std::filesystem::path& checkpoint_path);

}  // namespace asga
