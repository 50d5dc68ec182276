#pragma once

#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "asga/dataset.hpp"
#include "asga/optimizer.hpp"
#include "asga/supernet.hpp"

namespace asga {

using json = nlohmann::ordered_json;

// Full experiment description. Every run is reproducible from (config, seed).
struct ExperimentConfig {
    DatasetSpec proxy;
    DatasetSpec target;
    std::vector<int> model;  // layer sizes, input first
    BitCandidates candidates;
    AsgaParams asga;
    std::optional<double> budget;  // absent: 0.6 * all-max-bits BOPs
    int epochs_search = 1;
    int epochs_finetune = 1;
    int batch_size = 64;
    double arch_lr = 0.0;      // 0: use asga.lr
    double finetune_lr = 0.0;  // 0: use asga.lr
    bool fix_first_last = true;
    int fixed_layer_bits = 8;
    std::uint64_t seed = 0;
    std::string output_dir = "out";

    double effective_arch_lr() const { return arch_lr > 0.0 ? arch_lr : asga.lr; }
    double effective_finetune_lr() const { return finetune_lr > 0.0 ? finetune_lr : asga.lr; }
    double effective_budget(double max_bops) const {
        return budget ? *budget : 0.6 * max_bops;
    }

    void validate() const;
};

// Strict parsing: unknown keys anywhere are a config error naming the key.
ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

json policy_to_json(const MpqPolicy& policy);
MpqPolicy policy_from_json(const json& j);
MpqPolicy load_policy(const std::filesystem::path& path);
void save_policy(const MpqPolicy& policy, const std::filesystem::path& path);

}  // namespace asga
