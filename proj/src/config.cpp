#include "asga/config.hpp"

#include <fstream>
#include <set>

namespace asga {

namespace {

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ContractError("config: " + where + " must be an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.contains(key))
            throw ContractError("config: unknown key \"" + key + "\" in " + where);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

DomainTransform parse_transform(const json& j, const std::string& where) {
    check_keys(j, where, {"rotation_deg", "shift", "label_noise"});
    DomainTransform t;
    t.rotation_deg = get_or(j, "rotation_deg", 0.0);
    t.label_noise = get_or(j, "label_noise", 0.0);
    if (j.contains("shift")) t.shift = j.at("shift").get<std::vector<double>>();
    return t;
}

DatasetSpec parse_dataset(const json& j, const std::string& where) {
    check_keys(j, where,
               {"kind", "n_samples", "n_features", "n_classes", "seed", "transform", "images_path",
                "labels_path"});
    DatasetSpec spec;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "blobs")
        spec.kind = DatasetSpec::Kind::Blobs;
    else if (kind == "moons")
        spec.kind = DatasetSpec::Kind::Moons;
    else if (kind == "idx-file")
        spec.kind = DatasetSpec::Kind::IdxFile;
    else
        throw ContractError("config: unknown dataset kind \"" + kind + "\" in " + where);
    spec.n_samples = get_or(j, "n_samples", 0);
    spec.n_features = j.at("n_features").get<int>();
    spec.n_classes = j.at("n_classes").get<int>();
    spec.seed = get_or<std::uint64_t>(j, "seed", 0);
    spec.images_path = get_or<std::string>(j, "images_path", "");
    spec.labels_path = get_or<std::string>(j, "labels_path", "");
    if (j.contains("transform")) spec.transform = parse_transform(j.at("transform"), where + ".transform");
    return spec;
}

AsgaParams parse_asga(const json& j) {
    check_keys(j, "asga",
               {"rho0", "rho_max", "phi", "mu", "epsilon", "lambda", "lr", "gap_ema"});
    AsgaParams p;
    p.rho0 = get_or(j, "rho0", p.rho0);
    p.rho_max = get_or(j, "rho_max", p.rho_max);
    p.phi = get_or(j, "phi", p.phi);
    p.mu = j.contains("mu") ? j.at("mu").get<double>() : 0.05 * p.rho0;
    p.epsilon = get_or(j, "epsilon", p.epsilon);
    p.lambda = get_or(j, "lambda", p.lambda);
    p.lr = get_or(j, "lr", p.lr);
    p.gap_ema = get_or(j, "gap_ema", p.gap_ema);
    return p;
}

BitCandidates parse_candidates(const json& j) {
    check_keys(j, "candidates", {"weight_bits", "act_bits"});
    BitCandidates c;
    c.weight_bits = j.at("weight_bits").get<std::vector<int>>();
    c.act_bits = j.at("act_bits").get<std::vector<int>>();
    return c;
}

}  // namespace

void ExperimentConfig::validate() const {
    proxy.validate();
    require(!proxy.transform || proxy.transform->is_identity(),
            "config: proxy dataset must not carry a domain transform");
    target.validate();
    require(model.size() >= 2, "config: model needs at least input and output sizes");
    for (int s : model) require(s >= 1, "config: model sizes must be positive");
    require(model.front() == proxy.n_features,
            "config: model input " + std::to_string(model.front()) + " vs proxy features " +
                std::to_string(proxy.n_features));
    require(model.back() == proxy.n_classes,
            "config: model output " + std::to_string(model.back()) + " vs proxy classes " +
                std::to_string(proxy.n_classes));
    require(target.n_features == proxy.n_features && target.n_classes == proxy.n_classes,
            "config: proxy and target shapes must agree");
    candidates.validate();
    asga.validate();
    if (budget) require(*budget > 0.0, "config: budget must be positive");
    require(epochs_search >= 1 && epochs_finetune >= 1, "config: epochs must be >= 1");
    require(batch_size >= 1, "config: batch_size must be >= 1");
    require(arch_lr >= 0.0 && finetune_lr >= 0.0, "config: learning rates must be nonnegative");
    QuantSpec::weights(fixed_layer_bits).validate();
    require(!output_dir.empty(), "config: output_dir must not be empty");
}

ExperimentConfig parse_config(const json& j) {
    try {
        check_keys(j, "config",
                   {"proxy", "target", "model", "candidates", "asga", "budget", "epochs_search",
                    "epochs_finetune", "batch_size", "arch_lr", "finetune_lr", "fix_first_last",
                    "fixed_layer_bits", "seed", "output_dir"});
        ExperimentConfig cfg;
        cfg.proxy = parse_dataset(j.at("proxy"), "proxy");
        cfg.target = parse_dataset(j.at("target"), "target");
        cfg.model = j.at("model").get<std::vector<int>>();
        cfg.candidates = parse_candidates(j.at("candidates"));
        if (j.contains("asga")) cfg.asga = parse_asga(j.at("asga"));
        if (j.contains("budget")) cfg.budget = j.at("budget").get<double>();
        cfg.epochs_search = j.at("epochs_search").get<int>();
        cfg.epochs_finetune = j.at("epochs_finetune").get<int>();
        cfg.batch_size = get_or(j, "batch_size", cfg.batch_size);
        cfg.arch_lr = get_or(j, "arch_lr", cfg.arch_lr);
        cfg.finetune_lr = get_or(j, "finetune_lr", cfg.finetune_lr);
        cfg.fix_first_last = get_or(j, "fix_first_last", cfg.fix_first_last);
        cfg.fixed_layer_bits = get_or(j, "fixed_layer_bits", cfg.fixed_layer_bits);
        cfg.seed = get_or<std::uint64_t>(j, "seed", 0);
        cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir);
        cfg.validate();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        // missing keys and type mismatches surface as json exceptions; keep
        // them in the config error channel
        throw ContractError(std::string("config: ") + e.what());
    }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("cannot open config file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ContractError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

json policy_to_json(const MpqPolicy& policy) {
    json layers = json::array();
    for (const auto& l : policy.layers)
        layers.push_back(
            {{"name", l.name}, {"w_bits", l.w_bits}, {"a_bits", l.a_bits}, {"comp", l.comp}});
    return {{"layers", std::move(layers)},
            {"total_bops", policy.total_bops},
            {"budget", policy.budget},
            {"feasible", policy.feasible}};
}

MpqPolicy policy_from_json(const json& j) {
    try {
        check_keys(j, "policy", {"layers", "total_bops", "budget", "feasible"});
        MpqPolicy p;
        require(j.at("layers").is_array(), "policy: layers must be an array");
        for (const auto& lj : j.at("layers")) {
            check_keys(lj, "policy.layers[]", {"name", "w_bits", "a_bits", "comp"});
            PolicyLayer l;
            l.name = lj.at("name").get<std::string>();
            l.w_bits = lj.at("w_bits").get<int>();
            l.a_bits = lj.at("a_bits").get<int>();
            l.comp = lj.at("comp").get<double>();
            require(l.w_bits >= 2 && l.a_bits >= 2, "policy: bits must be >= 2");
            require(l.comp > 0.0, "policy: comp must be positive");
            p.layers.push_back(std::move(l));
        }
        require(!p.layers.empty(), "policy: needs at least one layer");
        p.total_bops = j.at("total_bops").get<double>();
        p.budget = j.at("budget").get<double>();
        p.feasible = j.at("feasible").get<bool>();
        double recomputed = MpqPolicy::bops(p.layers);
        require(std::abs(recomputed - p.total_bops) <= 1e-9 * std::max(1.0, recomputed),
                "policy: total_bops " + format_double(p.total_bops) +
                    " does not match layers, expected " + format_double(recomputed));
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ContractError(std::string("policy: ") + e.what());
    }
}

MpqPolicy load_policy(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("cannot open policy file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ContractError("policy " + path.string() + " is not valid JSON: " + e.what());
    }
    return policy_from_json(j);
}

void save_policy(const MpqPolicy& policy, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ContractError("cannot write policy file " + path.string());
    out << policy_to_json(policy).dump(2) << "\n";
}

}  // namespace asga
