#include "asga/harness.hpp"

#include <algorithm>
#include <numeric>

#include "asga/sharpness.hpp"
#include "asga/tape.hpp"

namespace asga {

namespace {

constexpr double kDivergenceLoss = 1e6;

// Deterministic stream split: the four consumers of randomness get disjoint
// seeds derived from the config seed, so every method sees the same batches.
std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream) {
    return fnv1a(&stream, sizeof(stream), seed ^ 0x9e3779b97f4a7c15ULL);
}

Batch next_arch_batch(const Dataset& val, std::span<const int> order, std::size_t& cursor,
                      int batch_size) {
    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(batch_size));
    for (int k = 0; k < batch_size; ++k) {
        idx.push_back(order[cursor]);
        cursor = (cursor + 1) % order.size();
    }
    return val.gather(idx);
}

PerturbParams probe_params(const AsgaParams& p) {
    return {p.rho0, p.fallback_noise_scale, p.grad_norm_tol};
}

MetricsRow probe_row(std::string phase, int epoch, std::string dataset, double accuracy,
                     const SharpnessReport& rep, double total_bops) {
    return {std::move(phase), epoch,   std::move(dataset), accuracy, rep.loss,
            rep.gap,          rep.sigma_gap, rep.rho,       total_bops};
}

}  // namespace

StepReport alternate_update(Supernet& net, Method method, const AsgaParams& p, double arch_lr,
                            const Batch& weight_batch, const Batch& arch_batch,
                            TrainState& state) {
    require(weight_batch.rows() >= 1 && arch_batch.rows() >= 1,
            "alternate_update requires nonempty batches");
    LossFn weight_loss = net.weight_loss_fn();
    StepReport report;
    switch (method) {
        case Method::Asga:
            report = asga_step(weight_loss, net.weight_params(), weight_batch, p, state.theta);
            break;
        case Method::Sam:
            report = sam_step(weight_loss, net.weight_params(), weight_batch, p.rho0, p.lr,
                              state.theta);
            break;
        case Method::Sgd:
            report = sgd_step(weight_loss, net.weight_params(), weight_batch, p.lr, state.theta);
            break;
    }
    LossFn arch_loss = [&net, &p](Tape& t, const Batch& b) {
        return net.arch_objective(t, b, p.lambda);
    };
    sgd_step(arch_loss, net.arch_params(), arch_batch, arch_lr, state.arch);
    return report;
}

EvalResult evaluate(Supernet& net, const Dataset& ds) {
    Tensor lg = net.logits_value(ds.all());
    double acc = accuracy_from_logits(lg, ds.labels);
    Tape t;
    double loss = t.scalar(net.data_loss(t, ds.all()));
    return {acc, loss};
}

EvalResult evaluate(QuantizedMlp& net, const Dataset& ds) {
    Tensor lg = net.logits_value(ds.all());
    double acc = accuracy_from_logits(lg, ds.labels);
    Tape t;
    double loss = t.scalar(net.loss(t, ds.all()));
    return {acc, loss};
}

SearchResult run_search(const ExperimentConfig& cfg, Method method,
                        const std::filesystem::path& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);

    Dataset proxy = load_dataset(cfg.proxy);
    auto [train, val] = proxy.split(0.8);

    Supernet net = Supernet::mlp(cfg.model, cfg.candidates, cfg.fix_first_last,
                                 cfg.fixed_layer_bits, sub_seed(cfg.seed, 0));
    const double budget = cfg.effective_budget(net.max_bops());

    TrainState state{AsgaState(sub_seed(cfg.seed, 1)), AsgaState(sub_seed(cfg.seed, 2))};
    std::mt19937_64 shuffle_rng(sub_seed(cfg.seed, 3));
    std::mt19937_64 probe_rng(sub_seed(cfg.seed, 4));

    std::vector<int> train_idx(static_cast<std::size_t>(train.n()));
    std::vector<int> val_idx(static_cast<std::size_t>(val.n()));
    std::iota(train_idx.begin(), train_idx.end(), 0);
    std::iota(val_idx.begin(), val_idx.end(), 0);

    const auto ckpt_path = out_dir / "search.ckpt";
    auto sections_out = [&net]() {
        return std::vector<std::pair<std::string, const ParamSet*>>{
            {"weights", &net.weight_params()}, {"arch", &net.arch_params()}};
    };

    SearchResult result;
    std::vector<StepReport> steps;
    LossFn weight_loss = net.weight_loss_fn();

    for (int epoch = 1; epoch <= cfg.epochs_search && !result.diverged; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), shuffle_rng);
        std::shuffle(val_idx.begin(), val_idx.end(), shuffle_rng);
        std::size_t arch_cursor = 0;
        try {
            for (int start = 0; start < train.n(); start += cfg.batch_size) {
                int count = std::min(cfg.batch_size, train.n() - start);
                Batch wb = train.gather(std::span(train_idx).subspan(
                    static_cast<std::size_t>(start), static_cast<std::size_t>(count)));
                Batch ab = next_arch_batch(val, val_idx, arch_cursor, cfg.batch_size);
                StepReport r =
                    alternate_update(net, method, cfg.asga, cfg.effective_arch_lr(), wb, ab, state);
                steps.push_back(r);
                if (!(r.loss <= kDivergenceLoss)) {
                    result.diverged = true;
                    break;
                }
            }
        } catch (const NumericError&) {
            result.diverged = true;
        }
        if (result.diverged) break;

        EvalResult ev = evaluate(net, val);
        SharpnessReport rep = sharpness_report(weight_loss, net.weight_params(), val.all(),
                                               probe_params(cfg.asga), probe_rng);
        MpqPolicy now = net.extract_policy(budget);
        result.metrics.push_back(
            probe_row("search", epoch, "proxy", ev.accuracy, rep, now.total_bops));
        save_checkpoint(ckpt_path, "search", sections_out(),
                        {{"epoch", epoch}, {"method", method_name(method)}, {"seed", cfg.seed}});
        result.epochs_completed = epoch;
    }

    if (result.diverged) {
        if (result.epochs_completed == 0)
            throw NumericError("search diverged before completing an epoch");
        load_checkpoint(ckpt_path, "search",
                        {{"weights", &net.weight_params()}, {"arch", &net.arch_params()}});
    }

    result.policy = net.extract_policy(budget);
    save_policy(result.policy, out_dir / "policy.json");
    write_metrics_csv(out_dir / "metrics.csv", result.metrics);
    write_steps_csv(out_dir / "steps.csv", steps);
    return result;
}

FinetuneResult run_finetune(const ExperimentConfig& cfg, const MpqPolicy& policy,
                            const std::filesystem::path& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);

    Dataset target = load_dataset(cfg.target);
    auto [train, val] = target.split(0.8);

    QuantizedMlp net = QuantizedMlp::from_policy(cfg.model, policy, sub_seed(cfg.seed, 10));
    AsgaState state(sub_seed(cfg.seed, 11));
    std::mt19937_64 shuffle_rng(sub_seed(cfg.seed, 12));
    std::mt19937_64 probe_rng(sub_seed(cfg.seed, 13));

    std::vector<int> train_idx(static_cast<std::size_t>(train.n()));
    std::iota(train_idx.begin(), train_idx.end(), 0);

    const auto ckpt_path = out_dir / "finetune.ckpt";
    LossFn loss_fn = net.loss_fn();
    const double lr = cfg.effective_finetune_lr();

    FinetuneResult result;
    for (int epoch = 1; epoch <= cfg.epochs_finetune && !result.diverged; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), shuffle_rng);
        try {
            for (int start = 0; start < train.n(); start += cfg.batch_size) {
                int count = std::min(cfg.batch_size, train.n() - start);
                Batch b = train.gather(std::span(train_idx).subspan(
                    static_cast<std::size_t>(start), static_cast<std::size_t>(count)));
                StepReport r = sgd_step(loss_fn, net.weight_params(), b, lr, state);
                if (!(r.loss <= kDivergenceLoss)) {
                    result.diverged = true;
                    break;
                }
            }
        } catch (const NumericError&) {
            result.diverged = true;
        }
        if (result.diverged) break;

        EvalResult ev = evaluate(net, val);
        SharpnessReport rep = sharpness_report(loss_fn, net.weight_params(), val.all(),
                                               probe_params(cfg.asga), probe_rng);
        result.metrics.push_back(
            probe_row("finetune", epoch, "target", ev.accuracy, rep, policy.total_bops));
        result.final_accuracy = ev.accuracy;
        save_checkpoint(ckpt_path, "finetune",
                        {{"weights", &net.weight_params()}},
                        {{"epoch", epoch}, {"policy", policy_to_json(policy)}, {"seed", cfg.seed}});
    }

    if (result.diverged && result.metrics.empty())
        throw NumericError("finetune diverged before completing an epoch");
    if (result.diverged)
        load_checkpoint(ckpt_path, "finetune", {{"weights", &net.weight_params()}});

    write_metrics_csv(out_dir / "finetune_metrics.csv", result.metrics);
    return result;
}

std::vector<MethodSummary> run_transfer(const ExperimentConfig& cfg,
                                        const std::filesystem::path& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);

    std::vector<MethodSummary> summaries;
    for (Method method : {Method::Asga, Method::Sam, Method::Sgd}) {
        const auto dir = out_dir / method_name(method);
        MethodSummary s;
        s.method = method_name(method);

        SearchResult search = run_search(cfg, method, dir);
        require(!search.metrics.empty(), "search produced no completed epochs");
        const MetricsRow& last = search.metrics.back();
        s.final_gap = last.gap;
        s.final_sigma = last.sigma_gap;
        s.total_bops = search.policy.total_bops;
        s.feasible = search.policy.feasible;

        FinetuneResult ft = run_finetune(cfg, search.policy, dir);
        require(!ft.metrics.empty(), "finetune produced no completed epochs");
        s.target_accuracy = ft.final_accuracy;
        s.diverged = search.diverged || ft.diverged;
        summaries.push_back(std::move(s));
    }

    std::ofstream out(out_dir / "summary.json", std::ios::binary);
    require(out.good(), "cannot write summary.json");
    out << summary_to_json(summaries).dump(2) << "\n";
    return summaries;
}

json summary_to_json(const std::vector<MethodSummary>& methods) {
    json arr = json::array();
    for (const auto& m : methods)
        arr.push_back({{"method", m.method},
                       {"target_accuracy", m.target_accuracy},
                       {"final_gap", m.final_gap},
                       {"final_sigma", m.final_sigma},
                       {"total_bops", m.total_bops},
                       {"feasible", m.feasible},
                       {"diverged", m.diverged}});
    return json{{"methods", std::move(arr)}};
}

json sharpness_from_checkpoint(const ExperimentConfig& cfg,
                               const std::filesystem::path& checkpoint_path) {
    cfg.validate();
    json header = read_checkpoint_header(checkpoint_path);
    const std::string kind = header.at("kind").get<std::string>();

    std::mt19937_64 probe_rng(sub_seed(cfg.seed, 4));
    const int power_iters = 50;
    SharpnessReport rep;

    if (kind == "search") {
        Dataset proxy = load_dataset(cfg.proxy);
        auto [train, val] = proxy.split(0.8);
        Supernet net = Supernet::mlp(cfg.model, cfg.candidates, cfg.fix_first_last,
                                     cfg.fixed_layer_bits, sub_seed(cfg.seed, 0));
        load_checkpoint(checkpoint_path, "search",
                        {{"weights", &net.weight_params()}, {"arch", &net.arch_params()}});
        LossFn fn = net.weight_loss_fn();
        rep = sharpness_report(fn, net.weight_params(), val.all(), probe_params(cfg.asga),
                               probe_rng, power_iters, sub_seed(cfg.seed, 5));
    } else if (kind == "finetune") {
        Dataset target = load_dataset(cfg.target);
        auto [train, val] = target.split(0.8);
        MpqPolicy policy = policy_from_json(header.at("extra").at("policy"));
        QuantizedMlp net = QuantizedMlp::from_policy(cfg.model, policy, sub_seed(cfg.seed, 10));
        load_checkpoint(checkpoint_path, "finetune", {{"weights", &net.weight_params()}});
        LossFn fn = net.loss_fn();
        rep = sharpness_report(fn, net.weight_params(), val.all(), probe_params(cfg.asga),
                               probe_rng, power_iters, sub_seed(cfg.seed, 5));
    } else {
        throw FormatError("checkpoint kind \"" + kind + "\" is not a model checkpoint");
    }

    json out{{"kind", kind},           {"rho", rep.rho},
             {"loss", rep.loss},       {"perturbed_loss", rep.perturbed_loss},
             {"gap", rep.gap},         {"sigma_gap", rep.sigma_gap}};
    if (rep.sigma_power) out["sigma_power"] = *rep.sigma_power;
    return out;
}

}  // namespace asga
