#include <cmath>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "asga/harness.hpp"
#include "asga/sharpness.hpp"

namespace {

using namespace asga;

// Precedence: ASGA_OUT_DIR env, then --out-dir, then the config's output_dir.
std::filesystem::path resolve_out_dir(const std::string& flag, const std::string& from_config) {
    if (const char* env = std::getenv("ASGA_OUT_DIR"); env != nullptr && *env != '\0')
        return env;
    if (!flag.empty()) return flag;
    return from_config;
}

struct ScalarLandscape {
    std::function<double(double)> f;
    double lo = 0.0, hi = 0.0;
};

ScalarLandscape landscape_by_id(const std::string& id) {
    if (id == "two-minima") return {[](double x) { return two_minima(x); }, -4.0, 4.0};
    if (id == "quadratic") return {[](double x) { return 0.5 * x * x; }, -2.0, 2.0};
    if (id == "constant") return {[](double) { return 1.0; }, -1.0, 1.0};
    throw ContractError("unknown landscape \"" + id +
                        "\" (expected two-minima, quadratic or constant)");
}

std::vector<double> grid_points(double lo, double hi, double step) {
    std::vector<double> g;
    int n = static_cast<int>(std::llround((hi - lo) / step));
    g.reserve(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) g.push_back(lo + step * i);
    return g;
}

void print_metrics_tail(const std::vector<MetricsRow>& rows) {
    if (rows.empty()) return;
    const MetricsRow& r = rows.back();
    std::cout << r.phase << " epoch " << r.epoch << " (" << r.dataset
              << "): accuracy=" << format_double(r.accuracy) << " loss=" << format_double(r.loss)
              << " gap=" << format_double(r.gap) << " sigma=" << format_double(r.sigma_gap)
              << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mixed-precision bitwidth search with sharpness-aware regularization"};
    app.require_subcommand(1);
    // Let --seed/--out-dir appear after the subcommand as well as before it.
    app.fallthrough();

    std::uint64_t seed_flag = 0;
    std::string out_dir_flag;
    auto* seed_opt = app.add_option("--seed", seed_flag, "Override the config seed");
    app.add_option("--out-dir", out_dir_flag,
                   "Output directory (the ASGA_OUT_DIR env var takes precedence)");

    std::string config_path, policy_path, checkpoint_path, method_name_flag = "asga";
    auto* search = app.add_subcommand("search", "Bitwidth search on the proxy dataset");
    search->add_option("config", config_path, "Experiment config JSON")->required();
    search->add_option("--method", method_name_flag, "asga, sam or sgd");

    auto* finetune = app.add_subcommand("finetune", "Finetune a searched policy on the target");
    finetune->add_option("config", config_path, "Experiment config JSON")->required();
    finetune->add_option("policy", policy_path, "Policy JSON from a search run")->required();

    auto* transfer =
        app.add_subcommand("transfer", "search + finetune for asga, sam and sgd; write summary");
    transfer->add_option("config", config_path, "Experiment config JSON")->required();

    auto* sharp = app.add_subcommand("sharpness", "Gap and eigenvalue probe of a checkpoint");
    sharp->add_option("config", config_path, "Experiment config JSON")->required();
    sharp->add_option("checkpoint", checkpoint_path, "search.ckpt or finetune.ckpt")->required();

    std::string landscape_id, out_csv;
    double probe_rho = 0.1;
    auto* probe = app.add_subcommand("probe", "Dense worst-case scan of a scalar landscape");
    probe->add_option("landscape", landscape_id, "two-minima, quadratic or constant")->required();
    probe->add_option("--rho", probe_rho, "Perturbation radius")->required();
    probe->add_option("--out", out_csv, "Output CSV path")->required();

    std::vector<double> phis, rho_maxes, h_grid;
    auto* rho_curve = app.add_subcommand("rho-curve", "Tabulate the adaptive radius over a gap grid");
    rho_curve->add_option("--phi", phis, "Gain values")->required();
    rho_curve->add_option("--rho-max", rho_maxes, "Radius caps")->required();
    rho_curve->add_option("--h-grid", h_grid, "Gap grid (default 0.01..5 step 0.01)");
    rho_curve->add_option("--out", out_csv, "Output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*probe) {
            ScalarLandscape land = landscape_by_id(landscape_id);
            require(probe_rho > 0.0, "probe radius must be positive");
            auto grid = grid_points(land.lo, land.hi, 0.01);
            double rho[1] = {probe_rho};
            write_probe_csv(out_csv, landscape_probe(land.f, grid, rho));
            std::cout << "wrote " << out_csv << " (" << grid.size() << " points)\n";
            return 0;
        }
        if (*rho_curve) {
            if (h_grid.empty()) h_grid = grid_points(0.01, 5.0, 0.01);
            write_rho_curve_csv(out_csv, phis, rho_maxes, h_grid);
            std::cout << "wrote " << out_csv << "\n";
            return 0;
        }

        ExperimentConfig cfg = load_config(config_path);
        if (seed_opt->count() > 0) cfg.seed = seed_flag;
        const auto out_dir = resolve_out_dir(out_dir_flag, cfg.output_dir);

        if (*search) {
            SearchResult r = run_search(cfg, method_from_name(method_name_flag), out_dir);
            print_metrics_tail(r.metrics);
            std::cout << "policy: total_bops=" << format_double(r.policy.total_bops)
                      << " feasible=" << (r.policy.feasible ? "true" : "false")
                      << (r.diverged ? " (diverged, last completed epoch kept)" : "") << "\n";
        } else if (*finetune) {
            FinetuneResult r = run_finetune(cfg, load_policy(policy_path), out_dir);
            print_metrics_tail(r.metrics);
            std::cout << "final target accuracy: " << format_double(r.final_accuracy)
                      << (r.diverged ? " (diverged, last completed epoch kept)" : "") << "\n";
        } else if (*transfer) {
            auto summaries = run_transfer(cfg, out_dir);
            std::cout << summary_to_json(summaries).dump(2) << "\n";
        } else if (*sharp) {
            std::cout << sharpness_from_checkpoint(cfg, checkpoint_path).dump(2) << "\n";
        }
        return 0;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 2;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
