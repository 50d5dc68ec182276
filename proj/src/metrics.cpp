#include "asga/metrics.hpp"

namespace asga {

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
    CsvWriter csv(path);
    csv.row({"phase", "epoch", "dataset", "accuracy", "loss", "gap", "sigma_gap", "rho",
             "total_bops"});
    for (const auto& r : rows)
        csv.row({r.phase, std::to_string(r.epoch), r.dataset, format_double(r.accuracy),
                 format_double(r.loss), format_double(r.gap), format_double(r.sigma_gap),
                 format_double(r.rho), format_double(r.total_bops)});
}

void write_steps_csv(const std::filesystem::path& path, const std::vector<StepReport>& rows) {
    CsvWriter csv(path);
    csv.row({"step", "loss", "perturbed_loss", "gap", "rho", "align_inner", "grad_norm"});
    for (const auto& r : rows)
        csv.row({std::to_string(r.step), format_double(r.loss), format_double(r.perturbed_loss),
                 format_double(r.gap), format_double(r.rho), format_double(r.align_inner),
                 format_double(r.grad_norm)});
}

void write_probe_csv(const std::filesystem::path& path, const std::vector<ProbeRow>& rows) {
    require(!rows.empty(), "probe csv needs at least one row");
    const std::size_t dims = rows.front().point.size();
    CsvWriter csv(path);
    csv.row(dims == 1
                ? std::vector<std::string>{"x", "loss", "perturbed_loss", "gap", "sigma"}
                : std::vector<std::string>{"x", "y", "loss", "perturbed_loss", "gap", "sigma"});
    for (const auto& r : rows) {
        require(r.point.size() == dims, "probe rows disagree on dimension");
        std::vector<std::string> fields;
        for (double c : r.point) fields.push_back(format_double(c));
        fields.push_back(format_double(r.loss));
        fields.push_back(format_double(r.perturbed_loss));
        fields.push_back(format_double(r.gap));
        fields.push_back(format_double(r.sigma));
        csv.row(fields);
    }
}

void write_rho_curve_csv(const std::filesystem::path& path, std::span<const double> phis,
                         std::span<const double> rho_maxes, std::span<const double> h_grid) {
    require(!phis.empty() && !rho_maxes.empty() && !h_grid.empty(),
            "rho curve needs phi, rho_max and h values");
    CsvWriter csv(path);
    csv.row({"phi", "rho_max", "h", "rho"});
    for (double phi : phis)
        for (double rho_max : rho_maxes) {
            AsgaParams p;
            p.phi = phi;
            p.rho_max = rho_max;
            p.rho0 = rho_max;  // within (0, rho_max], only phi/rho_max matter here
            for (double h : h_grid)
                csv.row({format_double(phi), format_double(rho_max), format_double(h),
                         format_double(adaptive_rho(h, p))});
        }
}

}  // namespace asga
