#include "asga/sharpness.hpp"

#include <cmath>

namespace asga {

namespace {

double eval_loss(const LossFn& loss, Tape& t, const Batch& batch) {
    Var l = loss(t, batch);
    double v = t.scalar(l);
    return v;
}

double loss_value(const LossFn& loss, const Batch& batch) {
    Tape t;
    return eval_loss(loss, t, batch);
}

std::vector<double> grad_at(const LossFn& loss, ParamSet& params, const Batch& batch) {
    params.zero_grad();
    Tape t;
    t.backward(loss(t, batch));
    return params.grad_vector();
}

}  // namespace

std::vector<double> unit_or_random(std::vector<double> g, double tol, double noise_scale,
                                   std::mt19937_64& rng) {
    double n = l2_norm(g);
    if (n < tol) {
        std::normal_distribution<double> dist(0.0, noise_scale);
        for (double& v : g) v = dist(rng);
        n = l2_norm(g);
        require(n > 0.0, "fallback direction degenerate");
    }
    for (double& v : g) v /= n;
    return g;
}

std::vector<double> ascent_direction(const LossFn& loss, ParamSet& params, const Batch& batch,
                                     const PerturbParams& p, std::mt19937_64& rng) {
    p.validate();
    return unit_or_random(grad_at(loss, params, batch), p.grad_norm_tol, p.fallback_noise_scale,
                          rng);
}

std::pair<double, double> loss_pair_along(const LossFn& loss, ParamSet& params, const Batch& batch,
                                          std::span<const double> dir, double rho) {
    require(rho > 0.0, "perturbation radius must be positive");
    const std::vector<double> saved = params.value_vector();
    double base = loss_value(loss, batch);
    params.add_scaled(dir, rho);
    double perturbed = loss_value(loss, batch);
    params.set_values(saved);
    return {base, perturbed};
}

std::pair<double, double> perturbed_loss(const LossFn& loss, ParamSet& params, const Batch& batch,
                                         const PerturbParams& p, std::mt19937_64& rng) {
    p.validate();
    std::vector<double> dir = ascent_direction(loss, params, batch, p, rng);
    return loss_pair_along(loss, params, batch, dir, p.rho);
}

std::pair<double, std::vector<double>> hessian_eig_power(const LossFn& loss, ParamSet& params,
                                                         const Batch& batch, int iters,
                                                         std::uint64_t seed) {
    require(iters >= 1, "power iteration needs at least one step");
    const std::vector<double> saved = params.value_vector();
    const std::size_t n = saved.size();
    std::mt19937_64 rng(seed);
    std::vector<double> v(n);
    {
        std::normal_distribution<double> dist(0.0, 1.0);
        for (double& x : v) x = dist(rng);
        double nm = l2_norm(v);
        for (double& x : v) x /= nm;
    }
    const double eps = 1e-4 * (1.0 + l2_norm(saved));
    double lambda = 0.0;
    std::vector<double> shifted(n), hv(n);
    for (int it = 0; it < iters; ++it) {
        for (std::size_t i = 0; i < n; ++i) shifted[i] = saved[i] + eps * v[i];
        params.set_values(shifted);
        std::vector<double> gp = grad_at(loss, params, batch);
        for (std::size_t i = 0; i < n; ++i) shifted[i] = saved[i] - eps * v[i];
        params.set_values(shifted);
        std::vector<double> gm = grad_at(loss, params, batch);
        for (std::size_t i = 0; i < n; ++i) hv[i] = (gp[i] - gm[i]) / (2.0 * eps);
        lambda = dot(v, hv);
        double nm = l2_norm(hv);
        if (nm == 0.0) {
            lambda = 0.0;
            break;
        }
        for (std::size_t i = 0; i < n; ++i) v[i] = hv[i] / nm;
    }
    params.set_values(saved);
    return {lambda, v};
}

SharpnessReport sharpness_report(const LossFn& loss, ParamSet& params, const Batch& batch,
                                 const PerturbParams& p, std::mt19937_64& rng, int power_iters,
                                 std::uint64_t power_seed) {
    auto [base, pert] = perturbed_loss(loss, params, batch, p, rng);
    SharpnessReport r;
    r.rho = p.rho;
    r.loss = base;
    r.perturbed_loss = pert;
    r.gap = surrogate_gap(base, pert);
    r.sigma_gap = sigma_from_gap(r.gap, p.rho);
    if (power_iters > 0)
        r.sigma_power = hessian_eig_power(loss, params, batch, power_iters, power_seed).first;
    return r;
}

namespace {

ProbeRow make_row(std::vector<double> point, double base, double worst, double rho) {
    ProbeRow row;
    row.point = std::move(point);
    row.rho = rho;
    row.loss = base;
    row.perturbed_loss = worst;
    row.gap = worst - base;
    row.sigma = sigma_from_gap(row.gap, rho);
    return row;
}

}  // namespace

std::vector<ProbeRow> landscape_probe(const std::function<double(double)>& f,
                                      std::span<const double> grid,
                                      std::span<const double> rho_list) {
    require(!grid.empty() && !rho_list.empty(), "probe needs a grid and at least one rho");
    std::vector<ProbeRow> rows;
    for (double rho : rho_list) {
        require(rho > 0.0, "probe rho must be positive");
        const double step = rho / 1000.0;
        for (double x : grid) {
            double base = f(x);
            double worst = base;  // k = 0 included, so the gap is never negative
            for (int k = -1000; k <= 1000; ++k) worst = std::max(worst, f(x + k * step));
            rows.push_back(make_row({x}, base, worst, rho));
        }
    }
    return rows;
}

std::vector<ProbeRow> landscape_probe(const std::function<double(double, double)>& f,
                                      std::span<const std::pair<double, double>> grid,
                                      std::span<const double> rho_list) {
    require(!grid.empty() && !rho_list.empty(), "probe needs a grid and at least one rho");
    std::vector<ProbeRow> rows;
    for (double rho : rho_list) {
        require(rho > 0.0, "probe rho must be positive");
        const double step = rho / 1000.0;
        for (auto [x, y] : grid) {
            double base = f(x, y);
            double worst = base;
            for (int i = -1000; i <= 1000; ++i) {
                // stay inside the disc: i^2 + j^2 <= 1000^2
                int jmax = static_cast<int>(std::floor(std::sqrt(1.0e6 - static_cast<double>(i) * i)));
                for (int j = -jmax; j <= jmax; ++j)
                    worst = std::max(worst, f(x + i * step, y + j * step));
            }
            rows.push_back(make_row({x, y}, base, worst, rho));
        }
    }
    return rows;
}

double two_minima(double x) {
    double a = x + 2.0, b = x - 2.0;
    return 1.0 - 0.9 * std::exp(-a * a / 0.005) - 0.8 * std::exp(-b * b / 2.0);
}

LossFn two_minima_loss(ParamSet& params) {
    require(params.size() >= 1 && params[0].size() == 1, "two_minima_loss wants a 1x1 parameter");
    return [&params](Tape& t, const Batch&) {
        Var x = t.param(params, 0);
        Var a = t.affine(x, 1.0, 2.0);
        Var sharp = t.exp(t.affine(t.mul(a, a), -1.0 / 0.005, 0.0));
        Var b = t.affine(x, 1.0, -2.0);
        Var flat = t.exp(t.affine(t.mul(b, b), -0.5, 0.0));
        return t.add_scaled(t.affine(sharp, -0.9, 1.0), flat, -0.8);
    };
}

LossFn quadratic_loss(ParamSet& params, Tensor a) {
    require(params.size() >= 1, "quadratic_loss wants one parameter vector");
    require(a.rows() == a.cols(), "quadratic matrix must be square");
    require(params[0].rows() == 1 && params[0].cols() == a.rows(),
            "theta must be 1x" + std::to_string(a.rows()));
    return [&params, a = std::move(a)](Tape& t, const Batch&) {
        Var th = t.param(params, 0);
        Var y = t.matmul(th, t.constant(a));
        return t.affine(t.sum(t.mul(th, y)), 0.5, 0.0);
    };
}

}  // namespace asga
