#include "asga/optimizer.hpp"

#include <cmath>

#include "asga/sharpness.hpp"

namespace asga {

void AsgaParams::validate() const {
    require(rho0 > 0.0 && rho0 <= rho_max, "need 0 < rho0 <= rho_max");
    require(phi > 0.0, "phi must be positive");
    require(mu >= 0.0, "mu must be nonnegative");
    require(epsilon >= 0.0, "epsilon must be nonnegative");
    require(lambda >= 0.0, "lambda must be nonnegative");
    require(lr > 0.0, "learning rate must be positive");
    require(gap_ema >= 0.0 && gap_ema < 1.0, "gap_ema must lie in [0,1)");
}

double adaptive_rho(double gap, const AsgaParams& p) {
    p.validate();
    double h = std::max(gap, 0.0);
    if (h == 0.0) return p.rho_max;
    return std::min(p.rho_max, p.phi / std::log1p(h));
}

std::vector<double> asga_perturbation_point(std::span<const double> theta,
                                            std::span<const double> grad, double rho, double mu,
                                            double tol, double noise_scale,
                                            std::mt19937_64& rng) {
    require(theta.size() == grad.size(), "theta/grad size mismatch");
    require(rho > 0.0, "perturbation radius must be positive");
    require(mu >= 0.0, "mu must be nonnegative");
    std::vector<double> out(theta.begin(), theta.end());
    double n = l2_norm(grad);
    if (n >= tol) {
        double coeff = rho / n - mu;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += coeff * grad[i];
    } else {
        std::vector<double> dir =
            unit_or_random(std::vector<double>(grad.begin(), grad.end()), tol, noise_scale, rng);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += rho * dir[i];
    }
    return out;
}

namespace {

// Loss and gradient in one pass; throws with step context on non-finite values.
std::pair<double, std::vector<double>> loss_and_grad(const LossFn& loss, ParamSet& params,
                                                     const Batch& batch, int step,
                                                     const char* where) {
    params.zero_grad();
    Tape t;
    Var l = loss(t, batch);
    double v = t.scalar(l);
    if (!std::isfinite(v))
        throw NumericError("non-finite " + std::string(where) + " loss at step " +
                           std::to_string(step));
    t.backward(l);
    std::vector<double> g = params.grad_vector();
    for (double x : g)
        if (!std::isfinite(x))
            throw NumericError("non-finite " + std::string(where) + " gradient at step " +
                               std::to_string(step));
    return {v, std::move(g)};
}

}  // namespace

StepReport asga_step(const LossFn& loss, ParamSet& params, const Batch& batch,
                     const AsgaParams& p, AsgaState& state) {
    p.validate();
    auto [base_loss, g0] = loss_and_grad(loss, params, batch, state.step, "base");

    double rho = state.has_gap ? adaptive_rho(state.smoothed_gap, p) : p.rho0;

    const std::vector<double> saved = params.value_vector();
    std::vector<double> perturbed = asga_perturbation_point(
        saved, g0, rho, p.mu, p.grad_norm_tol, p.fallback_noise_scale, state.rng);
    params.set_values(perturbed);
    auto [pert_loss, g1] = loss_and_grad(loss, params, batch, state.step, "perturbed");
    params.set_values(saved);

    // update = g0 + epsilon * g1; epsilon = 0 must leave g0 bit-identical
    std::vector<double> dir = g0;
    if (p.epsilon != 0.0)
        for (std::size_t i = 0; i < dir.size(); ++i) dir[i] += p.epsilon * g1[i];
    params.add_scaled(dir, -p.lr);

    double gap = surrogate_gap(base_loss, pert_loss);
    double clamped = std::max(gap, 0.0);
    state.smoothed_gap =
        state.has_gap ? p.gap_ema * state.smoothed_gap + (1.0 - p.gap_ema) * clamped : clamped;
    state.has_gap = true;

    StepReport r;
    r.step = state.step++;
    r.loss = base_loss;
    r.perturbed_loss = pert_loss;
    r.gap = gap;
    r.rho = rho;
    r.align_inner = dot(g0, g1);
    r.grad_norm = l2_norm(g0);
    return r;
}

StepReport sam_step(const LossFn& loss, ParamSet& params, const Batch& batch, double rho,
                    double lr, AsgaState& state) {
    require(rho >= 0.0, "sam radius must be nonnegative");
    require(lr > 0.0, "learning rate must be positive");
    auto [base_loss, g0] = loss_and_grad(loss, params, batch, state.step, "base");

    double pert_loss = base_loss;
    std::vector<double> g1 = g0;
    if (rho > 0.0) {
        const std::vector<double> saved = params.value_vector();
        std::vector<double> dir = unit_or_random(g0, 1e-12, 1.0, state.rng);
        params.add_scaled(dir, rho);
        auto [pl, gp] = loss_and_grad(loss, params, batch, state.step, "perturbed");
        params.set_values(saved);
        pert_loss = pl;
        g1 = std::move(gp);
    }
    params.add_scaled(g1, -lr);

    StepReport r;
    r.step = state.step++;
    r.loss = base_loss;
    r.perturbed_loss = pert_loss;
    r.gap = surrogate_gap(base_loss, pert_loss);
    r.rho = rho;
    r.align_inner = dot(g0, g1);
    r.grad_norm = l2_norm(g0);
    return r;
}

StepReport sgd_step(const LossFn& loss, ParamSet& params, const Batch& batch, double lr,
                    AsgaState& state) {
    require(lr > 0.0, "learning rate must be positive");
    auto [base_loss, g0] = loss_and_grad(loss, params, batch, state.step, "base");
    params.add_scaled(g0, -lr);

    StepReport r;
    r.step = state.step++;
    r.loss = base_loss;
    r.perturbed_loss = base_loss;
    r.gap = 0.0;
    r.rho = 0.0;
    r.align_inner = dot(g0, g0);
    r.grad_norm = l2_norm(g0);
    return r;
}

Method method_from_name(std::string_view name) {
    if (name == "sgd") return Method::Sgd;
    if (name == "sam") return Method::Sam;
    if (name == "asga") return Method::Asga;
    throw ContractError("unknown method: " + std::string(name));
}

std::string method_name(Method m) {
    switch (m) {
        case Method::Sgd: return "sgd";
        case Method::Sam: return "sam";
        case Method::Asga: return "asga";
    }
    throw ContractError("unknown method enum");
}

TraceResult convergence_trace(const LossFn& loss, ParamSet& params,
                              const std::function<Batch(int)>& batch_at, Method method,
                              const AsgaParams& base, int steps, std::uint64_t seed) {
    base.validate();
    require(steps >= 1, "trace needs at least one step");
    AsgaParams p = base;
    p.lr = base.lr / std::sqrt(static_cast<double>(steps));
    AsgaState state(seed);

    TraceResult out;
    out.running_mean_sq_grad.reserve(static_cast<std::size_t>(steps));
    double acc = 0.0;
    for (int t = 0; t < steps; ++t) {
        Batch batch = batch_at(t);
        StepReport rep;
        try {
            switch (method) {
                case Method::Sgd: rep = sgd_step(loss, params, batch, p.lr, state); break;
                case Method::Sam: rep = sam_step(loss, params, batch, p.rho0, p.lr, state); break;
                case Method::Asga: rep = asga_step(loss, params, batch, p, state); break;
            }
        } catch (const NumericError&) {
            out.diverged = true;
            break;
        }
        if (!std::isfinite(rep.loss) || rep.loss > 1e6) {
            out.diverged = true;
            break;
        }
        acc += rep.grad_norm * rep.grad_norm;
        out.running_mean_sq_grad.push_back(acc / (t + 1));
        out.final_loss = rep.loss;
        out.steps = t + 1;
    }
    return out;
}

}  // namespace asga
