#pragma once

#include <random>

#include "asga/model.hpp"

namespace asga {

struct AsgaParams {
    double rho0 = 0.1;     // perturbation radius for the very first step
    double rho_max = 0.3;  // cap for the adaptive radius
    double phi = 0.5;      // adaptive-radius gain: rho = min(rho_max, phi/ln(h+1))
    double mu = 0.005;     // pull-back along the gradient (default 0.05 * rho0)
    double epsilon = 0.1;  // weight of the perturbed gradient in the update
    double lambda = 0.0;   // complexity weight (architecture objective)
    double lr = 0.01;
    double gap_ema = 0.9;  // smoothing of the gap driving the radius; 0 = no smoothing
    double grad_norm_tol = 1e-12;
    double fallback_noise_scale = 1.0;

    void validate() const;
};

struct AsgaState {
    explicit AsgaState(std::uint64_t seed = 0) : rng(seed) {}
    int step = 0;
    double smoothed_gap = 0.0;
    bool has_gap = false;
    std::mt19937_64 rng;
};

struct StepReport {
    int step = 0;
    double loss = 0.0;
    double perturbed_loss = 0.0;
    double gap = 0.0;
    double rho = 0.0;
    double align_inner = 0.0;  // <g0, g1>
    double grad_norm = 0.0;    // ||g0||
};

// rho(h) = min(rho_max, phi / ln(h+1)); negative gaps clamp to zero, and a
// zero gap saturates at rho_max.
double adaptive_rho(double gap, const AsgaParams& p);

// theta + (rho/||g|| - mu) * g; a vanishing gradient falls back to a seeded
// random unit direction at radius rho (mu does not apply there).
std::vector<double> asga_perturbation_point(std::span<const double> theta,
                                            std::span<const double> grad, double rho, double mu,
                                            double tol, double noise_scale, std::mt19937_64& rng);

// One ASGA update: gradient at theta, gradient at the perturbation point,
// step along g0 + epsilon * g1. The radius comes from the smoothed gap
// (rho0 on the first step). epsilon = 0 leaves g1 out entirely, so the
// parameter trajectory is exactly plain SGD.
StepReport asga_step(const LossFn& loss, ParamSet& params, const Batch& batch,
                     const AsgaParams& p, AsgaState& state);

// Classic SAM: ascend by a fixed radius along g0/||g0||, update with the
// perturbed gradient alone. rho = 0 reduces to SGD.
StepReport sam_step(const LossFn& loss, ParamSet& params, const Batch& batch, double rho,
                    double lr, AsgaState& state);

StepReport sgd_step(const LossFn& loss, ParamSet& params, const Batch& batch, double lr,
                    AsgaState& state);

enum class Method { Sgd, Sam, Asga };

Method method_from_name(std::string_view name);
std::string method_name(Method m);

struct TraceResult {
    std::vector<double> running_mean_sq_grad;  // mean of ||g||^2 over steps 1..t
    bool diverged = false;
    int steps = 0;
    double final_loss = 0.0;
};

// Runs T steps at the constant rate base.lr / sqrt(T) and records the running
// mean of the squared gradient norm. Divergence (loss above 1e6 or non-finite)
// stops the trace and flags it instead of raising.
TraceResult convergence_trace(const LossFn& loss, ParamSet& params,
                              const std::function<Batch(int)>& batch_at, Method method,
                              const AsgaParams& base, int steps, std::uint64_t seed);

}  // namespace asga
