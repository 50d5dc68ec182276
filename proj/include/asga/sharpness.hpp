#pragma once

#include <optional>
#include <random>
#include <utility>

#include "asga/model.hpp"

namespace asga {

struct PerturbParams {
    double rho = 0.1;
    // Stddev of the Gaussian fallback direction when the gradient is ~zero.
    double fallback_noise_scale = 1.0;
    double grad_norm_tol = 1e-12;

    void validate() const { require(rho > 0.0, "perturbation radius must be positive"); }
};

struct SharpnessReport {
    double rho = 0.0;
    double loss = 0.0;
    double perturbed_loss = 0.0;
    double gap = 0.0;
    double sigma_gap = 0.0;
    std::optional<double> sigma_power;  // Rayleigh estimate when power iteration ran
};

// g normalized to unit length; near-zero norm falls back to a seeded Gaussian
// draw (stddev = noise_scale), normalized.
std::vector<double> unit_or_random(std::vector<double> g, double tol, double noise_scale,
                                   std::mt19937_64& rng);

// Gradient ascent direction at the current parameters (computes one
// forward/backward pass; falls back to random when the gradient vanishes).
std::vector<double> ascent_direction(const LossFn& loss, ParamSet& params, const Batch& batch,
                                     const PerturbParams& p, std::mt19937_64& rng);

// (L(theta), L(theta + rho * d)) with d from ascent_direction; parameters are
// restored bit-identically.
std::pair<double, double> perturbed_loss(const LossFn& loss, ParamSet& params, const Batch& batch,
                                         const PerturbParams& p, std::mt19937_64& rng);

// Same, but along a caller-supplied direction (must be unit length for the
// radius to mean anything; no normalization happens here).
std::pair<double, double> loss_pair_along(const LossFn& loss, ParamSet& params, const Batch& batch,
                                          std::span<const double> dir, double rho);

inline double surrogate_gap(double loss, double perturbed) { return perturbed - loss; }

// Dominant-curvature estimate from the gap: sigma ~ 2h / rho^2.
inline double sigma_from_gap(double gap, double rho) {
    require(rho > 0.0, "sigma_from_gap: rho must be positive");
    return 2.0 * gap / (rho * rho);
}

// Dominant Hessian eigenvalue by power iteration on central-difference
// Hessian-vector products; returns the Rayleigh quotient and final iterate.
std::pair<double, std::vector<double>> hessian_eig_power(const LossFn& loss, ParamSet& params,
                                                         const Batch& batch, int iters,
                                                         std::uint64_t seed);

// Gap probe plus optional power iteration, bundled for reporting.
SharpnessReport sharpness_report(const LossFn& loss, ParamSet& params, const Batch& batch,
                                 const PerturbParams& p, std::mt19937_64& rng,
                                 int power_iters = 0, std::uint64_t power_seed = 0);

// Scalar-landscape probe. The worst-case loss over the rho-ball is found by
// exhaustive scan at resolution rho/1000, so the gap is a dense-grid oracle
// rather than a gradient step.
struct ProbeRow {
    std::vector<double> point;  // 1 or 2 coordinates
    double rho = 0.0;
    double loss = 0.0;
    double perturbed_loss = 0.0;
    double gap = 0.0;
    double sigma = 0.0;
};

std::vector<ProbeRow> landscape_probe(const std::function<double(double)>& f,
                                      std::span<const double> grid,
                                      std::span<const double> rho_list);
std::vector<ProbeRow> landscape_probe(const std::function<double(double, double)>& f,
                                      std::span<const std::pair<double, double>> grid,
                                      std::span<const double> rho_list);

// Reference landscape with a sharp minimum near -2 and a flat one near +2.
double two_minima(double x);

// Tape builders for scalar diagnostics; the ParamSet must outlive the closure
// and hold the scalar at index 0.
LossFn two_minima_loss(ParamSet& params);
LossFn quadratic_loss(ParamSet& params, Tensor a);  // L = 0.5 * theta A theta^T

}  // namespace asga
