#pragma once

// Closed-form performance figures. Quadrature convention throughout:
// X = (a + a^dag)/sqrt(2), Y = (a - a^dag)/(sqrt(2) i), vacuum variance 1/2,
// so a coherent state |alpha> has means (sqrt(2) Re alpha, sqrt(2) Im alpha).

#include <cmath>
#include <complex>
#include <cstdlib>
#include <vector>

#include "cavmem/errors.hpp"
#include "cavmem/model.hpp"

namespace cavmem {

/// Gaussian state of a single mode: quadrature means and per-quadrature
/// symmetric variances (vacuum = 1/2). No cross-correlations; the passive
/// memory model never produces any.
struct GaussianState {
    double mean_x = 0.0;
    double mean_y = 0.0;
    double var_x = 0.5;
    double var_y = 0.5;
};

/// Isotropic Gaussian distribution over coherent amplitudes with mean photon
/// number n_bar.
struct CoherentAlphabet {
    double mean_photon = 0.0;
};

// ---------------------------------------------------------------------------

/// Closed-form memory efficiency at storage time T0:
///
///   eta(T0) = (-g1 g0^2 e^{-g T0} + g1 k^2 e^{-g0 T0})^2
///             / ((g0 + g)^2 (k^2 + g0 g)^2).
///
/// The slow term decays at 2 g0; the fast term is the residual intracavity
/// component surviving the hold.
inline double efficiency_formula(const MemoryParams& p, double storage_time) {
    if (storage_time < 0.0)
        throw ValidationError("efficiency_formula: storage time must be nonnegative");
    if (p.kappa == 0.0 && p.gamma0 == 0.0)
        throw ValidationError("efficiency_formula: degenerate, kappa and gamma0 both zero");
    const double k2 = p.kappa * p.kappa;
    const double num = -p.gamma1 * p.gamma0 * p.gamma0 * std::exp(-p.gamma * storage_time) +
                       p.gamma1 * k2 * std::exp(-p.gamma0 * storage_time);
    const double den = (p.gamma0 + p.gamma) * (p.gamma0 + p.gamma) *
                       (k2 + p.gamma0 * p.gamma) * (k2 + p.gamma0 * p.gamma);
    return num * num / den;
}

/// Best average fidelity any measure-and-prepare memory reaches on the
/// coherent alphabet: (1 + n_bar) / (1 + 2 n_bar).
inline double classical_benchmark(double mean_photon) {
    if (mean_photon < 0.0)
        throw ValidationError("classical_benchmark: mean photon number must be nonnegative");
    return (1.0 + mean_photon) / (1.0 + 2.0 * mean_photon);
}

/// Fidelity of a pure coherent input against a Gaussian output state:
///
///   F = 2 / sqrt((1 + 2Vx)(1 + 2Vy))
///       * exp(-dx^2 / (1 + 2Vx) - dy^2 / (1 + 2Vy))
///
/// with dx, dy the differences between input and output quadrature means.
inline double gaussian_fidelity(Complex input_alpha, const GaussianState& out) {
    if (out.var_x * out.var_y < 0.25 - 1e-12)
        throw ValidationError("gaussian_fidelity: nonphysical state, uncertainty product below 1/4");
    const double dx = std::sqrt(2.0) * input_alpha.real() - out.mean_x;
    const double dy = std::sqrt(2.0) * input_alpha.imag() - out.mean_y;
    const double cx = 1.0 + 2.0 * out.var_x;
    const double cy = 1.0 + 2.0 * out.var_y;
    return 2.0 / std::sqrt(cx * cy) * std::exp(-dx * dx / cx - dy * dy / cy);
}

/// Average of gaussian_fidelity over the coherent alphabet for a memory with
/// amplitude gain g and common output variance V:
///
///   F_avg = 2 / ((1 + 2V) + 2 n_bar (1 - g)^2).
inline double average_fidelity(const CoherentAlphabet& alphabet, double amplitude_gain,
                               double variance) {
    if (alphabet.mean_photon < 0.0)
        throw ValidationError("average_fidelity: mean photon number must be nonnegative");
    if (amplitude_gain < 0.0 || amplitude_gain > 1.0)
        throw ValidationError("average_fidelity: amplitude gain must lie in [0, 1]");
    if (variance < 0.5 - 1e-12)
        throw ValidationError("average_fidelity: variance below the vacuum level");
    const double d = 1.0 - amplitude_gain;
    return 2.0 / ((1.0 + 2.0 * variance) + 2.0 * alphabet.mean_photon * d * d);
}

// ---------------------------------------------------------------------------
// Truncated-Fock fidelity

/// Same fidelity computed the slow way: build the displaced thermal state in
/// a truncated number basis and take <alpha| rho |alpha> directly (the pure
/// input collapses the Uhlmann formula to this overlap). Only symmetric
/// variances are supported. Serves as the independent check of
/// gaussian_fidelity, so it shares none of its algebra.
inline double fock_basis_fidelity(Complex input_alpha, const GaussianState& out,
                                  int truncation) {
    if (truncation < 20)
        throw ValidationError("fock_basis_fidelity: truncation must be at least 20");
    if (std::abs(out.var_x - out.var_y) > 1e-12)
        throw ValidationError("fock_basis_fidelity: unsupported, variances must be symmetric");
    if (out.var_x < 0.5 - 1e-9)
        throw ValidationError("fock_basis_fidelity: nonphysical state, variance below vacuum");
    const double n_th = std::max(0.0, out.var_x - 0.5);
    const Complex beta{out.mean_x / std::sqrt(2.0), out.mean_y / std::sqrt(2.0)};
    const std::size_t dim = static_cast<std::size_t>(truncation) + 1;

    auto coherent_vector = [dim](Complex amp) {
        std::vector<Complex> c(dim);
        c[0] = std::exp(-0.5 * std::norm(amp));
        for (std::size_t n = 1; n < dim; ++n)
            c[n] = c[n - 1] * amp / std::sqrt(static_cast<double>(n));
        return c;
    };
    const auto alpha_vec = coherent_vector(input_alpha);
    double alpha_tail = 1.0;
    for (const auto& c : alpha_vec) alpha_tail -= std::norm(c);

    // D(beta)|k> = (a^dag - conj(beta))^k |beta> / sqrt(k!), built by recurrence
    std::vector<Complex> psi = coherent_vector(beta);
    const double ratio = n_th / (1.0 + n_th);
    double p_k = 1.0 / (1.0 + n_th); // thermal weight of |k>
    double fidelity = 0.0;
    double tail = alpha_tail;
    double thermal_mass = 0.0;
    for (int k = 0;; ++k) {
        Complex ov{};
        for (std::size_t n = 0; n < dim; ++n) ov += std::conj(alpha_vec[n]) * psi[n];
        double psi_norm2 = 0.0;
        for (const auto& c : psi) psi_norm2 += std::norm(c);
        fidelity += p_k * std::norm(ov);
        tail += p_k * (1.0 - psi_norm2); // displaced |k> leaking past the truncation
        thermal_mass += p_k;
        if (n_th == 0.0 || p_k < 1e-18 || k >= truncation) break;
        std::vector<Complex> next(dim, Complex{});
        for (std::size_t n = 1; n < dim; ++n)
            next[n] = std::sqrt(static_cast<double>(n)) * psi[n - 1];
        for (std::size_t n = 0; n < dim; ++n)
            next[n] = (next[n] - std::conj(beta) * psi[n]) / std::sqrt(static_cast<double>(k + 1));
        psi = std::move(next);
        p_k *= ratio;
    }
    tail += 1.0 - thermal_mass; // thermal weight beyond the last k
    if (tail > 1e-10)
        throw NumericalError("fock_basis_fidelity: truncation too small, tail mass above 1e-10");
    return fidelity;
}

} // namespace cavmem
