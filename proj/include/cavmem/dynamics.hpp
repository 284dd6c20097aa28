#pragma once

// Mean-field dynamics of the cavity memory and the quantum-noise transfer
// map of the retrieved mode. The model is the linear pair
//
//   da/dt = -gamma * a - i kappa(t) * S + sqrt(2 gamma1) * u(t)
//   dS/dt = -gamma0 * S - i kappa(t) * a
//
// with the single-port input-output relation A_out = sqrt(2 gamma1) * a - u.
// kappa(t) is piecewise constant (write / hold / read), so integration runs
// window by window with a fixed-step RK4; switch times and mode supports are
// grid-aligned and every window sees smooth data. First moments come from
// direct integration; second moments need no sampling because the map is
// linear: one backward (adjoint) pass yields the coefficient of every
// discretized vacuum/noise channel in the retrieved output mode.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "cavmem/errors.hpp"
#include "cavmem/model.hpp"

namespace cavmem {

struct Trajectory {
    TimeGrid grid;
    std::vector<Complex> cavity; // a(t)
    std::vector<Complex> spin;   // S(t)
};

struct FieldRecord {
    TimeGrid grid;
    std::vector<Complex> output; // A_out(t), units 1/sqrt(s)
};

struct PropagationResult {
    Trajectory trajectory;
    FieldRecord field;
};

struct InitialState {
    Complex cavity{};
    Complex spin{};
};

/// Linear coefficients from every discretized input channel to the retrieved
/// output mode b = integral conj(v) A_out dt. Channel families: the external
/// input port, the intracavity-loss vacuum port, the spin noise port (all
/// stored as coefficient densities on the grid) plus the two initial
/// conditions. For a complete enumeration the total weight is 1 (passivity).
struct TransferMap {
    TimeGrid grid;
    std::vector<Complex> external_input; // density; v is subtracted inside the read window
    std::vector<Complex> loss_vacuum;
    std::vector<Complex> spin_noise;
    Complex initial_cavity{};
    Complex initial_spin{};
    std::size_t read_begin = 0;
    std::size_t read_end = 0;

    double weight_external = 0.0;
    double weight_loss = 0.0;
    double weight_spin = 0.0;
    double weight_initial = 0.0;

    double total_weight() const {
        return weight_external + weight_loss + weight_spin + weight_initial;
    }
};

struct Variances {
    double vx = 0.0;
    double vy = 0.0;
};

namespace detail {

/// One constant-kappa stretch of the integration, [begin, end] grid indices.
/// input_active marks stretches lying inside the driving mode's support.
struct Piece {
    std::size_t begin = 0;
    std::size_t end = 0;
    double kappa = 0.0;
    bool input_active = false;
};

inline double kappa_in_window(const ScheduleIndices& idx, std::size_t piece_end,
                              double kappa_write, double kappa_read) {
    if (piece_end <= idx.write_end) return kappa_write;
    if (piece_end <= idx.hold_end) return 0.0;
    return kappa_read;
}

inline std::vector<Piece> control_pieces(const TimeGrid& grid, const ScheduleIndices& idx,
                                         double kappa_write, double kappa_read,
                                         std::size_t support_begin, std::size_t support_end) {
    std::vector<std::size_t> cuts = {0, grid.size() - 1, idx.write_end, idx.hold_end,
                                     support_begin, support_end};
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<Piece> pieces;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        Piece p;
        p.begin = cuts[k];
        p.end = cuts[k + 1];
        p.kappa = kappa_in_window(idx, p.end, kappa_write, kappa_read);
        p.input_active = p.begin >= support_begin && p.end <= support_end;
        pieces.push_back(p);
    }
    return pieces;
}

inline void check_stability(const MemoryParams& p, const TimeGrid& grid,
                            double kappa_write, double kappa_read) {
    const double fastest = std::max({p.gamma, p.gamma0, std::abs(kappa_write),
                                     std::abs(kappa_read)});
    if (grid.dt * fastest > 0.1)
        throw NumericalError("propagate: dt * max(gamma, |kappa|, gamma0) exceeds 0.1; "
                             "refine the grid");
}

/// RK4 over one piece for the 2-state system with a sampled drive on the
/// cavity row. Drive midpoints come from a cubic stencil inside the piece.
template <class Record>
inline void rk4_piece(const Piece& pc, const TimeGrid& grid, double gamma, double gamma0,
                      double drive_scale, const std::vector<Complex>* drive,
                      Complex& x_a, Complex& x_s, Record&& record) {
    const Complex ik{0.0, pc.kappa};
    const double h = grid.dt;
    auto rhs = [&](Complex a, Complex s, Complex u, Complex& da, Complex& ds) {
        da = -gamma * a - ik * s + drive_scale * u;
        ds = -gamma0 * s - ik * a;
    };
    for (std::size_t i = pc.begin; i < pc.end; ++i) {
        Complex u0{}, um{}, u1{};
        if (pc.input_active && drive) {
            u0 = (*drive)[i];
            um = stencil_midpoint(*drive, i, pc.begin, pc.end);
            u1 = (*drive)[i + 1];
        }
        Complex k1a, k1s, k2a, k2s, k3a, k3s, k4a, k4s;
        rhs(x_a, x_s, u0, k1a, k1s);
        rhs(x_a + 0.5 * h * k1a, x_s + 0.5 * h * k1s, um, k2a, k2s);
        rhs(x_a + 0.5 * h * k2a, x_s + 0.5 * h * k2s, um, k3a, k3s);
        rhs(x_a + h * k3a, x_s + h * k3s, u1, k4a, k4s);
        x_a += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
        x_s += h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
        record(i + 1, x_a, x_s);
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Forward propagation

/// Integrates the mean-field equations under the schedule and returns the
/// trajectory together with the output field A_out = sqrt(2 gamma1) a - u.
/// The input mode drives the cavity only inside its own support. Rejects
/// grids too coarse for the fastest rate instead of integrating silently.
inline PropagationResult propagate(const MemoryParams& params, const ControlSchedule& schedule,
                                   const TemporalMode& input, InitialState initial = {}) {
    const TimeGrid& grid = input.grid;
    const ScheduleIndices idx = snap_to_grid(schedule, grid);
    const double kw = schedule.kappa_write.value_or(params.kappa);
    const double kr = schedule.kappa_read.value_or(params.kappa);
    detail::check_stability(params, grid, kw, kr);

    const auto pieces = detail::control_pieces(grid, idx, kw, kr,
                                               input.support_begin, input.support_end);
    const double s2g1 = std::sqrt(2.0 * params.gamma1);

    PropagationResult res;
    res.trajectory.grid = grid;
    res.trajectory.cavity.assign(grid.size(), Complex{});
    res.trajectory.spin.assign(grid.size(), Complex{});
    res.field.grid = grid;
    res.field.output.assign(grid.size(), Complex{});

    Complex a = initial.cavity, s = initial.spin;
    res.trajectory.cavity[0] = a;
    res.trajectory.spin[0] = s;
    for (const auto& pc : pieces) {
        detail::rk4_piece(pc, grid, params.gamma, params.gamma0, s2g1, &input.samples, a, s,
                          [&](std::size_t i, Complex xa, Complex xs) {
                              res.trajectory.cavity[i] = xa;
                              res.trajectory.spin[i] = xs;
                          });
    }
    for (std::size_t i = 0; i < grid.size(); ++i)
        res.field.output[i] = s2g1 * res.trajectory.cavity[i] - input.samples[i];
    return res;
}

// ---------------------------------------------------------------------------
// Efficiency and retrieved mode

/// Photon-number ratio of the output inside the read window to the input.
inline double simulated_efficiency(const FieldRecord& record, const TemporalMode& input,
                                   Interval read_window) {
    const double in_norm2 = mode_norm_squared(input);
    if (std::sqrt(in_norm2) < 1e-12)
        throw ValidationError("simulated_efficiency: empty input mode");
    const std::size_t a = record.grid.index_near(read_window.begin);
    const std::size_t b = record.grid.index_near(read_window.end);
    if (b <= a)
        throw ValidationError("simulated_efficiency: empty read window");
    const double out = detail::trapezoid(record.grid, a, b, [&](std::size_t i) {
        return std::norm(record.output[i]);
    });
    return out / in_norm2;
}

/// Output field restricted to the read window, unit-normalized.
inline TemporalMode retrieved_mode_shape(const FieldRecord& record, Interval read_window) {
    const std::size_t a = record.grid.index_near(read_window.begin);
    const std::size_t b = record.grid.index_near(read_window.end);
    if (b <= a)
        throw ValidationError("retrieved_mode_shape: empty read window");
    std::vector<Complex> s(record.grid.size(), Complex{});
    for (std::size_t i = a; i <= b; ++i) s[i] = record.output[i];
    TemporalMode m = make_mode(record.grid, std::move(s), a, b);
    if (mode_norm(m) < 1e-12)
        throw NumericalError("retrieved_mode_shape: output norm below 1e-12 in the read window");
    return normalized(std::move(m));
}

// ---------------------------------------------------------------------------
// Adjoint transfer map

/// One backward pass of the adjoint system gives the coefficient of every
/// input channel in b = integral conj(v) A_out dt. With w solving
/// -dw/dt = M^T w + sqrt(2 gamma1) conj(v) e_a (M is complex symmetric),
///
///   b = w(t0) . x(t0) + integral [ sqrt(2 gamma1) w_a - conj(v) 1_read ] A_in
///     + integral sqrt(2 gamma2) w_a A_v + integral sqrt(2 gamma0) w_S S_v.
///
/// Family weights are trapezoid integrals of the squared densities; the jump
/// of the external-input density at the read-window edges is integrated
/// one-sidedly so the discretization error stays second order.
inline TransferMap adjoint_transfer(const MemoryParams& params, const ControlSchedule& schedule,
                                    const TemporalMode& retrieved) {
    const TimeGrid& grid = retrieved.grid;
    const ScheduleIndices idx = snap_to_grid(schedule, grid);
    const double kw = schedule.kappa_write.value_or(params.kappa);
    const double kr = schedule.kappa_read.value_or(params.kappa);
    detail::check_stability(params, grid, kw, kr);

    const std::size_t rb = retrieved.support_begin;
    const std::size_t re = retrieved.support_end;
    if (re <= rb)
        throw ValidationError("adjoint_transfer: retrieved mode has empty support");

    // conj(v) drives the adjoint pass the way u drives the forward pass
    std::vector<Complex> vconj(grid.size(), Complex{});
    for (std::size_t i = rb; i <= re; ++i) vconj[i] = std::conj(retrieved.samples[i]);

    const auto pieces = detail::control_pieces(grid, idx, kw, kr, rb, re);
    const double s2g1 = std::sqrt(2.0 * params.gamma1);

    std::vector<Complex> wa(grid.size(), Complex{}), ws(grid.size(), Complex{});
    Complex xa{}, xs{};
    // march backward: in s = t_end - t the adjoint reads dw/ds = M w + phi(s)
    for (auto it = pieces.rbegin(); it != pieces.rend(); ++it) {
        const auto& pc = *it;
        const Complex ik{0.0, pc.kappa};
        const double h = grid.dt;
        auto rhs = [&](Complex a, Complex s, Complex phi, Complex& da, Complex& ds) {
            da = -params.gamma * a - ik * s + phi;
            ds = -params.gamma0 * s - ik * a;
        };
        for (std::size_t i = pc.end; i > pc.begin; --i) {
            Complex p1{}, pm{}, p0{};
            if (pc.input_active) {
                p1 = s2g1 * vconj[i];
                pm = s2g1 * detail::stencil_midpoint(vconj, i - 1, rb, re);
                p0 = s2g1 * vconj[i - 1];
            }
            Complex k1a, k1s, k2a, k2s, k3a, k3s, k4a, k4s;
            rhs(xa, xs, p1, k1a, k1s);
            rhs(xa + 0.5 * h * k1a, xs + 0.5 * h * k1s, pm, k2a, k2s);
            rhs(xa + 0.5 * h * k2a, xs + 0.5 * h * k2s, pm, k3a, k3s);
            rhs(xa + h * k3a, xs + h * k3s, p0, k4a, k4s);
            xa += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
            xs += h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
            wa[i - 1] = xa;
            ws[i - 1] = xs;
        }
    }

    TransferMap map;
    map.grid = grid;
    map.read_begin = rb;
    map.read_end = re;
    map.external_input.assign(grid.size(), Complex{});
    map.loss_vacuum.assign(grid.size(), Complex{});
    map.spin_noise.assign(grid.size(), Complex{});
    const double s2g2 = std::sqrt(2.0 * params.gamma2);
    const double s2g0 = std::sqrt(2.0 * params.gamma0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        Complex cin = s2g1 * wa[i];
        if (i >= rb && i <= re) cin -= vconj[i];
        map.external_input[i] = cin;
        map.loss_vacuum[i] = s2g2 * wa[i];
        map.spin_noise[i] = s2g0 * ws[i];
    }
    map.initial_cavity = wa[0];
    map.initial_spin = ws[0];

    const std::size_t last = grid.size() - 1;
    const double w_in_smooth = detail::trapezoid(grid, 0, last, [&](std::size_t i) {
        return std::norm(s2g1 * wa[i]);
    });
    // one-sided correction: inside the read window the density is c - conj(v)
    const double w_in_read = detail::trapezoid(grid, rb, re, [&](std::size_t i) {
        return std::norm(s2g1 * wa[i] - vconj[i]) - std::norm(s2g1 * wa[i]);
    });
    map.weight_external = w_in_smooth + w_in_read;
    map.weight_loss = detail::trapezoid(grid, 0, last, [&](std::size_t i) {
        return std::norm(map.loss_vacuum[i]);
    });
    map.weight_spin = detail::trapezoid(grid, 0, last, [&](std::size_t i) {
        return std::norm(map.spin_noise[i]);
    });
    map.weight_initial = std::norm(map.initial_cavity) + std::norm(map.initial_spin);

    if (std::abs(map.total_weight() - 1.0) > 1e-2)
        throw NumericalError("adjoint_transfer: channel weights deviate grossly from 1; "
                             "the grid is too coarse for a trustworthy transfer map");
    return map;
}

/// Symmetric quadrature variances of the retrieved mode: every enumerated
/// channel contributes its vacuum half, the spin noise family additionally
/// carries the excess occupation.
inline Variances retrieved_variance(const TransferMap& map, double excess_noise) {
    if (excess_noise < 0.0)
        throw ValidationError("retrieved_variance: excess noise must be nonnegative");
    const double v = 0.5 * map.total_weight() + excess_noise * map.weight_spin;
    if (v < 0.5 - 1e-4)
        throw NumericalError("retrieved_variance: variance below the vacuum level; "
                             "channel enumeration is incomplete");
    return Variances{v, v};
}

} // namespace cavmem
