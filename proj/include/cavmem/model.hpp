#pragma once

// Value types shared by the whole library: uniform time grids, cavity and
// coupling parameter records, sampled temporal modes and the three-stage
// (write / hold / read) control schedule. Everything here is an immutable
// record after construction and safe to share across threads.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cavmem/errors.hpp"

namespace cavmem {

using Complex = std::complex<double>;

// ---------------------------------------------------------------------------
// Time grid

/// Uniform grid on [t_start, t_end] with step dt. The span must be an
/// integer number of steps (>= 2); all sampled quantities in the library
/// live on such a grid and all integrals are trapezoidal sums over it.
struct TimeGrid {
    double t_start = 0.0;
    double t_end = 1.0;
    double dt = 0.5;

    TimeGrid() = default;
    TimeGrid(double start, double end, double step)
        : t_start(start), t_end(end), dt(step) {
        if (!(dt > 0.0))
            throw ValidationError("TimeGrid: step must be positive");
        const double raw_steps = (t_end - t_start) / dt;
        const double rounded = std::round(raw_steps);
        if (!(rounded >= 2.0) || std::abs(raw_steps - rounded) > 1e-6 * std::max(1.0, rounded))
            throw ValidationError("TimeGrid: span must be an integer number of steps >= 2");
        steps_ = static_cast<std::size_t>(rounded);
    }

    std::size_t steps() const { return steps_; }
    std::size_t size() const { return steps_ + 1; }
    double time(std::size_t i) const { return t_start + static_cast<double>(i) * dt; }
    double duration() const { return t_end - t_start; }

    /// Nearest grid index to t, clamped to the grid. Schedule boundaries are
    /// snapped through this, so switching always happens on a grid point.
    std::size_t index_near(double t) const {
        const long long i = std::llround((t - t_start) / dt);
        const long long hi = static_cast<long long>(steps_);
        return static_cast<std::size_t>(std::clamp(i, 0ll, hi));
    }

    bool operator==(const TimeGrid& o) const {
        return t_start == o.t_start && t_end == o.t_end && dt == o.dt;
    }

private:
    std::size_t steps_ = 2;
};

/// Closed time interval, used to select integration windows on a grid.
struct Interval {
    double begin = 0.0;
    double end = 0.0;
};

namespace detail {

/// Trapezoidal sum of f(i) over grid indices [a, b].
template <class F>
double trapezoid(const TimeGrid& g, std::size_t a, std::size_t b, F&& f) {
    if (b <= a) return 0.0;
    double s = 0.5 * (f(a) + f(b));
    for (std::size_t i = a + 1; i < b; ++i) s += f(i);
    return s * g.dt;
}

template <class F>
Complex trapezoid_c(const TimeGrid& g, std::size_t a, std::size_t b, F&& f) {
    if (b <= a) return Complex{};
    Complex s = 0.5 * (f(a) + f(b));
    for (std::size_t i = a + 1; i < b; ++i) s += f(i);
    return s * g.dt;
}

/// Value of a sampled function halfway between samples i and i+1, using a
/// cubic stencil clamped to [a, b] (falls back to lower order on short
/// ranges). Only ever called with i in [a, b).
inline Complex stencil_midpoint(const std::vector<Complex>& u, std::size_t i,
                                std::size_t a, std::size_t b) {
    if (b - a < 3) {
        if (b - a < 1) return u[a];
        return 0.5 * (u[i] + u[i + 1]);
    }
    const std::size_t j0 = std::clamp(i == 0 ? 0 : i - 1, a, b - 3);
    const double x = static_cast<double>(i - j0) + 0.5;
    double w[4];
    for (int k = 0; k < 4; ++k) {
        double p = 1.0;
        for (int m = 0; m < 4; ++m)
            if (m != k) p *= (x - m) / static_cast<double>(k - m);
        w[k] = p;
    }
    return w[0] * u[j0] + w[1] * u[j0 + 1] + w[2] * u[j0 + 2] + w[3] * u[j0 + 3];
}

} // namespace detail

// ---------------------------------------------------------------------------
// Physical parameter records

/// Passive cavity geometry. T and L are the per-round-trip input-mirror
/// transmission and internal loss, tau the round-trip time.
struct CavityGeometry {
    double mirror_transmission = 0.0; // T, dimensionless in (0, 1]
    double round_trip_loss = 0.0;     // L, dimensionless in [0, 1)
    double round_trip_time = 0.0;     // tau, seconds
};

/// Microscopic quantities from which the effective light-atom coupling is
/// built: kappa = sqrt(N_a) * mu * Omega / Delta.
struct CouplingSpec {
    double atom_number = 0.0;       // N_a
    double coupling_constant = 0.0; // mu, rad/s
    double rabi_frequency = 0.0;    // Omega, rad/s
    double detuning = 0.0;          // Delta, rad/s
};

struct CavityRates {
    double gamma1 = 0.0; // input coupling rate, 1/s
    double gamma2 = 0.0; // intracavity loss rate, 1/s
    double gamma = 0.0;  // gamma1 + gamma2
};

/// gamma1 = T / (2 tau), gamma2 = L / (2 tau).
inline CavityRates derive_rates(const CavityGeometry& geo) {
    if (!(geo.round_trip_time > 0.0))
        throw ValidationError("derive_rates: round-trip time must be positive");
    if (!(geo.mirror_transmission > 0.0) || geo.mirror_transmission > 1.0)
        throw ValidationError("derive_rates: mirror transmission must lie in (0, 1]");
    if (geo.round_trip_loss < 0.0 || geo.round_trip_loss >= 1.0)
        throw ValidationError("derive_rates: round-trip loss must lie in [0, 1)");
    if (geo.mirror_transmission + geo.round_trip_loss > 1.0)
        throw ValidationError("derive_rates: transmission plus loss exceeds 1");
    CavityRates r;
    r.gamma1 = geo.mirror_transmission / (2.0 * geo.round_trip_time);
    r.gamma2 = geo.round_trip_loss / (2.0 * geo.round_trip_time);
    r.gamma = r.gamma1 + r.gamma2;
    return r;
}

/// kappa = sqrt(N_a) * mu * Omega / Delta. Sign of Delta carries through.
inline double derive_coupling(const CouplingSpec& spec) {
    if (!(spec.atom_number > 0.0))
        throw ValidationError("derive_coupling: atom number must be positive");
    if (spec.detuning == 0.0)
        throw ValidationError("derive_coupling: detuning must be nonzero");
    return std::sqrt(spec.atom_number) * spec.coupling_constant * spec.rabi_frequency /
           spec.detuning;
}

/// Effective rates of the memory model. gamma == gamma1 + gamma2 always;
/// excess_noise is the added symmetric variance (vacuum = 1/2 units) carried
/// by the spin noise channel.
struct MemoryParams {
    double gamma0 = 0.0;       // spin decoherence rate, 1/s
    double gamma1 = 0.0;       // input coupling rate, 1/s
    double gamma2 = 0.0;       // intracavity loss rate, 1/s
    double gamma = 0.0;        // total cavity rate
    double kappa = 0.0;        // effective light-atom coupling, 1/s
    double excess_noise = 0.0; // epsilon >= 0

    static MemoryParams from_rates(double gamma0, double gamma1, double gamma2,
                                   double kappa, double excess_noise = 0.0) {
        if (!(gamma1 > 0.0))
            throw ValidationError("MemoryParams: gamma1 must be positive");
        if (gamma0 < 0.0 || gamma2 < 0.0)
            throw ValidationError("MemoryParams: rates must be nonnegative");
        if (excess_noise < 0.0)
            throw ValidationError("MemoryParams: excess noise must be nonnegative");
        MemoryParams p;
        p.gamma0 = gamma0;
        p.gamma1 = gamma1;
        p.gamma2 = gamma2;
        p.gamma = gamma1 + gamma2;
        p.kappa = kappa;
        p.excess_noise = excess_noise;
        return p;
    }
};

// ---------------------------------------------------------------------------
// Temporal modes

/// Complex envelope sampled on a grid, with an explicit support range
/// [support_begin, support_end] (grid indices). Samples outside the support
/// are identically zero, and all quadratures treat the envelope as jumping
/// to zero immediately outside the support, so a pulse that is cut off at a
/// grid point integrates without smearing across the cut.
struct TemporalMode {
    TimeGrid grid;
    std::vector<Complex> samples;
    std::size_t support_begin = 0;
    std::size_t support_end = 0;
};

/// Builds a mode, zeroing samples outside the declared support.
inline TemporalMode make_mode(const TimeGrid& grid, std::vector<Complex> samples,
                              std::size_t support_begin, std::size_t support_end) {
    if (samples.size() != grid.size())
        throw ValidationError("make_mode: sample count does not match grid");
    if (support_end >= grid.size() || support_begin > support_end)
        throw ValidationError("make_mode: support range out of bounds");
    for (std::size_t i = 0; i < support_begin; ++i) samples[i] = Complex{};
    for (std::size_t i = support_end + 1; i < samples.size(); ++i) samples[i] = Complex{};
    return TemporalMode{grid, std::move(samples), support_begin, support_end};
}

inline TemporalMode make_mode(const TimeGrid& grid, std::vector<Complex> samples) {
    return make_mode(grid, std::move(samples), 0, grid.size() - 1);
}

inline double mode_norm_squared(const TemporalMode& m) {
    return detail::trapezoid(m.grid, m.support_begin, m.support_end,
                             [&](std::size_t i) { return std::norm(m.samples[i]); });
}

inline double mode_norm(const TemporalMode& m) { return std::sqrt(mode_norm_squared(m)); }

inline TemporalMode normalized(TemporalMode m) {
    const double n = mode_norm(m);
    if (n < 1e-12)
        throw ValidationError("normalized: mode norm below 1e-12");
    for (auto& s : m.samples) s /= n;
    return m;
}

/// Overlap integral of conj(u) * v over the intersection of the supports.
/// Both modes must live on the same grid.
inline Complex mode_overlap(const TemporalMode& u, const TemporalMode& v) {
    if (!(u.grid == v.grid))
        throw ValidationError("mode_overlap: grid mismatch");
    const std::size_t a = std::max(u.support_begin, v.support_begin);
    const std::size_t b = std::min(u.support_end, v.support_end);
    if (b <= a) {
        // supports may still share a single point; the trapezoid of a point is zero
        return Complex{};
    }
    return detail::trapezoid_c(u.grid, a, b, [&](std::size_t i) {
        return std::conj(u.samples[i]) * v.samples[i];
    });
}

/// Unit-norm rising exponential exp(rate * (t - cutoff)) supported up to the
/// cutoff (snapped to the grid) and zero after it. The continuous-time
/// normalization of sqrt(2 rate) * exp(rate (t - cutoff)) is recovered in the
/// limit of fine sampling and long support.
inline TemporalMode make_rising_exponential(double rate, double cutoff, const TimeGrid& grid) {
    if (!(rate > 0.0))
        throw ValidationError("make_rising_exponential: rate must be positive");
    if (cutoff > grid.t_end + 0.5 * grid.dt)
        throw ValidationError("make_rising_exponential: cutoff beyond the grid end");
    // a cutoff before the grid start clamps to index 0 and falls into the
    // degenerate-support error below
    const std::size_t ic = grid.index_near(cutoff);
    if (ic < 1)
        throw NumericalError("make_rising_exponential: degenerate mode, support has fewer than 2 grid points");
    std::vector<Complex> s(grid.size(), Complex{});
    const double tc = grid.time(ic);
    for (std::size_t i = 0; i <= ic; ++i)
        s[i] = std::exp(rate * (grid.time(i) - tc));
    return normalized(make_mode(grid, std::move(s), 0, ic));
}

// ---------------------------------------------------------------------------
// Control schedule

/// Piecewise-constant coupling schedule: kappa on for t < write_end, off for
/// the hold of length storage_time, on again afterwards. read_end marks the
/// end of the retrieval window used for efficiency integrals; the coupling
/// stays on beyond it. Write- and read-stage couplings default to the value
/// in MemoryParams but can be overridden independently.
struct ControlSchedule {
    double write_end = 0.0;
    double storage_time = 0.0;
    double read_end = 0.0;
    std::optional<double> kappa_write{};
    std::optional<double> kappa_read{};
};

struct ScheduleIndices {
    std::size_t write_end = 0;
    std::size_t hold_end = 0;
    std::size_t read_end = 0;
};

/// Snaps the schedule boundaries to the grid and validates their ordering.
inline ScheduleIndices snap_to_grid(const ControlSchedule& sched, const TimeGrid& grid) {
    if (sched.storage_time < 0.0)
        throw ValidationError("ControlSchedule: storage time must be nonnegative");
    if (!(sched.read_end > sched.write_end + sched.storage_time))
        throw ValidationError("ControlSchedule: read_end must come after the hold");
    if (sched.write_end < grid.t_start - 0.5 * grid.dt ||
        sched.read_end > grid.t_end + 0.5 * grid.dt)
        throw ValidationError("ControlSchedule: schedule does not fit inside the grid");
    ScheduleIndices idx;
    idx.write_end = grid.index_near(sched.write_end);
    idx.hold_end = grid.index_near(sched.write_end + sched.storage_time);
    idx.read_end = grid.index_near(sched.read_end);
    if (idx.hold_end < idx.write_end || idx.read_end <= idx.hold_end)
        throw ValidationError("ControlSchedule: windows collapse after snapping to the grid");
    return idx;
}

} // namespace cavmem
