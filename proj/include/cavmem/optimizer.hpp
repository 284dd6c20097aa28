#pragma once

// Input-mode optimization. Two routes: a one-parameter golden-section search
// over rising-exponential rates, and the full iterative fixed point that
// feeds the time-reversed, conjugated release back in as the next input.
// The second dominates the first; both measure the same simulated
// write-hold-read efficiency.

#include <cmath>
#include <cstddef>
#include <vector>

#include "cavmem/dynamics.hpp"
#include "cavmem/errors.hpp"
#include "cavmem/model.hpp"

namespace cavmem {

struct IterationRecord {
    double mode_norm = 0.0;
    double efficiency = 0.0;
};

struct OptimizationTrace {
    std::vector<IterationRecord> iterations;
    bool converged = false;
    TemporalMode final_mode;
};

struct RateSearchResult {
    double rate = 0.0;
    double efficiency = 0.0;
};

namespace detail {

inline Interval read_interval(const ControlSchedule& s) {
    return Interval{s.write_end + s.storage_time, s.read_end};
}

inline double total_efficiency_of(const MemoryParams& params, const ControlSchedule& schedule,
                                  const TemporalMode& input) {
    const auto run = propagate(params, schedule, input);
    return simulated_efficiency(run.field, input, read_interval(schedule));
}

} // namespace detail

/// Golden-section search for the rising-exponential rate maximizing the
/// simulated total efficiency. Assumes a single interior maximum on the
/// bracket; if the best value sits at a bracket end the efficiency was
/// monotone across the range and there is nothing to bracket.
inline RateSearchResult optimize_exponential_rate(const MemoryParams& params,
                                                  const ControlSchedule& schedule,
                                                  const TimeGrid& grid, double rate_lo,
                                                  double rate_hi) {
    if (!(rate_lo > 0.0) || !(rate_hi > rate_lo))
        throw ValidationError("optimize_exponential_rate: need 0 < rate_lo < rate_hi");
    auto eval = [&](double rate) {
        const TemporalMode mode = make_rising_exponential(rate, schedule.write_end, grid);
        return detail::total_efficiency_of(params, schedule, mode);
    };
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = rate_lo, b = rate_hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = eval(x1), f2 = eval(x2);
    const double f_lo = eval(a), f_hi = eval(b);
    if (std::max(f1, f2) <= std::max(f_lo, f_hi))
        throw NumericalError("optimize_exponential_rate: no bracket, efficiency is monotone "
                             "across the rate range");
    double best_rate = f1 > f2 ? x1 : x2;
    double best_eff = std::max(f1, f2);
    while (b - a > 1e-4 * 0.5 * (a + b)) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = eval(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = eval(x1);
        }
        if (f1 > best_eff) { best_eff = f1; best_rate = x1; }
        if (f2 > best_eff) { best_eff = f2; best_rate = x2; }
    }
    return RateSearchResult{best_rate, best_eff};
}

/// Fixed-point iteration: simulate write + read of the current input, take
/// the released mode, reverse and conjugate it onto the write window so the
/// pulse ends at the write cutoff, renormalize, repeat. Stops when two
/// successive modes overlap within 1 - tol. A run that exhausts max_iter
/// returns converged = false rather than throwing.
inline OptimizationTrace time_reversal_iterate(const MemoryParams& params,
                                               const ControlSchedule& schedule,
                                               const TemporalMode& seed, std::size_t max_iter,
                                               double tol) {
    if (max_iter < 1)
        throw ValidationError("time_reversal_iterate: max_iter must be at least 1");
    if (std::abs(mode_norm(seed) - 1.0) > 1e-6)
        throw ValidationError("time_reversal_iterate: seed must have unit norm");
    const TimeGrid& grid = seed.grid;
    const ScheduleIndices idx = snap_to_grid(schedule, grid);
    const Interval window = detail::read_interval(schedule);

    OptimizationTrace trace;
    TemporalMode current = seed;
    for (std::size_t it = 0; it < max_iter; ++it) {
        const auto run = propagate(params, schedule, current);
        const double eta = simulated_efficiency(run.field, current, window);
        trace.iterations.push_back(IterationRecord{mode_norm(current), eta});

        const TemporalMode released = retrieved_mode_shape(run.field, window);
        // reflect the release about the (write cutoff <-> read start) pair
        std::vector<Complex> next_samples(grid.size(), Complex{});
        const std::size_t span = released.support_end - released.support_begin;
        std::size_t sb = idx.write_end;
        for (std::size_t j = 0; j <= span && j <= idx.write_end; ++j) {
            next_samples[idx.write_end - j] = std::conj(released.samples[released.support_begin + j]);
            sb = idx.write_end - j;
        }
        TemporalMode next = normalized(make_mode(grid, std::move(next_samples), sb, idx.write_end));

        const double overlap = std::abs(mode_overlap(next, current));
        current = std::move(next);
        if (overlap >= 1.0 - tol) {
            trace.converged = true;
            break;
        }
    }
    trace.final_mode = std::move(current);
    return trace;
}

} // namespace cavmem
