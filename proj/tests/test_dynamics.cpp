#include <catch2/catch.hpp>

#include <cmath>
#include <random>

#include "cavmem/dynamics.hpp"
#include "oracles.hpp"

using namespace cavmem;

namespace {

TemporalMode zero_mode(const TimeGrid& grid) {
    return make_mode(grid, std::vector<Complex>(grid.size(), Complex{}));
}

} // namespace

TEST_CASE("zero input and zero initial state stay identically zero") {
    const TimeGrid grid(0.0, 5.0, 0.01);
    const auto params = MemoryParams::from_rates(0.1, 0.9, 0.1, 1.2);
    const auto run = propagate(params, ControlSchedule{1.0, 1.0, 5.0}, zero_mode(grid));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(run.trajectory.cavity[i] == Complex{});
        CHECK(run.trajectory.spin[i] == Complex{});
        CHECK(run.field.output[i] == Complex{});
    }
}

TEST_CASE("decoupled cavity decay") {
    const TimeGrid grid(0.0, 5.0, 0.005);
    const auto params = MemoryParams::from_rates(0.3, 0.8, 0.2, 0.0);
    const ControlSchedule sched{1.0, 1.0, 5.0};
    const auto run = propagate(params, sched, zero_mode(grid), InitialState{1.0, 0.0});
    for (std::size_t i = 0; i < grid.size(); i += 111) {
        const double expected = std::exp(-params.gamma * grid.time(i));
        CHECK(std::abs(run.trajectory.cavity[i] - expected) < 1e-6 * expected);
        CHECK(std::abs(run.trajectory.spin[i]) == 0.0);
    }
}

TEST_CASE("decoupled spin decay") {
    const TimeGrid grid(0.0, 5.0, 0.005);
    const auto params = MemoryParams::from_rates(0.4, 1.0, 0.0, 0.0);
    const ControlSchedule sched{1.0, 1.0, 5.0};
    const auto run = propagate(params, sched, zero_mode(grid), InitialState{0.0, 1.0});
    for (std::size_t i = 0; i < grid.size(); i += 111) {
        const double expected = std::exp(-params.gamma0 * grid.time(i));
        CHECK(std::abs(run.trajectory.spin[i] - expected) < 1e-6 * expected);
    }
}

TEST_CASE("excitation bookkeeping in the lossless case") {
    // gamma0 = 0, gamma2 = 0, kappa on, start in the cavity:
    // |a|^2 + |S|^2 + int 2 gamma1 |a|^2 dt stays 1
    const TimeGrid grid(0.0, 12.0, 0.005);
    const auto params = MemoryParams::from_rates(0.0, 1.0, 0.0, 1.3);
    const ControlSchedule sched{12.0 - 0.005, 0.0, 12.0};
    const auto run = propagate(params, sched, zero_mode(grid), InitialState{1.0, 0.0});
    double leaked = 0.0;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double f0 = std::norm(run.trajectory.cavity[i]);
        const double f1 = std::norm(run.trajectory.cavity[i + 1]);
        leaked += 2.0 * params.gamma1 * 0.5 * (f0 + f1) * grid.dt;
        const double total = std::norm(run.trajectory.cavity[i + 1]) +
                             std::norm(run.trajectory.spin[i + 1]) + leaked;
        CHECK(total == Approx(1.0).margin(1e-5));
    }
}

TEST_CASE("excitation bookkeeping holds pointwise") {
    // d/dt (|a|^2 + |S|^2) = -2 gamma |a|^2 - 2 gamma0 |S|^2 + 2 sqrt(2 g1) Re(u* a),
    // checked with a five-point derivative stencil inside the write window
    std::mt19937 rng(314);
    const auto scen = oracles::random_scenario(rng, 0.01);
    const auto input = oracles::random_exponential_input(rng, scen);
    const auto run = propagate(scen.params, scen.schedule, input);
    const auto& a = run.trajectory.cavity;
    const auto& s = run.trajectory.spin;
    const TimeGrid& g = scen.grid;
    const std::size_t iw = g.index_near(scen.schedule.write_end);
    auto energy = [&](std::size_t i) { return std::norm(a[i]) + std::norm(s[i]); };
    const double s2g1 = std::sqrt(2.0 * scen.params.gamma1);
    double worst = 0.0;
    for (std::size_t i = 2; i + 2 <= iw; ++i) {
        const double lhs = (-energy(i + 2) + 8.0 * energy(i + 1) - 8.0 * energy(i - 1) +
                            energy(i - 2)) / (12.0 * g.dt);
        const double rhs = -2.0 * scen.params.gamma * std::norm(a[i]) -
                           2.0 * scen.params.gamma0 * std::norm(s[i]) +
                           2.0 * s2g1 * (std::conj(input.samples[i]) * a[i]).real();
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    CHECK(worst < 1e-5 * scen.params.gamma);
}

TEST_CASE("propagation is linear in the input") {
    std::mt19937 rng(11);
    for (int k = 0; k < 5; ++k) {
        const auto scen = oracles::random_scenario(rng);
        const auto input = oracles::random_exponential_input(rng, scen);
        const Complex c{oracles::uniform(rng, -2.0, 2.0), oracles::uniform(rng, -2.0, 2.0)};
        auto scaled_samples = input.samples;
        for (auto& x : scaled_samples) x *= c;
        const auto scaled = make_mode(input.grid, std::move(scaled_samples),
                                      input.support_begin, input.support_end);
        const auto base = propagate(scen.params, scen.schedule, input);
        const auto big = propagate(scen.params, scen.schedule, scaled);
        double worst = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < scen.grid.size(); i += 37) {
            worst = std::max({worst,
                              std::abs(big.trajectory.cavity[i] - c * base.trajectory.cavity[i]),
                              std::abs(big.trajectory.spin[i] - c * base.trajectory.spin[i]),
                              std::abs(big.field.output[i] - c * base.field.output[i])});
            scale = std::max(scale, std::abs(base.field.output[i]));
        }
        CHECK(worst < 1e-10 * std::abs(c) * std::max(1.0, scale));
    }
}

TEST_CASE("stability guard rejects coarse grids") {
    const TimeGrid grid(0.0, 10.0, 0.5);
    const auto params = MemoryParams::from_rates(0.0, 1.0, 0.0, 0.0);
    CHECK_THROWS_AS(propagate(params, ControlSchedule{1.0, 1.0, 10.0}, zero_mode(grid)),
                    NumericalError);
}

TEST_CASE("simulated_efficiency rejects an empty input") {
    const TimeGrid grid(0.0, 5.0, 0.01);
    FieldRecord rec{grid, std::vector<Complex>(grid.size(), Complex{})};
    CHECK_THROWS_AS(simulated_efficiency(rec, zero_mode(grid), Interval{2.0, 5.0}),
                    ValidationError);
}

TEST_CASE("retrieved_mode_shape") {
    const TimeGrid grid(0.0, 10.0, 0.01);
    SECTION("a unit-norm pulse inside the window is returned unchanged") {
        std::vector<Complex> out(grid.size(), Complex{});
        const std::size_t a = grid.index_near(6.0), b = grid.index_near(9.0);
        for (std::size_t i = a; i <= b; ++i)
            out[i] = std::exp(-2.0 * (grid.time(i) - 6.0));
        FieldRecord rec{grid, out};
        auto normalized_input = normalized(make_mode(grid, out, a, b));
        rec.output = normalized_input.samples;
        const auto shape = retrieved_mode_shape(rec, Interval{6.0, 9.0});
        for (std::size_t i = a; i <= b; i += 13)
            CHECK(std::abs(shape.samples[i] - normalized_input.samples[i]) < 1e-12);
    }
    SECTION("scaling the record leaves the shape invariant") {
        std::vector<Complex> out(grid.size(), Complex{});
        const std::size_t a = grid.index_near(6.0), b = grid.index_near(9.0);
        for (std::size_t i = a; i <= b; ++i)
            out[i] = Complex{0.3, -0.2} * std::exp(-(grid.time(i) - 6.0));
        FieldRecord rec{grid, out};
        auto scaled = out;
        for (auto& x : scaled) x *= 3.0;
        FieldRecord rec3{grid, scaled};
        const auto s1 = retrieved_mode_shape(rec, Interval{6.0, 9.0});
        const auto s3 = retrieved_mode_shape(rec3, Interval{6.0, 9.0});
        for (std::size_t i = a; i <= b; i += 13)
            CHECK(std::abs(s1.samples[i] - s3.samples[i]) < 1e-12);
    }
    SECTION("empty output rejected") {
        FieldRecord rec{grid, std::vector<Complex>(grid.size(), Complex{})};
        CHECK_THROWS_AS(retrieved_mode_shape(rec, Interval{6.0, 9.0}), NumericalError);
    }
}

namespace {

struct AdjointFixture {
    oracles::RandomScenario scen;
    TemporalMode input;
    double eta = 0.0;
    TemporalMode released;
    TransferMap map;
};

AdjointFixture run_adjoint(std::mt19937& rng, double gamma0_override = -1.0,
                           double gamma2_override = -1.0, double kappa_override = -1.0) {
    AdjointFixture f{oracles::random_scenario(rng), TemporalMode{}, 0.0, TemporalMode{},
                     TransferMap{}};
    auto& p = f.scen.params;
    p = MemoryParams::from_rates(gamma0_override >= 0.0 ? gamma0_override : p.gamma0, p.gamma1,
                                 gamma2_override >= 0.0 ? gamma2_override : p.gamma2,
                                 kappa_override >= 0.0 ? kappa_override : p.kappa);
    f.input = oracles::random_exponential_input(rng, f.scen);
    const auto run = propagate(p, f.scen.schedule, f.input);
    const Interval window{f.scen.schedule.write_end + f.scen.schedule.storage_time,
                          f.scen.schedule.read_end};
    f.eta = simulated_efficiency(run.field, f.input, window);
    f.released = retrieved_mode_shape(run.field, window);
    f.map = adjoint_transfer(p, f.scen.schedule, f.released);
    return f;
}

} // namespace

TEST_CASE("transfer map is passive") {
    std::mt19937 rng(2718);
    SECTION("no loss channels: weight sits in input and initial conditions") {
        const auto f = run_adjoint(rng, 0.0, 0.0);
        CHECK(f.map.total_weight() == Approx(1.0).margin(1e-4));
        CHECK(f.map.weight_loss <= 1e-10);
        CHECK(f.map.weight_spin <= 1e-10);
    }
    SECTION("general lossy case: unit weight across all families") {
        for (int k = 0; k < 10; ++k) {
            const auto f = run_adjoint(rng);
            CHECK(f.map.total_weight() == Approx(1.0).margin(1e-4));
            CHECK(f.eta >= 0.0);
            CHECK(f.eta <= 1.0 + 1e-4);
            if (f.scen.params.gamma2 > 0.0) CHECK(f.map.weight_loss > 0.0);
            if (f.scen.params.gamma0 > 0.0) CHECK(f.map.weight_spin > 0.0);
        }
    }
    SECTION("kappa = 0 decouples the spin noise family") {
        const auto f = run_adjoint(rng, -1.0, -1.0, 0.0);
        CHECK(f.map.weight_spin <= 1e-10);
        CHECK(f.map.total_weight() == Approx(1.0).margin(1e-4));
    }
    SECTION("unequal write and read couplings stay passive") {
        auto scen = oracles::random_scenario(rng);
        scen.schedule.kappa_write = scen.params.kappa;
        scen.schedule.kappa_read = 0.6 * scen.params.kappa;
        const auto input = oracles::random_exponential_input(rng, scen);
        const auto run = propagate(scen.params, scen.schedule, input);
        const Interval window{scen.schedule.write_end + scen.schedule.storage_time,
                              scen.schedule.read_end};
        const auto released = retrieved_mode_shape(run.field, window);
        const auto map = adjoint_transfer(scen.params, scen.schedule, released);
        CHECK(map.total_weight() == Approx(1.0).margin(1e-4));
    }
}

TEST_CASE("forward check: input-channel coefficient against the input mode") {
    std::mt19937 rng(425);
    for (int k = 0; k < 5; ++k) {
        const auto f = run_adjoint(rng);
        // project the external-input coefficient density on the actual input
        const auto& grid = f.scen.grid;
        const Complex proj = detail::trapezoid_c(
            grid, f.input.support_begin, f.input.support_end,
            [&](std::size_t i) { return f.map.external_input[i] * f.input.samples[i]; });
        CHECK(std::abs(proj) == Approx(std::sqrt(f.eta)).margin(1e-4));
    }
}

TEST_CASE("retrieved variance") {
    std::mt19937 rng(867);
    SECTION("epsilon = 0 pins the variance to the vacuum level") {
        for (int k = 0; k < 5; ++k) {
            const auto f = run_adjoint(rng);
            const auto v = retrieved_variance(f.map, 0.0);
            CHECK(v.vx == Approx(0.5).margin(1e-4));
            CHECK(v.vy == v.vx);
        }
    }
    SECTION("excess noise enters through the spin-noise weight") {
        const auto f = run_adjoint(rng);
        const double eps = 0.02;
        const auto v = retrieved_variance(f.map, eps);
        CHECK(v.vx == Approx(0.5 * f.map.total_weight() + eps * f.map.weight_spin).margin(1e-12));
        // independent covariance-evolution oracle on the same grid
        const double oracle = oracles::covariance_variance(f.scen.params, f.scen.schedule,
                                                           f.released, eps);
        CHECK(v.vx == Approx(oracle).margin(1e-3));
    }
    SECTION("dropped channels are detected as nonphysical") {
        auto f = run_adjoint(rng);
        const double scale = 0.9 / f.map.total_weight(); // discard a tenth of the enumeration
        f.map.weight_external *= scale;
        f.map.weight_loss *= scale;
        f.map.weight_spin *= scale;
        f.map.weight_initial *= scale;
        CHECK_THROWS_AS(retrieved_variance(f.map, 0.0), NumericalError);
        CHECK_THROWS_AS(retrieved_variance(f.map, -0.1), ValidationError);
    }
}

TEST_CASE("covariance oracle agrees for several random draws") {
    std::mt19937 rng(5150);
    for (int k = 0; k < 4; ++k) {
        const auto f = run_adjoint(rng);
        const double eps = oracles::uniform(rng, 0.0, 0.1);
        const auto v = retrieved_variance(f.map, eps);
        const double oracle = oracles::covariance_variance(f.scen.params, f.scen.schedule,
                                                           f.released, eps);
        CHECK(v.vx == Approx(oracle).margin(1e-3));
    }
}

TEST_CASE("efficiency converges under grid refinement") {
    // mid-scale version of the operating-point convergence check
    const auto params = MemoryParams::from_rates(0.01, 0.95, 0.05, 1.4);
    auto eta_at = [&](double dt) {
        const TimeGrid grid(-20.0, 21.0, dt);
        const ControlSchedule sched{0.0, 1.0, 21.0};
        const auto input = make_rising_exponential(0.8, 0.0, grid);
        const auto run = propagate(params, sched, input);
        return simulated_efficiency(run.field, input, Interval{1.0, 21.0});
    };
    CHECK(std::abs(eta_at(0.01) - eta_at(0.005)) < 1e-5);
}
