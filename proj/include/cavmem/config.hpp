#pragma once

// Scenario configuration: a single JSON file describing the parameter set,
// grid, schedule, input mode and optional sweep/calibration blocks. Every
// dimensioned quantity is a string with an explicit unit suffix ("100 ns",
// "5e7 1/s") and is parsed strictly; the nanosecond/microsecond mix of this
// problem makes bare numbers too easy to get wrong by three orders of
// magnitude.

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cavmem/calibration.hpp"
#include "cavmem/errors.hpp"
#include "cavmem/model.hpp"

namespace cavmem {

namespace detail {

inline ValidationError config_error(const std::string& key, const std::string& what) {
    return ValidationError("config." + key + ": " + what);
}

inline double parse_number(const std::string& text, const std::string& key) {
    const char* begin = text.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) throw config_error(key, "expected a number, got '" + text + "'");
    while (*end != '\0' && std::isspace(static_cast<unsigned char>(*end))) ++end;
    if (*end != '\0') throw config_error(key, "trailing characters in number '" + text + "'");
    return v;
}

/// "<number> <unit>" with unit drawn from the given table.
inline double parse_with_unit(const std::string& text, const std::string& key,
                              std::initializer_list<std::pair<const char*, double>> units) {
    const auto split = text.find_last_of(" \t");
    if (split == std::string::npos)
        throw config_error(key, "expected '<number> <unit>', got '" + text + "'");
    const std::string number = text.substr(0, split);
    std::string unit = text.substr(split + 1);
    for (const auto& [name, scale] : units)
        if (unit == name) return parse_number(number, key) * scale;
    throw config_error(key, "unknown unit '" + unit + "'");
}

inline double parse_time(const std::string& text, const std::string& key) {
    return parse_with_unit(text, key,
                           {{"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}, {"ns", 1e-9}, {"ps", 1e-12}});
}

inline double parse_rate(const std::string& text, const std::string& key) {
    return parse_with_unit(text, key,
                           {{"1/s", 1.0}, {"1/ms", 1e3}, {"1/us", 1e6}, {"1/ns", 1e9}});
}

inline const nlohmann::json& require(const nlohmann::json& j, const std::string& key,
                                     const std::string& path) {
    if (!j.contains(key)) throw config_error(path + key, "missing");
    return j.at(key);
}

inline double get_time(const nlohmann::json& j, const std::string& key, const std::string& path) {
    const auto& v = require(j, key, path);
    if (!v.is_string()) throw config_error(path + key, "expected a time string with unit suffix");
    return parse_time(v.get<std::string>(), path + key);
}

inline double get_rate(const nlohmann::json& j, const std::string& key, const std::string& path) {
    const auto& v = require(j, key, path);
    if (!v.is_string()) throw config_error(path + key, "expected a rate string with unit suffix");
    return parse_rate(v.get<std::string>(), path + key);
}

inline double get_number(const nlohmann::json& j, const std::string& key,
                         const std::string& path) {
    const auto& v = require(j, key, path);
    if (!v.is_number()) throw config_error(path + key, "expected a plain number");
    return v.get<double>();
}

inline double get_number_or(const nlohmann::json& j, const std::string& key,
                            const std::string& path, double fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number()) throw config_error(path + key, "expected a plain number");
    return v.get<double>();
}

} // namespace detail

// ---------------------------------------------------------------------------

enum class InputKind { RisingExponential, Optimized };

struct InputSpec {
    InputKind kind = InputKind::RisingExponential;
    double rate = 0.0;                // rising_exponential
    std::optional<double> cutoff{};   // defaults to the write cutoff
    std::size_t max_iterations = 80;  // optimized
    double tolerance = 1e-10;
    std::optional<double> seed_rate{}; // exponential seed; flat-top if absent
};

struct SweepSpec {
    std::string variable; // "mean_photon" | "storage_time"
    double from = 0.0;
    double to = 0.0;
    std::size_t points = 0;
};

/// Anchor values a reproduction run is checked against, with tolerances.
struct ReproductionChecks {
    double internal_efficiency = 0.0;
    double internal_efficiency_tol = 0.0;
    double benchmark_fidelity = 0.0;
    double benchmark_fidelity_tol = 0.0;
    double fidelity_band_lo = 0.0;
    double fidelity_band_hi = 0.0;
    double exceedance_max_mean_photon = 0.0;
    double simulated_efficiency_tol = 0.0;
};

struct CalibrationSpec {
    MeasuredObservables observables;
    double gamma_total = 0.0;     // 1/s; sets the overall cavity rate scale
    double gamma1_fraction = 0.95;
    std::optional<ReproductionChecks> checks{};
};

struct ScenarioConfig {
    // exactly one parameter style
    std::optional<MemoryParams> params{};
    std::optional<CavityGeometry> geometry{};
    std::optional<CouplingSpec> coupling{};
    std::optional<double> direct_kappa{};
    std::optional<double> geometry_gamma0{};
    std::optional<double> geometry_excess_noise{};
    std::optional<CalibrationSpec> calibration{};

    TimeGrid grid;
    ControlSchedule schedule;
    InputSpec input;
    double mean_photon = 0.0;
    double external_transmission = 1.0; // detection chain; 1 when unspecified
    bool rescale_output = false;
    std::optional<SweepSpec> sweep{};
};

/// Memory parameters plus the detection transmission in force for fidelity
/// figures.
struct ResolvedScenario {
    MemoryParams params;
    double external_transmission = 1.0;
};

inline ResolvedScenario resolve_parameters(const ScenarioConfig& cfg) {
    const int styles = (cfg.params ? 1 : 0) + (cfg.geometry ? 1 : 0) + (cfg.calibration ? 1 : 0);
    if (styles != 1)
        throw ValidationError("config: exactly one of 'params', 'geometry' or 'calibration' "
                              "must be present");
    if (cfg.params)
        return ResolvedScenario{*cfg.params, cfg.external_transmission};
    if (cfg.geometry) {
        const CavityRates rates = derive_rates(*cfg.geometry);
        double kappa = 0.0;
        if (cfg.direct_kappa)
            kappa = *cfg.direct_kappa; // direct value wins over the coupling spec
        else if (cfg.coupling)
            kappa = derive_coupling(*cfg.coupling);
        else
            throw ValidationError("config.geometry: needs either 'kappa' or a 'coupling' block");
        const auto p = MemoryParams::from_rates(cfg.geometry_gamma0.value_or(0.0), rates.gamma1,
                                                rates.gamma2, kappa,
                                                cfg.geometry_excess_noise.value_or(0.0));
        return ResolvedScenario{p, cfg.external_transmission};
    }
    const CalibrationSpec& cal = *cfg.calibration;
    if (!(cal.gamma_total > 0.0))
        throw ValidationError("config.calibration.gamma_total: must be positive");
    if (!(cal.gamma1_fraction > 0.0) || cal.gamma1_fraction > 1.0)
        throw ValidationError("config.calibration.gamma1_fraction: must lie in (0, 1]");
    const double g1 = cal.gamma1_fraction * cal.gamma_total;
    const double g2 = cal.gamma_total - g1;
    const FittedParams fit = fit_from_observables(cal.observables, g1, g2);
    const auto p = MemoryParams::from_rates(fit.gamma0, g1, g2, fit.kappa, fit.excess_noise);
    return ResolvedScenario{p, cal.observables.external_transmission};
}

// ---------------------------------------------------------------------------
// JSON loading

inline ScenarioConfig parse_config(const nlohmann::json& j) {
    using namespace detail;
    ScenarioConfig cfg;

    const auto& jg = require(j, "grid", "");
    cfg.grid = TimeGrid(get_time(jg, "start", "grid."), get_time(jg, "end", "grid."),
                        get_time(jg, "step", "grid."));

    const auto& js = require(j, "schedule", "");
    cfg.schedule.write_end = get_time(js, "write_end", "schedule.");
    cfg.schedule.storage_time = get_time(js, "storage_time", "schedule.");
    cfg.schedule.read_end = get_time(js, "read_end", "schedule.");
    if (js.contains("kappa_write"))
        cfg.schedule.kappa_write = get_rate(js, "kappa_write", "schedule.");
    if (js.contains("kappa_read"))
        cfg.schedule.kappa_read = get_rate(js, "kappa_read", "schedule.");

    const auto& ji = require(j, "input", "");
    const std::string kind = require(ji, "type", "input.").get<std::string>();
    if (kind == "rising_exponential") {
        cfg.input.kind = InputKind::RisingExponential;
        cfg.input.rate = get_rate(ji, "rate", "input.");
        if (ji.contains("cutoff")) cfg.input.cutoff = get_time(ji, "cutoff", "input.");
    } else if (kind == "optimized") {
        cfg.input.kind = InputKind::Optimized;
        if (ji.contains("max_iterations"))
            cfg.input.max_iterations =
                static_cast<std::size_t>(get_number(ji, "max_iterations", "input."));
        if (ji.contains("tolerance")) cfg.input.tolerance = get_number(ji, "tolerance", "input.");
        if (ji.contains("seed_rate")) cfg.input.seed_rate = get_rate(ji, "seed_rate", "input.");
    } else {
        throw config_error("input.type", "expected 'rising_exponential' or 'optimized'");
    }

    if (j.contains("alphabet"))
        cfg.mean_photon = get_number(j.at("alphabet"), "mean_photon", "alphabet.");
    if (j.contains("fidelity")) {
        const auto& jf = j.at("fidelity");
        if (jf.contains("rescale_output")) {
            if (!jf.at("rescale_output").is_boolean())
                throw config_error("fidelity.rescale_output", "expected a boolean");
            cfg.rescale_output = jf.at("rescale_output").get<bool>();
        }
    }
    if (j.contains("external_transmission"))
        cfg.external_transmission = get_number(j, "external_transmission", "");

    if (j.contains("params")) {
        const auto& jp = j.at("params");
        cfg.params = MemoryParams::from_rates(
            get_rate(jp, "gamma0", "params."), get_rate(jp, "gamma1", "params."),
            get_rate(jp, "gamma2", "params."), get_rate(jp, "kappa", "params."),
            get_number_or(jp, "excess_noise", "params.", 0.0));
    }
    if (j.contains("geometry")) {
        const auto& jgeo = j.at("geometry");
        CavityGeometry geo;
        geo.mirror_transmission = get_number(jgeo, "mirror_transmission", "geometry.");
        geo.round_trip_loss = get_number(jgeo, "round_trip_loss", "geometry.");
        geo.round_trip_time = get_time(jgeo, "round_trip_time", "geometry.");
        cfg.geometry = geo;
        if (j.contains("coupling")) {
            const auto& jc = j.at("coupling");
            CouplingSpec spec;
            spec.atom_number = get_number(jc, "atom_number", "coupling.");
            spec.coupling_constant = get_rate(jc, "coupling_constant", "coupling.");
            spec.rabi_frequency = get_rate(jc, "rabi_frequency", "coupling.");
            spec.detuning = get_rate(jc, "detuning", "coupling.");
            cfg.coupling = spec;
        }
        if (j.contains("kappa")) cfg.direct_kappa = get_rate(j, "kappa", "");
        if (j.contains("gamma0")) cfg.geometry_gamma0 = get_rate(j, "gamma0", "");
        if (j.contains("excess_noise"))
            cfg.geometry_excess_noise = get_number(j, "excess_noise", "");
    }
    if (j.contains("calibration")) {
        const auto& jc = j.at("calibration");
        CalibrationSpec cal;
        cal.observables.efficiency_measured = get_number(jc, "efficiency_measured", "calibration.");
        cal.observables.reference_storage_time =
            get_time(jc, "reference_storage_time", "calibration.");
        cal.observables.external_transmission =
            get_number(jc, "external_transmission", "calibration.");
        cal.observables.lifetime = get_time(jc, "lifetime", "calibration.");
        cal.observables.fidelity_avg = get_number(jc, "fidelity_avg", "calibration.");
        cal.observables.fidelity_avg_sigma =
            get_number_or(jc, "fidelity_avg_sigma", "calibration.", 0.0);
        cal.observables.reference_mean_photon =
            get_number(jc, "reference_mean_photon", "calibration.");
        cal.gamma_total = get_rate(jc, "gamma_total", "calibration.");
        cal.gamma1_fraction = get_number_or(jc, "gamma1_fraction", "calibration.", 0.95);
        if (jc.contains("expected")) {
            const auto& je = jc.at("expected");
            ReproductionChecks chk;
            chk.internal_efficiency = get_number(je, "internal_efficiency", "calibration.expected.");
            chk.internal_efficiency_tol =
                get_number(je, "internal_efficiency_tol", "calibration.expected.");
            chk.benchmark_fidelity = get_number(je, "benchmark_fidelity", "calibration.expected.");
            chk.benchmark_fidelity_tol =
                get_number(je, "benchmark_fidelity_tol", "calibration.expected.");
            const auto& band = require(je, "fidelity_band", "calibration.expected.");
            if (!band.is_array() || band.size() != 2)
                throw config_error("calibration.expected.fidelity_band",
                                   "expected an array [lo, hi]");
            chk.fidelity_band_lo = band.at(0).get<double>();
            chk.fidelity_band_hi = band.at(1).get<double>();
            chk.exceedance_max_mean_photon =
                get_number(je, "exceedance_max_mean_photon", "calibration.expected.");
            chk.simulated_efficiency_tol =
                get_number(je, "simulated_efficiency_tol", "calibration.expected.");
            cal.checks = chk;
        }
        cfg.calibration = cal;
    }

    if (j.contains("sweep")) {
        const auto& jw = j.at("sweep");
        SweepSpec sweep;
        sweep.variable = require(jw, "variable", "sweep.").get<std::string>();
        if (sweep.variable == "mean_photon") {
            sweep.from = get_number(jw, "from", "sweep.");
            sweep.to = get_number(jw, "to", "sweep.");
        } else if (sweep.variable == "storage_time") {
            sweep.from = get_time(jw, "from", "sweep.");
            sweep.to = get_time(jw, "to", "sweep.");
        } else {
            throw config_error("sweep.variable", "expected 'mean_photon' or 'storage_time'");
        }
        sweep.points = static_cast<std::size_t>(get_number(jw, "points", "sweep."));
        if (sweep.points < 1) throw config_error("sweep.points", "must be at least 1");
        if (sweep.to < sweep.from) throw config_error("sweep", "range must be nondecreasing");
        cfg.sweep = sweep;
    }

    // surface parameter-style conflicts right away
    resolve_parameters(cfg);
    return cfg;
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config: JSON parse failure in '" + path + "': " + e.what());
    }
    return parse_config(j);
}

} // namespace cavmem
