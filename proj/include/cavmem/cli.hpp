#pragma once

// Command-line front end. Subcommands: simulate, sweep-n, sweep-t0,
// optimize-mode, calibrate, reproduce-paper. Exit codes: 0 success,
// 1 validation error, 2 numerical failure, 3 reproduction FAIL.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cavmem/harness.hpp"

namespace cavmem {

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ValidationError("cannot open output file '" + path + "'");
    out << text;
}

inline std::string waveform_csv(const ScenarioReport& rep) {
    std::string out = "time_s,input_re,input_im,input_flux,output_flux\n";
    const TimeGrid& g = rep.input.grid;
    for (std::size_t i = 0; i < g.size(); ++i) {
        out += format_g9(g.time(i)) + ',' + format_g9(rep.input.samples[i].real()) + ',' +
               format_g9(rep.input.samples[i].imag()) + ',' +
               format_g9(std::norm(rep.input.samples[i])) + ',' +
               format_g9(std::norm(rep.field.output[i]));
        out += '\n';
    }
    return out;
}

inline std::string mode_csv(const TemporalMode& mode) {
    std::string out = "time_s,re,im\n";
    for (std::size_t i = 0; i < mode.grid.size(); ++i) {
        out += format_g9(mode.grid.time(i)) + ',' + format_g9(mode.samples[i].real()) + ',' +
               format_g9(mode.samples[i].imag());
        out += '\n';
    }
    return out;
}

} // namespace detail

/// Runs the CLI; argv[0] is the program name. Never throws.
inline int run_cli(const std::vector<std::string>& argv) {
    CLI::App app{"Cavity-enhanced EIT memory simulator"};
    app.require_subcommand(1);
    app.fallthrough(); // subcommands inherit this, so common flags may follow them

    std::string config_path, out_path, format = "csv", waveform_path;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    app.add_option("--config", config_path, "scenario configuration file")->required();
    app.add_option("--out", out_path, "output path ('-' for stdout)");
    app.add_option("--format", format, "csv|summary")->check(CLI::IsMember({"csv", "summary"}));
    app.add_option("--threads", threads, "worker threads for sweeps");

    auto* simulate = app.add_subcommand("simulate", "run a single operating point");
    simulate->add_option("--waveform", waveform_path, "also write the time-domain waveform CSV");
    auto* sweep_n = app.add_subcommand("sweep-n", "sweep the alphabet mean photon number");
    auto* sweep_t0 = app.add_subcommand("sweep-t0", "sweep the storage time");
    auto* optimize = app.add_subcommand("optimize-mode", "time-reversal input optimization");
    auto* calibrate = app.add_subcommand("calibrate", "fit kappa, gamma0 and excess noise");
    auto* reproduce = app.add_subcommand("reproduce-paper", "calibrate and check anchor values");

    std::vector<const char*> cargv;
    cargv.reserve(argv.size());
    for (const auto& a : argv) cargv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(cargv.size()), cargv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        const ScenarioConfig cfg = load_config(config_path);
        if (simulate->parsed()) {
            const ScenarioReport rep = run_scenario(cfg);
            if (!waveform_path.empty())
                detail::write_text(waveform_path, detail::waveform_csv(rep));
            detail::write_text(out_path, format == "summary" ? to_summary(rep)
                                                             : to_csv({rep.row}));
        } else if (sweep_n->parsed()) {
            const auto grid = sweep_grid_from_config(cfg, "mean_photon");
            detail::write_text(out_path, to_csv(sweep_mean_photon(cfg, grid, threads)));
        } else if (sweep_t0->parsed()) {
            const auto grid = sweep_grid_from_config(cfg, "storage_time");
            detail::write_text(out_path, to_csv(sweep_storage_time(cfg, grid, threads)));
        } else if (optimize->parsed()) {
            const ResolvedScenario scen = resolve_parameters(cfg);
            std::optional<OptimizationTrace> trace;
            ScenarioConfig opt_cfg = cfg;
            opt_cfg.input.kind = InputKind::Optimized;
            const TemporalMode mode = detail::build_input(opt_cfg, scen.params, &trace);
            std::string text;
            if (format == "summary") {
                std::ostringstream os;
                os << "optimization " << (trace->converged ? "converged" : "stagnated")
                   << " after " << trace->iterations.size() << " iterations\n";
                for (std::size_t i = 0; i < trace->iterations.size(); ++i)
                    os << "  iteration " << i << ": eta_sim "
                       << detail::format_g9(trace->iterations[i].efficiency) << '\n';
                text = os.str();
            } else {
                text = detail::mode_csv(mode);
            }
            detail::write_text(out_path, text);
            if (!trace->converged) {
                std::cerr << "optimize-mode: stagnated before reaching the overlap tolerance\n";
                return 2;
            }
        } else if (calibrate->parsed()) {
            if (!cfg.calibration)
                throw ValidationError("config.calibration: required by calibrate");
            const ResolvedScenario scen = resolve_parameters(cfg);
            std::ostringstream os;
            if (format == "csv") {
                os << "name,value\n";
                os << "kappa," << detail::format_g9(scen.params.kappa) << '\n';
                os << "gamma0," << detail::format_g9(scen.params.gamma0) << '\n';
                os << "gamma1," << detail::format_g9(scen.params.gamma1) << '\n';
                os << "gamma2," << detail::format_g9(scen.params.gamma2) << '\n';
                os << "excess_noise," << detail::format_g9(scen.params.excess_noise) << '\n';
                os << "lifetime_s," << detail::format_g9(lifetime_from_params(scen.params))
                   << '\n';
            } else {
                os << "calibration\n";
                os << "  kappa:        " << detail::format_g9(scen.params.kappa) << " 1/s\n";
                os << "  gamma0:       " << detail::format_g9(scen.params.gamma0) << " 1/s\n";
                os << "  gamma1:       " << detail::format_g9(scen.params.gamma1) << " 1/s\n";
                os << "  gamma2:       " << detail::format_g9(scen.params.gamma2) << " 1/s\n";
                os << "  excess_noise: " << detail::format_g9(scen.params.excess_noise) << '\n';
                os << "  lifetime:     " << detail::format_g9(lifetime_from_params(scen.params))
                   << " s\n";
            }
            detail::write_text(out_path, os.str());
        } else if (reproduce->parsed()) {
            const ReproductionSummary sum = reproduce_paper(cfg);
            detail::write_text(out_path, to_summary(sum));
            if (!sum.all_pass) return 3;
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

} // namespace cavmem
