// Command-line front end: simulate, observe, estimate, experiment, rate-fit.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include <wavehurst/wavehurst.hpp>

namespace {

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

using namespace wavehurst;

void write_output(const std::string& path, const std::function<void(std::ostream&)>& body) {
    if (path.empty() || path == "-") {
        body(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write '" + path + "'");
    body(out);
}

struct SimulateArgs {
    double hurst = 0.7;
    double sigma = 1.0;
    int grid_exponent = 10;
    std::uint64_t seed = 0;
    std::string normalization = "paper";
    std::string out;
};

struct ObserveArgs {
    std::string in, noise = "const:0", dist = "gauss", out;
    std::uint64_t seed = 0;
};

struct EstimateArgs {
    std::string in, out, normalization = "paper";
    double h_min = 0.01, h_max = 0.99;
    bool json = false, diagnostics = false, trim = false;
};

struct ExperimentArgs {
    std::string config;
    bool force = false;
    int threads = 0;
    bool quiet = false;
};

struct RateFitArgs {
    std::string in;
    double hurst = 0.0;
    std::optional<double> sigma;
    std::optional<std::string> noise;
    bool include_clamped = false;
};

struct PsiArgs {
    int depth = 14;
    std::string out;
};

int run_simulate(const SimulateArgs& a) {
    const auto path = generate_path({a.hurst, a.sigma}, a.grid_exponent, a.seed, parse_normalization(a.normalization));
    write_output(a.out, [&](std::ostream& o) { csv::write_grid_series(o, "x", path.samples); });
    return kOk;
}

int run_observe(const ObserveArgs& a) {
    std::ifstream in(a.in);
    if (!in) throw FormatError("cannot open '" + a.in + "'");
    const auto x = csv::read_value_column(in, "x");
    const NoiseSpec spec{parse_amplitude(a.noise), parse_distribution(a.dist), a.seed};
    const auto series = observe(x, spec, "file:" + a.in);
    write_output(a.out, [&](std::ostream& o) { write_series_csv(o, series); });
    return kOk;
}

int run_estimate(const EstimateArgs& a) {
    auto res = ingest(a.in, {a.trim});
    if (res.warning) std::cerr << "warning: " << *res.warning << '\n';
    EstimatorOptions opts{a.h_min, a.h_max, parse_normalization(a.normalization)};
    opts.validate();
    const CoefficientPlan plan(res.series.grid_exponent);
    const WaveletCovariance cov(plan.basis());
    const auto profile = estimate(res.series, plan, cov, opts);
    write_output(a.out, [&](std::ostream& o) {
        if (a.json)
            o << to_json(profile, a.diagnostics).dump(2) << '\n';
        else
            write_profile_csv(o, profile);
    });
    return kOk;
}

int run_experiment_cmd(const ExperimentArgs& a) {
    auto cfg = read_config(a.config);
    if (a.threads > 0) cfg.threads = a.threads;
    std::function<void(std::size_t, std::size_t)> progress;
    if (!a.quiet)
        progress = [](std::size_t done, std::size_t total) {
            if (done % 100 == 0 || done == total) std::cerr << "\r" << done << "/" << total << std::flush;
        };
    const bool ran = run_experiment_to_files(cfg, a.force, progress);
    if (!a.quiet) std::cerr << '\n';
    if (!ran)
        std::cerr << cfg.rows_path << " exists; nothing to do (use --force to rerun)\n";
    else
        std::cout << "wrote " << cfg.rows_path << " and " << cfg.summary_path << '\n';
    return kOk;
}

int run_rate_fit(const RateFitArgs& a) {
    const auto rows = read_rows_csv(a.in);
    const auto fit = rate_fit(rows, a.hurst, {a.sigma, a.noise, a.include_clamped});
    std::cout << to_json(fit).dump(2) << '\n';
    return kOk;
}

int run_psi(const PsiArgs& a) {
    const auto basis = build_basis(a.depth);
    write_output(a.out, [&](std::ostream& o) { write_psi_csv(o, basis); });
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wavelet estimation of the Hurst index from noisy fBm samples"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Sample sigma W^H on the grid i/2^N");
    s->add_option("--H", sim.hurst, "Hurst index in (0,1)")->required();
    s->add_option("--sigma", sim.sigma, "Scale > 0")->required();
    s->add_option("--N", sim.grid_exponent, "Even grid exponent, n = 2^N")->required();
    s->add_option("--seed", sim.seed, "Random seed")->required();
    s->add_option("--normalization", sim.normalization, "paper | standard")
        ->check(CLI::IsMember({"paper", "standard"}));
    s->add_option("--out", sim.out, "Output CSV (t,x); stdout if omitted");

    ObserveArgs obs;
    auto* o = app.add_subcommand("observe", "Add measurement noise to a path");
    o->add_option("--in", obs.in, "Path CSV (t,x)")->required();
    o->add_option("--noise", obs.noise, "const:c | tanh:alpha,beta")->required();
    o->add_option("--dist", obs.dist, "gauss | t:nu");
    o->add_option("--seed", obs.seed, "Random seed")->required();
    o->add_option("--out", obs.out, "Output CSV (t,y); stdout if omitted");

    EstimateArgs est;
    auto* e = app.add_subcommand("estimate", "Estimate H and sigma from a series");
    e->add_option("--in", est.in, "Series CSV (t,y or y)")->required();
    e->add_option("--hmin", est.h_min, "Lower clamp for H");
    e->add_option("--hmax", est.h_max, "Upper clamp for H");
    e->add_option("--normalization", est.normalization, "paper | standard")
        ->check(CLI::IsMember({"paper", "standard"}));
    e->add_flag("--json", est.json, "JSON report instead of CSV");
    e->add_flag("--diagnostics", est.diagnostics, "Per-level breakdown in the JSON report");
    e->add_flag("--trim", est.trim, "Keep the largest valid prefix of a series of bad length");
    e->add_option("--out", est.out, "Output file; stdout if omitted");

    ExperimentArgs exp;
    auto* x = app.add_subcommand("experiment", "Run a Monte Carlo sweep from a key = value config");
    x->add_option("--config", exp.config, "Config file")->required();
    x->add_flag("--force", exp.force, "Rerun even if the rows file exists");
    x->add_option("--threads", exp.threads, "Worker threads (overrides the config)");
    x->add_flag("--quiet", exp.quiet, "No progress output");

    RateFitArgs rf;
    auto* r = app.add_subcommand("rate-fit", "Fit log2 RMSE against log2 n");
    r->add_option("--in", rf.in, "Rows CSV from experiment")->required();
    r->add_option("--H", rf.hurst, "Hurst value to fit")->required();
    r->add_option("--sigma", rf.sigma, "Select one sigma");
    r->add_option("--noise", rf.noise, "Select one noise descriptor");
    r->add_flag("--include-clamped", rf.include_clamped, "Use clamped rows in the RMSE");

    PsiArgs psi;
    auto* p = app.add_subcommand("psi", "Dump the tabulated wavelet (t,psi)");
    p->add_option("--depth", psi.depth, "Cascade depth R >= 10");
    p->add_option("--out", psi.out, "Output CSV; stdout if omitted");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*s) return run_simulate(sim);
        if (*o) return run_observe(obs);
        if (*e) return run_estimate(est);
        if (*x) return run_experiment_cmd(exp);
        if (*r) return run_rate_fit(rf);
        if (*p) return run_psi(psi);
    } catch (const DomainError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kUsage;
    } catch (const NumericalError& err) {
        std::cerr << "numerical failure: " << err.what() << '\n';
        return kNumerical;
    } catch (const FormatError& err) {
        std::cerr << "data error: " << err.what() << '\n';
        return kData;
    } catch (const SizeError& err) {
        std::cerr << "data error: " << err.what() << '\n';
        return kData;
    }
    return kUsage;
}
