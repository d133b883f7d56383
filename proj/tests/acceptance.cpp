// Acceptance suite: one pass/fail line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <wavehurst/wavehurst.hpp>

#include "mc_support.hpp"

using namespace wavehurst;
using wavehurst::testing::RunningStats;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

int worker_count() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

// 1. Empirical covariance of generated paths on a 5-point subgrid.
Outcome generator_fidelity() {
    const int N = 10;
    const std::size_t n = std::size_t{1} << N;
    const std::size_t idx[] = {n / 8, n / 4, n / 2, 3 * n / 4, n};
    const int paths = 10000;
    double worst = 0.0;
    for (double H : {0.55, 0.7, 0.85}) {
        const FbmGenerator gen(H, N, Normalization::PaperKappa);
        std::vector<RunningStats> prod(25);
        for (int r = 0; r < paths; ++r) {
            const auto p = gen.generate(1.0, derive_seed(101, {key_of(H), static_cast<std::uint64_t>(r)}));
            for (int a = 0; a < 5; ++a)
                for (int b = a; b < 5; ++b) prod[a * 5 + b].add(p.samples[idx[a]] * p.samples[idx[b]]);
        }
        for (int a = 0; a < 5; ++a)
            for (int b = a; b < 5; ++b) {
                const double s = static_cast<double>(idx[a]) / n, t = static_cast<double>(idx[b]) / n;
                const double z = std::abs(prod[a * 5 + b].mean() - fbm_covariance(s, t, {H, 1.0}, Normalization::PaperKappa)) /
                                 prod[a * 5 + b].standard_error();
                worst = std::max(worst, z);
            }
    }
    return {worst <= 4.0, fmt("max |empirical - exact| / SE = %.2f over 45 entries (limit 4)", worst)};
}

// 2 and 3 share one noiseless Monte Carlo run.
struct EnergyRun {
    std::vector<RunningStats> q;  // levels 3..8
    double c_psi = 0.0;
};

const EnergyRun& energy_run() {
    static const EnergyRun run = [] {
        const int N = 16;
        const CoefficientPlan plan(N);
        const WaveletCovariance cov(plan.basis());
        const FbmGenerator gen(0.7, N, Normalization::PaperKappa);
        EnergyRun out;
        out.q.resize(static_cast<std::size_t>(plan.max_level() - plan.min_level() + 1));
        out.c_psi = cov.c_psi(0.7);
        for (int r = 0; r < 10000; ++r) {
            const auto p = energy_profile(observe(gen.generate(1.0, derive_seed(202, {static_cast<std::uint64_t>(r)})), {}), plan);
            for (std::size_t i = 0; i < out.q.size(); ++i) out.q[i].add(p.qhat[i]);
        }
        return out;
    }();
    return run;
}

Outcome coefficient_variance_law() {
    const auto& run = energy_run();
    double worst = 0.0;
    std::string parts;
    for (int j = 4; j <= 6; ++j) {
        const double expected = population_energy({0.7, 1.0}, j, run.c_psi);
        const double rel = run.q[j - 3].mean() / expected - 1.0;
        worst = std::max(worst, std::abs(rel));
        parts += fmt(" j=%d:%+.4f", j, rel);
    }
    return {worst <= 0.05, "relative error of mean Q_j vs 2^(-2jH)(sigma^2/2)c(psi)kappa(H):" + parts + " (limit 0.05)"};
}

Outcome energy_ratio() {
    const auto& run = energy_run();
    double worst = 0.0;
    std::string parts;
    for (int j = 4; j <= 5; ++j) {
        const double rel = run.q[j - 2].mean() / run.q[j - 3].mean() / std::pow(2.0, -1.4) - 1.0;
        worst = std::max(worst, std::abs(rel));
        parts += fmt(" j=%d:%+.4f", j, rel);
    }
    return {worst <= 0.05, "relative error of mean Q_{j+1}/mean Q_j vs 2^(-2H):" + parts + " (limit 0.05)"};
}

// 4. Paired noisy and noiseless observations of the same paths at j_n(H).
Outcome bias_correction() {
    const int N = 18;
    const double H = 0.7, c = 0.05;
    const int j = theory_level(H, N);
    const CoefficientPlan plan(N);
    const FbmGenerator gen(H, N, Normalization::PaperKappa);
    RunningStats corrected, uncorrected, clean;
    for (int r = 0; r < 10000; ++r) {
        const auto seed = derive_seed(404, {static_cast<std::uint64_t>(r)});
        const auto path = gen.generate(1.0, derive_seed(seed, {static_cast<std::uint64_t>(Stream::Path)}));
        const auto noisy = coefficient_estimates(
            observe(path, {ConstantAmplitude{c}, GaussianNoise{}, derive_seed(seed, {static_cast<std::uint64_t>(Stream::Noise)})}), plan, j);
        const auto quiet = dtilde(observe(path, {}), plan, j);
        double sc = 0.0, su = 0.0, sq = 0.0;
        for (std::size_t k = 0; k < quiet.size(); ++k) {
            sc += noisy.dhat2[k];
            su += noisy.dtilde[k] * noisy.dtilde[k];
            sq += quiet[k] * quiet[k];
        }
        corrected.add(sc);
        uncorrected.add(su);
        clean.add(sq);
    }
    const double ref = clean.mean();
    const double miss_corrected = std::abs(corrected.mean() - ref) / ref;
    const double miss_uncorrected = std::abs(uncorrected.mean() - ref) / ref;
    const bool pass = miss_corrected <= 0.10 && miss_uncorrected >= 3.0 * miss_corrected;
    return {pass, fmt("j=%d: corrected miss %.5f (limit 0.10), uncorrected miss %.5f, ratio %.2f (limit >= 3)", j,
                      miss_corrected, miss_uncorrected, miss_uncorrected / miss_corrected)};
}

// 5. Rate slope of log2 RMSE against log2 n.
Outcome rate_reproduction() {
    ExperimentConfig cfg;
    cfg.h_values = {0.6, 0.75};
    cfg.grid_exponents = {14, 16, 18, 20};
    cfg.noise_levels = {parse_noise_level("const:0.03|gauss")};
    cfg.replicates = 500;
    cfg.base_seed = 505;
    cfg.threads = worker_count();
    const auto rows = run_experiment(cfg);
    bool pass = true;
    std::string detail;
    for (double H : cfg.h_values) {
        const auto fit = rate_fit(rows, H);
        const bool ok = std::abs(fit.slope - fit.theory_slope) <= 0.15 && fit.r_squared >= 0.9;
        pass = pass && ok;
        std::string rmse;
        for (const auto& p : fit.points) rmse += fmt(" %.4f", std::exp2(p.log2_rmse));
        detail += fmt("H=%.2f slope %.4f (theory %.4f, tol 0.15) r2 %.3f (limit 0.9) RMSE:", H, fit.slope,
                      fit.theory_slope, fit.r_squared) +
                  rmse + "; ";
    }
    return {pass, detail};
}

// 6 and 7 share one experiment at N = 18, H = 0.7.
const std::vector<CellSummary>& selector_cells(std::vector<ReportRow>* rows_out = nullptr) {
    static std::vector<ReportRow> rows;
    static const std::vector<CellSummary> cells = [] {
        ExperimentConfig cfg;
        cfg.h_values = {0.7};
        cfg.grid_exponents = {18};
        cfg.noise_levels = {parse_noise_level("const:0|gauss"), parse_noise_level("const:0.03|gauss"),
                            parse_noise_level("const:0.05|gauss")};
        cfg.replicates = 500;
        cfg.base_seed = 606;
        cfg.threads = worker_count();
        rows = run_experiment(cfg);
        return summarize(rows);
    }();
    if (rows_out) *rows_out = rows;
    return cells;
}

const CellSummary& cell_for(const std::string& noise) {
    const auto key = parse_noise_level(noise).descriptor();
    for (const auto& c : selector_cells())
        if (c.noise == key) return c;
    throw std::logic_error("missing cell " + noise);
}

Outcome noise_hurts() {
    const auto& quiet = cell_for("const:0|gauss");
    const auto& noisy = cell_for("const:0.05|gauss");
    const double ratio = noisy.rmse / quiet.rmse;
    return {ratio >= 2.0, fmt("RMSE c=0.05 %.4f vs c=0 %.4f, ratio %.3f (limit >= 2); median abs error %.4f vs %.4f",
                              noisy.rmse, quiet.rmse, ratio, noisy.median_abs_error, quiet.median_abs_error)};
}

Outcome level_selector() {
    std::vector<ReportRow> rows;
    selector_cells(&rows);
    const int floor_level = theory_level(0.7, 18) - 2;
    std::size_t total = 0, hit = 0;
    for (const auto& r : rows) {
        if (r.noise != parse_noise_level("const:0.03|gauss").descriptor()) continue;
        ++total;
        hit += r.j_star >= floor_level;
    }
    const double share = static_cast<double>(hit) / static_cast<double>(total);
    return {share >= 0.9, fmt("J* >= %d in %.3f of %zu replicates (limit 0.9); mean J* %.2f", floor_level, share, total,
                              cell_for("const:0.03|gauss").mean_j_star)};
}

// 8. Sigma from oracle H and from the plug-in estimate, on the same paths.
Outcome sigma_sanity() {
    const int N = 16;
    const double H = 0.7, sigma = 2.0;
    const CoefficientPlan plan(N);
    const WaveletCovariance cov(plan.basis());
    const FbmGenerator gen(H, N, Normalization::PaperKappa);
    RunningStats oracle;
    std::vector<double> oracle_err, plugin_err;
    for (int r = 0; r < 10000; ++r) {
        const auto p = estimate(observe(gen.generate(sigma, derive_seed(808, {static_cast<std::uint64_t>(r)})), {}), plan, cov);
        const double s_oracle = estimate_sigma(p, cov, H);
        oracle.add(s_oracle);
        oracle_err.push_back(std::abs(s_oracle - sigma) / sigma);
        plugin_err.push_back(p.sigma_hat ? std::abs(*p.sigma_hat - sigma) / sigma : INFINITY);
    }
    const double mean_rel = std::abs(oracle.mean() - sigma) / sigma;
    const double mo = median_of(oracle_err), mp = median_of(plugin_err);
    const bool pass = mean_rel <= 0.05 && mp <= 3.0 * mo;
    return {pass, fmt("oracle mean sigma %.4f (rel %.4f, limit 0.05); median rel error plug-in %.4f vs oracle %.4f, "
                      "ratio %.2f (limit 3)",
                      oracle.mean(), mean_rel, mp, mo, mp / mo)};
}

// 9. Invariants.
Outcome invariant_suite() {
    std::vector<std::string> failures;
    std::string detail;

    // Scale invariance of H at a fixed level, exact for a power-of-two factor.
    {
        const CoefficientPlan plan(14);
        const auto path = generate_path({0.7, 1.0}, 14, 909);
        auto s = observe(path, {ConstantAmplitude{0.03}, GaussianNoise{}, 910});
        auto scaled = s;
        for (auto& v : scaled.y) v *= 4.0;
        const auto a = energy_profile(s, plan), b = energy_profile(scaled, plan);
        bool same = true;
        for (int j = plan.min_level(); j < plan.max_level(); ++j)
            same = same && hurst_at_level(a, j).value == hurst_at_level(b, j).value;
        if (!same) failures.push_back("scale invariance");
    }
    // Vanishing moments of psi.
    {
        const auto basis = build_basis(16);
        double m0 = 0.0, m1 = 0.0;
        const double h = basis.step();
        for (std::size_t i = 0; i < basis.psi_table.size(); ++i) {
            const double w = (i == 0 || i + 1 == basis.psi_table.size()) ? 0.5 * h : h;
            m0 += w * basis.psi_table[i];
            m1 += w * static_cast<double>(i) * h * basis.psi_table[i];
        }
        detail += fmt("moments %.1e %.1e; ", m0, m1);
        if (std::abs(m0) > 1e-8 || std::abs(m1) > 1e-8) failures.push_back("vanishing moments");
    }
    // Cell integrals sum to zero at every level.
    {
        const CoefficientPlan plan(18);
        double worst = 0.0;
        for (int j = plan.min_level(); j <= plan.max_level(); ++j) {
            double sum = 0.0;
            for (double v : plan.weights(j).values) sum += v;
            worst = std::max(worst, std::abs(sum));
        }
        detail += fmt("max cell sum %.1e; ", worst);
        if (worst > 1e-8) failures.push_back("cell-integral zero sum");
    }
    // Serial and parallel sweeps write identical rows.
    {
        ExperimentConfig cfg;
        cfg.h_values = {0.6, 0.8};
        cfg.grid_exponents = {10, 12};
        cfg.noise_levels = {parse_noise_level("const:0.03|gauss"), parse_noise_level("tanh:0.05,0.5|t:6")};
        cfg.replicates = 10;
        cfg.base_seed = 911;
        std::ostringstream serial, parallel;
        write_rows_csv(serial, run_experiment(cfg));
        cfg.threads = 4;
        write_rows_csv(parallel, run_experiment(cfg));
        if (serial.str() != parallel.str()) failures.push_back("serial/parallel rows");
    }
    // Coefficient covariance bounded by C (1 + |k - k'|)^(2H - 4) for |k - k'| <= 20.
    {
        const auto basis = build_basis(14);
        const WaveletCovariance cov(basis);
        for (double H : {0.6, 0.75, 0.9}) {
            const double decay = 2.0 * (H - 2.0);
            double c_fit = 0.0;
            for (long m = 0; m <= 20; ++m)
                c_fit = std::max(c_fit, std::abs(cov.unit_covariance(m, H)) / std::pow(1.0 + m, decay));
            const double slope = std::log2(std::abs(cov.unit_covariance(20, H) / cov.unit_covariance(10, H)));
            detail += fmt("H=%.2f C/c(psi) %.2f tail slope %.3f; ", H, c_fit / cov.c_psi(H), slope);
            if (c_fit > 10.0 * cov.c_psi(H) || std::abs(slope - decay) > 0.25) failures.push_back("covariance decay");
        }
    }
    std::string failed;
    for (const auto& f : failures) failed += " " + f;
    return {failures.empty(), detail + (failures.empty() ? "all invariants hold" : "failed:" + failed)};
}

}  // namespace

// Optional arguments select criteria by number (all run by default);
// `--report path` also writes the result lines to a file.
int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "generator fidelity", generator_fidelity},
        {2, "coefficient variance law", coefficient_variance_law},
        {3, "energy ratio", energy_ratio},
        {4, "bias-correction efficacy", bias_correction},
        {5, "rate reproduction", rate_reproduction},
        {6, "noise hurts", noise_hurts},
        {7, "level selector behavior", level_selector},
        {8, "sigma estimation sanity", sigma_sanity},
        {9, "invariant suite", invariant_suite},
    };
    std::vector<int> wanted;
    std::string report_path;
    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "--report" && i + 1 < argc)
            report_path = argv[++i];
        else
            wanted.push_back(std::atoi(argv[i]));
    }
    std::string report;
    int failed = 0, ran = 0;
    for (const auto& c : criteria) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
        ++ran;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !out.pass;
        const auto line = fmt("[%s] criterion %d (%s): ", out.pass ? "PASS" : "FAIL", c.id, c.name) + out.detail +
                          fmt(" [%.1f s]\n", secs);
        std::fputs(line.c_str(), stdout);
        std::fflush(stdout);
        report += line;
    }
    report += fmt("%d of %d criteria passed\n", ran - failed, ran);
    std::printf("%d of %d criteria passed\n", ran - failed, ran);
    if (!report_path.empty()) std::ofstream(report_path) << report;
    return failed == 0 ? 0 : 1;
}
