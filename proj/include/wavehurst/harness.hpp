#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "csv.hpp"
#include "error.hpp"
#include "estimator.hpp"
#include "fbm.hpp"
#include "noise.hpp"
#include "rng.hpp"

namespace wavehurst {

class InsufficientDataError : public FormatError {
public:
    using FormatError::FormatError;
};

/// Loads an externally recorded series; noise is marked unknown.
inline SeriesReadResult ingest(const std::string& path, const SeriesReadOptions& options = {}) {
    auto res = read_series(path, options);
    res.series.source = "external:" + path;
    res.series.noise.reset();
    return res;
}

/// Amplitude and distribution of one noise setting in a sweep (the seed is
/// derived per replicate).
struct NoiseLevel {
    Amplitude amplitude = ConstantAmplitude{};
    NoiseDistribution distribution = GaussianNoise{};

    /// Comma-free descriptor, e.g. `const:0.03|gauss`, `tanh:0.1;0.5|t:6`.
    std::string descriptor() const {
        auto amp = describe(amplitude);
        std::replace(amp.begin(), amp.end(), ',', ';');
        return amp + "|" + describe(distribution);
    }
};

inline NoiseLevel parse_noise_level(std::string_view s) {
    auto bar = s.find('|');
    std::string amp(s.substr(0, bar));
    std::replace(amp.begin(), amp.end(), ';', ',');
    NoiseLevel level{parse_amplitude(amp),
                     bar == std::string_view::npos ? NoiseDistribution{GaussianNoise{}} : parse_distribution(s.substr(bar + 1))};
    NoiseSpec{level.amplitude, level.distribution, 0}.validate();
    return level;
}

struct ExperimentConfig {
    std::vector<double> h_values;
    std::vector<double> sigma_values{1.0};
    std::vector<int> grid_exponents;
    std::vector<NoiseLevel> noise_levels{NoiseLevel{}};
    int replicates = 1;
    std::uint64_t base_seed = 0;
    Normalization normalization = Normalization::PaperKappa;
    EstimatorOptions estimator;
    int threads = 1;
    bool record_wall_time = false;
    bool include_clamped = false;
    std::string rows_path = "rows.csv";
    std::string summary_path = "summary.json";

    void validate() const {
        if (h_values.empty() || sigma_values.empty() || grid_exponents.empty() || noise_levels.empty())
            throw DomainError("experiment lists must be nonempty");
        for (double h : h_values) HurstParams{h, 1.0}.validate();
        for (double s : sigma_values) HurstParams{0.5, s}.validate();
        for (int N : grid_exponents) {
            validate_grid_exponent(N);
            if (N < 8) throw SizeError("experiments need N >= 8 for a level ratio");
        }
        if (replicates < 1) throw DomainError("replicates must be >= 1");
        if (threads < 1) throw DomainError("threads must be >= 1");
        estimator.validate();
    }
};

namespace detail {

template <class T, class Parse>
std::vector<T> parse_list(std::string_view value, Parse parse) {
    std::vector<T> out;
    std::string tmp(value);
    std::replace(tmp.begin(), tmp.end(), ',', ' ');
    std::istringstream in(tmp);
    std::string tok;
    while (in >> tok) out.push_back(parse(tok));
    return out;
}

inline double to_double(const std::string& s) { return csv::parse_double(s, 0); }

inline long long to_integer(const std::string& s) {
    std::size_t pos = 0;
    long long v = 0;
    try {
        v = std::stoll(s, &pos);
    } catch (const std::exception&) {
        throw FormatError("not an integer: '" + s + "'");
    }
    if (pos != s.size()) throw FormatError("not an integer: '" + s + "'");
    return v;
}

inline bool to_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "off" || s == "no") return false;
    throw FormatError("not a boolean: '" + s + "'");
}

}  // namespace detail

/// Parses `key = value` lines; `#` starts a comment. Noise levels are
/// whitespace-separated descriptors such as `const:0.03|gauss tanh:0.1,0.5|t:6`.
inline ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto view = csv::trim(line);
        if (view.empty()) continue;
        auto eq = view.find('=');
        if (eq == std::string_view::npos) throw FormatError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key(csv::trim(view.substr(0, eq)));
        const std::string value(csv::trim(view.substr(eq + 1)));
        try {
            if (key == "h_values") {
                cfg.h_values = detail::parse_list<double>(value, detail::to_double);
            } else if (key == "sigma_values") {
                cfg.sigma_values = detail::parse_list<double>(value, detail::to_double);
            } else if (key == "N_values") {
                cfg.grid_exponents = detail::parse_list<int>(value, [](const std::string& s) { return static_cast<int>(detail::to_integer(s)); });
            } else if (key == "noise_levels") {
                cfg.noise_levels.clear();
                std::istringstream toks(value);
                std::string tok;
                while (toks >> tok) cfg.noise_levels.push_back(parse_noise_level(tok));
            } else if (key == "replicates") {
                cfg.replicates = static_cast<int>(detail::to_integer(value));
            } else if (key == "base_seed") {
                cfg.base_seed = static_cast<std::uint64_t>(detail::to_integer(value));
            } else if (key == "normalization") {
                cfg.normalization = parse_normalization(value);
            } else if (key == "hmin") {
                cfg.estimator.h_min = detail::to_double(value);
            } else if (key == "hmax") {
                cfg.estimator.h_max = detail::to_double(value);
            } else if (key == "threads") {
                cfg.threads = static_cast<int>(detail::to_integer(value));
            } else if (key == "record_wall_time") {
                cfg.record_wall_time = detail::to_bool(value);
            } else if (key == "include_clamped") {
                cfg.include_clamped = detail::to_bool(value);
            } else if (key == "rows") {
                cfg.rows_path = value;
            } else if (key == "summary") {
                cfg.summary_path = value;
            } else {
                throw FormatError("unknown key '" + key + "'");
            }
        } catch (const FormatError& e) {
            throw FormatError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    cfg.estimator.normalization = cfg.normalization;
    cfg.validate();
    return cfg;
}

inline ExperimentConfig read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config '" + path + "'");
    return parse_config(in);
}

struct ReportRow {
    double hurst = 0.0;
    double sigma = 0.0;
    int grid_exponent = 0;
    std::string noise;
    int replicate = 0;
    std::uint64_t seed = 0;
    int j_star = 0;
    double h_hat = std::numeric_limits<double>::quiet_NaN();
    bool clamped = false;
    double sigma_hat = std::numeric_limits<double>::quiet_NaN();
    double abs_error = std::numeric_limits<double>::quiet_NaN();
    double wall_time = 0.0;
    std::string error;
};

/// Seed of replicate r at (H, N). Independent of sigma and of the noise
/// level, so those columns are paired on the same fBm path and noise draws.
inline std::uint64_t replicate_seed(std::uint64_t base_seed, double hurst, int grid_exponent, int replicate) {
    return derive_seed(base_seed, {key_of(hurst), static_cast<std::uint64_t>(grid_exponent),
                                   static_cast<std::uint64_t>(replicate)});
}

/// Cached per-N plans and per-(H, N) generators for a sweep.
class ExperimentResources {
public:
    const CoefficientPlan& plan(int N) {
        std::lock_guard lock(mutex_);
        auto& slot = plans_[N];
        if (!slot) slot = std::make_unique<PlanEntry>(N);
        return slot->plan;
    }

    const WaveletCovariance& covariance(int N) {
        plan(N);
        std::lock_guard lock(mutex_);
        return plans_[N]->covariance;
    }

    const FbmGenerator& generator(double hurst, int N, Normalization norm) {
        std::lock_guard lock(mutex_);
        auto& slot = generators_[{key_of(hurst), N, static_cast<int>(norm)}];
        if (!slot) slot = std::make_unique<FbmGenerator>(hurst, N, norm);
        return *slot;
    }

private:
    struct PlanEntry {
        explicit PlanEntry(int N) : plan(N), covariance(plan.basis()) {}
        CoefficientPlan plan;
        WaveletCovariance covariance;
    };
    std::mutex mutex_;
    std::map<int, std::unique_ptr<PlanEntry>> plans_;
    std::map<std::tuple<std::uint64_t, int, int>, std::unique_ptr<FbmGenerator>> generators_;
};

/// Runs one replicate: generate path, observe, estimate.
inline ReportRow run_replicate(const ExperimentConfig& cfg, ExperimentResources& res, double hurst, double sigma,
                               int N, const NoiseLevel& noise, int replicate) {
    ReportRow row;
    row.hurst = hurst;
    row.sigma = sigma;
    row.grid_exponent = N;
    row.noise = noise.descriptor();
    row.replicate = replicate;
    row.seed = replicate_seed(cfg.base_seed, hurst, N, replicate);
    const auto start = std::chrono::steady_clock::now();
    try {
        const auto& gen = res.generator(hurst, N, cfg.normalization);
        const auto path = gen.generate(sigma, derive_seed(row.seed, {static_cast<std::uint64_t>(Stream::Path)}));
        const NoiseSpec spec{noise.amplitude, noise.distribution,
                             derive_seed(row.seed, {static_cast<std::uint64_t>(Stream::Noise)})};
        const auto series = observe(path, spec);
        auto opts = cfg.estimator;
        opts.normalization = cfg.normalization;
        const auto profile = estimate(series, res.plan(N), res.covariance(N), opts);
        row.j_star = profile.j_star;
        row.h_hat = profile.h_hat;
        row.clamped = profile.clamped;
        row.abs_error = std::abs(profile.h_hat - hurst);
        if (profile.sigma_hat)
            row.sigma_hat = *profile.sigma_hat;
        else
            row.error = "sigma: selected energy not positive";
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    if (cfg.record_wall_time)
        row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return row;
}

/// Every (H, sigma, N, noise, replicate) combination, in config order. The
/// result does not depend on the worker count.
inline std::vector<ReportRow> run_experiment(const ExperimentConfig& cfg,
                                             const std::function<void(std::size_t, std::size_t)>& progress = {}) {
    cfg.validate();
    struct Task {
        double hurst, sigma;
        int N;
        std::size_t noise;
        int replicate;
    };
    std::vector<Task> tasks;
    for (double h : cfg.h_values)
        for (double s : cfg.sigma_values)
            for (int N : cfg.grid_exponents)
                for (std::size_t z = 0; z < cfg.noise_levels.size(); ++z)
                    for (int r = 0; r < cfg.replicates; ++r) tasks.push_back({h, s, N, z, r});

    ExperimentResources res;
    std::vector<ReportRow> rows(tasks.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            const auto& t = tasks[i];
            rows[i] = run_replicate(cfg, res, t.hurst, t.sigma, t.N, cfg.noise_levels[t.noise], t.replicate);
            const auto d = ++done;
            if (progress) progress(d, tasks.size());
        }
    };
    if (cfg.threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < cfg.threads; ++w) pool.emplace_back(worker);
    }
    return rows;
}

inline constexpr const char* kRowHeader =
    "H,sigma,N,noise,replicate,seed,j_star,h_hat,clamped,sigma_hat,abs_error,wall_time,error";

inline void write_rows_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
    using csv::format_double;
    out << kRowHeader << '\n';
    for (const auto& r : rows) {
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        out << format_double(r.hurst) << ',' << format_double(r.sigma) << ',' << r.grid_exponent << ',' << r.noise
            << ',' << r.replicate << ',' << r.seed << ',' << r.j_star << ',' << format_double(r.h_hat) << ','
            << (r.clamped ? 1 : 0) << ',' << format_double(r.sigma_hat) << ',' << format_double(r.abs_error) << ','
            << format_double(r.wall_time) << ',' << err << '\n';
    }
}

inline std::vector<ReportRow> read_rows_csv(std::istream& in) {
    auto t = csv::read_table(in);
    std::string header;
    for (std::size_t i = 0; i < t.header.size(); ++i) header += (i ? "," : "") + t.header[i];
    if (header != kRowHeader) throw FormatError("unexpected rows header: " + header);
    std::vector<ReportRow> rows;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& c = t.rows[i];
        const std::size_t ln = i + 2;
        auto num = [&](std::size_t col) {
            if (c[col] == "nan" || c[col] == "-nan") return std::numeric_limits<double>::quiet_NaN();
            return csv::parse_double(c[col], ln);
        };
        ReportRow r;
        r.hurst = num(0);
        r.sigma = num(1);
        r.grid_exponent = static_cast<int>(num(2));
        r.noise = c[3];
        r.replicate = static_cast<int>(num(4));
        try {
            r.seed = std::stoull(c[5]);
        } catch (const std::exception&) {
            throw FormatError("line " + std::to_string(ln) + ": bad seed");
        }
        r.j_star = static_cast<int>(num(6));
        r.h_hat = num(7);
        r.clamped = c[8] == "1";
        r.sigma_hat = num(9);
        r.abs_error = num(10);
        r.wall_time = num(11);
        r.error = c[12];
        rows.push_back(std::move(r));
    }
    return rows;
}

inline std::vector<ReportRow> read_rows_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "'");
    return read_rows_csv(in);
}

/// Error statistics of one (H, sigma, N, noise) cell.
struct CellSummary {
    double hurst = 0.0;
    double sigma = 0.0;
    int grid_exponent = 0;
    std::string noise;
    std::size_t rows = 0;
    std::size_t used = 0;
    std::size_t clamped = 0;
    std::size_t failed = 0;
    double rmse = std::numeric_limits<double>::quiet_NaN();
    double median_abs_error = std::numeric_limits<double>::quiet_NaN();
    double mean_j_star = std::numeric_limits<double>::quiet_NaN();
};

inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<long>(mid)));
    return m;
}

/// Groups rows by cell. Clamped rows are counted but left out of the error
/// statistics unless `include_clamped`.
inline std::vector<CellSummary> summarize(const std::vector<ReportRow>& rows, bool include_clamped = false) {
    std::map<std::tuple<double, double, int, std::string>, std::vector<const ReportRow*>> groups;
    for (const auto& r : rows) groups[{r.hurst, r.sigma, r.grid_exponent, r.noise}].push_back(&r);
    std::vector<CellSummary> out;
    for (const auto& [key, members] : groups) {
        CellSummary s;
        std::tie(s.hurst, s.sigma, s.grid_exponent, s.noise) = key;
        s.rows = members.size();
        std::vector<double> errs;
        double sq = 0.0, js = 0.0;
        for (const auto* r : members) {
            if (r->clamped) ++s.clamped;
            if (!std::isfinite(r->h_hat)) {
                ++s.failed;
                continue;
            }
            js += r->j_star;
            if (r->clamped && !include_clamped) continue;
            errs.push_back(r->abs_error);
            sq += r->abs_error * r->abs_error;
        }
        s.used = errs.size();
        if (s.rows > s.failed) s.mean_j_star = js / static_cast<double>(s.rows - s.failed);
        if (!errs.empty()) {
            s.rmse = std::sqrt(sq / static_cast<double>(errs.size()));
            s.median_abs_error = median(errs);
        }
        out.push_back(std::move(s));
    }
    return out;
}

struct RatePoint {
    double log2_n = 0.0;
    double log2_rmse = 0.0;
};

struct RateFit {
    double hurst = 0.0;
    std::vector<RatePoint> points;
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double theory_slope = 0.0;  // -1 / (4H + 2)
};

inline double theory_rate_slope(double hurst) { return -1.0 / (4.0 * hurst + 2.0); }

/// Ordinary least squares of y on x.
inline RateFit fit_points(double hurst, std::vector<RatePoint> points) {
    if (points.size() < 3) throw InsufficientDataError("rate fit needs at least 3 grid sizes, got " + std::to_string(points.size()));
    RateFit fit;
    fit.hurst = hurst;
    fit.theory_slope = theory_rate_slope(hurst);
    const double m = static_cast<double>(points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& p : points) {
        mx += p.log2_n;
        my += p.log2_rmse;
    }
    mx /= m;
    my /= m;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& p : points) {
        sxx += (p.log2_n - mx) * (p.log2_n - mx);
        sxy += (p.log2_n - mx) * (p.log2_rmse - my);
        syy += (p.log2_rmse - my) * (p.log2_rmse - my);
    }
    if (!(sxx > 0.0)) throw InsufficientDataError("rate fit needs distinct grid sizes");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    fit.points = std::move(points);
    return fit;
}

struct RateFitFilter {
    std::optional<double> sigma;
    std::optional<std::string> noise;
    bool include_clamped = false;
};

/// log2 RMSE(H-hat) against log2 n over the rows at H (one sigma and noise level).
inline RateFit rate_fit(const std::vector<ReportRow>& rows, double hurst, const RateFitFilter& filter = {}) {
    std::vector<ReportRow> selected;
    std::set<std::pair<double, std::string>> combos;
    for (const auto& r : rows) {
        if (r.hurst != hurst) continue;
        if (filter.sigma && r.sigma != *filter.sigma) continue;
        if (filter.noise && r.noise != *filter.noise) continue;
        selected.push_back(r);
        combos.insert({r.sigma, r.noise});
    }
    if (combos.size() > 1)
        throw InsufficientDataError("rows at H = " + csv::format_double(hurst) +
                                    " span several sigma/noise settings; select one");
    std::vector<RatePoint> points;
    for (const auto& cell : summarize(selected, filter.include_clamped)) {
        if (!std::isfinite(cell.rmse) || !(cell.rmse > 0.0)) continue;
        points.push_back({static_cast<double>(cell.grid_exponent), std::log2(cell.rmse)});
    }
    std::sort(points.begin(), points.end(), [](auto& a, auto& b) { return a.log2_n < b.log2_n; });
    return fit_points(hurst, std::move(points));
}

inline nlohmann::json to_json(const RateFit& fit) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : fit.points) pts.push_back({{"log2_n", p.log2_n}, {"log2_rmse", p.log2_rmse}});
    return {{"H", fit.hurst},           {"points", pts},
            {"slope", fit.slope},       {"intercept", fit.intercept},
            {"r_squared", fit.r_squared}, {"theory_slope", fit.theory_slope}};
}

inline nlohmann::json to_json(const CellSummary& s) {
    return {{"H", s.hurst},
            {"sigma", s.sigma},
            {"N", s.grid_exponent},
            {"noise", s.noise},
            {"rows", s.rows},
            {"used", s.used},
            {"clamped", s.clamped},
            {"failed", s.failed},
            {"rmse", std::isfinite(s.rmse) ? nlohmann::json(s.rmse) : nlohmann::json()},
            {"median_abs_error", std::isfinite(s.median_abs_error) ? nlohmann::json(s.median_abs_error) : nlohmann::json()},
            {"mean_j_star", std::isfinite(s.mean_j_star) ? nlohmann::json(s.mean_j_star) : nlohmann::json()}};
}

/// Cell table plus a rate fit for every (H, sigma, noise) with >= 3 grid sizes.
inline nlohmann::json experiment_summary(const std::vector<ReportRow>& rows, bool include_clamped) {
    nlohmann::json cells = nlohmann::json::array();
    std::set<std::tuple<double, double, std::string>> groups;
    for (const auto& s : summarize(rows, include_clamped)) {
        cells.push_back(to_json(s));
        groups.insert({s.hurst, s.sigma, s.noise});
    }
    nlohmann::json fits = nlohmann::json::array();
    for (const auto& [h, s, z] : groups) {
        try {
            auto fit = rate_fit(rows, h, {s, z, include_clamped});
            auto j = to_json(fit);
            j["sigma"] = s;
            j["noise"] = z;
            fits.push_back(std::move(j));
        } catch (const InsufficientDataError&) {
        }
    }
    return {{"include_clamped", include_clamped}, {"cells", cells}, {"rate_fits", fits}};
}

/// Runs the sweep and writes the rows CSV and JSON summary. Returns false
/// (doing nothing) when the rows file already exists and `force` is unset.
inline bool run_experiment_to_files(const ExperimentConfig& cfg, bool force,
                                    const std::function<void(std::size_t, std::size_t)>& progress = {}) {
    if (!force && std::filesystem::exists(cfg.rows_path)) return false;
    const auto rows = run_experiment(cfg, progress);
    {
        std::ofstream out(cfg.rows_path);
        if (!out) throw FormatError("cannot write '" + cfg.rows_path + "'");
        write_rows_csv(out, rows);
    }
    std::ofstream out(cfg.summary_path);
    if (!out) throw FormatError("cannot write '" + cfg.summary_path + "'");
    out << experiment_summary(rows, cfg.include_clamped).dump(2) << '\n';
    return true;
}

}  // namespace wavehurst
