#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "csv.hpp"
#include "error.hpp"
#include "fbm.hpp"

namespace wavehurst {

/// a(x) = c.
struct ConstantAmplitude {
    double level = 0.0;
};

/// a(x) = alpha (1 + beta tanh(x)); bounded, positive, bounded derivative.
struct TanhAmplitude {
    double alpha = 1.0;
    double beta = 0.0;
};

using Amplitude = std::variant<ConstantAmplitude, TanhAmplitude>;

struct GaussianNoise {};

/// Student t with nu degrees of freedom rescaled to unit variance.
struct StudentNoise {
    double dof = 5.0;
};

using NoiseDistribution = std::variant<GaussianNoise, StudentNoise>;

struct NoiseSpec {
    Amplitude amplitude = ConstantAmplitude{};
    NoiseDistribution distribution = GaussianNoise{};
    std::uint64_t seed = 0;

    void validate() const {
        if (auto* c = std::get_if<ConstantAmplitude>(&amplitude)) {
            if (!(c->level >= 0.0) || !std::isfinite(c->level)) throw DomainError("constant noise level must be >= 0");
        } else {
            const auto& t = std::get<TanhAmplitude>(amplitude);
            if (!(t.alpha > 0.0) || !std::isfinite(t.alpha)) throw DomainError("tanh amplitude needs alpha > 0");
            if (!(std::abs(t.beta) < 1.0)) throw DomainError("tanh amplitude needs |beta| < 1");
        }
        if (auto* s = std::get_if<StudentNoise>(&distribution); s && !(s->dof >= 5.0))
            throw DomainError("Student noise needs nu >= 5 for a finite fourth moment");
    }

    double amplitude_at(double x) const noexcept {
        if (auto* c = std::get_if<ConstantAmplitude>(&amplitude)) return c->level;
        const auto& t = std::get<TanhAmplitude>(amplitude);
        return t.alpha * (1.0 + t.beta * std::tanh(x));
    }

    /// True when a(x) vanishes identically.
    bool is_silent() const noexcept {
        auto* c = std::get_if<ConstantAmplitude>(&amplitude);
        return c && c->level == 0.0;
    }
};

inline Amplitude parse_amplitude(std::string_view s) {
    auto colon = s.find(':');
    if (colon == std::string_view::npos) throw DomainError("noise amplitude must be const:c or tanh:alpha,beta");
    auto kind = s.substr(0, colon);
    auto args = csv::split(s.substr(colon + 1));
    try {
        if (kind == "const" && args.size() == 1) return ConstantAmplitude{csv::parse_double(args[0], 0)};
        if (kind == "tanh" && args.size() == 2)
            return TanhAmplitude{csv::parse_double(args[0], 0), csv::parse_double(args[1], 0)};
    } catch (const FormatError&) {
    }
    throw DomainError("bad noise amplitude '" + std::string(s) + "'");
}

inline NoiseDistribution parse_distribution(std::string_view s) {
    if (s == "gauss") return GaussianNoise{};
    if (s.starts_with("t:")) {
        try {
            return StudentNoise{csv::parse_double(s.substr(2), 0)};
        } catch (const FormatError&) {
        }
    }
    throw DomainError("bad noise distribution '" + std::string(s) + "' (expected gauss or t:nu)");
}

inline std::string describe(const Amplitude& a) {
    if (auto* c = std::get_if<ConstantAmplitude>(&a)) return "const:" + csv::format_double(c->level);
    const auto& t = std::get<TanhAmplitude>(a);
    return "tanh:" + csv::format_double(t.alpha) + "," + csv::format_double(t.beta);
}

inline std::string describe(const NoiseDistribution& d) {
    if (std::holds_alternative<GaussianNoise>(d)) return "gauss";
    return "t:" + csv::format_double(std::get<StudentNoise>(d).dof);
}

/// Draws standardized noise variables: mean 0, variance 1.
class NoiseSampler {
public:
    NoiseSampler(const NoiseDistribution& dist, std::uint64_t seed) : dist_(dist), rng_(seed) {
        if (auto* s = std::get_if<StudentNoise>(&dist_)) {
            student_ = std::student_t_distribution<double>(s->dof);
            student_scale_ = std::sqrt((s->dof - 2.0) / s->dof);
        }
    }

    double operator()() {
        if (std::holds_alternative<GaussianNoise>(dist_)) return normal_(rng_);
        return student_scale_ * student_(rng_);
    }

private:
    NoiseDistribution dist_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_;
    std::student_t_distribution<double> student_{5.0};
    double student_scale_ = 1.0;
};

/// Observations Y_i = X_{i/n} + a(X_{i/n}) xi_i, i = 0..n.
struct NoisySeries {
    int grid_exponent = 0;
    std::vector<double> y;
    std::string source = "external";
    std::optional<NoiseSpec> noise;  // empty when unknown

    std::size_t n() const noexcept { return std::size_t{1} << grid_exponent; }
};

/// Grid exponent N with 2^N + 1 == count and N even, or nullopt.
inline std::optional<int> grid_exponent_for_length(std::size_t count) {
    for (int N = 2; N <= 62; N += 2) {
        const std::size_t len = (std::size_t{1} << N) + 1;
        if (len == count) return N;
        if (len > count) break;
    }
    return std::nullopt;
}

inline NoisySeries observe(std::span<const double> x, const NoiseSpec& spec, std::string source = "external") {
    spec.validate();
    auto N = grid_exponent_for_length(x.size());
    if (!N) throw SizeError("path length must be 2^N + 1 with N even, got " + std::to_string(x.size()));
    NoisySeries out{*N, std::vector<double>(x.begin(), x.end()), std::move(source), spec};
    if (spec.is_silent()) return out;
    NoiseSampler xi(spec.distribution, spec.seed);
    for (auto& v : out.y) v += spec.amplitude_at(v) * xi();
    return out;
}

inline std::string describe(const FbmPath& path) {
    return "fbm:H=" + csv::format_double(path.params.hurst) + ",sigma=" + csv::format_double(path.params.sigma) +
           ",N=" + std::to_string(path.grid_exponent) + ",norm=" + std::string(to_string(path.normalization));
}

inline NoisySeries observe(const FbmPath& path, const NoiseSpec& spec) {
    return observe(path.samples, spec, describe(path));
}

struct SeriesReadOptions {
    bool trim_to_valid_prefix = false;
};

struct SeriesReadResult {
    NoisySeries series;
    std::optional<std::string> warning;
};

/// Fits a raw value vector to the 2^N + 1 (N even) grid, trimming if allowed.
inline SeriesReadResult make_series(std::vector<double> values, const SeriesReadOptions& options) {
    SeriesReadResult out;
    if (auto N = grid_exponent_for_length(values.size())) {
        out.series.grid_exponent = *N;
        out.series.y = std::move(values);
        return out;
    }
    if (!options.trim_to_valid_prefix)
        throw SizeError("series length " + std::to_string(values.size()) +
                        " is not 2^N + 1 with N even (set the trim option to keep the largest valid prefix)");
    int best = 0;
    for (int N = 2; N <= 62 && (std::size_t{1} << N) + 1 <= values.size(); N += 2) best = N;
    if (best == 0) throw SizeError("series of length " + std::to_string(values.size()) + " has no valid prefix");
    const std::size_t keep = (std::size_t{1} << best) + 1;
    out.warning = "trimmed series from " + std::to_string(values.size()) + " to " + std::to_string(keep) + " points";
    values.resize(keep);
    out.series.grid_exponent = best;
    out.series.y = std::move(values);
    return out;
}

/// Reads a CSV with header `t,y` or `y`.
inline SeriesReadResult read_series(std::istream& in, const SeriesReadOptions& options = {}) {
    return make_series(csv::read_value_column(in, "y"), options);
}

inline SeriesReadResult read_series(const std::string& path, const SeriesReadOptions& options = {}) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "'");
    return read_series(in, options);
}

inline void write_series_csv(std::ostream& out, const NoisySeries& series) {
    csv::write_grid_series(out, "y", series.y);
}

}  // namespace wavehurst
