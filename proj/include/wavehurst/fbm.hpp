#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "error.hpp"
#include "fft.hpp"

namespace wavehurst {

/// Largest grid exponent accepted by the generators (memory guard).
inline constexpr int kMaxGridExponent = 24;
/// Largest grid exponent for the dense Cholesky route.
inline constexpr int kMaxCholeskyExponent = 10;

/// Hurst index H and scale sigma of X = sigma * W^H.
struct HurstParams {
    double hurst = 0.5;
    double sigma = 1.0;

    void validate() const {
        if (!(hurst > 0.0 && hurst < 1.0)) throw DomainError("Hurst index must lie in (0,1)");
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("sigma must be positive and finite");
    }
};

/// Covariance convention. PaperKappa carries the harmonizable-representation
/// factor kappa(H), so Var(W_1) = kappa(H); Standard has Var(W_1) = 1.
enum class Normalization { PaperKappa, Standard };

inline std::string_view to_string(Normalization n) {
    return n == Normalization::PaperKappa ? "paper" : "standard";
}

inline Normalization parse_normalization(std::string_view s) {
    if (s == "paper") return Normalization::PaperKappa;
    if (s == "standard") return Normalization::Standard;
    throw DomainError("normalization must be 'paper' or 'standard'");
}

/// kappa(H) = pi / (H Gamma(2H) sin(pi H)).
inline double kappa(double hurst) {
    if (!(hurst > 0.0 && hurst < 1.0)) throw DomainError("kappa: H must lie in (0,1)");
    using std::numbers::pi;
    return pi / (hurst * std::tgamma(2.0 * hurst) * std::sin(pi * hurst));
}

inline double variance_scale(double hurst, Normalization norm) {
    return norm == Normalization::PaperKappa ? kappa(hurst) : 1.0;
}

/// Cov(X_s, X_t) for X = sigma W^H.
inline double fbm_covariance(double s, double t, const HurstParams& params, Normalization norm) {
    params.validate();
    const double h2 = 2.0 * params.hurst;
    const double core = std::pow(std::abs(t), h2) + std::pow(std::abs(s), h2) - std::pow(std::abs(t - s), h2);
    return params.sigma * params.sigma * variance_scale(params.hurst, norm) * 0.5 * core;
}

/// Samples of sigma W^H on the grid i/n, i = 0..n, n = 2^N.
struct FbmPath {
    int grid_exponent = 0;
    HurstParams params;
    Normalization normalization = Normalization::PaperKappa;
    std::vector<double> samples;

    std::size_t n() const noexcept { return std::size_t{1} << grid_exponent; }
};

inline void validate_grid_exponent(int N, int max_exponent = kMaxGridExponent) {
    if (N <= 0 || N % 2 != 0) throw SizeError("grid exponent N must be even and positive, got " + std::to_string(N));
    if (N > max_exponent)
        throw SizeError("grid exponent N = " + std::to_string(N) + " exceeds the limit " + std::to_string(max_exponent));
}

namespace detail {

/// Autocovariance of unit-sigma fractional Gaussian noise at lag k, grid step 1/n.
inline double fgn_autocovariance(std::size_t lag, double hurst, double n, double scale) {
    const double h2 = 2.0 * hurst;
    const double k = static_cast<double>(lag);
    double r = 0.0;
    if (lag < 2) {
        r = 0.5 * (std::pow(k + 1.0, h2) - 2.0 * std::pow(k, h2) + std::pow(std::abs(k - 1.0), h2));
    } else {
        // Binomial series in 1/k; the direct second difference cancels badly for large lags.
        const double x2 = 1.0 / (k * k);
        double binom = 1.0, power = 1.0, sum = 0.0;
        for (int i = 1; i < 60; i += 2) {
            binom *= (h2 - i + 1) / i * (h2 - i) / (i + 1);
            power *= x2;
            const double term = binom * power;
            sum += term;
            if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
        }
        r = std::pow(k, h2) * sum;
    }
    return scale * r * std::pow(n, -h2);
}

inline FbmPath make_path(int N, const HurstParams& params, Normalization norm, std::vector<double> unit_increments) {
    FbmPath path{N, params, norm, std::vector<double>(unit_increments.size() + 1, 0.0)};
    double acc = 0.0;
    for (std::size_t i = 0; i < unit_increments.size(); ++i) {
        acc += unit_increments[i];
        path.samples[i + 1] = acc;
    }
    for (auto& x : path.samples) x *= params.sigma;
    return path;
}

}  // namespace detail

/// Exact dense-Cholesky sampler, used as an independent cross-check and as
/// the fallback when circulant embedding is not nonnegative definite.
inline FbmPath generate_path_cholesky(const HurstParams& params, int N, std::uint64_t seed,
                                      Normalization norm = Normalization::PaperKappa) {
    params.validate();
    validate_grid_exponent(N, kMaxCholeskyExponent);
    const std::size_t n = std::size_t{1} << N;
    const HurstParams unit{params.hurst, 1.0};
    Eigen::MatrixXd cov(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k <= i; ++k) {
            const double c = fbm_covariance(static_cast<double>(i + 1) / static_cast<double>(n),
                                            static_cast<double>(k + 1) / static_cast<double>(n), unit, norm);
            cov(i, k) = c;
            cov(k, i) = c;
        }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericalError("Cholesky factorization of the fBm covariance failed");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::VectorXd z(n);
    for (std::size_t i = 0; i < n; ++i) z(i) = normal(rng);
    Eigen::VectorXd x = llt.matrixL() * z;

    FbmPath path{N, params, norm, std::vector<double>(n + 1, 0.0)};
    for (std::size_t i = 0; i < n; ++i) path.samples[i + 1] = params.sigma * x(i);
    return path;
}

/// Circulant-embedding (Davies-Harte) sampler for one (H, N, normalization).
/// Holds the square-rooted embedding spectrum, so repeated draws cost one
/// FFT each. Immutable after construction and safe to share across threads.
class FbmGenerator {
public:
    FbmGenerator(double hurst, int N, Normalization norm = Normalization::PaperKappa)
        : hurst_(hurst), grid_exponent_(N), norm_(norm) {
        HurstParams{hurst, 1.0}.validate();
        validate_grid_exponent(N);
        const std::size_t n = std::size_t{1} << N;
        const std::size_t m = 2 * n;
        const double scale = variance_scale(hurst, norm);

        detail::ComplexBuffer row(m), spectrum(m);
        for (std::size_t k = 0; k <= n; ++k) {
            row.re(k) = detail::fgn_autocovariance(k, hurst, static_cast<double>(n), scale);
            row.im(k) = 0.0;
        }
        for (std::size_t k = n + 1; k < m; ++k) {
            row.re(k) = row.re(m - k);
            row.im(k) = 0.0;
        }
        detail::forward_dft(row, spectrum);

        min_eigenvalue_ = spectrum.re(0);
        max_eigenvalue_ = spectrum.re(0);
        for (std::size_t k = 0; k < m; ++k) {
            min_eigenvalue_ = std::min(min_eigenvalue_, spectrum.re(k));
            max_eigenvalue_ = std::max(max_eigenvalue_, spectrum.re(k));
        }
        const double tol = 1e-8 * max_eigenvalue_;
        if (min_eigenvalue_ < -tol) {
            if (N > kMaxCholeskyExponent)
                throw NumericalError("circulant embedding is not nonnegative definite (min eigenvalue " +
                                     std::to_string(min_eigenvalue_) + ")");
            use_cholesky_ = true;
            return;
        }
        root_spectrum_.resize(m);
        for (std::size_t k = 0; k < m; ++k)
            root_spectrum_[k] = std::sqrt(std::max(spectrum.re(k), 0.0) / static_cast<double>(m));
    }

    double hurst() const noexcept { return hurst_; }
    int grid_exponent() const noexcept { return grid_exponent_; }
    Normalization normalization() const noexcept { return norm_; }
    double min_eigenvalue() const noexcept { return min_eigenvalue_; }
    double max_eigenvalue() const noexcept { return max_eigenvalue_; }
    bool uses_cholesky_fallback() const noexcept { return use_cholesky_; }

    FbmPath generate(double sigma, std::uint64_t seed) const {
        const HurstParams params{hurst_, sigma};
        params.validate();
        if (use_cholesky_) return generate_path_cholesky(params, grid_exponent_, seed, norm_);

        const std::size_t m = root_spectrum_.size();
        const std::size_t n = m / 2;
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal;
        detail::ComplexBuffer weights(m), field(m);
        for (std::size_t k = 0; k < m; ++k) {
            weights.re(k) = root_spectrum_[k] * normal(rng);
            weights.im(k) = root_spectrum_[k] * normal(rng);
        }
        detail::forward_dft(weights, field);
        // The real part of the transform is a stationary Gaussian sequence
        // with the embedded autocovariance.
        std::vector<double> increments(n);
        for (std::size_t i = 0; i < n; ++i) increments[i] = field.re(i);
        return detail::make_path(grid_exponent_, params, norm_, std::move(increments));
    }

private:
    double hurst_;
    int grid_exponent_;
    Normalization norm_;
    double min_eigenvalue_ = 0.0;
    double max_eigenvalue_ = 0.0;
    bool use_cholesky_ = false;
    std::vector<double> root_spectrum_;
};

/// Exact-in-law sample of sigma W^H at i / 2^N, deterministic in its arguments.
inline FbmPath generate_path(const HurstParams& params, int N, std::uint64_t seed,
                             Normalization norm = Normalization::PaperKappa) {
    params.validate();
    return FbmGenerator(params.hurst, N, norm).generate(params.sigma, seed);
}

}  // namespace wavehurst
