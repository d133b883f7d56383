#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "fbm.hpp"
#include "noise.hpp"
#include "wavelet.hpp"

namespace wavehurst {

/// Wavelet weights for every level an estimate at grid exponent N uses.
/// Built once per N and shared read-only between replicates.
class CoefficientPlan {
public:
    explicit CoefficientPlan(int grid_exponent) : CoefficientPlan(grid_exponent, make_basis(grid_exponent)) {}

    CoefficientPlan(int grid_exponent, std::shared_ptr<const WaveletBasis> basis)
        : grid_exponent_(grid_exponent), basis_(std::move(basis)) {
        if (grid_exponent <= 0 || grid_exponent % 2 != 0)
            throw SizeError("grid exponent must be even and positive, got " + std::to_string(grid_exponent));
        min_level_ = basis_->min_level();
        max_level_ = grid_exponent / 2;
        if (max_level_ < min_level_)
            throw SizeError("grid exponent " + std::to_string(grid_exponent) + " too small: need N/2 >= " +
                            std::to_string(min_level_));
        for (int j = min_level_; j <= max_level_; ++j) levels_.push_back(cell_integrals(*basis_, j, grid_exponent));
    }

    int grid_exponent() const noexcept { return grid_exponent_; }
    std::size_t n() const noexcept { return std::size_t{1} << grid_exponent_; }
    int min_level() const noexcept { return min_level_; }
    int max_level() const noexcept { return max_level_; }
    const WaveletBasis& basis() const noexcept { return *basis_; }
    std::shared_ptr<const WaveletBasis> basis_ptr() const noexcept { return basis_; }

    const CellIntegrals& weights(int level) const {
        check_level(level);
        return levels_[static_cast<std::size_t>(level - min_level_)];
    }

    void check_level(int level) const {
        if (level < min_level_ || level > max_level_)
            throw DomainError("level " + std::to_string(level) + " outside [" + std::to_string(min_level_) + ", " +
                              std::to_string(max_level_) + "]");
    }

    /// Number of retained shifts at a level: locations in [0, 1/2].
    static std::size_t shifts(int level) noexcept { return std::size_t{1} << (level - 1); }

private:
    static std::shared_ptr<const WaveletBasis> make_basis(int grid_exponent) {
        return std::make_shared<const WaveletBasis>(build_basis(default_cascade_depth(grid_exponent)));
    }

    int grid_exponent_;
    std::shared_ptr<const WaveletBasis> basis_;
    int min_level_ = 0;
    int max_level_ = 0;
    std::vector<CellIntegrals> levels_;
};

namespace detail {

inline void check_series(const NoisySeries& series, const CoefficientPlan& plan) {
    if (series.grid_exponent != plan.grid_exponent() || series.y.size() != plan.n() + 1)
        throw SizeError("series of length " + std::to_string(series.y.size()) + " does not match the plan for N = " +
                        std::to_string(plan.grid_exponent()));
}

inline double weighted_sum(std::span<const double> weights, std::span<const double> values, std::size_t offset) {
    double acc = 0.0;
    for (std::size_t l = 0; l < weights.size(); ++l) acc += weights[l] * values[offset + l];
    return acc;
}

}  // namespace detail

/// Empirical wavelet coefficients sum_l (int_cell psi_{j,k}) Y_{k 2^(N-j) + l}
/// for k = 0..2^(j-1)-1.
inline std::vector<double> dtilde(const NoisySeries& series, const CoefficientPlan& plan, int level) {
    detail::check_series(series, plan);
    const auto& w = plan.weights(level);
    std::vector<double> out(CoefficientPlan::shifts(level));
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = detail::weighted_sum(w.values, series.y, k * w.cell_stride());
    return out;
}

/// Empirical variance of Y over the 2^(N/2) points following k/2^j.
inline double local_noise_variance(const NoisySeries& series, int level, std::size_t shift) {
    const int N = series.grid_exponent;
    if (level < 0 || level > N) throw DomainError("level outside [0, N]");
    const std::size_t window = std::size_t{1} << (N / 2);
    const std::size_t start = (shift << (N - level)) + 1;
    if (start + window > series.y.size())
        throw DomainError("noise window for (j=" + std::to_string(level) + ", k=" + std::to_string(shift) +
                          ") runs past the end of the grid");
    // Two passes on values shifted by the first window entry: a constant
    // window gives exactly 0 and the result is never negative.
    const double ref = series.y[start];
    double mean = 0.0;
    for (std::size_t i = 0; i < window; ++i) mean += series.y[start + i] - ref;
    mean /= static_cast<double>(window);
    double acc = 0.0;
    for (std::size_t i = 0; i < window; ++i) {
        const double d = series.y[start + i] - ref - mean;
        acc += d * d;
    }
    return acc / static_cast<double>(window);
}

/// Noise-variance correction (sum_l (int_cell psi_{j,k})^2) * a-hat^2.
inline double vbar(const NoisySeries& series, const CoefficientPlan& plan, int level, std::size_t shift) {
    detail::check_series(series, plan);
    if (shift >= CoefficientPlan::shifts(level)) throw DomainError("shift outside [0, 2^(j-1))");
    return plan.weights(level).sum_of_squares * local_noise_variance(series, level, shift);
}

struct CoeffEstimates {
    int level = 0;
    std::vector<double> dtilde;
    std::vector<double> vbar;
    std::vector<double> dhat2;  // dtilde^2 - vbar, may be negative
};

inline CoeffEstimates coefficient_estimates(const NoisySeries& series, const CoefficientPlan& plan, int level) {
    CoeffEstimates out{level, dtilde(series, plan, level), {}, {}};
    const double energy = plan.weights(level).sum_of_squares;
    out.vbar.resize(out.dtilde.size());
    out.dhat2.resize(out.dtilde.size());
    for (std::size_t k = 0; k < out.dtilde.size(); ++k) {
        out.vbar[k] = energy * local_noise_variance(series, level, k);
        out.dhat2[k] = out.dtilde[k] * out.dtilde[k] - out.vbar[k];
    }
    return out;
}

/// Bias-corrected squared coefficients at one level.
inline std::vector<double> dhat2(const NoisySeries& series, const CoefficientPlan& plan, int level) {
    return coefficient_estimates(series, plan, level).dhat2;
}

struct EstimatorOptions {
    double h_min = 0.01;
    double h_max = 0.99;
    Normalization normalization = Normalization::PaperKappa;

    void validate() const {
        if (!(h_min > 0.0 && h_min < h_max && h_max < 1.0))
            throw DomainError("clamp interval must satisfy 0 < hmin < hmax < 1");
    }
};

/// Estimated energies over [J_lo, J_hi] plus the adaptive choice made on them.
struct EnergyProfile {
    int grid_exponent = 0;
    int min_level = 0;  // J_lo
    int max_level = 0;  // J_hi = N/2
    std::vector<double> qhat;          // index j - min_level
    std::vector<double> raw_energy;    // sum_k dtilde^2, same indexing
    std::vector<double> noise_energy;  // sum_k vbar, same indexing

    int j_star = -1;
    bool empty_selection = false;
    double h_hat = std::numeric_limits<double>::quiet_NaN();
    bool clamped = false;
    bool edge_pair = false;  // J* = J_hi, so the pair (J_hi - 1, J_hi) was used
    std::optional<double> sigma_hat;

    std::size_t n() const noexcept { return std::size_t{1} << grid_exponent; }

    double q(int level) const {
        if (level < min_level || level > max_level) throw DomainError("level outside the energy profile");
        return qhat[static_cast<std::size_t>(level - min_level)];
    }

    /// Selection threshold 2^j / n.
    double threshold(int level) const noexcept { return std::ldexp(1.0, level - grid_exponent); }
};

inline EnergyProfile energy_profile(const NoisySeries& series, const CoefficientPlan& plan) {
    EnergyProfile p;
    p.grid_exponent = plan.grid_exponent();
    p.min_level = plan.min_level();
    p.max_level = plan.max_level();
    for (int j = p.min_level; j <= p.max_level; ++j) {
        const auto est = coefficient_estimates(series, plan, j);
        double q = 0.0, raw = 0.0, noise = 0.0;
        for (std::size_t k = 0; k < est.dhat2.size(); ++k) {
            q += est.dhat2[k];
            raw += est.dtilde[k] * est.dtilde[k];
            noise += est.vbar[k];
        }
        p.qhat.push_back(q);
        p.raw_energy.push_back(raw);
        p.noise_energy.push_back(noise);
    }
    return p;
}

/// J* = max{ j : Qhat_j >= 2^j / n }, or J_lo when no level qualifies.
inline int select_level(EnergyProfile& profile) {
    profile.j_star = profile.min_level;
    profile.empty_selection = true;
    for (int j = profile.max_level; j >= profile.min_level; --j) {
        if (profile.q(j) >= profile.threshold(j)) {
            profile.j_star = j;
            profile.empty_selection = false;
            break;
        }
    }
    return profile.j_star;
}

struct HurstEstimate {
    double value = 0.0;
    bool clamped = false;
    int level = 0;  // lower level of the ratio actually used
};

/// -1/2 log2(Qhat_{j+1} / Qhat_j), clamped to [h_min, h_max].
inline HurstEstimate hurst_at_level(const EnergyProfile& profile, int level, const EstimatorOptions& options = {}) {
    options.validate();
    if (level < profile.min_level || level + 1 > profile.max_level)
        throw DomainError("ratio level " + std::to_string(level) + " needs j and j+1 inside the profile");
    const double lower = profile.q(level);
    const double upper = profile.q(level + 1);
    if (!(lower > 0.0)) return {options.h_min, true, level};
    if (!(upper > 0.0)) return {options.h_max, true, level};
    const double raw = -0.5 * std::log2(upper / lower);
    if (raw < options.h_min) return {options.h_min, true, level};
    if (raw > options.h_max) return {options.h_max, true, level};
    return {raw, false, level};
}

/// Hurst estimate at the selected level; selects first if needed.
inline HurstEstimate estimate_hurst(EnergyProfile& profile, const EstimatorOptions& options = {}) {
    if (profile.max_level <= profile.min_level)
        throw SizeError("energy profile needs at least two levels to form a ratio");
    if (profile.j_star < 0) select_level(profile);
    int level = profile.j_star;
    profile.edge_pair = level == profile.max_level;
    if (profile.edge_pair) level = profile.max_level - 1;
    auto est = hurst_at_level(profile, level, options);
    profile.h_hat = est.value;
    profile.clamped = est.clamped;
    return est;
}

/// Autocorrelation of psi on its table grid, the ingredient of the Gaussian
/// covariance of wavelet coefficients of fBm.
class WaveletCovariance {
public:
    explicit WaveletCovariance(const WaveletBasis& basis, int depth = 12)
        : step_(std::ldexp(1.0, -std::min(depth, basis.cascade_depth))) {
        const auto coarse = basis.restricted(std::min(depth, basis.cascade_depth));
        const auto& psi = coarse.psi_table;
        const std::size_t len = psi.size();
        autocorrelation_.assign(len, 0.0);
        for (std::size_t lag = 0; lag < len; ++lag) {
            double acc = 0.0;
            for (std::size_t i = 0; i + lag < len; ++i) acc += psi[i] * psi[i + lag];
            autocorrelation_[lag] = step_ * acc;
        }
    }

    double step() const noexcept { return step_; }
    /// int psi^2 on the table grid.
    double squared_norm() const noexcept { return autocorrelation_[0]; }

    /// c(psi) = 1/2 int int psi(s) psi(t) {|t|^2H + |s|^2H - |t-s|^2H} ds dt.
    double c_psi(double hurst) const { return unit_covariance(0, hurst); }

    /// Cov(d_{0,0}, d_{0,m}) / (sigma^2 variance_scale) for unit sigma fBm:
    /// -1/2 int A(tau) |tau + m|^2H dtau.
    double unit_covariance(long shift, double hurst) const {
        if (!(hurst > 0.0 && hurst < 1.0)) throw DomainError("H must lie in (0,1)");
        const double h2 = 2.0 * hurst;
        const double m = static_cast<double>(shift);
        double acc = 0.0;
        const auto len = static_cast<long>(autocorrelation_.size());
        for (long lag = -(len - 1); lag < len; ++lag) {
            const double tau = static_cast<double>(lag) * step_;
            acc += autocorrelation_[static_cast<std::size_t>(std::abs(lag))] * std::pow(std::abs(tau + m), h2);
        }
        return -0.5 * step_ * acc;
    }

private:
    double step_;
    std::vector<double> autocorrelation_;
};

/// Population energy 2^(-2jH) (sigma^2 / 2) c(psi) kappa(H) at level j.
inline double population_energy(const HurstParams& params, int level, double c_psi,
                                Normalization norm = Normalization::PaperKappa) {
    params.validate();
    return std::pow(2.0, -2.0 * level * params.hurst) * 0.5 * params.sigma * params.sigma * c_psi *
           variance_scale(params.hurst, norm);
}

/// Inverts the population energy at the selected level for sigma.
inline double estimate_sigma(const EnergyProfile& profile, const WaveletCovariance& cov, double hurst,
                             Normalization norm = Normalization::PaperKappa) {
    if (!(hurst > 0.0 && hurst < 1.0)) throw DomainError("estimate_sigma: H must lie in (0,1)");
    if (profile.j_star < 0) throw DomainError("estimate_sigma: level not selected");
    const double q = profile.q(profile.j_star);
    if (!(q > 0.0)) throw NumericalError("estimate_sigma: selected energy is not positive");
    const double s2 = 2.0 * std::pow(2.0, 2.0 * profile.j_star * hurst) * q /
                      (cov.c_psi(hurst) * variance_scale(hurst, norm));
    return std::sqrt(s2);
}

/// Theory level floor(log2(n) / (2H + 1)).
inline int theory_level(double hurst, int grid_exponent) {
    return static_cast<int>(std::floor(static_cast<double>(grid_exponent) / (2.0 * hurst + 1.0)));
}

/// Full pipeline: profile, level selection, H and (when possible) sigma.
inline EnergyProfile estimate(const NoisySeries& series, const CoefficientPlan& plan,
                              const WaveletCovariance& cov, const EstimatorOptions& options = {}) {
    auto profile = energy_profile(series, plan);
    select_level(profile);
    estimate_hurst(profile, options);
    if (profile.q(profile.j_star) > 0.0)
        profile.sigma_hat = estimate_sigma(profile, cov, profile.h_hat, options.normalization);
    return profile;
}

/// Split of dtilde - d into discretization bias b and noise term e for one
/// coefficient; d is the coefficient of the piecewise-linear interpolant.
struct CoefficientDecomposition {
    double dtilde = 0.0;
    double exact = 0.0;
    double bias = 0.0;
    double noise = 0.0;
};

/// Wavelet coefficients of the piecewise-linear interpolant of `path`.
inline std::vector<double> interpolant_coefficients(std::span<const double> path, const CoefficientPlan& plan,
                                                    int level) {
    if (path.size() != plan.n() + 1) throw SizeError("path length does not match the plan");
    const auto& w = plan.weights(level);
    const auto moments = cell_first_moments(plan.basis(), level, plan.grid_exponent());
    const double n = static_cast<double>(plan.n());
    std::vector<double> out(CoefficientPlan::shifts(level));
    for (std::size_t k = 0; k < out.size(); ++k) {
        const std::size_t base = k * w.cell_stride();
        double acc = 0.0;
        for (std::size_t l = 0; l < w.values.size(); ++l)
            acc += w.values[l] * path[base + l] + moments[l] * n * (path[base + l + 1] - path[base + l]);
        out[k] = acc;
    }
    return out;
}

/// Diagnostic split; needs the true path, so only available for simulations.
inline std::vector<CoefficientDecomposition> diagnostics_decompose(const NoisySeries& series,
                                                                   std::span<const double> path,
                                                                   const CoefficientPlan& plan, int level) {
    detail::check_series(series, plan);
    if (path.size() != series.y.size()) throw SizeError("path and series lengths differ");
    const auto& w = plan.weights(level);
    const auto exact = interpolant_coefficients(path, plan, level);
    std::vector<CoefficientDecomposition> out(exact.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const std::size_t base = k * w.cell_stride();
        const double clean = detail::weighted_sum(w.values, path, base);
        auto& d = out[k];
        d.dtilde = detail::weighted_sum(w.values, series.y, base);
        d.exact = exact[k];
        d.bias = clean - d.exact;
        d.noise = d.dtilde - d.exact - d.bias;
    }
    return out;
}

}  // namespace wavehurst
