#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "csv.hpp"
#include "error.hpp"

namespace wavehurst {

/// Scaling filter of the Daubechies wavelet with two vanishing moments,
/// normalized so that the coefficients sum to sqrt(2).
inline std::vector<double> daubechies2_filter() {
    const double r3 = std::sqrt(3.0);
    const double d = 4.0 * std::numbers::sqrt2;
    return {(1.0 + r3) / d, (3.0 + r3) / d, (3.0 - r3) / d, (1.0 - r3) / d};
}

/// Mother wavelet tabulated on the dyadic grid m / 2^R of [0, S].
struct WaveletBasis {
    std::vector<double> filter;
    int support = 0;        // S: supp psi lies in [0, S]
    int cascade_depth = 0;  // R
    std::vector<double> psi_table;  // S * 2^R + 1 values

    double step() const noexcept { return std::ldexp(1.0, -cascade_depth); }
    std::size_t points_per_unit() const noexcept { return std::size_t{1} << cascade_depth; }

    /// Coarsest level whose [0,1/2]-located coefficients stay clear of the border.
    int min_level() const noexcept {
        return static_cast<int>(std::ceil(std::log2(static_cast<double>(support - 1)))) + 2;
    }

    /// psi at t; exact at grid points, zero outside [0, S], linear in between.
    double psi(double t) const noexcept {
        if (t <= 0.0 || t >= support) return 0.0;
        const double pos = t * static_cast<double>(points_per_unit());
        const auto i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        if (i + 1 >= psi_table.size()) return psi_table.back();
        return (1.0 - frac) * psi_table[i] + frac * psi_table[i + 1];
    }

    /// Same wavelet on the coarser grid of depth `depth` (exact restriction).
    WaveletBasis restricted(int depth) const {
        if (depth > cascade_depth || depth < 0) throw DomainError("restricted: depth must not exceed the table depth");
        const std::size_t stride = std::size_t{1} << (cascade_depth - depth);
        WaveletBasis out{filter, support, depth, {}};
        out.psi_table.reserve(psi_table.size() / stride + 1);
        for (std::size_t i = 0; i < psi_table.size(); i += stride) out.psi_table.push_back(psi_table[i]);
        return out;
    }
};

namespace detail {

/// Scaling function at the dyadic points i / 2^depth of [0, L-1], computed
/// exactly (up to rounding) from its values at the integers by repeated
/// application of the two-scale relation.
inline std::vector<double> tabulate_scaling_function(std::span<const double> h, int depth) {
    const std::size_t taps = h.size();
    const std::size_t span_len = taps - 1;
    const std::size_t unit = std::size_t{1} << depth;
    const std::size_t last = span_len * unit;

    // Integer nodes 1..L-2: eigenvector of the refinement matrix for eigenvalue 1.
    const std::size_t inner = taps - 2;
    Eigen::MatrixXd refine = Eigen::MatrixXd::Zero(inner, inner);
    for (std::size_t a = 0; a < inner; ++a)
        for (std::size_t b = 0; b < inner; ++b) {
            const long k = 2 * static_cast<long>(a + 1) - static_cast<long>(b + 1);
            if (k >= 0 && k < static_cast<long>(taps)) refine(a, b) = std::numbers::sqrt2 * h[k];
        }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(refine - Eigen::MatrixXd::Identity(inner, inner));
    Eigen::MatrixXd kernel = lu.kernel();
    if (kernel.cols() != 1) throw NumericalError("refinement matrix has no unique fixed point");
    Eigen::VectorXd nodes = kernel.col(0);
    nodes /= nodes.sum();

    std::vector<double> phi(last + 1, 0.0);
    for (std::size_t a = 0; a < inner; ++a) phi[(a + 1) * unit] = nodes(static_cast<Eigen::Index>(a));

    for (int r = 1; r <= depth; ++r) {
        const std::size_t stride = std::size_t{1} << (depth - r);
        for (std::size_t i = stride; i < last; i += 2 * stride) {
            double acc = 0.0;
            for (std::size_t k = 0; k < taps; ++k) {
                const long idx = 2 * static_cast<long>(i) - static_cast<long>(k * unit);
                if (idx > 0 && idx < static_cast<long>(last)) acc += h[k] * phi[static_cast<std::size_t>(idx)];
            }
            phi[i] = std::numbers::sqrt2 * acc;
        }
    }
    return phi;
}

/// psi(m / 2^R) from phi tabulated at depth R - 1, via psi(x) = sqrt2 sum_k g_k phi(2x - k).
inline std::vector<double> tabulate_wavelet(std::span<const double> h, std::span<const double> phi, int depth,
                                            std::size_t stride) {
    const std::size_t taps = h.size();
    const std::size_t unit = std::size_t{1} << depth;
    const std::size_t half_unit = unit / 2 * stride;
    const std::size_t phi_last = phi.size() - 1;
    std::vector<double> psi((taps - 1) * unit + 1, 0.0);
    for (std::size_t m = 0; m < psi.size(); ++m) {
        double acc = 0.0;
        for (std::size_t k = 0; k < taps; ++k) {
            const double g = (k % 2 == 0 ? 1.0 : -1.0) * h[taps - 1 - k];
            const long idx = static_cast<long>(m * stride) - static_cast<long>(k * half_unit);
            if (idx > 0 && idx < static_cast<long>(phi_last)) acc += g * phi[static_cast<std::size_t>(idx)];
        }
        psi[m] = std::numbers::sqrt2 * acc;
    }
    return psi;
}

}  // namespace detail

/// Tabulates the Daubechies-2 wavelet at spacing 2^-R.
inline WaveletBasis build_basis(int cascade_depth) {
    if (cascade_depth < 10) throw DomainError("cascade depth must be at least 10");
    if (cascade_depth > 28) throw DomainError("cascade depth above 28 exceeds the table size guard");
    WaveletBasis basis;
    basis.filter = daubechies2_filter();
    basis.support = static_cast<int>(basis.filter.size()) - 1;
    basis.cascade_depth = cascade_depth;

    const auto phi = detail::tabulate_scaling_function(basis.filter, cascade_depth - 1);
    basis.psi_table = detail::tabulate_wavelet(basis.filter, phi, cascade_depth, 1);

    // The depth R-1 tabulation (every other phi node) must agree with the
    // even-indexed entries of the depth R table.
    const auto coarse = detail::tabulate_wavelet(basis.filter, phi, cascade_depth - 1, 2);
    double gap = 0.0;
    for (std::size_t m = 0; m < coarse.size(); ++m) gap = std::max(gap, std::abs(coarse[m] - basis.psi_table[2 * m]));
    if (gap > 1e-10) throw NumericalError("cascade iterates disagree by " + std::to_string(gap));
    return basis;
}

/// Cascade depth used for a grid of exponent N: enough table points per
/// data cell at every level down to the basis' minimum level.
inline int default_cascade_depth(int grid_exponent, int min_level = 3) {
    return std::max(grid_exponent - min_level + 4, 14);
}

/// Integrals of psi_{j,0} over the data cells [l/2^N, (l+1)/2^N],
/// l = 0..S*2^(N-j)-1. psi_{j,k} uses the same weights shifted by k*2^(N-j) cells.
struct CellIntegrals {
    int level = 0;
    int grid_exponent = 0;
    std::vector<double> values;
    double sum_of_squares = 0.0;

    std::size_t cell_stride() const noexcept { return std::size_t{1} << (grid_exponent - level); }
};

namespace detail {

inline void check_cell_request(const WaveletBasis& basis, int level, int grid_exponent) {
    if (level < basis.min_level() || 2 * level > grid_exponent)
        throw DomainError("level " + std::to_string(level) + " outside [" + std::to_string(basis.min_level()) +
                          ", N/2] for N = " + std::to_string(grid_exponent));
    if (basis.cascade_depth < grid_exponent - level + 4)
        throw DomainError("cascade depth " + std::to_string(basis.cascade_depth) + " too coarse for level " +
                          std::to_string(level) + " at N = " + std::to_string(grid_exponent) +
                          " (needs at least 16 table points per cell)");
}

/// Trapezoid weights of the table points within one cell, times `weight(u - u_cell_start)`.
template <class Weight>
std::vector<double> integrate_cells(const WaveletBasis& basis, int level, int grid_exponent, double scale,
                                    Weight weight) {
    const std::size_t per_cell = std::size_t{1} << (basis.cascade_depth - grid_exponent + level);
    const std::size_t cells = static_cast<std::size_t>(basis.support) << (grid_exponent - level);
    const double h = basis.step();
    std::vector<double> out(cells);
    for (std::size_t l = 0; l < cells; ++l) {
        const std::size_t a = l * per_cell;
        double acc = 0.5 * (basis.psi_table[a] * weight(0.0) + basis.psi_table[a + per_cell] * weight(per_cell * h));
        for (std::size_t i = 1; i < per_cell; ++i) acc += basis.psi_table[a + i] * weight(static_cast<double>(i) * h);
        out[l] = scale * h * acc;
    }
    return out;
}

}  // namespace detail

inline CellIntegrals cell_integrals(const WaveletBasis& basis, int level, int grid_exponent) {
    detail::check_cell_request(basis, level, grid_exponent);
    CellIntegrals out{level, grid_exponent, {}, 0.0};
    out.values = detail::integrate_cells(basis, level, grid_exponent, std::pow(2.0, -0.5 * level),
                                         [](double) { return 1.0; });
    for (double v : out.values) out.sum_of_squares += v * v;
    return out;
}

/// First moments int_cell psi_{j,0}(t) (t - t_cell_start) dt over the same cells.
inline std::vector<double> cell_first_moments(const WaveletBasis& basis, int level, int grid_exponent) {
    detail::check_cell_request(basis, level, grid_exponent);
    // u = 2^j t, so (t - t_l) dt = 2^-2j (u - u_l) du, and psi_{j,0} = 2^{j/2} psi(u).
    const double scale = std::pow(2.0, -1.5 * level);
    return detail::integrate_cells(basis, level, grid_exponent, scale, [](double du) { return du; });
}

inline void write_psi_csv(std::ostream& out, const WaveletBasis& basis) {
    out << "t,psi\n";
    const double h = basis.step();
    for (std::size_t i = 0; i < basis.psi_table.size(); ++i)
        out << csv::format_double(static_cast<double>(i) * h) << ',' << csv::format_double(basis.psi_table[i]) << '\n';
}

}  // namespace wavehurst
