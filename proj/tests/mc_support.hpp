#pragma once

// Monte Carlo helpers shared by the test binaries.

#include <cmath>
#include <cstddef>
#include <vector>

namespace wavehurst::testing {

/// Running mean and variance (Welford).
class RunningStats {
public:
    void add(double x) {
        ++count_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(count_);
        m2_ += d * (x - mean_);
    }
    std::size_t count() const { return count_; }
    double mean() const { return mean_; }
    double variance() const { return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0; }
    double standard_error() const { return std::sqrt(variance() / static_cast<double>(count_)); }

private:
    std::size_t count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Empirical E[X_a X_b] accumulator over sampled vectors at chosen indices.
class CrossMoments {
public:
    explicit CrossMoments(std::vector<std::size_t> indices)
        : indices_(std::move(indices)), stats_(indices_.size() * indices_.size()) {}

    template <class Vec>
    void add(const Vec& x) {
        for (std::size_t a = 0; a < indices_.size(); ++a)
            for (std::size_t b = 0; b < indices_.size(); ++b)
                stats_[a * indices_.size() + b].add(x[indices_[a]] * x[indices_[b]]);
    }

    const RunningStats& at(std::size_t a, std::size_t b) const { return stats_[a * indices_.size() + b]; }
    std::size_t index(std::size_t a) const { return indices_[a]; }
    std::size_t size() const { return indices_.size(); }

private:
    std::vector<std::size_t> indices_;
    std::vector<RunningStats> stats_;
};

}  // namespace wavehurst::testing
