#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>

#include <fftw3.h>

namespace wavehurst::detail {

struct FftwDeleter {
    void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};

/// SIMD-aligned complex buffer owned by FFTW's allocator.
class ComplexBuffer {
public:
    explicit ComplexBuffer(std::size_t size)
        : size_(size), data_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * size))) {
        if (!data_) throw std::bad_alloc();
    }
    std::size_t size() const noexcept { return size_; }
    fftw_complex* data() noexcept { return data_.get(); }
    const fftw_complex* data() const noexcept { return data_.get(); }
    double& re(std::size_t i) noexcept { return data_.get()[i][0]; }
    double& im(std::size_t i) noexcept { return data_.get()[i][1]; }
    double re(std::size_t i) const noexcept { return data_.get()[i][0]; }
    double im(std::size_t i) const noexcept { return data_.get()[i][1]; }

private:
    std::size_t size_;
    std::unique_ptr<fftw_complex[], FftwDeleter> data_;
};

/// Process-wide cache of forward complex DFT plans. Planning is serialized
/// (FFTW's planner is not thread-safe); execution through new-array execute
/// is safe from any thread.
inline fftw_plan forward_plan(std::size_t size) {
    static std::mutex mutex;
    static std::map<std::size_t, fftw_plan> plans;
    std::lock_guard lock(mutex);
    auto it = plans.find(size);
    if (it != plans.end()) return it->second;
    ComplexBuffer in(size), out(size);
    auto plan = fftw_plan_dft_1d(static_cast<int>(size), in.data(), out.data(), FFTW_FORWARD, FFTW_ESTIMATE);
    plans.emplace(size, plan);
    return plan;
}

/// out = sum_k in[k] exp(-2 pi i jk / size).
inline void forward_dft(ComplexBuffer& in, ComplexBuffer& out) {
    fftw_execute_dft(forward_plan(in.size()), in.data(), out.data());
}

}  // namespace wavehurst::detail
