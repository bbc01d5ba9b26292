#include "bwe/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace bwe::fft {
namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// One length, both directions, with plan-owned aligned buffers.
class Plan {
 public:
  explicit Plan(std::size_t n) : n_(n) {
    real_ = fftw_alloc_real(n);
    spec_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(planner_mutex());
    const int len = static_cast<int>(n);
    // FFTW_ESTIMATE keeps plans (and therefore results) reproducible run to run.
    forward_ = fftw_plan_dft_r2c_1d(len, real_, spec_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(len, spec_, real_, FFTW_ESTIMATE);
  }
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
    fftw_free(real_);
    fftw_free(spec_);
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;

  std::vector<std::complex<double>> forward(std::span<const double> x) {
    std::copy(x.begin(), x.end(), real_);
    fftw_execute(forward_);
    std::vector<std::complex<double>> out(n_ / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = {spec_[k][0], spec_[k][1]};
    return out;
  }

  std::vector<double> inverse(std::span<const std::complex<double>> bins) {
    for (std::size_t k = 0; k < n_ / 2 + 1; ++k) {
      spec_[k][0] = bins[k].real();
      spec_[k][1] = bins[k].imag();
    }
    // c2r destroys its input; the buffer is rewritten on every call.
    fftw_execute(inverse_);
    return std::vector<double>(real_, real_ + n_);
  }

 private:
  std::size_t n_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

Plan& plan_for(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<Plan>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<Plan>(n);
  return *slot;
}

}  // namespace

std::vector<std::complex<double>> rfft(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("rfft: empty input");
  return plan_for(x.size()).forward(x);
}

std::vector<double> irfft_unnormalized(std::span<const std::complex<double>> bins, std::size_t n) {
  if (n == 0 || bins.size() != n / 2 + 1) {
    throw std::invalid_argument("irfft: bin count must be n/2 + 1");
  }
  return plan_for(n).inverse(bins);
}

}  // namespace bwe::fft
