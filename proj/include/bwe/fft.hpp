#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace bwe::fft {

// Real-input transforms of arbitrary length backed by FFTW. Plans are cached per
// thread and per length; plan creation is serialized across threads.

/// Unnormalized forward transform: n real samples -> n/2 + 1 bins.
std::vector<std::complex<double>> rfft(std::span<const double> x);

/// Inverse of rfft without the 1/n factor: n/2 + 1 bins -> n real samples.
/// Imaginary parts of the DC bin (and of the Nyquist bin for even n) are ignored.
std::vector<double> irfft_unnormalized(std::span<const std::complex<double>> bins, std::size_t n);

}  // namespace bwe::fft
