#pragma once

#include <complex>
#include <span>
#include <vector>

namespace motionmidi {

using Complex = std::complex<double>;

/// In-place radix-2 Cooley-Tukey FFT. Length must be a power of two
/// (LengthError otherwise).
void fft_inplace(std::vector<Complex>& x);
void ifft_inplace(std::vector<Complex>& x);

std::vector<Complex> fft(std::vector<Complex> x);
std::vector<Complex> ifft(std::vector<Complex> x);

/// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

/// Short-time Fourier transform magnitude features: frames of win samples at
/// the given hop, Hann-windowed, returned as frames x (win/2 + 1) values of
/// log(1 + |X|). Requires wave length >= win and power-of-two win.
std::vector<std::vector<double>> stft_log_magnitude(
    std::span<const double> wave, std::size_t win = 1024,
    std::size_t hop = 256);

}  // namespace motionmidi
