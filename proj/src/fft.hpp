#pragma once

#include <complex>
#include <vector>

namespace handshake::detail {

/// Unnormalized DFT of any length (inverse uses exp(+i...)).
std::vector<std::complex<double>> fft(std::vector<std::complex<double>> data, bool inverse = false);

}  // namespace handshake::detail
