#pragma once

// Direct O(N^2) transforms. Slow on purpose; they are the oracle the FFT
// path is tested and benchmarked against.

#include "scaptcha/audio.hpp"

namespace scaptcha {

enum class Execution { Parallel, Serial };

namespace reference {

Spectrum dft(const AudioBuffer& buffer);
/// Real part of the direct inverse sum, scaled by 1/N, no clamping.
std::vector<double> idft_real(const Spectrum& spectrum);

}  // namespace reference
}  // namespace scaptcha
