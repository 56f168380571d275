#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace scaptcha {

using Complex = std::complex<double>;

inline constexpr int kCanonicalSampleRate = 16000;

/// Mono PCM signal with amplitudes in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = kCanonicalSampleRate;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  double duration_seconds() const noexcept {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// Full-length complex DFT of an AudioBuffer (bin count == buffer length).
struct Spectrum {
  std::vector<Complex> bins;
  int sample_rate = kCanonicalSampleRate;

  std::size_t size() const noexcept { return bins.size(); }
};

// WAV I/O. Only RIFF/WAVE, PCM 16-bit mono is accepted.
AudioBuffer load_wav(const std::filesystem::path& path);
void save_wav(const AudioBuffer& buffer, const std::filesystem::path& path);
AudioBuffer decode_wav(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_wav(const AudioBuffer& buffer);

/// Unnormalized forward DFT over the whole buffer. For real input the result
/// is exactly conjugate symmetric: bins[N-k] == conj(bins[k]).
Spectrum dft(const AudioBuffer& buffer);

/// Inverse of dft. The spectrum is projected onto its Hermitian part first,
/// so the imaginary residue of an asymmetric spectrum is discarded. Output is
/// clamped to [-1, 1]; the number of clamped samples goes to `clamped_count`
/// when given.
AudioBuffer idft(const Spectrum& spectrum, std::size_t* clamped_count = nullptr);

double rmse(const AudioBuffer& a, const AudioBuffer& b);

double max_magnitude(const Spectrum& spectrum);
double peak_amplitude(const AudioBuffer& buffer);

}  // namespace scaptcha
