#pragma once

#include <cstdint>

#include "scaptcha/audio.hpp"

namespace scaptcha {

struct PerturbationParams {
  double decimation_fraction = 0.02;  ///< T_d as a fraction of the maximum bin magnitude.
  double clip_alpha = 0.0;            ///< absolute clipping value; T_c = max|X| - alpha.
  double noise_std_fraction = 0.0;    ///< Gaussian std as a fraction of peak amplitude.
  std::uint64_t rng_seed = 0;
  std::size_t frame_size = 0;         ///< 0 means one DFT over the whole signal.
};

/// Zero every bin whose magnitude is below td_fraction * max|X|. Bins k and
/// N-k are decided together (on the larger of the two magnitudes) so a real
/// signal stays real. Bins at or above the threshold are left untouched.
Spectrum decimate(const Spectrum& spectrum, double td_fraction);

/// Cap bin magnitudes at T_c = max|X| - alpha, keeping phase. alpha must lie
/// in [0, max|X|].
Spectrum clip(const Spectrum& spectrum, double alpha);

double decimation_threshold(const Spectrum& spectrum, double td_fraction);
double clipping_threshold(const Spectrum& spectrum, double alpha);

/// input + N(0, (fraction * peak)^2), clamped to [-1, 1]. Same seed, same output.
AudioBuffer add_gaussian_noise(const AudioBuffer& buffer, double noise_std_fraction, std::uint64_t seed);

/// idft(clip(decimate(dft(x), td_fraction), alpha)). alpha is checked against
/// the decimated spectrum's maximum.
AudioBuffer perturb_yeehaw(const AudioBuffer& buffer, double td_fraction, double alpha);

/// Same pipeline with alpha given as a fraction of the decimated maximum.
AudioBuffer perturb_yeehaw_relative(const AudioBuffer& buffer, double td_fraction, double alpha_fraction);

/// Decimation only (the Kenansville transform).
AudioBuffer perturb_decimate(const AudioBuffer& buffer, double td_fraction);

/// Framewise variant: non-overlapping frames of `frame_size` samples, each
/// perturbed independently with alpha relative to that frame's maximum.
AudioBuffer perturb_framewise(const AudioBuffer& buffer, double td_fraction, double alpha_fraction,
                              std::size_t frame_size);

}  // namespace scaptcha
