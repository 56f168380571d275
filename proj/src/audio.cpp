#include "scaptcha/audio.hpp"

#include <fftw3.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>

#include "scaptcha/error.hpp"
#include "scaptcha/reference.hpp"

namespace scaptcha {
namespace {

// FFTW's planner is not re-entrant; execution of an existing plan on new
// arrays is. Plans are created once per (size, direction) and kept for the
// process lifetime.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan forward(int n) { return get(n, true); }
  fftw_plan inverse(int n) { return get(n, false); }

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(int n, bool forward) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_pair(n, forward);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<double> real(static_cast<std::size_t>(n));
    std::vector<fftw_complex> half(static_cast<std::size_t>(n / 2 + 1));
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan plan = forward ? fftw_plan_dft_r2c_1d(n, real.data(), half.data(), flags)
                             : fftw_plan_dft_c2r_1d(n, half.data(), real.data(), flags);
    plans_.emplace(key, plan);
    return plan;
  }

  std::mutex mutex_;
  std::map<std::pair<int, bool>, fftw_plan> plans_;
};

fftw_complex* as_fftw(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

std::int16_t quantize(double sample) {
  const double scaled = std::round(std::clamp(sample, -1.0, 1.0) * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

}  // namespace

AudioBuffer decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE")) {
    throw Error(ErrorKind::MalformedWav, "missing RIFF/WAVE header");
  }
  bool have_fmt = false;
  int sample_rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t chunk_size = get_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (tag_is(bytes, pos, "fmt ")) {
      if (chunk_size < 16 || body + 16 > bytes.size()) {
        throw Error(ErrorKind::MalformedWav, "truncated fmt chunk");
      }
      const std::uint16_t format = get_u16(bytes, body);
      const std::uint16_t channels = get_u16(bytes, body + 2);
      sample_rate = static_cast<int>(get_u32(bytes, body + 4));
      const std::uint16_t bits = get_u16(bytes, body + 14);
      if (format != 1) throw Error(ErrorKind::UnsupportedFormat, "compressed audio (format " + std::to_string(format) + ")");
      if (channels != 1) throw Error(ErrorKind::UnsupportedFormat, std::to_string(channels) + " channels; only mono is accepted");
      if (bits != 16) throw Error(ErrorKind::UnsupportedFormat, std::to_string(bits) + "-bit samples; only 16-bit PCM is accepted");
      if (sample_rate <= 0) throw Error(ErrorKind::MalformedWav, "non-positive sample rate");
      have_fmt = true;
    } else if (tag_is(bytes, pos, "data")) {
      if (!have_fmt) throw Error(ErrorKind::MalformedWav, "data chunk before fmt chunk");
      if (body + chunk_size > bytes.size() || chunk_size % 2 != 0) {
        throw Error(ErrorKind::MalformedWav, "truncated data chunk");
      }
      AudioBuffer out;
      out.sample_rate = sample_rate;
      out.samples.resize(chunk_size / 2);
      for (std::size_t i = 0; i < out.samples.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(get_u16(bytes, body + 2 * i));
        out.samples[i] = raw / 32768.0;
      }
      return out;
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }
  throw Error(ErrorKind::MalformedWav, have_fmt ? "no data chunk" : "no fmt chunk");
}

std::vector<std::uint8_t> encode_wav(const AudioBuffer& buffer) {
  if (buffer.sample_rate <= 0) throw Error(ErrorKind::InvalidArgument, "sample rate must be positive");
  const auto data_bytes = static_cast<std::uint32_t>(buffer.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(buffer.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(buffer.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double s : buffer.samples) put_u16(out, static_cast<std::uint16_t>(quantize(s)));
  return out;
}

AudioBuffer load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

void save_wav(const AudioBuffer& buffer, const std::filesystem::path& path) {
  const auto bytes = encode_wav(buffer);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::IoError, "short write to " + path.string());
}

Spectrum dft(const AudioBuffer& buffer) {
  if (buffer.empty()) throw Error(ErrorKind::EmptyInput, "dft of an empty buffer");
  const int n = static_cast<int>(buffer.size());
  Spectrum out;
  out.sample_rate = buffer.sample_rate;
  out.bins.resize(buffer.size());
  std::vector<double> in = buffer.samples;
  fftw_execute_dft_r2c(PlanCache::instance().forward(n), in.data(), as_fftw(out.bins.data()));
  for (int k = n / 2 + 1; k < n; ++k) out.bins[k] = std::conj(out.bins[n - k]);
  return out;
}

AudioBuffer idft(const Spectrum& spectrum, std::size_t* clamped_count) {
  if (spectrum.bins.empty()) throw Error(ErrorKind::EmptyInput, "idft of an empty spectrum");
  const int n = static_cast<int>(spectrum.size());
  const auto& x = spectrum.bins;
  std::vector<Complex> half(static_cast<std::size_t>(n / 2 + 1));
  for (int k = 0; k <= n / 2; ++k) {
    const int mirror = (n - k) % n;
    half[k] = 0.5 * (x[k] + std::conj(x[mirror]));
  }
  AudioBuffer out;
  out.sample_rate = spectrum.sample_rate;
  out.samples.resize(spectrum.size());
  fftw_execute_dft_c2r(PlanCache::instance().inverse(n), as_fftw(half.data()), out.samples.data());
  std::size_t clamped = 0;
  const double scale = 1.0 / n;
  for (double& s : out.samples) {
    s *= scale;
    if (s > 1.0 || s < -1.0) {
      s = std::clamp(s, -1.0, 1.0);
      ++clamped;
    }
  }
  if (clamped > 0) spdlog::debug("idft: clamped {} of {} samples to [-1, 1]", clamped, n);
  if (clamped_count != nullptr) *clamped_count = clamped;
  return out;
}

double rmse(const AudioBuffer& a, const AudioBuffer& b) {
  if (a.size() != b.size() || a.sample_rate != b.sample_rate) {
    throw Error(ErrorKind::LengthMismatch, "rmse needs equal lengths and rates");
  }
  if (a.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.samples[i] - b.samples[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

double max_magnitude(const Spectrum& spectrum) {
  double m = 0.0;
  for (const auto& bin : spectrum.bins) m = std::max(m, std::abs(bin));
  return m;
}

double peak_amplitude(const AudioBuffer& buffer) {
  double m = 0.0;
  for (double s : buffer.samples) m = std::max(m, std::abs(s));
  return m;
}

namespace reference {

Spectrum dft(const AudioBuffer& buffer) {
  if (buffer.empty()) throw Error(ErrorKind::EmptyInput, "dft of an empty buffer");
  const std::size_t n = buffer.size();
  Spectrum out;
  out.sample_rate = buffer.sample_rate;
  out.bins.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc{0.0, 0.0};
    for (std::size_t t = 0; t < n; ++t) {
      // (k * t) mod n keeps the twiddle argument small for large n.
      const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      acc += buffer.samples[t] * Complex(std::cos(angle), std::sin(angle));
    }
    out.bins[k] = acc;
  }
  return out;
}

std::vector<double> idft_real(const Spectrum& spectrum) {
  const std::size_t n = spectrum.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      acc += (spectrum.bins[k] * Complex(std::cos(angle), std::sin(angle))).real();
    }
    out[t] = acc / static_cast<double>(n);
  }
  return out;
}

}  // namespace reference
}  // namespace scaptcha
