#include <gtest/gtest.h>

#include <fstream>

#include "scaptcha/audio.hpp"
#include "scaptcha/error.hpp"
#include "scaptcha/reference.hpp"
#include "support.hpp"

using namespace scaptcha;
using namespace scaptcha::test;

namespace {

std::vector<std::uint8_t> wav_bytes(std::uint16_t format, std::uint16_t channels, std::uint16_t bits,
                                    const std::vector<std::int16_t>& data, int rate = 16000) {
  std::vector<std::uint8_t> out;
  auto u16 = [&](std::uint16_t v) {
    out.push_back(v & 0xff);
    out.push_back(v >> 8);
  };
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
  };
  auto tag = [&](const char* t) { out.insert(out.end(), t, t + 4); };
  const auto data_bytes = static_cast<std::uint32_t>(data.size() * 2);
  tag("RIFF");
  u32(36 + data_bytes);
  tag("WAVE");
  tag("fmt ");
  u32(16);
  u16(format);
  u16(channels);
  u32(rate);
  u32(rate * channels * bits / 8);
  u16(channels * bits / 8);
  u16(bits);
  tag("data");
  u32(data_bytes);
  for (auto s : data) u16(static_cast<std::uint16_t>(s));
  return out;
}

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST(LoadWav, SilenceOneSecond) {
  TempDir dir("wav");
  write_bytes(dir.path() / "s.wav", wav_bytes(1, 1, 16, std::vector<std::int16_t>(16000, 0)));
  const AudioBuffer b = load_wav(dir.path() / "s.wav");
  EXPECT_EQ(b.sample_rate, 16000);
  ASSERT_EQ(b.size(), 16000u);
  for (double s : b.samples) EXPECT_EQ(s, 0.0);
}

TEST(LoadWav, ExactScaling) {
  TempDir dir("wav");
  write_bytes(dir.path() / "h.wav", wav_bytes(1, 1, 16, std::vector<std::int16_t>(100, 16384)));
  for (double s : load_wav(dir.path() / "h.wav").samples) EXPECT_EQ(s, 0.5);
}

TEST(LoadWav, RejectsStereoDepthAndCompression) {
  EXPECT_EQ(kind_of([] { decode_wav(wav_bytes(1, 2, 16, {0, 0})); }), ErrorKind::UnsupportedFormat);
  EXPECT_EQ(kind_of([] { decode_wav(wav_bytes(1, 1, 8, {0})); }), ErrorKind::UnsupportedFormat);
  EXPECT_EQ(kind_of([] { decode_wav(wav_bytes(3, 1, 16, {0})); }), ErrorKind::UnsupportedFormat);
}

TEST(LoadWav, MalformedInputs) {
  EXPECT_EQ(kind_of([] { decode_wav(std::vector<std::uint8_t>{'R', 'I', 'F', 'F'}); }), ErrorKind::MalformedWav);
  auto truncated = wav_bytes(1, 1, 16, std::vector<std::int16_t>(50, 1));
  truncated.resize(truncated.size() - 10);
  EXPECT_EQ(kind_of([&] { decode_wav(truncated); }), ErrorKind::MalformedWav);
  auto no_data = wav_bytes(1, 1, 16, {});
  no_data.resize(36);
  EXPECT_EQ(kind_of([&] { decode_wav(no_data); }), ErrorKind::MalformedWav);
  EXPECT_EQ(kind_of([] { load_wav("/nonexistent/file.wav"); }), ErrorKind::IoError);
}

TEST(LoadWav, SkipsUnknownChunks) {
  auto bytes = wav_bytes(1, 1, 16, {100, -100});
  const std::vector<std::uint8_t> list = {'L', 'I', 'S', 'T', 3, 0, 0, 0, 'a', 'b', 'c', 0};
  bytes.insert(bytes.begin() + 36, list.begin(), list.end());
  const AudioBuffer b = decode_wav(bytes);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b.samples[0], 100.0 / 32768.0);
}

TEST(SaveWav, RoundTrips) {
  TempDir dir("wav");
  const AudioBuffer silence = buffer_of(std::vector<double>(1000, 0.0));
  save_wav(silence, dir.path() / "z.wav");
  EXPECT_EQ(load_wav(dir.path() / "z.wav").samples, silence.samples);

  const AudioBuffer half = buffer_of(std::vector<double>(1000, 0.5));
  save_wav(half, dir.path() / "h.wav");
  EXPECT_LE(max_abs_diff(load_wav(dir.path() / "h.wav").samples, half.samples), 1.0 / 32768.0);

  std::mt19937_64 rng(1);
  const AudioBuffer r = random_buffer(rng, 4000);
  save_wav(r, dir.path() / "r.wav");
  const AudioBuffer back = load_wav(dir.path() / "r.wav");
  EXPECT_EQ(back.sample_rate, r.sample_rate);
  EXPECT_LE(max_abs_diff(back.samples, r.samples), 1.0 / 32768.0);
}

TEST(SaveWav, UnwritablePath) {
  EXPECT_EQ(kind_of([] { save_wav(buffer_of({0.0}), "/nonexistent/dir/x.wav"); }), ErrorKind::IoError);
}

TEST(Dft, ZeroSignal) {
  const Spectrum s = dft(buffer_of(std::vector<double>(64, 0.0)));
  ASSERT_EQ(s.size(), 64u);
  for (const auto& b : s.bins) EXPECT_EQ(std::abs(b), 0.0);
}

TEST(Dft, CosineClosedForm) {
  const AudioBuffer x = cosine(64, 5);
  const Spectrum fast = dft(x);
  const Spectrum slow = reference::dft(x);
  for (std::size_t k = 0; k < 64; ++k) {
    const double expected = (k == 5 || k == 59) ? 32.0 : 0.0;
    EXPECT_NEAR(std::abs(fast.bins[k]), expected, 1e-9) << k;
    EXPECT_NEAR(std::abs(slow.bins[k]), expected, 1e-9) << k;
  }
}

TEST(Dft, MatchesDirectSummation) {
  std::mt19937_64 rng(2);
  for (std::size_t n : {1u, 2u, 7u, 64u, 255u, 256u, 1000u}) {
    const AudioBuffer x = random_buffer(rng, n);
    const Spectrum a = dft(x);
    const Spectrum b = reference::dft(x);
    double scale = 1.0;
    for (const auto& v : b.bins) scale = std::max(scale, std::abs(v));
    for (std::size_t k = 0; k < n; ++k) EXPECT_LE(std::abs(a.bins[k] - b.bins[k]), 1e-9 * scale) << n << " " << k;
  }
}

TEST(Dft, Parseval) {
  std::mt19937_64 rng(3);
  const AudioBuffer x = random_buffer(rng, 256);
  double time = 0.0, freq = 0.0;
  for (double s : x.samples) time += s * s;
  for (const auto& b : reference::dft(x).bins) freq += std::norm(b);
  EXPECT_NEAR(time, freq / 256.0, 1e-9 * time);
  freq = 0.0;
  for (const auto& b : dft(x).bins) freq += std::norm(b);
  EXPECT_NEAR(time, freq / 256.0, 1e-9 * time);
}

TEST(Dft, Linearity) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const AudioBuffer x = random_buffer(rng, 300, 0.4);
    const AudioBuffer y = random_buffer(rng, 300, 0.4);
    const double a = 0.7, b = -1.3;
    AudioBuffer z = x;
    for (std::size_t i = 0; i < z.size(); ++i) z.samples[i] = a * x.samples[i] + b * y.samples[i];
    const Spectrum sx = dft(x), sy = dft(y), sz = dft(z);
    double scale = 0.0;
    for (const auto& v : sz.bins) scale = std::max(scale, std::abs(v));
    for (std::size_t k = 0; k < 300; ++k) {
      EXPECT_LE(std::abs(sz.bins[k] - (a * sx.bins[k] + b * sy.bins[k])), 1e-9 * scale);
    }
  }
}

TEST(Dft, ConjugateSymmetricForRealInput) {
  std::mt19937_64 rng(5);
  const Spectrum s = dft(random_buffer(rng, 101));
  for (std::size_t k = 1; k < 101; ++k) EXPECT_EQ(s.bins[k], std::conj(s.bins[101 - k]));
}

TEST(Dft, EmptyInput) {
  EXPECT_EQ(kind_of([] { dft(AudioBuffer{}); }), ErrorKind::EmptyInput);
  EXPECT_EQ(kind_of([] { idft(Spectrum{}); }), ErrorKind::EmptyInput);
}

TEST(Idft, RoundTrip) {
  std::mt19937_64 rng(6);
  const AudioBuffer x = random_buffer(rng, 1024);
  EXPECT_LT(max_abs_diff(idft(dft(x)).samples, x.samples), 1e-6);
}

TEST(Idft, ZeroSpectrumAndCosine) {
  Spectrum zero;
  zero.sample_rate = 16000;
  zero.bins.assign(32, Complex{0.0, 0.0});
  for (double s : idft(zero).samples) EXPECT_EQ(s, 0.0);

  Spectrum c;
  c.sample_rate = 16000;
  c.bins.assign(64, Complex{0.0, 0.0});
  c.bins[5] = c.bins[59] = Complex{32.0, 0.0};
  EXPECT_LT(rmse(idft(c), cosine(64, 5)), 1e-6);
}

TEST(Idft, MatchesReferenceAndClamps) {
  std::mt19937_64 rng(7);
  const AudioBuffer x = random_buffer(rng, 200);
  Spectrum s = dft(x);
  for (auto& b : s.bins) b *= 0.5;
  EXPECT_LT(max_abs_diff(idft(s).samples, reference::idft_real(s)), 1e-12);

  Spectrum loud = dft(x);
  for (auto& b : loud.bins) b *= 10.0;
  std::size_t clamped = 0;
  const AudioBuffer out = idft(loud, &clamped);
  EXPECT_GT(clamped, 0u);
  for (double v : out.samples) EXPECT_LE(std::abs(v), 1.0);
}

TEST(Idft, AsymmetricSpectrumKeepsHermitianPart) {
  Spectrum s;
  s.sample_rate = 16000;
  s.bins.assign(16, Complex{0.0, 0.0});
  s.bins[3] = Complex{8.0, 0.0};  // partner bin 13 left at zero
  const auto ref = reference::idft_real(s);
  EXPECT_LT(max_abs_diff(idft(s).samples, ref), 1e-12);
}

TEST(Rmse, ClosedForms) {
  std::mt19937_64 rng(8);
  const AudioBuffer x = random_buffer(rng, 500, 0.5);
  EXPECT_EQ(rmse(x, x), 0.0);
  AudioBuffer y = x;
  for (double& s : y.samples) s += 0.1;
  EXPECT_NEAR(rmse(x, y), 0.1, 1e-12);
  EXPECT_EQ(kind_of([&] { rmse(x, buffer_of({0.0})); }), ErrorKind::LengthMismatch);
  EXPECT_EQ(kind_of([&] { rmse(x, buffer_of(x.samples, 8000)); }), ErrorKind::LengthMismatch);
}

TEST(Rmse, DirectSummationOracle) {
  std::mt19937_64 rng(9);
  const AudioBuffer a = random_buffer(rng, 1000), b = random_buffer(rng, 1000);
  long double acc = 0.0L;
  for (std::size_t i = 0; i < 1000; ++i) acc += static_cast<long double>(a.samples[i] - b.samples[i]) * (a.samples[i] - b.samples[i]);
  EXPECT_NEAR(rmse(a, b), static_cast<double>(std::sqrt(acc / 1000.0L)), 1e-12);
}

TEST(Rmse, SymmetricAndTriangle) {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 200; ++t) {
    const AudioBuffer a = random_buffer(rng, 64), b = random_buffer(rng, 64), c = random_buffer(rng, 64);
    EXPECT_EQ(rmse(a, b), rmse(b, a));
    EXPECT_LE(rmse(a, c), rmse(a, b) + rmse(b, c) + 1e-15);
  }
}
