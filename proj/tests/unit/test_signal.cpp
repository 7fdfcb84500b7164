// tests/unit/test_signal.cpp

#include <doctest.h>

#include <cstdint>
#include <string>

#include "accent/binary_io.hpp"
#include "accent/error.hpp"
#include "accent/signal.hpp"
#include "support.hpp"

using namespace accent;
using accent::testing::ScratchDir;

namespace {

void put16(std::string& b, std::uint16_t v) {
  b += static_cast<char>(v & 0xff);
  b += static_cast<char>(v >> 8);
}

void put32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b += static_cast<char>((v >> (8 * i)) & 0xff);
}

std::string wav_bytes(std::uint16_t format, std::uint16_t channels, std::uint32_t rate, std::uint16_t bits,
                      const std::string& payload) {
  std::string b = "RIFF";
  put32(b, static_cast<std::uint32_t>(36 + payload.size()));
  b += "WAVEfmt ";
  put32(b, 16);
  put16(b, format);
  put16(b, channels);
  put32(b, rate);
  put32(b, rate * channels * bits / 8);
  put16(b, static_cast<std::uint16_t>(channels * bits / 8));
  put16(b, bits);
  b += "data";
  put32(b, static_cast<std::uint32_t>(payload.size()));
  return b + payload;
}

}  // namespace

TEST_CASE("16-bit constant 16384 decodes to 0.5") {
  ScratchDir dir("signal");
  std::string payload;
  for (int i = 0; i < 10; ++i) put16(payload, 16384);
  io::write_file(dir / "a.wav", wav_bytes(1, 1, 8000, 16, payload));
  const AudioBuffer a = load_audio(dir / "a.wav");
  CHECK(a.sample_rate == 8000);
  REQUIRE(a.samples.size() == 10);
  for (double s : a.samples) CHECK(s == 0.5);
}

TEST_CASE("empty data chunk gives an empty buffer") {
  ScratchDir dir("signal");
  io::write_file(dir / "a.wav", wav_bytes(1, 1, 16000, 16, ""));
  const AudioBuffer a = load_audio(dir / "a.wav");
  CHECK(a.samples.empty());
  CHECK(a.sample_rate == 16000);
}

TEST_CASE("stereo is averaged to mono") {
  ScratchDir dir("signal");
  std::string payload;
  put16(payload, 16384);
  put16(payload, 0);
  put16(payload, static_cast<std::uint16_t>(-16384));
  put16(payload, static_cast<std::uint16_t>(-16384));
  io::write_file(dir / "a.wav", wav_bytes(1, 2, 8000, 16, payload));
  const AudioBuffer a = load_audio(dir / "a.wav");
  REQUIRE(a.samples.size() == 2);
  CHECK(a.samples[0] == 0.25);
  CHECK(a.samples[1] == -0.5);
}

TEST_CASE("8-bit unsigned samples are centred on 128") {
  ScratchDir dir("signal");
  const std::string payload = {static_cast<char>(128), static_cast<char>(192), static_cast<char>(0)};
  io::write_file(dir / "a.wav", wav_bytes(1, 1, 8000, 8, payload));
  const AudioBuffer a = load_audio(dir / "a.wav");
  REQUIRE(a.samples.size() == 3);
  CHECK(a.samples[0] == 0.0);
  CHECK(a.samples[1] == 0.5);
  CHECK(a.samples[2] == -1.0);
}

TEST_CASE("unsupported or malformed files raise DataError") {
  ScratchDir dir("signal");
  io::write_file(dir / "float.wav", wav_bytes(3, 1, 8000, 32, std::string(8, '\0')));
  CHECK_THROWS_AS(load_audio(dir / "float.wav"), DataError);
  io::write_file(dir / "bits24.wav", wav_bytes(1, 1, 8000, 24, std::string(6, '\0')));
  CHECK_THROWS_AS(load_audio(dir / "bits24.wav"), DataError);
  io::write_file(dir / "junk.wav", "not audio at all");
  CHECK_THROWS_AS(load_audio(dir / "junk.wav"), DataError);
  CHECK_THROWS_AS(load_audio(dir / "missing.wav"), DataError);
}

TEST_CASE("save then load keeps 16-bit values") {
  ScratchDir dir("signal");
  AudioBuffer a;
  a.sample_rate = 16000;
  a.samples = {0.0, 0.5, -0.5, 0.25, -1.0};
  save_audio(dir / "a.wav", a);
  const AudioBuffer b = load_audio(dir / "a.wav");
  CHECK(b.sample_rate == 16000);
  CHECK(b.samples == a.samples);
}

TEST_CASE("frame counts") {
  CHECK(frame_count(100, 50, 25) == 3);
  CHECK(frame_count(49, 50, 25) == 1);
  CHECK(frame_count(0, 50, 25) == 0);
  AudioBuffer a;
  a.sample_rate = 8000;
  a.samples.assign(8000, 0.1);
  const FrameSequence f = frame_signal(a, 50.0, 25.0);
  CHECK(f.size() == 39);
  CHECK(f.frame_len == 400);
  CHECK(f.hop == 200);
  CHECK_THROWS_AS(frame_signal(a, 0.0, 25.0), UsageError);
}

TEST_CASE("frames copy the signal and zero-pad the tail") {
  AudioBuffer a;
  a.sample_rate = 1000;
  for (int i = 0; i < 7; ++i) a.samples.push_back(i + 1);
  const FrameSequence f = frame_signal(a, std::size_t{10}, std::size_t{5});
  REQUIRE(f.size() == 1);
  for (int i = 0; i < 7; ++i) CHECK(f.frames(0, i) == i + 1);
  for (int i = 7; i < 10; ++i) CHECK(f.frames(0, i) == 0.0);

  a.samples.assign(20, 0.0);
  for (int i = 0; i < 20; ++i) a.samples[i] = i;
  const FrameSequence g = frame_signal(a, std::size_t{8}, std::size_t{4});
  CHECK(g.size() == 4);
  CHECK(g.frames(2, 0) == 8.0);
  CHECK(g.frames(3, 7) == 19.0);
}

TEST_CASE("magnitude spectrum matches a direct DFT") {
  Rng rng(3);
  for (int n : {1, 2, 7, 16, 33, 400}) {
    const Eigen::VectorXd x = accent::testing::random_matrix(rng, n, 1);
    const Spectrum s = magnitude_spectrum(x, 8000);
    const Eigen::VectorXd ref = accent::testing::naive_dft_magnitude(x);
    REQUIRE(s.size() == ref.size());
    CHECK(accent::testing::max_abs_diff(s.magnitudes, ref) < 1e-9);
    CHECK(s.bin_hz == doctest::Approx(8000.0 / n));
  }
}

TEST_CASE("power spectrum zero-pads before the DFT") {
  Rng rng(5);
  const Eigen::VectorXd x = accent::testing::random_matrix(rng, 20, 1);
  Eigen::VectorXd padded = Eigen::VectorXd::Zero(32);
  padded.head(20) = x;
  const Eigen::VectorXd ref = accent::testing::naive_dft_magnitude(padded).array().square();
  CHECK(accent::testing::max_abs_diff(power_spectrum(x, 32), ref) < 1e-9);
}

TEST_CASE("ms_to_samples rounds") {
  CHECK(ms_to_samples(25.0, 8000) == 200);
  CHECK(ms_to_samples(12.5, 16000) == 200);
  CHECK(ms_to_samples(0.0625, 8000) == 1);
}
