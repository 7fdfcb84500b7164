// src/signal.cpp

#include "accent/signal.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <string>

#include <unsupported/Eigen/FFT>

#include "accent/binary_io.hpp"
#include "accent/error.hpp"

namespace accent {

namespace {

std::uint32_t le32(const std::string& b, std::size_t off) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[off])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 3])) << 24;
}

std::uint16_t le16(const std::string& b, std::size_t off) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[off]) |
                                    static_cast<unsigned char>(b[off + 1]) << 8);
}

void put32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>((v >> 8) & 0xff));
}

Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> fft;
  return fft;
}

}  // namespace

AudioBuffer load_audio(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = io::read_file(path);
  } catch (const DataError&) {
    throw DataError(path.string() + ": unreadable file");
  }
  auto fail = [&](const std::string& why) { return DataError(path.string() + ": " + why); };
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0) {
    throw fail("not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t data_off = 0, data_len = 0;
  bool have_data = false;

  std::size_t off = 12;
  while (off + 8 <= bytes.size()) {
    const std::string id = bytes.substr(off, 4);
    std::size_t len = le32(bytes, off + 4);
    const std::size_t body = off + 8;
    if (id == "fmt ") {
      if (len < 16 || body + 16 > bytes.size()) throw fail("truncated fmt chunk");
      std::uint16_t tag = le16(bytes, body);
      channels = le16(bytes, body + 2);
      rate = le32(bytes, body + 4);
      bits = le16(bytes, body + 14);
      if (tag == 0xFFFE && len >= 40 && body + 26 <= bytes.size()) {
        tag = le16(bytes, body + 24);  // sub-format GUID starts with the format tag
      }
      if (tag != 1) throw fail("unsupported encoding (format tag " + std::to_string(tag) + ")");
      have_fmt = true;
    } else if (id == "data") {
      data_off = body;
      data_len = std::min(len, bytes.size() - body);
      have_data = true;
    }
    off = body + len + (len & 1);
  }
  if (!have_fmt) throw fail("missing fmt chunk");
  if (bits != 8 && bits != 16) {
    throw fail("unsupported encoding (" + std::to_string(bits) + "-bit samples)");
  }
  if (channels == 0) throw fail("zero channels");
  if (rate == 0) throw fail("zero sample rate");

  AudioBuffer audio;
  audio.sample_rate = static_cast<int>(rate);
  if (!have_data) return audio;

  const std::size_t width = bits / 8;
  const std::size_t frames = data_len / (width * channels);
  audio.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t p = data_off + (i * channels + c) * width;
      if (bits == 16) {
        acc += static_cast<std::int16_t>(le16(bytes, p)) / 32768.0;
      } else {
        acc += (static_cast<unsigned char>(bytes[p]) - 128) / 128.0;
      }
    }
    audio.samples[i] = acc / channels;
  }
  return audio;
}

void save_audio(const std::filesystem::path& path, const AudioBuffer& audio) {
  const auto n = static_cast<std::uint32_t>(audio.samples.size());
  std::string b;
  b.reserve(44 + 2 * n);
  b += "RIFF";
  put32(b, 36 + 2 * n);
  b += "WAVEfmt ";
  put32(b, 16);
  put16(b, 1);
  put16(b, 1);
  put32(b, static_cast<std::uint32_t>(audio.sample_rate));
  put32(b, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  put16(b, 2);
  put16(b, 16);
  b += "data";
  put32(b, 2 * n);
  for (double s : audio.samples) {
    const double q = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    put16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0))));
  }
  io::write_file(path, b);
}

std::size_t ms_to_samples(double ms, int sample_rate) {
  return static_cast<std::size_t>(std::llround(ms * sample_rate / 1000.0));
}

std::size_t frame_count(std::size_t len, std::size_t frame_len, std::size_t hop) {
  if (len == 0) return 0;
  if (len < frame_len) return 1;
  return (len - frame_len) / hop + 1;
}

FrameSequence frame_signal(const AudioBuffer& audio, std::size_t frame_len, std::size_t hop) {
  if (frame_len == 0 || hop == 0) throw UsageError("frame length and hop must be positive");
  FrameSequence seq;
  seq.frame_len = frame_len;
  seq.hop = hop;
  seq.sample_rate = audio.sample_rate;
  const std::size_t len = audio.samples.size();
  const std::size_t n = frame_count(len, frame_len, hop);
  seq.frames = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(frame_len));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t start = i * hop;
    const std::size_t avail = std::min(frame_len, len - start);
    for (std::size_t j = 0; j < avail; ++j) {
      seq.frames(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = audio.samples[start + j];
    }
  }
  return seq;
}

FrameSequence frame_signal(const AudioBuffer& audio, double frame_len_ms, double hop_ms) {
  if (!(frame_len_ms > 0.0) || !(hop_ms > 0.0)) throw UsageError("frame length and hop must be positive");
  const std::size_t n = std::max<std::size_t>(1, ms_to_samples(frame_len_ms, audio.sample_rate));
  const std::size_t h = std::max<std::size_t>(1, ms_to_samples(hop_ms, audio.sample_rate));
  return frame_signal(audio, n, h);
}

Spectrum magnitude_spectrum(const Eigen::Ref<const Eigen::VectorXd>& frame, int sample_rate) {
  const auto n = static_cast<std::size_t>(frame.size());
  Spectrum spec;
  const std::size_t k = n / 2 + 1;
  spec.bin_hz = sample_rate > 0 && n > 0 ? static_cast<double>(sample_rate) / n : 0.0;
  if (n == 0) {
    spec.magnitudes = Eigen::VectorXd::Zero(1);
    return spec;
  }
  if (n == 1) {
    spec.magnitudes = frame.cwiseAbs();
    return spec;
  }
  std::vector<double> in(frame.data(), frame.data() + n);
  std::vector<std::complex<double>> out;
  fft_engine().fwd(out, in);
  spec.magnitudes.resize(static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j) spec.magnitudes[static_cast<Eigen::Index>(j)] = std::abs(out[j]);
  return spec;
}

Eigen::VectorXd power_spectrum(const Eigen::Ref<const Eigen::VectorXd>& frame, std::size_t fft_len) {
  if (fft_len == 0) throw UsageError("power_spectrum: fft length must be positive");
  if (fft_len == 1) return Eigen::VectorXd::Constant(1, frame.size() > 0 ? frame[0] * frame[0] : 0.0);
  std::vector<double> in(fft_len, 0.0);
  const std::size_t n = std::min<std::size_t>(fft_len, static_cast<std::size_t>(frame.size()));
  std::copy_n(frame.data(), n, in.begin());
  std::vector<std::complex<double>> out;
  fft_engine().fwd(out, in);
  Eigen::VectorXd p(static_cast<Eigen::Index>(fft_len / 2 + 1));
  for (Eigen::Index j = 0; j < p.size(); ++j) p[j] = std::norm(out[static_cast<std::size_t>(j)]);
  return p;
}

}  // namespace accent
