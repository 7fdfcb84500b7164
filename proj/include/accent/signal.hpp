// accent/signal.hpp
//
// Audio ingestion, framing and spectral primitives.

#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace accent {

/// Mono samples in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 8000;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// Fixed-length analysis windows, one per row. The final partial frame is
/// zero-padded, so every frame has exactly frame_len samples.
struct FrameSequence {
  Eigen::MatrixXd frames;  // num_frames x frame_len
  std::size_t frame_len = 0;
  std::size_t hop = 0;
  int sample_rate = 0;

  std::size_t size() const { return static_cast<std::size_t>(frames.rows()); }
  std::size_t start(std::size_t i) const { return i * hop; }
};

/// One-sided magnitude spectrum. `magnitudes[j]` holds the bin the centroid
/// formula indexes as k = j + 1, so bin 1 is DC.
struct Spectrum {
  Eigen::VectorXd magnitudes;
  double bin_hz = 0.0;

  Eigen::Index size() const { return magnitudes.size(); }
};

/// Reads 8-bit unsigned or 16-bit signed linear PCM RIFF/WAVE files.
/// Multichannel input is averaged to mono.
AudioBuffer load_audio(const std::filesystem::path& path);

/// Writes 16-bit mono PCM. Samples are clipped to [-1, 1).
void save_audio(const std::filesystem::path& path, const AudioBuffer& audio);

std::size_t ms_to_samples(double ms, int sample_rate);

/// Number of frames produced for a signal of `len` samples.
std::size_t frame_count(std::size_t len, std::size_t frame_len, std::size_t hop);

FrameSequence frame_signal(const AudioBuffer& audio, std::size_t frame_len, std::size_t hop);
FrameSequence frame_signal(const AudioBuffer& audio, double frame_len_ms, double hop_ms);

/// |DFT| over floor(N/2)+1 bins of an unwindowed frame.
Spectrum magnitude_spectrum(const Eigen::Ref<const Eigen::VectorXd>& frame, int sample_rate = 0);

/// Power spectrum |X(k)|^2 of `frame` zero-padded to `fft_len`.
Eigen::VectorXd power_spectrum(const Eigen::Ref<const Eigen::VectorXd>& frame, std::size_t fft_len);

}  // namespace accent
