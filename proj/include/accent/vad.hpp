// accent/vad.hpp
//
// Silence removal by thresholding smoothed short-time energy and spectral
// centroid sequences.

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "accent/signal.hpp"

namespace accent {

struct VadConfig {
  double frame_len_ms = 50.0;
  double hop_ms = 25.0;
  int smooth_window = 5;   // odd
  int smooth_passes = 2;
  double threshold_weight = 5.0;
  double min_segment_ms = 100.0;

  void validate() const;
};

/// Per-frame keep decision plus the framing needed to map it back to samples.
struct SpeechMask {
  std::vector<bool> keep;
  std::size_t frame_len = 0;
  std::size_t hop = 0;
  std::size_t num_samples = 0;
  int sample_rate = 0;

  /// Sample range owned by frame i: its hop-length slice, with the last
  /// frame extended to the end of the signal.
  std::pair<std::size_t, std::size_t> slice(std::size_t i) const;
  /// Merged kept sample ranges in original time, [begin, end).
  std::vector<std::pair<std::size_t, std::size_t>> kept_ranges() const;
  std::size_t kept_samples() const;
};

struct VadResult {
  AudioBuffer speech;
  SpeechMask mask;
  double compression_rate = 1.0;
  Eigen::VectorXd energy;    // smoothed
  Eigen::VectorXd centroid;  // smoothed
  double energy_threshold = 0.0;
  double centroid_threshold = 0.0;
};

/// Mean squared amplitude of a frame.
template <typename Derived>
double short_time_energy(const Eigen::MatrixBase<Derived>& frame) {
  if (frame.size() == 0) return 0.0;
  return frame.squaredNorm() / static_cast<double>(frame.size());
}

/// Centroid in bin-index units with bins numbered k = 1..K and weight k + 1.
/// An all-zero spectrum has centroid 0.
double spectral_centroid(const Spectrum& spec);

/// Running median with truncated windows at the edges.
std::vector<double> median_smooth(const std::vector<double>& values, int window);

/// Histogram-based threshold between the first two modes M1 < M2:
/// (W*M1 + M2) / (W + 1). Falls back to the median when fewer than two
/// modes exist.
double estimate_threshold(const std::vector<double>& values, double weight);

VadResult remove_silence(const AudioBuffer& audio, const VadConfig& cfg);

}  // namespace accent
