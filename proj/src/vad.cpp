// src/vad.cpp

#include "accent/vad.hpp"

#include <algorithm>
#include <cmath>

#include "accent/error.hpp"

namespace accent {

namespace {

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double hi = v[mid];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

// Neighbourhood radius, in bins, used to decide whether a histogram bin is a mode.
constexpr int kPeakRadius = 2;

}  // namespace

void VadConfig::validate() const {
  if (!(frame_len_ms > 0.0) || !(hop_ms > 0.0) || !(min_segment_ms > 0.0)) {
    throw UsageError("vad: durations must be positive");
  }
  if (smooth_window < 1 || smooth_window % 2 == 0) throw UsageError("vad: smooth_window must be odd and >= 1");
  if (smooth_passes < 0) throw UsageError("vad: smooth_passes must be >= 0");
  if (!(threshold_weight >= 0.0)) throw UsageError("vad: threshold_weight must be >= 0");
}

std::pair<std::size_t, std::size_t> SpeechMask::slice(std::size_t i) const {
  const std::size_t b = std::min(i * hop, num_samples);
  const std::size_t e = i + 1 == keep.size() ? num_samples : std::min((i + 1) * hop, num_samples);
  return {b, e};
}

std::vector<std::pair<std::size_t, std::size_t>> SpeechMask::kept_ranges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (!keep[i]) continue;
    auto [b, e] = slice(i);
    if (b >= e) continue;
    if (!out.empty() && out.back().second == b) {
      out.back().second = e;
    } else {
      out.emplace_back(b, e);
    }
  }
  return out;
}

std::size_t SpeechMask::kept_samples() const {
  std::size_t n = 0;
  for (auto [b, e] : kept_ranges()) n += e - b;
  return n;
}

double spectral_centroid(const Spectrum& spec) {
  const Eigen::Index k = spec.magnitudes.size();
  const double den = spec.magnitudes.sum();
  if (den <= 0.0) return 0.0;
  const Eigen::VectorXd weights = Eigen::VectorXd::LinSpaced(k, 2.0, static_cast<double>(k + 1));
  return weights.dot(spec.magnitudes) / den;
}

std::vector<double> median_smooth(const std::vector<double>& values, int window) {
  if (window < 1 || window % 2 == 0) throw UsageError("median_smooth: window must be odd and >= 1");
  if (window == 1) return values;
  const auto n = static_cast<std::ptrdiff_t>(values.size());
  const std::ptrdiff_t half = window / 2;
  std::vector<double> out(values.size());
  std::vector<double> buf;
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t b = std::max<std::ptrdiff_t>(0, i - half);
    const std::ptrdiff_t e = std::min(n, i + half + 1);
    buf.assign(values.begin() + b, values.begin() + e);
    out[static_cast<std::size_t>(i)] = median_of(std::move(buf));
  }
  return out;
}

double estimate_threshold(const std::vector<double>& values, double weight) {
  if (values.size() < 2) throw UsageError("estimate_threshold: need at least two values");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) return median_of(values);

  const int bins = std::max(10, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(values.size())))));
  const double width = (hi - lo) / bins;
  std::vector<std::size_t> hist(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    const int b = std::min(bins - 1, static_cast<int>((v - lo) / width));
    ++hist[static_cast<std::size_t>(b)];
  }

  std::vector<double> modes;
  for (int i = 0; i < bins && modes.size() < 2; ++i) {
    const std::size_t c = hist[static_cast<std::size_t>(i)];
    if (c == 0) continue;
    bool peak = true;
    for (int j = std::max(0, i - kPeakRadius); j <= std::min(bins - 1, i + kPeakRadius) && peak; ++j) {
      const std::size_t cj = hist[static_cast<std::size_t>(j)];
      // Strict on the left so a plateau yields its leftmost bin only.
      if (j < i && cj >= c) peak = false;
      if (j > i && cj > c) peak = false;
    }
    if (peak) modes.push_back(lo + (i + 0.5) * width);
  }
  if (modes.size() < 2) return median_of(values);
  return (weight * modes[0] + modes[1]) / (weight + 1.0);
}

VadResult remove_silence(const AudioBuffer& audio, const VadConfig& cfg) {
  cfg.validate();
  VadResult res;
  const std::size_t n = audio.samples.size();
  const std::size_t frame_len = std::max<std::size_t>(1, ms_to_samples(cfg.frame_len_ms, audio.sample_rate));
  const std::size_t hop = std::max<std::size_t>(1, ms_to_samples(cfg.hop_ms, audio.sample_rate));
  res.mask.frame_len = frame_len;
  res.mask.hop = hop;
  res.mask.num_samples = n;
  res.mask.sample_rate = audio.sample_rate;

  if (n < frame_len) {
    res.speech = audio;
    res.mask.keep.assign(frame_count(n, frame_len, hop), true);
    res.compression_rate = 1.0;
    return res;
  }

  const FrameSequence frames = frame_signal(audio, frame_len, hop);
  const std::size_t nf = frames.size();
  std::vector<double> energy(nf), centroid(nf);
  for (std::size_t i = 0; i < nf; ++i) {
    const auto row = frames.frames.row(static_cast<Eigen::Index>(i)).transpose();
    energy[i] = short_time_energy(row);
    centroid[i] = spectral_centroid(magnitude_spectrum(row, audio.sample_rate));
  }

  res.speech.sample_rate = audio.sample_rate;
  if (*std::max_element(energy.begin(), energy.end()) <= 0.0) {
    // Digital silence: nothing can exceed a positive threshold.
    res.mask.keep.assign(nf, false);
    res.energy = Eigen::Map<Eigen::VectorXd>(energy.data(), static_cast<Eigen::Index>(nf));
    res.centroid = Eigen::Map<Eigen::VectorXd>(centroid.data(), static_cast<Eigen::Index>(nf));
    res.compression_rate = 0.0;
    return res;
  }

  for (int p = 0; p < cfg.smooth_passes; ++p) {
    energy = median_smooth(energy, cfg.smooth_window);
    centroid = median_smooth(centroid, cfg.smooth_window);
  }

  if (nf >= 2) {
    res.energy_threshold = estimate_threshold(energy, cfg.threshold_weight);
    res.centroid_threshold = estimate_threshold(centroid, cfg.threshold_weight);
  } else {
    res.energy_threshold = energy[0];
    res.centroid_threshold = centroid[0];
  }

  // Silence when either measure falls below its threshold.
  std::vector<bool> keep(nf);
  for (std::size_t i = 0; i < nf; ++i) {
    keep[i] = energy[i] > 0.0 && energy[i] >= res.energy_threshold && centroid[i] >= res.centroid_threshold;
  }

  const double frame_hop_ms = 1000.0 * static_cast<double>(hop) / audio.sample_rate;
  for (std::size_t i = 0; i < nf;) {
    if (!keep[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < nf && keep[j]) ++j;
    if (static_cast<double>(j - i) * frame_hop_ms < cfg.min_segment_ms) {
      for (std::size_t k = i; k < j; ++k) keep[k] = false;
    }
    i = j;
  }
  res.mask.keep = std::move(keep);

  for (auto [b, e] : res.mask.kept_ranges()) {
    res.speech.samples.insert(res.speech.samples.end(), audio.samples.begin() + static_cast<std::ptrdiff_t>(b),
                              audio.samples.begin() + static_cast<std::ptrdiff_t>(e));
  }
  res.compression_rate = static_cast<double>(res.speech.samples.size()) / static_cast<double>(n);
  res.energy = Eigen::Map<Eigen::VectorXd>(energy.data(), static_cast<Eigen::Index>(nf));
  res.centroid = Eigen::Map<Eigen::VectorXd>(centroid.data(), static_cast<Eigen::Index>(nf));
  return res;
}

}  // namespace accent
