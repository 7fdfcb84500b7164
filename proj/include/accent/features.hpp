// accent/features.hpp
//
// PLP front end: Bark-band auditory spectrum, equal-loudness weighting,
// cube-root compression, all-pole modelling and cepstral recursion, followed
// by delta appending, mean/variance normalisation and context expansion.

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "accent/signal.hpp"

namespace accent {

struct PlpConfig {
  double frame_len_ms = 25.0;
  double hop_ms = 10.0;
  int lp_order = 12;
  int num_cepstra = 13;     // c0..c12
  int num_bark_bands = 0;   // 0: derived from Nyquist at 1-Bark spacing
  double preemphasis = 0.97;
  int delta_window = 2;

  void validate() const;
};

/// Frames x dims with the timing needed to locate each frame in the audio it
/// was computed from.
struct FeatureMatrix {
  Eigen::MatrixXd values;
  std::string utterance_id;
  double hop_ms = 10.0;
  double first_center_ms = 12.5;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index dims() const { return values.cols(); }
  double center_seconds(Eigen::Index i) const {
    return (first_center_ms + static_cast<double>(i) * hop_ms) / 1000.0;
  }
  /// Same timing and id, different values.
  FeatureMatrix with_values(Eigen::MatrixXd v) const {
    FeatureMatrix out{std::move(v), utterance_id, hop_ms, first_center_ms};
    return out;
  }
};

/// Natural log of the autocorrelation floor; frames below it emit
/// (kLogEnergyFloor, 0, ..., 0).
inline constexpr double kEnergyFloor = 1e-10;

double hz_to_bark(double hz);
double bark_to_hz(double bark);
int bark_band_count(int sample_rate);

/// Equal-loudness weight at `hz` (rational approximation of the 40 dB curve).
double equal_loudness(double hz);

/// Critical-band masking weight for a bin `delta_bark` above the band centre.
double critical_band_weight(double delta_bark);

struct LpcResult {
  Eigen::VectorXd a;   // a[0] = 1, error filter A(z) = sum a[k] z^-k
  double error = 0.0;  // final prediction error power
  bool ok = false;
};

/// Levinson-Durbin recursion on autocorrelation r[0..order].
LpcResult levinson_durbin(const Eigen::Ref<const Eigen::VectorXd>& r, int order);

/// Cepstrum of the all-pole model sqrt(gain)/A(z): c0 = log(gain), c1..c{n-1}.
Eigen::VectorXd lpc_to_cepstrum(const Eigen::Ref<const Eigen::VectorXd>& a, double gain, int num_cepstra);

/// Static PLP cepstra, one row per 25 ms frame.
FeatureMatrix plp_static(const AudioBuffer& audio, const PlpConfig& cfg);

/// Regression deltas over +-window frames with edge replication.
Eigen::MatrixXd compute_deltas(const Eigen::MatrixXd& x, int window);

/// [static | delta | delta-delta].
FeatureMatrix append_deltas(const FeatureMatrix& f, int delta_window);

struct MvnStats {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd stddev;  // 1 where the variance is zero
};

MvnStats mvn_stats(std::span<const FeatureMatrix> utterances);
FeatureMatrix apply_mvn(const FeatureMatrix& f, const MvnStats& stats);
/// Per-utterance normalisation with population standard deviation.
FeatureMatrix mvn(const FeatureMatrix& f);

/// Each row becomes [x(t-c) ... x(t) ... x(t+c)] with edge replication.
FeatureMatrix context_expand(const FeatureMatrix& f, int context);

/// ACFEAT1 archive: per utterance a header line
///   ACFEAT1 <id> <dims> <frames> <hop_ms> <first_center_ms>
/// followed by frames*dims binary64 little-endian values, row-major.
std::string serialize_features(std::span<const FeatureMatrix> utterances);
std::vector<FeatureMatrix> deserialize_features(const std::string& bytes);
void write_features(const std::filesystem::path& path, std::span<const FeatureMatrix> utterances);
std::vector<FeatureMatrix> read_features(const std::filesystem::path& path);

}  // namespace accent
