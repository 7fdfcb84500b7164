// tests/support.hpp
//
// Shared helpers for the unit and acceptance tests: scratch directories,
// random data and direct-formula reference implementations.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "accent/discriminant.hpp"
#include "accent/gmm.hpp"
#include "accent/rng.hpp"
#include "accent/signal.hpp"

namespace accent::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("accent_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

inline GmmModel random_gmm(Rng& rng, Eigen::Index n, Eigen::Index m) {
  GmmModel g;
  g.weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) g.weights[i] = rng.uniform(0.1, 1.0);
  g.weights /= g.weights.sum();
  g.means = random_matrix(rng, n, m, 2.0);
  g.variances.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) g.variances(i, j) = rng.uniform(0.2, 3.0);
  }
  return g;
}

/// Product of univariate normal densities, written out term by term.
inline double naive_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::VectorXd& var) {
  double p = 1.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double d = x[j] - mean[j];
    p *= std::exp(-d * d / (2.0 * var[j])) / std::sqrt(2.0 * std::numbers::pi * var[j]);
  }
  return p;
}

inline double naive_mixture_density(const GmmModel& g, const Eigen::VectorXd& x) {
  double p = 0.0;
  for (Eigen::Index i = 0; i < g.n_components(); ++i) {
    p += g.weights[i] * naive_density(x, g.means.row(i).transpose(), g.variances.row(i).transpose());
  }
  return p;
}

/// O(N^2) DFT magnitude over floor(N/2)+1 bins.
inline Eigen::VectorXd naive_dft_magnitude(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd out(n / 2 + 1);
  for (Eigen::Index k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = std::abs(acc);
  }
  return out;
}

/// Alternating speech-like and near-silent stretches at 8 kHz. Speech is
/// white noise through a resonant band-pass around 1 kHz at unit-scale RMS;
/// silence is low-passed noise at amplitude 1e-4. `speech` flags each sample.
struct VadSignal {
  AudioBuffer audio;
  std::vector<bool> speech;
  double speech_fraction() const {
    double n = 0.0;
    for (bool b : speech) n += b ? 1.0 : 0.0;
    return n / static_cast<double>(speech.size());
  }
};

inline VadSignal make_vad_signal(std::uint64_t seed, double speech_seconds = 7.0, double silence_seconds = 3.0) {
  Rng rng(seed);
  VadSignal s;
  s.audio.sample_rate = 8000;
  const int fs = s.audio.sample_rate;
  // Silence at both ends and between speech bursts.
  const int bursts = 4;
  std::vector<double> sil(bursts + 1, silence_seconds / (bursts + 1));
  const double burst = speech_seconds / bursts;
  const double r = 0.95;
  const double theta = 2.0 * std::numbers::pi * 1000.0 / fs;
  double y1 = 0.0, y2 = 0.0, lp = 0.0;
  auto emit_silence = [&](double seconds) {
    for (int i = 0; i < static_cast<int>(seconds * fs); ++i) {
      lp = 0.95 * lp + 0.05 * rng.normal();
      s.audio.samples.push_back(1e-4 * lp / 0.16);
      s.speech.push_back(false);
    }
  };
  for (int b = 0; b < bursts; ++b) {
    emit_silence(sil[static_cast<std::size_t>(b)]);
    for (int i = 0; i < static_cast<int>(burst * fs); ++i) {
      const double y = rng.normal() + 2.0 * r * std::cos(theta) * y1 - r * r * y2;
      y2 = y1;
      y1 = y;
      s.audio.samples.push_back(0.02 * y);
      s.speech.push_back(true);
    }
  }
  emit_silence(sil.back());
  return s;
}

/// Two 2-D classes: the first dimension separates the means by 0.2 with
/// unit variance, the second has zero means and variance 1 against 9.
inline LabeledFeatures heteroscedastic_pair(std::uint64_t seed, Eigen::Index per_class = 5000) {
  Rng rng(seed);
  LabeledFeatures d;
  d.num_classes = 2;
  d.x.resize(2 * per_class, 2);
  for (Eigen::Index k = 0; k < 2 * per_class; ++k) {
    const int s = k < per_class ? 0 : 1;
    d.x(k, 0) = (s == 0 ? -0.1 : 0.1) + rng.normal();
    d.x(k, 1) = (s == 0 ? 1.0 : 3.0) * rng.normal();
    d.labels.push_back(s);
  }
  return d;
}

/// Classes share one centred sample shifted to different means, so every
/// class covariance is identical.
inline LabeledFeatures homoscedastic_classes(Rng& rng, int classes, Eigen::Index per_class, Eigen::Index dims) {
  const Eigen::MatrixXd mix = random_matrix(rng, dims, dims) + 2.0 * Eigen::MatrixXd::Identity(dims, dims);
  Eigen::MatrixXd base = random_matrix(rng, per_class, dims) * mix;
  base.rowwise() -= base.colwise().mean();
  LabeledFeatures d;
  d.num_classes = classes;
  d.x.resize(classes * per_class, dims);
  for (int s = 0; s < classes; ++s) {
    const Eigen::RowVectorXd mu = random_matrix(rng, 1, dims, 2.0);
    d.x.middleRows(s * per_class, per_class) = base.rowwise() + mu;
    for (Eigen::Index k = 0; k < per_class; ++k) d.labels.push_back(s);
  }
  return d;
}

/// Random labelled data with class-specific scales and offsets.
inline LabeledFeatures random_labeled(Rng& rng, Eigen::Index rows, Eigen::Index dims, int classes) {
  LabeledFeatures d;
  d.num_classes = classes;
  d.x.resize(rows, dims);
  for (Eigen::Index k = 0; k < rows; ++k) {
    const int s = static_cast<int>(k % classes);
    d.labels.push_back(s);
    for (Eigen::Index j = 0; j < dims; ++j) d.x(k, j) = (1.0 + 0.5 * s) * rng.normal() + 0.7 * s * (j % 2 ? 1 : -1);
  }
  return d;
}

/// Scatter matrices by explicit element-wise loops.
inline ScatterMatrices brute_scatter(const LabeledFeatures& d) {
  const Eigen::Index k = d.x.rows(), m = d.x.cols();
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(m);
  for (Eigen::Index r = 0; r < k; ++r) phi += d.x.row(r).transpose();
  phi /= static_cast<double>(k);
  ScatterMatrices s{Eigen::MatrixXd::Zero(m, m), Eigen::MatrixXd::Zero(m, m)};
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) s.between(i, j) += (d.x(r, i) - phi[i]) * (d.x(r, j) - phi[j]);
    }
  }
  s.between /= static_cast<double>(k);
  for (int c = 0; c < d.num_classes; ++c) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(m);
    double n = 0.0;
    for (Eigen::Index r = 0; r < k; ++r) {
      if (d.labels[r] == c) {
        mu += d.x.row(r).transpose();
        n += 1.0;
      }
    }
    mu /= n;
    for (Eigen::Index r = 0; r < k; ++r) {
      if (d.labels[r] != c) continue;
      for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) s.within(i, j) += (d.x(r, i) - mu[i]) * (d.x(r, j) - mu[j]);
      }
    }
  }
  s.within /= static_cast<double>(d.num_classes);
  return s;
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace accent::testing
