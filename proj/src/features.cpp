// src/features.cpp

#include "accent/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "accent/binary_io.hpp"
#include "accent/error.hpp"

namespace accent {

void PlpConfig::validate() const {
  if (!(frame_len_ms > 0.0) || !(hop_ms > 0.0)) throw UsageError("plp: frame length and hop must be positive");
  if (lp_order < 2) throw UsageError("plp: lp_order must be >= 2");
  if (num_cepstra < 1 || num_cepstra > lp_order + 1) throw UsageError("plp: num_cepstra must be in [1, lp_order + 1]");
  if (num_bark_bands != 0 && num_bark_bands < 3) throw UsageError("plp: num_bark_bands must be 0 or >= 3");
  if (!(preemphasis >= 0.0 && preemphasis < 1.0)) throw UsageError("plp: preemphasis must be in [0, 1)");
  if (delta_window < 1) throw UsageError("plp: delta_window must be >= 1");
}

double hz_to_bark(double hz) { return 6.0 * std::asinh(hz / 600.0); }
double bark_to_hz(double bark) { return 600.0 * std::sinh(bark / 6.0); }

int bark_band_count(int sample_rate) {
  return static_cast<int>(std::ceil(hz_to_bark(sample_rate / 2.0))) + 1;
}

double equal_loudness(double hz) {
  const double w2 = std::pow(2.0 * std::numbers::pi * hz, 2);
  return (w2 + 56.8e6) * w2 * w2 / (std::pow(w2 + 6.3e6, 2) * (w2 + 0.38e9));
}

double critical_band_weight(double d) {
  if (d < -1.3 || d > 2.5) return 0.0;
  if (d < -0.5) return std::pow(10.0, 2.5 * (d + 0.5));
  if (d <= 0.5) return 1.0;
  return std::pow(10.0, -(d - 0.5));
}

LpcResult levinson_durbin(const Eigen::Ref<const Eigen::VectorXd>& r, int order) {
  LpcResult res;
  res.a = Eigen::VectorXd::Zero(order + 1);
  res.a[0] = 1.0;
  double err = r[0];
  if (!(err > 0.0)) return res;
  Eigen::VectorXd prev(order + 1);
  for (int i = 1; i <= order; ++i) {
    double acc = r[i];
    for (int j = 1; j < i; ++j) acc += res.a[j] * r[i - j];
    const double k = -acc / err;
    prev = res.a;
    for (int j = 1; j < i; ++j) res.a[j] = prev[j] + k * prev[i - j];
    res.a[i] = k;
    err *= (1.0 - k * k);
    if (!(err > 0.0)) return res;
  }
  res.error = err;
  res.ok = true;
  return res;
}

Eigen::VectorXd lpc_to_cepstrum(const Eigen::Ref<const Eigen::VectorXd>& a, double gain, int num_cepstra) {
  const int p = static_cast<int>(a.size()) - 1;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(num_cepstra);
  c[0] = std::log(gain);
  for (int n = 1; n < num_cepstra; ++n) {
    double acc = n <= p ? -a[n] : 0.0;
    for (int k = 1; k < n; ++k) {
      if (n - k <= p) acc -= (static_cast<double>(k) / n) * c[k] * a[n - k];
    }
    c[n] = acc;
  }
  return c;
}

namespace {

struct BarkFilterbank {
  Eigen::MatrixXd weights;   // bands x bins
  Eigen::VectorXd loudness;  // per band
  Eigen::MatrixXd idft;      // (order+1) x bands
};

BarkFilterbank make_filterbank(int sample_rate, std::size_t fft_len, int bands, int order) {
  BarkFilterbank fb;
  const auto bins = static_cast<Eigen::Index>(fft_len / 2 + 1);
  const double nyq_bark = hz_to_bark(sample_rate / 2.0);
  const double step = nyq_bark / (bands - 1);
  fb.weights = Eigen::MatrixXd::Zero(bands, bins);
  fb.loudness.resize(bands);
  for (int b = 0; b < bands; ++b) {
    const double centre = b * step;
    fb.loudness[b] = equal_loudness(bark_to_hz(centre));
    for (Eigen::Index j = 0; j < bins; ++j) {
      const double hz = static_cast<double>(j) * sample_rate / static_cast<double>(fft_len);
      fb.weights(b, j) = critical_band_weight(hz_to_bark(hz) - centre);
    }
  }
  // Cosine transform of a symmetric spectrum sampled at `bands` points on [0, pi].
  const int d = bands - 1;
  fb.idft.resize(order + 1, bands);
  for (int k = 0; k <= order; ++k) {
    for (int j = 0; j < bands; ++j) {
      const double w = (j == 0 || j == d) ? 1.0 : 2.0;
      fb.idft(k, j) = w * std::cos(std::numbers::pi * k * j / d) / (2.0 * d);
    }
  }
  return fb;
}

}  // namespace

FeatureMatrix plp_static(const AudioBuffer& audio, const PlpConfig& cfg) {
  cfg.validate();
  if (audio.sample_rate < 8000) throw UsageError("plp: sample rate must be >= 8000 Hz");

  const std::size_t frame_len = std::max<std::size_t>(1, ms_to_samples(cfg.frame_len_ms, audio.sample_rate));
  const std::size_t hop = std::max<std::size_t>(1, ms_to_samples(cfg.hop_ms, audio.sample_rate));
  std::size_t fft_len = 1;
  while (fft_len < frame_len) fft_len <<= 1;
  const int bands = cfg.num_bark_bands > 0 ? cfg.num_bark_bands : bark_band_count(audio.sample_rate);
  const BarkFilterbank fb = make_filterbank(audio.sample_rate, fft_len, bands, cfg.lp_order);

  AudioBuffer emph = audio;
  for (std::size_t n = emph.samples.size(); n-- > 1;) {
    emph.samples[n] = audio.samples[n] - cfg.preemphasis * audio.samples[n - 1];
  }
  const FrameSequence frames = frame_signal(emph, frame_len, hop);

  Eigen::VectorXd window(static_cast<Eigen::Index>(frame_len));
  for (std::size_t n = 0; n < frame_len; ++n) {
    window[static_cast<Eigen::Index>(n)] =
        frame_len == 1 ? 1.0 : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (frame_len - 1));
  }

  FeatureMatrix out;
  out.hop_ms = 1000.0 * static_cast<double>(hop) / audio.sample_rate;
  out.first_center_ms = 1000.0 * (static_cast<double>(frame_len) / 2.0) / audio.sample_rate;
  out.values.resize(static_cast<Eigen::Index>(frames.size()), cfg.num_cepstra);

  Eigen::VectorXd floor_vec = Eigen::VectorXd::Zero(cfg.num_cepstra);
  floor_vec[0] = std::log(kEnergyFloor);

  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Eigen::VectorXd x = frames.frames.row(static_cast<Eigen::Index>(i)).transpose().cwiseProduct(window);
    const Eigen::VectorXd power = power_spectrum(x, fft_len);
    Eigen::VectorXd aud = (fb.weights * power).cwiseProduct(fb.loudness).unaryExpr([](double v) { return std::cbrt(v); });
    // Edge bands lie outside the analysed range; copy their neighbours.
    aud[0] = aud[1];
    aud[bands - 1] = aud[bands - 2];
    const Eigen::VectorXd r = fb.idft * aud;
    Eigen::VectorXd ceps = floor_vec;
    if (r[0] > kEnergyFloor) {
      const LpcResult lpc = levinson_durbin(r, cfg.lp_order);
      if (lpc.ok) ceps = lpc_to_cepstrum(lpc.a, lpc.error, cfg.num_cepstra);
    }
    out.values.row(static_cast<Eigen::Index>(i)) = ceps.transpose();
  }
  return out;
}

Eigen::MatrixXd compute_deltas(const Eigen::MatrixXd& x, int window) {
  const Eigen::Index t_max = x.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(t_max, x.cols());
  if (t_max == 0) return d;
  double denom = 0.0;
  for (int k = 1; k <= window; ++k) denom += 2.0 * k * k;
  for (Eigen::Index t = 0; t < t_max; ++t) {
    for (int k = 1; k <= window; ++k) {
      const Eigen::Index fwd = std::min(t + k, t_max - 1);
      const Eigen::Index back = std::max<Eigen::Index>(t - k, 0);
      d.row(t) += k * (x.row(fwd) - x.row(back));
    }
  }
  return d / denom;
}

FeatureMatrix append_deltas(const FeatureMatrix& f, int delta_window) {
  if (delta_window < 1) throw UsageError("append_deltas: window must be >= 1");
  const Eigen::MatrixXd d1 = compute_deltas(f.values, delta_window);
  const Eigen::MatrixXd d2 = compute_deltas(d1, delta_window);
  Eigen::MatrixXd v(f.frames(), 3 * f.dims());
  v << f.values, d1, d2;
  return f.with_values(std::move(v));
}

MvnStats mvn_stats(std::span<const FeatureMatrix> utterances) {
  if (utterances.empty()) throw UsageError("mvn_stats: no utterances");
  const Eigen::Index dims = utterances.front().dims();
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(dims);
  Eigen::Index n = 0;
  for (const auto& u : utterances) {
    if (u.dims() != dims) throw DataError("mvn_stats: dimension mismatch");
    sum += u.values.colwise().sum();
    n += u.frames();
  }
  MvnStats s;
  s.mean = n > 0 ? Eigen::RowVectorXd(sum / static_cast<double>(n)) : sum;
  Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(dims);
  Eigen::RowVectorXd lo = Eigen::RowVectorXd::Constant(dims, std::numeric_limits<double>::infinity());
  Eigen::RowVectorXd hi = -lo;
  for (const auto& u : utterances) {
    if (u.frames() == 0) continue;
    sq += (u.values.rowwise() - s.mean).array().square().matrix().colwise().sum();
    lo = lo.cwiseMin(u.values.colwise().minCoeff());
    hi = hi.cwiseMax(u.values.colwise().maxCoeff());
  }
  // Constant dimensions keep unit scale; rounding in the mean would
  // otherwise leave a tiny spurious variance.
  s.stddev = Eigen::RowVectorXd::Ones(dims);
  if (n >= 2) {
    for (Eigen::Index d = 0; d < dims; ++d) {
      const double var = sq[d] / static_cast<double>(n);
      if (hi[d] > lo[d] && var > 0.0) s.stddev[d] = std::sqrt(var);
    }
  }
  return s;
}

FeatureMatrix apply_mvn(const FeatureMatrix& f, const MvnStats& stats) {
  if (stats.mean.size() != f.dims()) throw DataError("apply_mvn: dimension mismatch");
  Eigen::MatrixXd v = (f.values.rowwise() - stats.mean).array().rowwise() / stats.stddev.array();
  return f.with_values(std::move(v));
}

FeatureMatrix mvn(const FeatureMatrix& f) {
  return apply_mvn(f, mvn_stats(std::span<const FeatureMatrix>(&f, 1)));
}

FeatureMatrix context_expand(const FeatureMatrix& f, int context) {
  if (context < 0) throw UsageError("context_expand: context must be >= 0");
  if (context == 0) return f;
  const Eigen::Index t_max = f.frames();
  const Eigen::Index dims = f.dims();
  const int span = 2 * context + 1;
  Eigen::MatrixXd v(t_max, dims * span);
  for (Eigen::Index t = 0; t < t_max; ++t) {
    for (int o = -context; o <= context; ++o) {
      const Eigen::Index src = std::clamp<Eigen::Index>(t + o, 0, t_max - 1);
      v.block(t, (o + context) * dims, 1, dims) = f.values.row(src);
    }
  }
  return f.with_values(std::move(v));
}

std::string serialize_features(std::span<const FeatureMatrix> utterances) {
  std::ostringstream os;
  for (const auto& u : utterances) {
    if (u.utterance_id.empty() || io::split_ws(u.utterance_id).size() != 1) {
      throw UsageError("feature archive: utterance id must be a single non-empty token");
    }
    os << "ACFEAT1 " << u.utterance_id << ' ' << u.dims() << ' ' << u.frames() << ' '
       << io::format_double(u.hop_ms) << ' ' << io::format_double(u.first_center_ms) << '\n';
    io::write_matrix_rows(os, u.values);
  }
  return os.str();
}

std::vector<FeatureMatrix> deserialize_features(const std::string& bytes) {
  std::istringstream is(bytes);
  std::vector<FeatureMatrix> out;
  std::string line;
  while (std::getline(is, line)) {
    if (is.eof()) throw DataError("feature archive: truncated header");
    const auto tok = io::split_ws(line);
    if (tok.size() != 6 || tok[0] != "ACFEAT1") throw DataError("feature archive: bad header '" + line + "'");
    const auto dims = io::parse_int(tok[2]);
    const auto frames = io::parse_int(tok[3]);
    const auto hop = io::parse_double(tok[4]);
    const auto first = io::parse_double(tok[5]);
    if (!dims || !frames || !hop || !first || *dims < 0 || *frames < 0) {
      throw DataError("feature archive: bad header '" + line + "'");
    }
    FeatureMatrix f;
    f.utterance_id = tok[1];
    f.hop_ms = *hop;
    f.first_center_ms = *first;
    f.values = io::read_matrix_rows(is, *frames, *dims);
    out.push_back(std::move(f));
  }
  return out;
}

void write_features(const std::filesystem::path& path, std::span<const FeatureMatrix> utterances) {
  io::write_file(path, serialize_features(utterances));
}

std::vector<FeatureMatrix> read_features(const std::filesystem::path& path) {
  return deserialize_features(io::read_file(path));
}

}  // namespace accent
