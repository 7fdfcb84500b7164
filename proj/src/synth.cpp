// src/synth.cpp

#include "accent/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "accent/binary_io.hpp"
#include "accent/rng.hpp"

namespace accent {

namespace {

constexpr double kPi = std::numbers::pi;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix(splitmix(splitmix(seed) ^ a) ^ b);
}

// Second-order digital resonator (Klatt), unity gain at DC.
class Resonator {
 public:
  Resonator(double freq, double bw, int sr) {
    const double t = 1.0 / sr;
    c_ = -std::exp(-2.0 * kPi * bw * t);
    b_ = 2.0 * std::exp(-kPi * bw * t) * std::cos(2.0 * kPi * freq * t);
    a_ = 1.0 - b_ - c_;
  }
  double operator()(double x) {
    const double y = a_ * x + b_ * y1_ + c_ * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double a_, b_, c_;
  double y1_ = 0.0, y2_ = 0.0;
};

// Relative frequency of each vowel in running speech, inventory order.
constexpr std::array<double, 15> kVowelFrequency = {4.0, 4.0, 10.0, 3.0, 1.5, 3.0, 5.0, 4.0,
                                                    3.0, 9.0, 6.0, 3.0, 0.6, 1.2, 3.0};

struct Consonant {
  const char* phone;
  bool voiced;
  double freq;
  double bw;
  double level;  // relative to the vowel level
};

constexpr std::array<Consonant, 6> kConsonants = {{
    {"s", false, 5500.0, 2000.0, 0.25},
    {"sh", false, 3000.0, 1200.0, 0.3},
    {"f", false, 4000.0, 3500.0, 0.15},
    {"t", false, 4000.0, 3000.0, 0.3},
    {"n", true, 280.0, 100.0, 0.5},
    {"m", true, 250.0, 100.0, 0.5},
}};

struct Speaker {
  double vtl = 1.0;  // formant scaling
  double f0 = 120.0;
  double level = 0.1;
};

void scale_to_rms(std::vector<double>& x, double rms) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  if (acc <= 0.0) return;
  const double g = rms / std::sqrt(acc / static_cast<double>(x.size()));
  for (double& v : x) v *= g;
}

// Raised-cosine ramps of `ramp` samples at both ends.
void apply_envelope(std::vector<double>& x, std::size_t ramp) {
  ramp = std::min(ramp, x.size() / 2);
  for (std::size_t i = 0; i < ramp; ++i) {
    const double g = 0.5 - 0.5 * std::cos(kPi * static_cast<double>(i) / static_cast<double>(ramp));
    x[i] *= g;
    x[x.size() - 1 - i] *= g;
  }
}

// Glottal pulse train through a leaky integrator plus a little aspiration,
// then lip radiation. The result is nearly flat above a few hundred Hz.
std::vector<double> glottal_source(std::size_t n, double f0, int sr, Rng& rng) {
  std::vector<double> out(n);
  double phase = rng.uniform();
  double lp1 = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double jitter = 1.0 + 0.01 * std::sin(2.0 * kPi * 4.0 * static_cast<double>(i) / sr);
    phase += f0 * jitter / sr;
    double x = 0.02 * rng.normal();
    if (phase >= 1.0) {
      phase -= 1.0;
      x += 1.0;
    }
    lp1 = 0.9 * lp1 + x;
    // Lip radiation: first difference.
    out[i] = lp1 - prev;
    prev = lp1;
  }
  // Remove the DC the integrator builds up.
  double mean = 0.0;
  for (double v : out) mean += v;
  mean /= static_cast<double>(std::max<std::size_t>(n, 1));
  for (double& v : out) v -= mean;
  return out;
}

std::vector<double> render_vowel(std::size_t n, const Formants& f, double f0, double rms, int sr, Rng& rng) {
  std::vector<double> x = glottal_source(n, f0, sr, rng);
  const double nyq = 0.5 * sr;
  const std::array<std::pair<double, double>, 4> res = {
      {{f.f1, 80.0}, {f.f2, 100.0}, {f.f3, 150.0}, {3500.0, 250.0}}};
  for (auto [freq, bw] : res) {
    if (freq >= 0.95 * nyq) continue;
    Resonator r(freq, bw, sr);
    for (double& v : x) v = r(v);
  }
  apply_envelope(x, static_cast<std::size_t>(0.015 * sr));
  scale_to_rms(x, rms);
  return x;
}

std::vector<double> render_consonant(std::size_t n, const Consonant& c, double f0, double rms, int sr, Rng& rng) {
  std::vector<double> x;
  const double nyq = 0.5 * sr;
  const double freq = std::min(c.freq, 0.8 * nyq);
  if (c.voiced) {
    x = glottal_source(n, f0, sr, rng);
    Resonator low(freq, c.bw, sr);
    Resonator high(std::min(2200.0, 0.8 * nyq), 300.0, sr);
    for (double& v : x) {
      const double l = low(v);
      v = l + 0.1 * high(l);
    }
  } else {
    x.resize(n);
    Resonator r(freq, c.bw, sr);
    for (double& v : x) v = r(rng.normal());
    if (std::string_view(c.phone) == "t") {
      // Burst: fast decay after the release.
      for (std::size_t i = 0; i < n; ++i) x[i] *= std::exp(-static_cast<double>(i) / (0.01 * sr));
    }
  }
  apply_envelope(x, static_cast<std::size_t>(0.005 * sr));
  scale_to_rms(x, rms);
  return x;
}

template <std::size_t N>
std::size_t weighted_pick(const std::array<double, N>& w, Rng& rng) {
  double total = 0.0;
  for (double v : w) total += v;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < N; ++i) {
    u -= w[i];
    if (u < 0.0) return i;
  }
  return N - 1;
}

double round_ms(double seconds) { return std::round(seconds * 1000.0) / 1000.0; }

}  // namespace

const std::array<Formants, 15>& base_formants() {
  static const std::array<Formants, 15> table = {{
      {730, 1090, 2440},  // aa
      {660, 1720, 2410},  // ae
      {520, 1190, 2390},  // ah
      {570, 840, 2410},   // ao
      {680, 1300, 2480},  // aw
      {700, 1500, 2550},  // ay
      {530, 1840, 2480},  // eh
      {490, 1350, 1690},  // er
      {480, 2000, 2600},  // ey
      {390, 1990, 2550},  // ih
      {270, 2290, 3010},  // iy
      {500, 910, 2400},   // ow
      {550, 1000, 2450},  // oy
      {440, 1020, 2240},  // uh
      {300, 870, 2240},   // uw
  }};
  return table;
}

std::vector<AccentFormantTable> accent_formant_tables(const SynthConfig& cfg, std::uint64_t seed) {
  const auto& base = base_formants();
  // Each accent moves every vowel part of the way towards one of its three
  // nearest neighbours in log F1/F2, so shifted vowels land where other
  // vowels already live.
  std::array<std::array<std::size_t, 3>, 15> nearest{};
  for (std::size_t t = 0; t < 15; ++t) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t u = 0; u < 15; ++u) {
      if (u == t) continue;
      const double a = std::log(base[u].f1 / base[t].f1);
      const double b = std::log(base[u].f2 / base[t].f2);
      d.emplace_back(a * a + b * b, u);
    }
    std::sort(d.begin(), d.end());
    for (std::size_t k = 0; k < 3; ++k) nearest[t][k] = d[k].second;
  }

  std::vector<AccentFormantTable> out(static_cast<std::size_t>(cfg.accents));
  Rng rng(mix(seed, 0xacce47));
  const double lo = 1.0 - cfg.formant_shift;
  const double hi = 1.0 + cfg.formant_shift;
  for (std::size_t s = 0; s < out.size(); ++s) {
    for (std::size_t t = 0; t < 15; ++t) {
      auto& [k1, k2] = out[s][t];
      if (s == 0) {
        k1 = k2 = 1.0;
        continue;
      }
      const Formants& target = base[nearest[t][rng.index(3)]];
      const double alpha = rng.uniform(0.5, 1.0);
      k1 = std::clamp(std::pow(target.f1 / base[t].f1, alpha), lo, hi);
      k2 = std::clamp(std::pow(target.f2 / base[t].f2, alpha), lo, hi);
    }
  }
  return out;
}

std::string synth_accent_label(int accent) {
  std::string s = std::to_string(accent + 1);
  return "accent" + std::string(s.size() < 2 ? 2 - s.size() : 0, '0') + s;
}

SynthUtterance synthesize_utterance(const SynthConfig& cfg, const std::vector<AccentFormantTable>& tables, int accent,
                                    int index, std::uint64_t seed) {
  Rng rng(mix(seed, static_cast<std::uint64_t>(accent) + 1, static_cast<std::uint64_t>(index) + 1));
  const int sr = cfg.sample_rate;
  const auto total = static_cast<std::size_t>(std::llround(cfg.duration_s * sr));
  const auto& table = tables.at(static_cast<std::size_t>(accent));

  Speaker spk;
  spk.vtl = std::exp(rng.normal(0.0, cfg.speaker_spread));
  spk.f0 = rng.uniform(95.0, 170.0) / spk.vtl;
  spk.level = rng.uniform(0.05, 0.15);

  SynthUtterance u;
  u.accent = synth_accent_label(accent);
  u.id = u.accent + "_" + std::to_string(1000 + index).substr(1);
  u.audio.sample_rate = sr;
  u.audio.samples.assign(total, 0.0);

  auto& y = u.audio.samples;
  std::size_t pos = 0;
  auto emit = [&](const std::vector<double>& seg, const std::string& phone, double confidence) {
    const std::size_t n = std::min(seg.size(), total - pos);
    std::copy_n(seg.begin(), n, y.begin() + static_cast<std::ptrdiff_t>(pos));
    AlignmentSegment a;
    a.start = round_ms(static_cast<double>(pos) / sr);
    a.end = round_ms(static_cast<double>(pos + n) / sr);
    a.phone = phone;
    a.confidence = std::round(confidence * 100.0) / 100.0;
    if (a.end > a.start) u.alignment.push_back(std::move(a));
    pos += n;
  };
  auto samples = [&](double seconds) { return static_cast<std::size_t>(std::llround(seconds * sr)); };
  auto silence = [&](double seconds) {
    const std::size_t n = std::min(samples(seconds), total - pos);
    if (n > 0) emit(std::vector<double>(n, 0.0), "sil", rng.normal(-1.5, 0.3));
  };

  const double sf = cfg.silence_fraction;
  const double edge = sf > 0.0 ? rng.uniform(0.3, 0.6) : 0.0;
  silence(edge);
  double speech_so_far = 0.0;
  double silence_so_far = edge + (sf > 0.0 ? 0.3 : 0.0);
  const std::size_t speech_end = total - std::min(total, samples(sf > 0.0 ? 0.3 : 0.0));
  const auto vowel_dur = [&] { return rng.uniform(0.08, 0.22); };
  while (true) {
    // One word: one to three syllables of optional onset, vowel, optional coda.
    const std::size_t word_start = pos;
    const int syllables = 1 + static_cast<int>(rng.index(3));
    if (pos + samples(0.2) * static_cast<std::size_t>(syllables) + samples(0.5) > speech_end) break;
    for (int k = 0; k < syllables; ++k) {
      const double f0 = spk.f0 * rng.uniform(0.9, 1.1);
      if (rng.uniform() < 0.7) {
        const auto& c = kConsonants[rng.index(kConsonants.size())];
        emit(render_consonant(samples(rng.uniform(0.04, 0.10)), c, f0, spk.level * c.level, sr, rng), c.phone,
             rng.normal(-2.5, 0.7));
      }
      const std::size_t t = weighted_pick(kVowelFrequency, rng);
      const Formants& b = base_formants()[t];
      const double jitter1 = 1.0 + rng.normal(0.0, 0.03);
      const double jitter2 = 1.0 + rng.normal(0.0, 0.03);
      Formants f{b.f1 * table[t].first * spk.vtl * jitter1, b.f2 * table[t].second * spk.vtl * jitter2,
                 b.f3 * spk.vtl};
      std::string label(kVowelInventory[t]);
      double conf = rng.normal(-2.0, 0.8);
      if (rng.uniform() < cfg.mislabel_fraction) {
        label = std::string(kVowelInventory[(t + 1 + rng.index(14)) % 15]);
        conf = rng.normal(-7.0, 1.0);
      }
      label += static_cast<char>('0' + rng.index(3));
      emit(render_vowel(samples(vowel_dur()), f, f0, spk.level * rng.uniform(0.7, 1.0), sr, rng), label, conf);
      if (rng.uniform() < 0.4) {
        const auto& c = kConsonants[rng.index(kConsonants.size())];
        emit(render_consonant(samples(rng.uniform(0.04, 0.10)), c, f0, spk.level * c.level, sr, rng), c.phone,
             rng.normal(-2.5, 0.7));
      }
    }
    speech_so_far += static_cast<double>(pos - word_start) / sr;
    if (sf > 0.0) {
      // Pauses track the requested silence share; short ones are skipped.
      const double pause = (speech_so_far * sf / (1.0 - sf) - silence_so_far) * rng.uniform(0.8, 1.2);
      if (pause >= 0.15) {
        silence(std::min(pause, 1.5));
        silence_so_far += std::min(pause, 1.5);
      }
    }
  }
  silence(static_cast<double>(total - pos) / sr);

  for (const auto& a : u.alignment) {
    if (a.phone != "sil") u.speech_seconds += a.end - a.start;
  }

  // Low-frequency background noise well below the speech level, so pauses
  // read as silence in both energy and spectral centroid. Four cascaded
  // one-pole sections keep its spectrum from leaking upwards.
  std::vector<double> bg(total);
  std::array<double, 4> lp{};
  double acc = 0.0;
  for (double& v : bg) {
    double x = rng.normal();
    for (double& state : lp) x = state = 0.95 * state + 0.05 * x;
    v = x;
    acc += x * x;
  }
  const double gain = acc > 0.0 ? 1e-2 * spk.level / std::sqrt(acc / static_cast<double>(total)) : 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    const double v = y[i] + gain * bg[i];
    // Match what a 16-bit round trip would give.
    y[i] = std::clamp(std::round(std::clamp(v, -1.0, 1.0) * 32768.0), -32768.0, 32767.0) / 32768.0;
  }
  return u;
}

Manifest write_synth_corpus(const SynthConfig& cfg, std::uint64_t seed, const std::filesystem::path& out_dir) {
  const auto tables = accent_formant_tables(cfg, seed);
  Manifest m;
  for (int s = 0; s < cfg.accents; ++s) m.labels.push_back(synth_accent_label(s));
  std::filesystem::create_directories(out_dir / "audio");
  std::filesystem::create_directories(out_dir / "align");
  for (int s = 0; s < cfg.accents; ++s) {
    for (int i = 0; i < cfg.utterances; ++i) {
      SynthUtterance u = synthesize_utterance(cfg, tables, s, i, seed);
      const auto wav = std::filesystem::path("audio") / (u.id + ".wav");
      const auto ali = std::filesystem::path("align") / (u.id + ".txt");
      save_audio(out_dir / wav, u.audio);
      io::write_file(out_dir / ali, serialize_alignment(u.alignment));
      m.entries.push_back({u.id, wav, u.accent, ali});
    }
  }
  io::write_file(out_dir / "manifest.tsv", serialize_manifest(m));
  for (auto& e : m.entries) {
    e.audio = out_dir / e.audio;
    e.alignment = out_dir / *e.alignment;
  }
  return m;
}

}  // namespace accent
