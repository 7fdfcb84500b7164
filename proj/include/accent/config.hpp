// accent/config.hpp
//
// Pipeline configuration: `[section]` headers followed by `key = value`
// lines. Unknown sections or keys are errors.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "accent/features.hpp"
#include "accent/gmm.hpp"
#include "accent/vad.hpp"

namespace accent {

enum class TransformChoice { None, Lda, Hlda };

/// Scope of mean and variance normalisation statistics.
enum class MvnScope { Utterance, Corpus };

struct ModelConfig {
  int context = 1;
  int reduced_dims = 20;
  TransformChoice transform = TransformChoice::Hlda;
  int components = 256;
  int subset_size = 7;
  bool normalize_by_frames = true;
  // Alignment confidence threshold; nullopt means tune it on the dev split.
  std::optional<double> confidence;
  int hlda_max_iters = 100;
  double hlda_rel_tol = 1e-6;
};

struct SynthConfig {
  int accents = 3;
  int utterances = 30;  // per accent
  double duration_s = 10.0;
  int sample_rate = 16000;
  double formant_shift = 0.2;      // largest relative F1/F2 offset between accents
  double speaker_spread = 0.04;    // relative vocal-tract scaling, one sigma
  double silence_fraction = 0.3;
  double mislabel_fraction = 0.05;
};

struct PipelineConfig {
  VadConfig vad;
  PlpConfig plp;
  MvnScope mvn = MvnScope::Utterance;
  ModelConfig model;
  EmOptions em;
  std::array<double, 3> split = {0.70, 0.15, 0.15};
  std::uint64_t seed = 0;
  SynthConfig synth;

  /// Static feature dims times three (statics, deltas, delta-deltas).
  int feature_dims() const { return 3 * plp.num_cepstra; }
  void validate() const;

  /// Every section in fixed order with canonical number formatting.
  std::string canonical() const;
  /// SHA-256 of the sections that shape features (vad, plp, features).
  std::string frontend_fingerprint() const;
  /// SHA-256 of everything except the synth section.
  std::string fingerprint() const;
};

PipelineConfig parse_config_text(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

std::string_view transform_choice_name(TransformChoice t);

}  // namespace accent
