// accent/synth.hpp
//
// Formant synthesiser for desk-scale corpora: glottal pulse trains through
// cascaded resonators for vowels, shaped noise for consonants, low-frequency
// near-silence for pauses. Accents differ only in their vowel formants.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "accent/config.hpp"
#include "accent/corpus.hpp"
#include "accent/signal.hpp"

namespace accent {

struct Formants {
  double f1 = 0.0;
  double f2 = 0.0;
  double f3 = 0.0;
};

/// Reference formants for the 15 inventory vowels, adult male averages.
const std::array<Formants, 15>& base_formants();

/// Relative F1/F2 factors for one accent, indexed like kVowelInventory.
using AccentFormantTable = std::array<std::pair<double, double>, 15>;

/// Accent 0 is the reference with unit factors. Every other accent moves
/// each vowel towards a neighbouring vowel, with factors clamped to
/// [1 - shift, 1 + shift].
std::vector<AccentFormantTable> accent_formant_tables(const SynthConfig& cfg, std::uint64_t seed);

struct SynthUtterance {
  std::string id;
  std::string accent;
  AudioBuffer audio;
  std::vector<AlignmentSegment> alignment;  // original time, includes "sil"
  double speech_seconds = 0.0;
};

std::string synth_accent_label(int accent);

SynthUtterance synthesize_utterance(const SynthConfig& cfg, const std::vector<AccentFormantTable>& tables, int accent,
                                    int index, std::uint64_t seed);

/// Writes audio/<id>.wav, align/<id>.txt and manifest.tsv under `out_dir`.
Manifest write_synth_corpus(const SynthConfig& cfg, std::uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace accent
