// accent/corpus.hpp
//
// Dataset manifests, seeded splits, phone alignments and vowel-frame
// extraction.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "accent/features.hpp"
#include "accent/vad.hpp"

namespace accent {

/// The 15 Arpabet vowels, in the fixed order used for every per-vowel table.
inline constexpr std::array<std::string_view, 15> kVowelInventory = {
    "aa", "ae", "ah", "ao", "aw", "ay", "eh", "er", "ey", "ih", "iy", "ow", "oy", "uh", "uw"};

std::optional<int> vowel_index(std::string_view phone);
std::vector<std::string> vowel_inventory();

struct ManifestEntry {
  std::string id;
  std::filesystem::path audio;
  std::string accent;
  std::optional<std::filesystem::path> alignment;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> labels;  // declared or first-seen order

  int label_index(const std::string& accent) const;
};

/// Lines are `id<TAB>audio<TAB>accent[<TAB>alignment]`; `#` starts a
/// comment. A `#!labels A B C` line declares the label inventory, otherwise
/// labels are collected in first-seen order. Relative paths resolve against
/// the manifest's directory.
Manifest parse_manifest(const std::filesystem::path& path);
Manifest parse_manifest_text(const std::string& text, const std::filesystem::path& base_dir = {});
std::string serialize_manifest(const Manifest& m);

enum class Split { Train, Dev, Test };
std::string_view split_name(Split s);

struct SplitAssignment {
  std::vector<Split> tags;  // aligned with manifest entries
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  std::vector<std::size_t> indices(Split s) const;
};

/// Per accent: seeded shuffle, then contiguous blocks sized by largest
/// remainder rounding of the ratios.
SplitAssignment split_dataset(const Manifest& m, const std::array<double, 3>& ratios, std::uint64_t seed);

/// Largest-remainder apportionment of n items; ties go to the earlier slot.
std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3>& ratios);

struct AlignmentSegment {
  double start = 0.0;
  double end = 0.0;
  std::string phone;
  std::optional<double> confidence;

  bool operator==(const AlignmentSegment&) const = default;
};

/// `start end phone [confidence]` per line; phones lower-cased with stress
/// digits removed; output sorted by start time.
std::vector<AlignmentSegment> parse_alignment(const std::filesystem::path& path);
std::vector<AlignmentSegment> parse_alignment_text(const std::string& text);
std::string serialize_alignment(const std::vector<AlignmentSegment>& segments);

struct ConfidenceFilter {
  std::vector<AlignmentSegment> kept;
  std::size_t dropped = 0;
};

/// Keeps segments with confidence >= threshold. With threshold = -inf every
/// segment is kept, including those without a confidence.
ConfidenceFilter filter_by_confidence(const std::vector<AlignmentSegment>& segments, double threshold);

/// Rows of `f` whose frame centre lies in [start, end) of any segment
/// labelled `vowel`, in frame order.
FeatureMatrix extract_vowel_frames(const FeatureMatrix& f, const std::vector<AlignmentSegment>& segments,
                                   std::string_view vowel);

/// All inventory vowels at once, indexed like kVowelInventory.
std::vector<Eigen::MatrixXd> extract_all_vowel_frames(const Eigen::MatrixXd& values, const FeatureMatrix& timing,
                                                      const std::vector<AlignmentSegment>& segments);

/// Monotone map from original-audio time to time within the silence-removed
/// audio.
class TimeMap {
 public:
  TimeMap() = default;
  explicit TimeMap(const SpeechMask& mask);

  double map(double seconds) const;
  /// Image of [start, end); nullopt when it lies entirely in removed audio.
  std::optional<std::pair<double, double>> map_segment(double start, double end) const;
  std::vector<AlignmentSegment> remap(const std::vector<AlignmentSegment>& segments) const;
  double retained_seconds() const;

 private:
  std::vector<std::pair<double, double>> kept_;  // seconds, ascending
  bool identity_ = true;
};

/// Mask files: "ACMASK1 <frame_len> <hop> <num_samples> <sample_rate> <frames>\n"
/// followed by one line of '0'/'1' characters.
std::string serialize_mask(const SpeechMask& mask);
SpeechMask deserialize_mask(const std::string& text);

}  // namespace accent
