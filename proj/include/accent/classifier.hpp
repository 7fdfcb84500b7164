// accent/classifier.hpp
//
// Accent classifiers: one GMM per accent scored by total frame
// log-likelihood, and a vowel-combined variant that fuses per-vowel GMM
// scores with vowel-proportion weights.

#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "accent/discriminant.hpp"
#include "accent/gmm.hpp"

namespace accent {

struct AccentModelSet {
  std::vector<std::string> accents;
  std::vector<GmmModel> models;  // one per accent
  std::string fingerprint;
  int context = 0;  // frames of context expansion applied before `transform`
  std::optional<LinearTransform> transform;

  Eigen::Index dims() const { return models.empty() ? 0 : models.front().dims(); }
  void validate() const;
};

/// Models indexed [accent][vowel]; vowels follow `inventory` order. Only
/// vowels in `subset` take part in classification.
struct VowelModelSet {
  std::vector<std::string> accents;
  std::vector<std::string> inventory;
  std::vector<int> subset;        // ascending inventory indices
  std::vector<double> weights;    // aligned with subset, sums to one
  std::vector<std::vector<std::optional<GmmModel>>> models;
  bool normalize_by_frames = true;
  double confidence_threshold = -std::numeric_limits<double>::infinity();
  std::string fingerprint;
  int context = 0;
  std::optional<LinearTransform> transform;

  Eigen::Index dims() const;
  void validate() const;
};

struct ClassificationResult {
  int predicted = 0;
  std::vector<double> scores;               // per accent
  std::vector<Eigen::Index> frames_scored;  // per accent
  std::vector<Eigen::Index> vowel_frames;   // per inventory vowel (vowel classifier only)
};

/// Index of the largest score; the lowest index wins ties.
int argmax_lowest(const std::vector<double>& scores);

/// One EM fit per accent. Accent s is trained with seed opts.seed + s.
AccentModelSet train_baseline(const std::vector<std::string>& accents, const std::vector<Eigen::MatrixXd>& train,
                              Eigen::Index n_components, const EmOptions& opts);

ClassificationResult classify_baseline(const AccentModelSet& models, const Eigen::MatrixXd& x);

/// Proportion of each subset vowel among the subset's training frames.
std::vector<double> vowel_weights(const std::vector<double>& frame_counts, const std::vector<int>& subset);

/// Per-utterance table of total log-likelihoods [accent][vowel] with the
/// frame count per vowel. Precomputing it lets subset search reuse scores.
struct VowelScoreTable {
  Eigen::MatrixXd log_likelihood;     // S x T, 0 where the vowel has no frames
  std::vector<Eigen::Index> frames;   // T
};

VowelScoreTable score_vowels(const std::vector<std::vector<std::optional<GmmModel>>>& models,
                             const std::vector<Eigen::MatrixXd>& per_vowel, const std::vector<int>& vowels);

/// Weighted fusion over the subset vowels present in the table; weights of
/// absent vowels are renormalised away. Returns nullopt without evidence.
std::optional<std::vector<double>> combine_vowel_scores(const VowelScoreTable& table, const std::vector<int>& subset,
                                                        const std::vector<double>& weights, bool normalize_by_frames);

/// `per_vowel` is indexed by inventory position; empty matrices mean the
/// vowel was not observed.
ClassificationResult classify_vowel(const VowelModelSet& models, const std::vector<Eigen::MatrixXd>& per_vowel);

struct DevUtterance {
  int label = 0;
  std::vector<Eigen::MatrixXd> per_vowel;  // inventory order
};

struct SubsetSelection {
  std::vector<int> order;          // vowels in the order they were added
  std::vector<double> accuracy;    // dev accuracy after each addition
  int skipped_utterances = 0;      // dev utterances with no vowel frames at all
};

/// Greedy forward selection on dev-set accuracy; ties go to the earlier
/// inventory vowel. Only vowels with a model for every accent are eligible.
SubsetSelection select_vowel_subset(const std::vector<DevUtterance>& dev,
                                    const std::vector<std::vector<std::optional<GmmModel>>>& models,
                                    const std::vector<double>& train_frame_counts, int subset_size,
                                    bool normalize_by_frames);

/// Model-set manifests: a text file listing labels, subset, weights and the
/// relative path plus SHA-256 of every ACGMM1/ACHLDA1 file beside it.
void write_model_set(const std::filesystem::path& dir, const AccentModelSet& set);
void write_model_set(const std::filesystem::path& dir, const VowelModelSet& set);

enum class ModelSetKind { Baseline, Vowel };
ModelSetKind read_model_set_kind(const std::filesystem::path& dir);
AccentModelSet read_accent_model_set(const std::filesystem::path& dir);
VowelModelSet read_vowel_model_set(const std::filesystem::path& dir);

inline constexpr const char* kModelSetManifest = "models.acset";

}  // namespace accent
