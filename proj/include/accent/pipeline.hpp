// accent/pipeline.hpp
//
// Command orchestration behind the accent-forge CLI. Each command reads a
// manifest and a PipelineConfig and writes its artifacts under one output
// directory.
//
// Directory layout:
//   featurize: <out>/features/<id>.acfeat, <out>/masks/<id>.mask,
//              <out>/frontend.fp
//   train:     <out>/models.acset plus the files it lists, <out>/split.tsv
//   evaluate:  <out>/report.txt, <out>/report.json

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "accent/config.hpp"
#include "accent/corpus.hpp"
#include "accent/features.hpp"

namespace accent {

/// ACCENT_FORGE_WORKERS when set to a positive integer, else the number of
/// hardware threads.
std::size_t worker_count();

/// Runs fn(0..n-1) on the worker pool. If any call throws, the exception of
/// the lowest failing index is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

struct CompressionRow {
  std::string accent;
  std::size_t utterances = 0;
  double before_seconds = 0.0;
  double after_seconds = 0.0;
  double mean_rate = 0.0;  // mean of per-utterance rates
};

struct CompressionReport {
  std::vector<CompressionRow> rows;
  std::vector<std::string> failures;

  std::string table() const;
};

CompressionReport cmd_vad(const Manifest& manifest, const PipelineConfig& cfg, const std::filesystem::path& out,
                          std::ostream& log);

struct FeaturizeSummary {
  std::size_t written = 0;
  std::vector<std::string> failures;  // "id: reason"
};

/// Unreadable or all-silent utterances are skipped and listed; throws
/// DataError when nothing could be featurized.
FeaturizeSummary cmd_featurize(const Manifest& manifest, const PipelineConfig& cfg, const std::filesystem::path& out,
                               std::ostream& log);

std::filesystem::path feature_file(const std::filesystem::path& features_dir, const std::string& id);
std::filesystem::path mask_file(const std::filesystem::path& features_dir, const std::string& id);

/// Throws ConsistencyError when the store was built with another front end.
void check_feature_store(const std::filesystem::path& features_dir, const PipelineConfig& cfg);

enum class TrainMode { BaselinePlp, BaselineHlda, VowelHlda };
TrainMode parse_train_mode(std::string_view name);
std::string_view train_mode_name(TrainMode mode);

struct TrainSummary {
  TrainMode mode = TrainMode::BaselinePlp;
  std::size_t train_utterances = 0;
  std::size_t dev_utterances = 0;
  std::vector<int> subset;                    // vowel mode
  std::optional<double> confidence_threshold;  // vowel mode
  double dev_accuracy = 0.0;                  // vowel mode, after subset selection
};

TrainSummary cmd_train(const Manifest& manifest, const PipelineConfig& cfg, const std::filesystem::path& features_dir,
                       TrainMode mode, const std::filesystem::path& out, std::ostream& log);

struct Prediction {
  std::string id;
  int truth = 0;
  int predicted = 0;
};

struct EvaluationReport {
  std::string model_kind;
  std::string fingerprint;
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> confusion;  // rows = truth
  std::vector<std::optional<double>> per_accent;    // nullopt without test data
  double overall = 0.0;
  std::size_t utterances = 0;
  std::size_t no_evidence = 0;  // vowel models: scored as label 0
  std::size_t missing = 0;      // test utterances without features
  std::vector<Prediction> predictions;

  static EvaluationReport from_predictions(std::vector<std::string> labels, std::vector<Prediction> predictions);
  std::string table() const;
  std::string json() const;
};

EvaluationReport cmd_evaluate(const Manifest& manifest, const PipelineConfig& cfg,
                              const std::filesystem::path& features_dir, const std::filesystem::path& models_dir,
                              const std::filesystem::path& out, std::ostream& log);

Manifest cmd_synthcorpus(const PipelineConfig& cfg, const std::filesystem::path& out, std::ostream& log);

}  // namespace accent
