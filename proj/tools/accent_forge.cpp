// tools/accent_forge.cpp
//
// accent-forge <vad|featurize|train|evaluate|synthcorpus> --manifest PATH
//     --config PATH --out DIR [--mode MODE] [--seed N]
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 consistency error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "accent/config.hpp"
#include "accent/corpus.hpp"
#include "accent/error.hpp"
#include "accent/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kConsistency = 3;

int run(const std::string& command, const std::optional<fs::path>& manifest_path,
        const std::optional<fs::path>& config_path, const fs::path& out, const std::string& mode,
        const std::optional<std::uint64_t>& seed, const std::optional<fs::path>& features,
        const std::optional<fs::path>& models) {
  accent::PipelineConfig cfg = config_path ? accent::load_config(*config_path) : accent::PipelineConfig{};
  if (seed) {
    cfg.seed = *seed;
    cfg.em.seed = *seed;
  }
  cfg.validate();

  if (command == "synthcorpus") {
    accent::cmd_synthcorpus(cfg, out, std::cerr);
    return 0;
  }
  if (!manifest_path) throw accent::UsageError(command + " requires --manifest");
  const accent::Manifest manifest = accent::parse_manifest(*manifest_path);

  if (command == "vad") {
    std::cout << accent::cmd_vad(manifest, cfg, out, std::cerr).table();
  } else if (command == "featurize") {
    accent::cmd_featurize(manifest, cfg, out, std::cerr);
  } else if (command == "train") {
    if (!features) throw accent::UsageError("train requires --features DIR (the featurize output)");
    if (mode.empty()) throw accent::UsageError("train requires --mode baseline-plp|baseline-hlda|vowel-hlda");
    accent::cmd_train(manifest, cfg, *features, accent::parse_train_mode(mode), out, std::cerr);
  } else if (command == "evaluate") {
    if (!features) throw accent::UsageError("evaluate requires --features DIR (the featurize output)");
    if (!models) throw accent::UsageError("evaluate requires --models DIR (the train output)");
    std::cout << accent::cmd_evaluate(manifest, cfg, *features, *models, out, std::cerr).table();
  } else {
    throw accent::UsageError("unknown command '" + command + "'");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Accent classification pipeline: silence removal, PLP features, GMM and vowel-combined classifiers"};
  std::string command;
  std::optional<fs::path> manifest, config, features, models;
  fs::path out;
  std::string mode;
  std::optional<std::uint64_t> seed;
  app.add_option("command", command, "vad | featurize | train | evaluate | synthcorpus")
      ->required()
      ->check(CLI::IsMember({"vad", "featurize", "train", "evaluate", "synthcorpus"}));
  app.add_option("--manifest", manifest, "utterance manifest (id, audio, accent, alignment)");
  app.add_option("--config", config, "pipeline configuration; defaults apply when omitted");
  app.add_option("--out", out, "output directory")->required();
  app.add_option("--mode", mode, "train mode: baseline-plp | baseline-hlda | vowel-hlda");
  app.add_option("--seed", seed, "overrides [run] seed");
  app.add_option("--features", features, "feature store written by featurize (train, evaluate)");
  app.add_option("--models", models, "model directory written by train (evaluate)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    return run(command, manifest, config, out, mode, seed, features, models);
  } catch (const accent::UsageError& e) {
    std::cerr << "accent-forge: " << e.what() << '\n';
    return kUsage;
  } catch (const accent::ConsistencyError& e) {
    std::cerr << "accent-forge: " << e.what() << '\n';
    return kConsistency;
  } catch (const std::exception& e) {
    std::cerr << "accent-forge: " << e.what() << '\n';
    return kData;
  }
}
