// tests/unit/test_config.cpp

#include <doctest.h>

#include <cmath>
#include <string>

#include "accent/config.hpp"
#include "accent/error.hpp"

using namespace accent;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const UsageError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("defaults") {
  const PipelineConfig c = parse_config_text("");
  CHECK(c.model.context == 1);
  CHECK(c.model.reduced_dims == 20);
  CHECK(c.model.components == 256);
  CHECK(c.model.subset_size == 7);
  CHECK(c.model.transform == TransformChoice::Hlda);
  CHECK(c.mvn == MvnScope::Utterance);
  CHECK(c.feature_dims() == 39);
  CHECK(c.split == std::array<double, 3>{0.70, 0.15, 0.15});
  CHECK(c.vad.smooth_window == 5);
  CHECK(c.vad.threshold_weight == 5.0);
  CHECK_FALSE(c.model.confidence.has_value());
}

TEST_CASE("values are parsed into their fields") {
  const PipelineConfig c = parse_config_text(
      "# comment\n[model]\ncontext = 2   # trailing comment\ntransform = lda\nconfidence = -inf\n"
      "normalize_by_frames = false\n[features]\nmvn = corpus\n[run]\nseed = 42\n[split]\ntrain = 0.8\ndev = 0.1\ntest = 0.1\n");
  CHECK(c.model.context == 2);
  CHECK(c.model.transform == TransformChoice::Lda);
  CHECK(std::isinf(*c.model.confidence));
  CHECK_FALSE(c.model.normalize_by_frames);
  CHECK(c.mvn == MvnScope::Corpus);
  CHECK(c.seed == 42);
  CHECK(c.em.seed == 42);
  CHECK(c.split[0] == 0.8);
  CHECK(parse_config_text("[model]\nconfidence = -2.5\n").model.confidence == -2.5);
}

TEST_CASE("unknown or malformed input is rejected with its line") {
  CHECK(error_of("[model]\ncomponent = 4\n").find("line 2") != std::string::npos);
  CHECK(error_of("[model]\ncomponent = 4\n").find("unknown key") != std::string::npos);
  CHECK(error_of("[models]\n").find("unknown section") != std::string::npos);
  CHECK(error_of("[model]\ncontext = 1\ncontext = 2\n").find("duplicate") != std::string::npos);
  CHECK(error_of("context = 1\n").find("outside") != std::string::npos);
  CHECK(error_of("[model]\ncontext 1\n").find("line 2") != std::string::npos);
  CHECK_FALSE(error_of("[model]\ncontext = one\n").empty());
  CHECK_FALSE(error_of("[model]\ntransform = pca\n").empty());
  CHECK_FALSE(error_of("[features]\nmvn = global\n").empty());
  CHECK_FALSE(error_of("[vad]\nsmooth_window = 4\n").empty());
  CHECK_FALSE(error_of("[split]\ntrain = 0.5\n").empty());
  CHECK_FALSE(error_of("[model]\ncontext = 0\nreduced_dims = 40\n").empty());
  CHECK(error_of("[model]\ncontext = 0\nreduced_dims = 39\n").empty());
  CHECK_FALSE(error_of("[run]\nseed = -1\n").empty());
}

TEST_CASE("canonical form parses back to itself") {
  const PipelineConfig c = parse_config_text("[model]\ncomponents = 16\nhlda_rel_tol = 1e-7\n[synth]\naccents = 4\n");
  const std::string canon = c.canonical();
  CHECK(parse_config_text(canon).canonical() == canon);
  CHECK(canon.find("components = 16") != std::string::npos);
}

TEST_CASE("fingerprint scopes") {
  const PipelineConfig base = parse_config_text("");
  const PipelineConfig synth = parse_config_text("[synth]\naccents = 5\n");
  const PipelineConfig model = parse_config_text("[model]\ncomponents = 8\n");
  const PipelineConfig plp = parse_config_text("[plp]\npreemphasis = 0.9\n");
  const PipelineConfig mvn = parse_config_text("[features]\nmvn = corpus\n");
  CHECK(base.fingerprint().size() == 64);
  CHECK(synth.fingerprint() == base.fingerprint());
  CHECK(model.fingerprint() != base.fingerprint());
  CHECK(model.frontend_fingerprint() == base.frontend_fingerprint());
  CHECK(plp.frontend_fingerprint() != base.frontend_fingerprint());
  CHECK(mvn.frontend_fingerprint() != base.frontend_fingerprint());
  // Comments and spacing do not matter.
  CHECK(parse_config_text("[model]\n  components=8 # x\n").fingerprint() == model.fingerprint());
}
