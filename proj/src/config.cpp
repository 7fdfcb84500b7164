// src/config.cpp

#include "accent/config.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

#include "accent/binary_io.hpp"
#include "accent/error.hpp"
#include "accent/sha256.hpp"

namespace accent {

namespace {

struct Field {
  std::string section;
  std::string key;
  std::function<void(std::string_view)> set;
  std::function<std::string()> get;
};

double to_double(std::string_view v) {
  const auto d = io::parse_double(v);
  if (!d || !std::isfinite(*d)) throw UsageError("expected a number, got '" + std::string(v) + "'");
  return *d;
}

long long to_int(std::string_view v) {
  const auto i = io::parse_int(v);
  if (!i) throw UsageError("expected an integer, got '" + std::string(v) + "'");
  return *i;
}

bool to_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError("expected true or false, got '" + std::string(v) + "'");
}

Field num(std::string s, std::string k, double& ref) {
  return {std::move(s), std::move(k), [&ref](std::string_view v) { ref = to_double(v); },
          [&ref] { return io::format_double(ref); }};
}

Field integer(std::string s, std::string k, int& ref) {
  return {std::move(s), std::move(k),
          [&ref](std::string_view v) {
            const long long i = to_int(v);
            if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max()) {
              throw UsageError("integer out of range");
            }
            ref = static_cast<int>(i);
          },
          [&ref] { return std::to_string(ref); }};
}

Field flag(std::string s, std::string k, bool& ref) {
  return {std::move(s), std::move(k), [&ref](std::string_view v) { ref = to_bool(v); },
          [&ref] { return std::string(ref ? "true" : "false"); }};
}

std::vector<Field> fields(PipelineConfig& c) {
  std::vector<Field> f = {
      num("vad", "frame_len_ms", c.vad.frame_len_ms),
      num("vad", "hop_ms", c.vad.hop_ms),
      integer("vad", "smooth_window", c.vad.smooth_window),
      integer("vad", "smooth_passes", c.vad.smooth_passes),
      num("vad", "threshold_weight", c.vad.threshold_weight),
      num("vad", "min_segment_ms", c.vad.min_segment_ms),

      num("plp", "frame_len_ms", c.plp.frame_len_ms),
      num("plp", "hop_ms", c.plp.hop_ms),
      integer("plp", "lp_order", c.plp.lp_order),
      integer("plp", "num_cepstra", c.plp.num_cepstra),
      integer("plp", "num_bark_bands", c.plp.num_bark_bands),
      num("plp", "preemphasis", c.plp.preemphasis),
      integer("plp", "delta_window", c.plp.delta_window),

      {"features", "mvn",
       [&c](std::string_view v) {
         if (v == "utterance") c.mvn = MvnScope::Utterance;
         else if (v == "corpus") c.mvn = MvnScope::Corpus;
         else throw UsageError("mvn must be utterance or corpus");
       },
       [&c] { return std::string(c.mvn == MvnScope::Utterance ? "utterance" : "corpus"); }},

      integer("model", "context", c.model.context),
      integer("model", "reduced_dims", c.model.reduced_dims),
      {"model", "transform",
       [&c](std::string_view v) {
         if (v == "none") c.model.transform = TransformChoice::None;
         else if (v == "lda") c.model.transform = TransformChoice::Lda;
         else if (v == "hlda") c.model.transform = TransformChoice::Hlda;
         else throw UsageError("transform must be none, lda or hlda");
       },
       [&c] { return std::string(transform_choice_name(c.model.transform)); }},
      integer("model", "components", c.model.components),
      integer("model", "subset_size", c.model.subset_size),
      flag("model", "normalize_by_frames", c.model.normalize_by_frames),
      {"model", "confidence",
       [&c](std::string_view v) {
         if (v == "auto") {
           c.model.confidence.reset();
         } else if (v == "-inf") {
           c.model.confidence = -std::numeric_limits<double>::infinity();
         } else {
           c.model.confidence = to_double(v);
         }
       },
       [&c] {
         if (!c.model.confidence) return std::string("auto");
         if (std::isinf(*c.model.confidence)) return std::string("-inf");
         return io::format_double(*c.model.confidence);
       }},
      integer("model", "hlda_max_iters", c.model.hlda_max_iters),
      num("model", "hlda_rel_tol", c.model.hlda_rel_tol),

      integer("em", "max_iters", c.em.max_iters),
      num("em", "rel_tol", c.em.rel_tol),
      num("em", "variance_floor_factor", c.em.variance_floor_factor),
      integer("em", "kmeans_iters", c.em.kmeans_iters),

      num("split", "train", c.split[0]),
      num("split", "dev", c.split[1]),
      num("split", "test", c.split[2]),

      {"run", "seed",
       [&c](std::string_view v) {
         const long long s = to_int(v);
         if (s < 0) throw UsageError("seed must be non-negative");
         c.seed = static_cast<std::uint64_t>(s);
       },
       [&c] { return std::to_string(c.seed); }},

      integer("synth", "accents", c.synth.accents),
      integer("synth", "utterances", c.synth.utterances),
      num("synth", "duration_s", c.synth.duration_s),
      integer("synth", "sample_rate", c.synth.sample_rate),
      num("synth", "formant_shift", c.synth.formant_shift),
      num("synth", "speaker_spread", c.synth.speaker_spread),
      num("synth", "silence_fraction", c.synth.silence_fraction),
      num("synth", "mislabel_fraction", c.synth.mislabel_fraction),
  };
  return f;
}

std::string render(const PipelineConfig& cfg, const std::vector<std::string>& sections) {
  PipelineConfig copy = cfg;
  std::ostringstream os;
  std::string current;
  for (const auto& field : fields(copy)) {
    if (std::find(sections.begin(), sections.end(), field.section) == sections.end()) continue;
    if (field.section != current) {
      if (!current.empty()) os << '\n';
      current = field.section;
      os << '[' << current << "]\n";
    }
    os << field.key << " = " << field.get() << '\n';
  }
  return os.str();
}

}  // namespace

std::string_view transform_choice_name(TransformChoice t) {
  switch (t) {
    case TransformChoice::None: return "none";
    case TransformChoice::Lda: return "lda";
    case TransformChoice::Hlda: return "hlda";
  }
  return "?";
}

void PipelineConfig::validate() const {
  vad.validate();
  plp.validate();
  em.validate();
  if (model.context < 0) throw UsageError("model: context must be >= 0");
  if (model.components < 1) throw UsageError("model: components must be >= 1");
  if (model.subset_size < 1 || model.subset_size > 15) throw UsageError("model: subset_size must be in [1, 15]");
  if (model.hlda_max_iters < 1 || !(model.hlda_rel_tol > 0.0)) throw UsageError("model: bad hlda iteration settings");
  const int expanded = feature_dims() * (2 * model.context + 1);
  if (model.reduced_dims < 1 || model.reduced_dims > expanded) {
    throw UsageError("model: reduced_dims must be in [1, " + std::to_string(expanded) + "]");
  }
  for (double r : split) {
    if (!(r > 0.0)) throw UsageError("split: ratios must be positive");
  }
  if (std::abs(split[0] + split[1] + split[2] - 1.0) > 1e-9) throw UsageError("split: ratios must sum to one");
  if (synth.accents < 1 || synth.utterances < 1) throw UsageError("synth: accents and utterances must be >= 1");
  if (!(synth.duration_s >= 1.0)) throw UsageError("synth: duration_s must be >= 1");
  if (synth.sample_rate < 8000) throw UsageError("synth: sample_rate must be >= 8000");
  if (!(synth.formant_shift >= 0.0 && synth.formant_shift < 0.5)) throw UsageError("synth: formant_shift must be in [0, 0.5)");
  if (!(synth.speaker_spread >= 0.0 && synth.speaker_spread < 0.2)) throw UsageError("synth: speaker_spread must be in [0, 0.2)");
  if (!(synth.silence_fraction >= 0.0 && synth.silence_fraction < 0.9)) {
    throw UsageError("synth: silence_fraction must be in [0, 0.9)");
  }
  if (!(synth.mislabel_fraction >= 0.0 && synth.mislabel_fraction <= 1.0)) {
    throw UsageError("synth: mislabel_fraction must be in [0, 1]");
  }
}

std::string PipelineConfig::canonical() const {
  return render(*this, {"vad", "plp", "features", "model", "em", "split", "run", "synth"});
}

std::string PipelineConfig::frontend_fingerprint() const { return sha256_hex(render(*this, {"vad", "plp", "features"})); }

std::string PipelineConfig::fingerprint() const {
  return sha256_hex(render(*this, {"vad", "plp", "features", "model", "em", "split", "run"}));
}

PipelineConfig parse_config_text(const std::string& text) {
  PipelineConfig cfg;
  auto table = fields(cfg);
  std::istringstream is(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  std::vector<std::string> seen;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = io::trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw UsageError(where + "malformed section header");
      section = std::string(io::trim(line.substr(1, line.size() - 2)));
      bool known = false;
      for (const auto& f : table) known = known || f.section == section;
      if (!known) throw UsageError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw UsageError(where + "expected 'key = value'");
    if (section.empty()) throw UsageError(where + "key outside of a section");
    const std::string key(io::trim(line.substr(0, eq)));
    const std::string_view value = io::trim(line.substr(eq + 1));
    auto it = std::find_if(table.begin(), table.end(),
                           [&](const Field& f) { return f.section == section && f.key == key; });
    if (it == table.end()) throw UsageError(where + "unknown key '" + key + "' in [" + section + "]");
    const std::string qualified = section + "." + key;
    if (std::find(seen.begin(), seen.end(), qualified) != seen.end()) {
      throw UsageError(where + "duplicate key '" + qualified + "'");
    }
    seen.push_back(qualified);
    try {
      it->set(value);
    } catch (const UsageError& e) {
      throw UsageError(where + qualified + ": " + e.what());
    }
  }
  cfg.em.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config_text(io::read_file(path));
  } catch (const UsageError& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

}  // namespace accent
