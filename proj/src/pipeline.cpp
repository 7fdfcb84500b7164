// src/pipeline.cpp

#include "accent/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "accent/binary_io.hpp"
#include "accent/classifier.hpp"
#include "accent/discriminant.hpp"
#include "accent/error.hpp"
#include "accent/signal.hpp"
#include "accent/synth.hpp"
#include "accent/vad.hpp"

namespace accent {

namespace fs = std::filesystem;

std::size_t worker_count() {
  if (const char* env = std::getenv("ACCENT_FORGE_WORKERS")) {
    const auto v = io::parse_int(env);
    if (v && *v > 0) return static_cast<std::size_t>(*v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(worker_count(), n);
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

constexpr const char* kFrontendFile = "frontend.fp";

std::string fixed(double v, int precision) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

std::string describe(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    return ex.what();
  } catch (...) {
    return "unknown error";
  }
}

// Runs fn on every index and collects per-index failures instead of
// aborting on the first one.
std::vector<std::exception_ptr> try_each(std::size_t n, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  parallel_for(n, [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  return errors;
}

struct Utterance {
  std::size_t entry = 0;
  int label = 0;
  FeatureMatrix features;
  SpeechMask mask;
};

// Loads the feature store entries for `indices`; missing or unreadable ones
// are logged and dropped.
std::vector<Utterance> load_utterances(const Manifest& m, const std::vector<std::size_t>& indices,
                                       const fs::path& features_dir, std::ostream& log, std::size_t* missing) {
  std::vector<std::optional<Utterance>> slots(indices.size());
  const auto errors = try_each(indices.size(), [&](std::size_t k) {
    const ManifestEntry& e = m.entries[indices[k]];
    auto archive = read_features(feature_file(features_dir, e.id));
    if (archive.size() != 1 || archive.front().utterance_id != e.id) {
      throw DataError(e.id + ": feature archive does not hold exactly this utterance");
    }
    Utterance u;
    u.entry = indices[k];
    u.label = m.label_index(e.accent);
    u.features = std::move(archive.front());
    u.mask = deserialize_mask(io::read_file(mask_file(features_dir, e.id)));
    slots[k] = std::move(u);
  });
  std::vector<Utterance> out;
  std::size_t skipped = 0;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (errors[k]) {
      log << "skip " << m.entries[indices[k]].id << ": " << describe(errors[k]) << '\n';
      ++skipped;
    } else {
      out.push_back(std::move(*slots[k]));
    }
  }
  if (missing) *missing = skipped;
  return out;
}

FeatureMatrix front_end(const FeatureMatrix& f, int context, const std::optional<LinearTransform>& t) {
  FeatureMatrix x = context > 0 ? context_expand(f, context) : f;
  return t ? project(*t, x) : x;
}

Eigen::MatrixXd stack(const std::vector<const Eigen::MatrixXd*>& parts, Eigen::Index dims) {
  Eigen::Index rows = 0;
  for (const auto* p : parts) rows += p->rows();
  Eigen::MatrixXd out(rows, dims);
  Eigen::Index r = 0;
  for (const auto* p : parts) {
    out.middleRows(r, p->rows()) = *p;
    r += p->rows();
  }
  return out;
}

std::vector<AlignmentSegment> load_segments(const ManifestEntry& e, const SpeechMask& mask) {
  if (!e.alignment) throw DataError(e.id + ": vowel mode needs an alignment path in the manifest");
  return TimeMap(mask).remap(parse_alignment(*e.alignment));
}

std::vector<Eigen::MatrixXd> vowel_frames(const FeatureMatrix& x, const std::vector<AlignmentSegment>& segments,
                                          double threshold) {
  return extract_all_vowel_frames(x.values, x, filter_by_confidence(segments, threshold).kept);
}

// Candidate thresholds: the {0, 10, ..., 90}th percentiles of the vowel
// segment confidences, lowest first. Without confidences only -inf remains.
std::vector<double> confidence_grid(const std::vector<std::vector<AlignmentSegment>>& segments) {
  std::vector<double> conf;
  for (const auto& segs : segments) {
    for (const auto& s : segs) {
      if (s.confidence && vowel_index(s.phone)) conf.push_back(*s.confidence);
    }
  }
  if (conf.empty()) return {-std::numeric_limits<double>::infinity()};
  std::sort(conf.begin(), conf.end());
  std::vector<double> grid;
  for (int p = 0; p <= 90; p += 10) {
    const auto idx = static_cast<std::size_t>(std::floor(p / 100.0 * static_cast<double>(conf.size() - 1)));
    if (grid.empty() || conf[idx] > grid.back()) grid.push_back(conf[idx]);
  }
  return grid;
}

std::string read_fingerprint_file(const fs::path& path) {
  const auto tok = io::split_ws(io::read_file(path));
  if (tok.size() != 3 || tok[0] != "ACFP1" || tok[1] != "frontend") throw DataError(path.string() + ": bad fingerprint file");
  return tok[2];
}

}  // namespace

fs::path feature_file(const fs::path& features_dir, const std::string& id) {
  return features_dir / "features" / (id + ".acfeat");
}

fs::path mask_file(const fs::path& features_dir, const std::string& id) {
  return features_dir / "masks" / (id + ".mask");
}

void check_feature_store(const fs::path& features_dir, const PipelineConfig& cfg) {
  const fs::path fp = features_dir / kFrontendFile;
  if (!fs::exists(fp)) throw DataError(features_dir.string() + ": not a feature store (no " + kFrontendFile + ")");
  if (read_fingerprint_file(fp) != cfg.frontend_fingerprint()) {
    throw ConsistencyError("features in " + features_dir.string() +
                           " were computed with a different vad/plp configuration");
  }
}

std::string CompressionReport::table() const {
  std::ostringstream os;
  os << pad("Accent", 14) << pad("Utterances", 12) << pad("Before (s)", 13) << pad("After (s)", 13)
     << "Compression rate\n";
  for (const auto& r : rows) {
    os << pad(r.accent, 14) << pad(std::to_string(r.utterances), 12) << pad(fixed(r.before_seconds, 2), 13)
       << pad(fixed(r.after_seconds, 2), 13) << fixed(r.mean_rate, 4) << '\n';
  }
  return os.str();
}

CompressionReport cmd_vad(const Manifest& manifest, const PipelineConfig& cfg, const fs::path& out,
                          std::ostream& log) {
  cfg.vad.validate();
  const std::size_t n = manifest.entries.size();
  std::vector<double> before(n), after(n), rate(n);
  const auto errors = try_each(n, [&](std::size_t i) {
    const auto& e = manifest.entries[i];
    const AudioBuffer audio = load_audio(e.audio);
    const VadResult v = remove_silence(audio, cfg.vad);
    io::write_file(mask_file(out, e.id), serialize_mask(v.mask));
    before[i] = audio.duration_seconds();
    after[i] = v.speech.duration_seconds();
    rate[i] = v.compression_rate;
  });

  CompressionReport report;
  for (const auto& label : manifest.labels) report.rows.push_back({label, 0, 0.0, 0.0, 0.0});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = manifest.entries[i];
    if (errors[i]) {
      report.failures.push_back(e.id + ": " + describe(errors[i]));
      log << "skip " << report.failures.back() << '\n';
      continue;
    }
    auto& row = report.rows[static_cast<std::size_t>(manifest.label_index(e.accent))];
    ++row.utterances;
    row.before_seconds += before[i];
    row.after_seconds += after[i];
    row.mean_rate += rate[i];
  }
  for (auto& r : report.rows) {
    if (r.utterances > 0) r.mean_rate /= static_cast<double>(r.utterances);
  }
  if (n > 0 && report.failures.size() == n) throw DataError("vad: no utterance could be processed");
  io::write_file(out / "compression.txt", report.table());
  log << "vad: " << (n - report.failures.size()) << " of " << n << " utterances\n";
  return report;
}

FeaturizeSummary cmd_featurize(const Manifest& manifest, const PipelineConfig& cfg, const fs::path& out,
                               std::ostream& log) {
  cfg.validate();
  const std::size_t n = manifest.entries.size();
  std::vector<FeatureMatrix> feats(n);
  auto errors = try_each(n, [&](std::size_t i) {
    const auto& e = manifest.entries[i];
    const AudioBuffer audio = load_audio(e.audio);
    const VadResult v = remove_silence(audio, cfg.vad);
    if (v.speech.samples.size() < ms_to_samples(cfg.plp.frame_len_ms, audio.sample_rate)) {
      throw DataError("no speech left after silence removal");
    }
    FeatureMatrix f = plp_static(v.speech, cfg.plp);
    f.utterance_id = e.id;
    feats[i] = append_deltas(f, cfg.plp.delta_window);
    io::write_file(mask_file(out, e.id), serialize_mask(v.mask));
  });

  std::optional<MvnStats> corpus_stats;
  if (cfg.mvn == MvnScope::Corpus) {
    std::vector<FeatureMatrix> ok;
    for (std::size_t i = 0; i < n; ++i) {
      if (!errors[i]) ok.push_back(feats[i]);
    }
    if (!ok.empty()) corpus_stats = mvn_stats(ok);
  }
  const auto write_errors = try_each(n, [&](std::size_t i) {
    if (errors[i]) return;
    const FeatureMatrix f = corpus_stats ? apply_mvn(feats[i], *corpus_stats) : mvn(feats[i]);
    write_features(feature_file(out, manifest.entries[i].id), std::span<const FeatureMatrix>(&f, 1));
  });
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) errors[i] = write_errors[i];
  }
  FeaturizeSummary summary;
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) {
      summary.failures.push_back(manifest.entries[i].id + ": " + describe(errors[i]));
      log << "skip " << summary.failures.back() << '\n';
    } else {
      ++summary.written;
    }
  }
  if (summary.written == 0) throw DataError("featurize: no utterance could be featurized");
  io::write_file(out / kFrontendFile, "ACFP1 frontend " + cfg.frontend_fingerprint() + "\n");
  log << "featurize: " << summary.written << " of " << n << " utterances, " << cfg.feature_dims() << " dims\n";
  return summary;
}

TrainMode parse_train_mode(std::string_view name) {
  if (name == "baseline-plp") return TrainMode::BaselinePlp;
  if (name == "baseline-hlda") return TrainMode::BaselineHlda;
  if (name == "vowel-hlda") return TrainMode::VowelHlda;
  throw UsageError("unknown train mode '" + std::string(name) + "' (baseline-plp, baseline-hlda, vowel-hlda)");
}

std::string_view train_mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::BaselinePlp: return "baseline-plp";
    case TrainMode::BaselineHlda: return "baseline-hlda";
    case TrainMode::VowelHlda: return "vowel-hlda";
  }
  return "?";
}

TrainSummary cmd_train(const Manifest& manifest, const PipelineConfig& cfg, const fs::path& features_dir,
                       TrainMode mode, const fs::path& out, std::ostream& log) {
  cfg.validate();
  check_feature_store(features_dir, cfg);
  if (manifest.labels.empty()) throw DataError("train: manifest has no utterances");
  const SplitAssignment split = split_dataset(manifest, cfg.split, cfg.seed);
  for (const auto& w : split.warnings) log << "warning: " << w << '\n';
  {
    std::ostringstream os;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
      os << manifest.entries[i].id << '\t' << split_name(split.tags[i]) << '\n';
    }
    io::write_file(out / "split.tsv", os.str());
  }

  TrainSummary summary;
  summary.mode = mode;
  std::vector<Utterance> train = load_utterances(manifest, split.indices(Split::Train), features_dir, log, nullptr);
  if (train.empty()) throw DataError("train: no training utterances with features");
  summary.train_utterances = train.size();
  const std::size_t n_accents = manifest.labels.size();
  EmOptions em = cfg.em;
  em.seed = cfg.seed;

  // Front end shared by every mode: optional context expansion and transform.
  int context = 0;
  std::optional<LinearTransform> transform;
  if (mode != TrainMode::BaselinePlp) {
    context = cfg.model.context;
    std::vector<FeatureMatrix> expanded(train.size());
    parallel_for(train.size(), [&](std::size_t i) { expanded[i] = front_end(train[i].features, context, {}); });
    if (cfg.model.transform != TransformChoice::None) {
      LabeledFeatures data;
      data.num_classes = static_cast<int>(n_accents);
      Eigen::Index rows = 0;
      for (const auto& f : expanded) rows += f.frames();
      data.x.resize(rows, expanded.front().dims());
      data.labels.resize(static_cast<std::size_t>(rows));
      Eigen::Index r = 0;
      for (std::size_t i = 0; i < expanded.size(); ++i) {
        data.x.middleRows(r, expanded[i].frames()) = expanded[i].values;
        std::fill_n(data.labels.begin() + r, expanded[i].frames(), train[i].label);
        r += expanded[i].frames();
      }
      if (cfg.model.transform == TransformChoice::Lda) {
        transform = lda_fit(data, cfg.model.reduced_dims).transform;
      } else {
        HldaOptions ho;
        ho.max_iters = cfg.model.hlda_max_iters;
        ho.rel_tol = cfg.model.hlda_rel_tol;
        const HldaResult h = hlda_fit(data, cfg.model.reduced_dims, ho);
        log << "hlda: objective " << io::format_double(h.initial_objective) << " -> "
            << io::format_double(h.trace.empty() ? h.initial_objective : h.trace.back()) << " in " << h.trace.size()
            << " iterations\n";
        transform = h.transform;
      }
    }
    for (std::size_t i = 0; i < train.size(); ++i) {
      train[i].features = transform ? project(*transform, expanded[i]) : std::move(expanded[i]);
    }
  }
  const Eigen::Index dims = train.front().features.dims();

  if (mode != TrainMode::VowelHlda) {
    std::vector<std::vector<const Eigen::MatrixXd*>> parts(n_accents);
    for (const auto& u : train) parts[static_cast<std::size_t>(u.label)].push_back(&u.features.values);
    std::vector<Eigen::MatrixXd> pooled(n_accents);
    for (std::size_t s = 0; s < n_accents; ++s) pooled[s] = stack(parts[s], dims);
    AccentModelSet set = train_baseline(manifest.labels, pooled, cfg.model.components, em);
    set.fingerprint = cfg.fingerprint();
    set.context = context;
    set.transform = transform;
    write_model_set(out, set);
    log << "train " << train_mode_name(mode) << ": " << n_accents << " accent models, " << dims << " dims\n";
    return summary;
  }

  // Vowel-combined models.
  std::vector<Utterance> dev = load_utterances(manifest, split.indices(Split::Dev), features_dir, log, nullptr);
  if (dev.empty()) throw DataError("train: vowel mode needs dev utterances for subset selection");
  summary.dev_utterances = dev.size();
  parallel_for(dev.size(), [&](std::size_t i) { dev[i].features = front_end(dev[i].features, context, transform); });
  std::vector<std::vector<AlignmentSegment>> train_segs(train.size()), dev_segs(dev.size());
  parallel_for(train.size(), [&](std::size_t i) {
    train_segs[i] = load_segments(manifest.entries[train[i].entry], train[i].mask);
  });
  parallel_for(dev.size(), [&](std::size_t i) {
    dev_segs[i] = load_segments(manifest.entries[dev[i].entry], dev[i].mask);
  });

  const std::vector<double> grid =
      cfg.model.confidence ? std::vector<double>{*cfg.model.confidence} : confidence_grid(train_segs);
  const std::size_t n_vowels = kVowelInventory.size();

  struct Candidate {
    double threshold;
    std::vector<std::vector<std::optional<GmmModel>>> models;
    std::vector<double> counts;
    SubsetSelection selection;
  };
  std::optional<Candidate> best;
  for (double tau : grid) {
    Candidate c;
    c.threshold = tau;
    std::vector<std::vector<Eigen::MatrixXd>> per_utt(train.size());
    parallel_for(train.size(), [&](std::size_t i) { per_utt[i] = vowel_frames(train[i].features, train_segs[i], tau); });
    c.counts.assign(n_vowels, 0.0);
    c.models.assign(n_accents, std::vector<std::optional<GmmModel>>(n_vowels));
    parallel_for(n_accents * n_vowels, [&](std::size_t job) {
      const std::size_t s = job / n_vowels;
      const std::size_t t = job % n_vowels;
      std::vector<const Eigen::MatrixXd*> parts;
      for (std::size_t i = 0; i < train.size(); ++i) {
        if (static_cast<std::size_t>(train[i].label) == s) parts.push_back(&per_utt[i][t]);
      }
      const Eigen::MatrixXd x = stack(parts, dims);
      if (x.rows() == 0) return;
      const Eigen::Index n_comp = std::min<Eigen::Index>(cfg.model.components, std::max<Eigen::Index>(1, x.rows() / 2));
      EmOptions o = em;
      o.seed = cfg.seed + job;
      c.models[s][t] = em_fit(x, n_comp, o).model;
    });
    for (std::size_t i = 0; i < train.size(); ++i) {
      for (std::size_t t = 0; t < n_vowels; ++t) c.counts[t] += static_cast<double>(per_utt[i][t].rows());
    }
    std::vector<DevUtterance> dev_data(dev.size());
    parallel_for(dev.size(), [&](std::size_t i) {
      dev_data[i].label = dev[i].label;
      dev_data[i].per_vowel = vowel_frames(dev[i].features, dev_segs[i], tau);
    });
    c.selection = select_vowel_subset(dev_data, c.models, c.counts, cfg.model.subset_size, cfg.model.normalize_by_frames);
    const double acc = c.selection.accuracy.back();
    log << "vowel: threshold " << io::format_double(tau) << " dev accuracy " << fixed(acc, 4) << " ("
        << c.selection.skipped_utterances << " dev utterances without vowels); selection";
    for (std::size_t k = 0; k < c.selection.order.size(); ++k) {
      log << ' ' << kVowelInventory[static_cast<std::size_t>(c.selection.order[k])] << '=' << fixed(c.selection.accuracy[k], 3);
    }
    log << '\n';
    if (!best || acc > best->selection.accuracy.back()) best = std::move(c);
  }

  VowelModelSet set;
  set.accents = manifest.labels;
  set.inventory = vowel_inventory();
  set.subset = best->selection.order;
  std::sort(set.subset.begin(), set.subset.end());
  set.weights = vowel_weights(best->counts, set.subset);
  set.models.assign(n_accents, std::vector<std::optional<GmmModel>>(n_vowels));
  for (std::size_t s = 0; s < n_accents; ++s) {
    for (int t : set.subset) set.models[s][static_cast<std::size_t>(t)] = best->models[s][static_cast<std::size_t>(t)];
  }
  set.normalize_by_frames = cfg.model.normalize_by_frames;
  set.confidence_threshold = best->threshold;
  set.fingerprint = cfg.fingerprint();
  set.context = context;
  set.transform = transform;
  write_model_set(out, set);

  summary.subset = set.subset;
  summary.confidence_threshold = best->threshold;
  summary.dev_accuracy = best->selection.accuracy.back();
  std::string names;
  for (int t : set.subset) names += " " + set.inventory[static_cast<std::size_t>(t)];
  log << "train vowel-hlda: subset" << names << ", threshold " << io::format_double(best->threshold) << '\n';
  return summary;
}

EvaluationReport EvaluationReport::from_predictions(std::vector<std::string> labels, std::vector<Prediction> predictions) {
  EvaluationReport r;
  const std::size_t s = labels.size();
  r.labels = std::move(labels);
  r.confusion.assign(s, std::vector<std::size_t>(s, 0));
  std::size_t correct = 0;
  for (const auto& p : predictions) {
    if (p.truth < 0 || static_cast<std::size_t>(p.truth) >= s || p.predicted < 0 ||
        static_cast<std::size_t>(p.predicted) >= s) {
      throw UsageError("evaluation: label index out of range");
    }
    ++r.confusion[static_cast<std::size_t>(p.truth)][static_cast<std::size_t>(p.predicted)];
    if (p.truth == p.predicted) ++correct;
  }
  r.utterances = predictions.size();
  r.overall = r.utterances ? static_cast<double>(correct) / static_cast<double>(r.utterances) : 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    std::size_t row = 0;
    for (auto c : r.confusion[i]) row += c;
    r.per_accent.push_back(row ? std::optional<double>(static_cast<double>(r.confusion[i][i]) / static_cast<double>(row))
                               : std::nullopt);
  }
  r.predictions = std::move(predictions);
  return r;
}

std::string EvaluationReport::table() const {
  std::size_t w = 10;
  for (const auto& l : labels) w = std::max(w, l.size() + 2);
  std::ostringstream os;
  os << "Model: " << model_kind << "\n";
  os << pad("Accent", w) << pad("Utterances", 12) << pad("Correct", 9) << "Accuracy\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::size_t row = 0;
    for (auto c : confusion[i]) row += c;
    os << pad(labels[i], w) << pad(std::to_string(row), 12) << pad(std::to_string(confusion[i][i]), 9)
       << (per_accent[i] ? fixed(100.0 * *per_accent[i], 1) + "%" : std::string("n/a")) << '\n';
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += confusion[i][i];
  os << pad("Overall", w) << pad(std::to_string(utterances), 12) << pad(std::to_string(correct), 9)
     << fixed(100.0 * overall, 1) << "%\n\n";
  os << "Confusion (rows = truth, columns = predicted)\n" << pad("", w);
  for (const auto& l : labels) os << pad(l, w);
  os << '\n';
  for (std::size_t i = 0; i < labels.size(); ++i) {
    os << pad(labels[i], w);
    for (auto c : confusion[i]) os << pad(std::to_string(c), w);
    os << '\n';
  }
  if (no_evidence) os << "\n" << no_evidence << " utterances had no vowel evidence and were assigned " << labels.front() << '\n';
  if (missing) os << missing << " test utterances had no features and were not scored\n";
  return os.str();
}

std::string EvaluationReport::json() const {
  nlohmann::ordered_json j;
  j["model"] = model_kind;
  j["fingerprint"] = fingerprint;
  j["labels"] = labels;
  j["utterances"] = utterances;
  j["overall_accuracy"] = overall;
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    per[labels[i]] = per_accent[i] ? nlohmann::ordered_json(*per_accent[i]) : nlohmann::ordered_json(nullptr);
  }
  j["per_accent_accuracy"] = per;
  j["confusion"] = confusion;
  j["no_evidence"] = no_evidence;
  j["missing"] = missing;
  nlohmann::ordered_json preds = nlohmann::ordered_json::array();
  for (const auto& p : predictions) {
    preds.push_back({{"id", p.id},
                     {"truth", labels[static_cast<std::size_t>(p.truth)]},
                     {"predicted", labels[static_cast<std::size_t>(p.predicted)]}});
  }
  j["predictions"] = preds;
  return j.dump(2) + "\n";
}

EvaluationReport cmd_evaluate(const Manifest& manifest, const PipelineConfig& cfg, const fs::path& features_dir,
                              const fs::path& models_dir, const fs::path& out, std::ostream& log) {
  cfg.validate();
  check_feature_store(features_dir, cfg);
  const ModelSetKind kind = read_model_set_kind(models_dir);
  std::optional<AccentModelSet> baseline;
  std::optional<VowelModelSet> vowel;
  if (kind == ModelSetKind::Baseline) {
    baseline = read_accent_model_set(models_dir);
  } else {
    vowel = read_vowel_model_set(models_dir);
  }
  const std::string& fp = baseline ? baseline->fingerprint : vowel->fingerprint;
  if (fp != cfg.fingerprint()) {
    throw ConsistencyError("models in " + models_dir.string() + " were trained with a different configuration");
  }
  const std::vector<std::string>& accents = baseline ? baseline->accents : vowel->accents;
  const int context = baseline ? baseline->context : vowel->context;
  const std::optional<LinearTransform>& transform = baseline ? baseline->transform : vowel->transform;

  const SplitAssignment split = split_dataset(manifest, cfg.split, cfg.seed);
  std::size_t missing = 0;
  std::vector<Utterance> test = load_utterances(manifest, split.indices(Split::Test), features_dir, log, &missing);

  std::vector<Prediction> preds(test.size());
  std::vector<char> no_evidence(test.size(), 0);
  parallel_for(test.size(), [&](std::size_t i) {
    const ManifestEntry& e = manifest.entries[test[i].entry];
    const auto it = std::find(accents.begin(), accents.end(), e.accent);
    if (it == accents.end()) throw DataError(e.id + ": accent '" + e.accent + "' is not covered by the models");
    preds[i].id = e.id;
    preds[i].truth = static_cast<int>(it - accents.begin());
    const FeatureMatrix x = front_end(test[i].features, context, transform);
    if (baseline) {
      preds[i].predicted = classify_baseline(*baseline, x.values).predicted;
      return;
    }
    auto per_vowel = vowel_frames(x, load_segments(e, test[i].mask), vowel->confidence_threshold);
    bool any = false;
    for (std::size_t t = 0; t < per_vowel.size(); ++t) {
      if (std::find(vowel->subset.begin(), vowel->subset.end(), static_cast<int>(t)) == vowel->subset.end()) {
        per_vowel[t].resize(0, x.dims());
      }
      any = any || per_vowel[t].rows() > 0;
    }
    if (!any) {
      no_evidence[i] = 1;
      preds[i].predicted = 0;
      return;
    }
    preds[i].predicted = classify_vowel(*vowel, per_vowel).predicted;
  });

  EvaluationReport report = EvaluationReport::from_predictions(accents, std::move(preds));
  const std::string front = !transform ? "plp" : transform->kind == TransformKind::Lda ? "lda" : "hlda";
  report.model_kind = (baseline ? "baseline-" : "vowel-") + front;
  report.fingerprint = fp;
  report.missing = missing;
  report.no_evidence = static_cast<std::size_t>(std::count(no_evidence.begin(), no_evidence.end(), 1));
  io::write_file(out / "report.txt", report.table());
  io::write_file(out / "report.json", report.json());
  log << "evaluate: " << report.utterances << " test utterances, accuracy " << fixed(report.overall, 4) << '\n';
  return report;
}

Manifest cmd_synthcorpus(const PipelineConfig& cfg, const fs::path& out, std::ostream& log) {
  cfg.validate();
  Manifest m = write_synth_corpus(cfg.synth, cfg.seed, out);
  log << "synthcorpus: " << m.entries.size() << " utterances, " << m.labels.size() << " accents in " << out.string()
      << '\n';
  return m;
}

}  // namespace accent
