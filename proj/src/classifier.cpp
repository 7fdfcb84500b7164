// src/classifier.cpp

#include "accent/classifier.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "accent/binary_io.hpp"
#include "accent/error.hpp"
#include "accent/sha256.hpp"

namespace accent {

namespace fs = std::filesystem;

int argmax_lowest(const std::vector<double>& scores) {
  if (scores.empty()) throw UsageError("argmax over no scores");
  int best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

void AccentModelSet::validate() const {
  if (accents.empty() || accents.size() != models.size()) throw DataError("model set: accents and models disagree");
  std::vector<std::string> sorted = accents;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw DataError("model set: duplicate accent");
  for (const auto& m : models) {
    m.validate();
    if (m.dims() != dims()) throw DataError("model set: models differ in dimension");
  }
  if (transform && transform->retained != dims()) throw DataError("model set: transform output != model dims");
}

Eigen::Index VowelModelSet::dims() const {
  for (const auto& row : models) {
    for (const auto& m : row) {
      if (m) return m->dims();
    }
  }
  return 0;
}

void VowelModelSet::validate() const {
  if (accents.empty() || models.size() != accents.size()) throw DataError("vowel model set: accents and models disagree");
  if (subset.empty() || subset.size() != weights.size()) throw DataError("vowel model set: subset and weights disagree");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DataError("vowel model set: negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-10) throw DataError("vowel model set: weights do not sum to one");
  const Eigen::Index d = dims();
  for (const auto& row : models) {
    if (row.size() != inventory.size()) throw DataError("vowel model set: model grid does not match inventory");
    for (const auto& m : row) {
      if (!m) continue;
      m->validate();
      if (m->dims() != d) throw DataError("vowel model set: models differ in dimension");
    }
  }
  for (int t : subset) {
    if (t < 0 || static_cast<std::size_t>(t) >= inventory.size()) throw DataError("vowel model set: subset out of range");
    for (const auto& row : models) {
      if (!row[static_cast<std::size_t>(t)]) {
        throw DataError("vowel model set: no model for subset vowel " + inventory[static_cast<std::size_t>(t)]);
      }
    }
  }
}

AccentModelSet train_baseline(const std::vector<std::string>& accents, const std::vector<Eigen::MatrixXd>& train,
                              Eigen::Index n_components, const EmOptions& opts) {
  if (accents.size() != train.size() || accents.empty()) throw UsageError("train_baseline: one matrix per accent");
  AccentModelSet set;
  set.accents = accents;
  for (std::size_t s = 0; s < train.size(); ++s) {
    if (train[s].rows() < n_components) {
      throw DataError("train_baseline: accent " + accents[s] + " has " + std::to_string(train[s].rows()) +
                      " frames, need at least " + std::to_string(n_components));
    }
    EmOptions o = opts;
    o.seed = opts.seed + s;
    set.models.push_back(em_fit(train[s], n_components, o).model);
  }
  return set;
}

ClassificationResult classify_baseline(const AccentModelSet& models, const Eigen::MatrixXd& x) {
  if (x.rows() == 0) throw DataError("classify: no frames to score");
  ClassificationResult res;
  for (const auto& m : models.models) {
    res.scores.push_back(mixture_log_likelihood(m, x));
    res.frames_scored.push_back(x.rows());
  }
  res.predicted = argmax_lowest(res.scores);
  return res;
}

std::vector<double> vowel_weights(const std::vector<double>& frame_counts, const std::vector<int>& subset) {
  double total = 0.0;
  for (int t : subset) {
    const double c = frame_counts.at(static_cast<std::size_t>(t));
    if (!(c >= 0.0)) throw UsageError("vowel_weights: negative count");
    total += c;
  }
  if (!(total > 0.0)) throw DataError("vowel_weights: no training frames in the subset");
  std::vector<double> w;
  w.reserve(subset.size());
  for (int t : subset) w.push_back(frame_counts[static_cast<std::size_t>(t)] / total);
  return w;
}

VowelScoreTable score_vowels(const std::vector<std::vector<std::optional<GmmModel>>>& models,
                             const std::vector<Eigen::MatrixXd>& per_vowel, const std::vector<int>& vowels) {
  const std::size_t n_accents = models.size();
  const std::size_t n_vowels = per_vowel.size();
  VowelScoreTable table;
  table.log_likelihood = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_accents), static_cast<Eigen::Index>(n_vowels));
  table.frames.assign(n_vowels, 0);
  for (int t : vowels) {
    const auto& x = per_vowel.at(static_cast<std::size_t>(t));
    if (x.rows() == 0) continue;
    table.frames[static_cast<std::size_t>(t)] = x.rows();
    for (std::size_t s = 0; s < n_accents; ++s) {
      const auto& m = models[s].at(static_cast<std::size_t>(t));
      if (!m) throw DataError("score_vowels: missing model for a scored vowel");
      table.log_likelihood(static_cast<Eigen::Index>(s), t) = mixture_log_likelihood(*m, x);
    }
  }
  return table;
}

std::optional<std::vector<double>> combine_vowel_scores(const VowelScoreTable& table, const std::vector<int>& subset,
                                                        const std::vector<double>& weights, bool normalize_by_frames) {
  double present_weight = 0.0;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    if (table.frames[static_cast<std::size_t>(subset[i])] > 0) present_weight += weights[i];
  }
  bool any = false;
  for (int t : subset) any = any || table.frames[static_cast<std::size_t>(t)] > 0;
  if (!any) return std::nullopt;

  const auto n_accents = static_cast<std::size_t>(table.log_likelihood.rows());
  std::vector<double> scores(n_accents, 0.0);
  for (std::size_t i = 0; i < subset.size(); ++i) {
    const int t = subset[i];
    const Eigen::Index k = table.frames[static_cast<std::size_t>(t)];
    if (k == 0) continue;
    // A present vowel with zero training weight contributes nothing.
    const double w = present_weight > 0.0 ? weights[i] / present_weight : 0.0;
    const double norm = normalize_by_frames ? 1.0 / static_cast<double>(k) : 1.0;
    for (std::size_t s = 0; s < n_accents; ++s) {
      scores[s] += w * norm * table.log_likelihood(static_cast<Eigen::Index>(s), t);
    }
  }
  return scores;
}

ClassificationResult classify_vowel(const VowelModelSet& models, const std::vector<Eigen::MatrixXd>& per_vowel) {
  if (per_vowel.size() != models.inventory.size()) throw UsageError("classify_vowel: expected one matrix per inventory vowel");
  for (std::size_t t = 0; t < per_vowel.size(); ++t) {
    if (per_vowel[t].rows() > 0 &&
        std::find(models.subset.begin(), models.subset.end(), static_cast<int>(t)) == models.subset.end()) {
      throw UsageError("classify_vowel: frames supplied for vowel '" + models.inventory[t] + "' outside the subset");
    }
  }
  const VowelScoreTable table = score_vowels(models.models, per_vowel, models.subset);
  auto scores = combine_vowel_scores(table, models.subset, models.weights, models.normalize_by_frames);
  if (!scores) throw DataError("classify_vowel: no vowel frames to score");
  ClassificationResult res;
  res.scores = std::move(*scores);
  res.vowel_frames = table.frames;
  Eigen::Index total = 0;
  for (auto k : table.frames) total += k;
  res.frames_scored.assign(models.accents.size(), total);
  res.predicted = argmax_lowest(res.scores);
  return res;
}

SubsetSelection select_vowel_subset(const std::vector<DevUtterance>& dev,
                                    const std::vector<std::vector<std::optional<GmmModel>>>& models,
                                    const std::vector<double>& train_frame_counts, int subset_size,
                                    bool normalize_by_frames) {
  if (models.empty()) throw UsageError("select_vowel_subset: no models");
  if (subset_size < 1) throw UsageError("select_vowel_subset: subset size must be >= 1");
  const std::size_t n_vowels = models.front().size();
  std::vector<int> eligible;
  for (std::size_t t = 0; t < n_vowels; ++t) {
    bool all = train_frame_counts.at(t) > 0.0;
    for (const auto& row : models) all = all && row.at(t).has_value();
    if (all) eligible.push_back(static_cast<int>(t));
  }
  if (eligible.empty()) throw DataError("select_vowel_subset: no vowel has a model for every accent");

  SubsetSelection sel;
  std::vector<VowelScoreTable> tables;
  std::vector<int> labels;
  for (const auto& u : dev) {
    bool has_frames = false;
    for (const auto& m : u.per_vowel) has_frames = has_frames || m.rows() > 0;
    if (!has_frames) {
      ++sel.skipped_utterances;
      continue;
    }
    tables.push_back(score_vowels(models, u.per_vowel, eligible));
    labels.push_back(u.label);
  }
  if (tables.empty()) throw DataError("select_vowel_subset: dev set has no vowel frames");

  std::vector<int> chosen;
  const std::size_t target = std::min<std::size_t>(static_cast<std::size_t>(subset_size), eligible.size());
  while (chosen.size() < target) {
    int best_vowel = -1;
    double best_acc = -1.0;
    for (int cand : eligible) {
      if (std::find(chosen.begin(), chosen.end(), cand) != chosen.end()) continue;
      std::vector<int> trial = chosen;
      trial.push_back(cand);
      std::sort(trial.begin(), trial.end());
      const auto w = vowel_weights(train_frame_counts, trial);
      std::size_t correct = 0;
      for (std::size_t u = 0; u < tables.size(); ++u) {
        const auto scores = combine_vowel_scores(tables[u], trial, w, normalize_by_frames);
        // Utterances without frames for the trial subset count as errors.
        if (scores && argmax_lowest(*scores) == labels[u]) ++correct;
      }
      const double acc = static_cast<double>(correct) / static_cast<double>(tables.size());
      if (acc > best_acc) {
        best_acc = acc;
        best_vowel = cand;
      }
    }
    chosen.push_back(best_vowel);
    sel.order.push_back(best_vowel);
    sel.accuracy.push_back(best_acc);
  }
  return sel;
}

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += v[i];
  }
  return out;
}

std::string put_artifact(const fs::path& dir, const std::string& name, const std::string& bytes) {
  io::write_file(dir / name, bytes);
  return name + ' ' + sha256_hex(bytes);
}

std::string fetch_artifact(const fs::path& dir, const std::string& name, const std::string& sha) {
  if (name.find("..") != std::string::npos || fs::path(name).is_absolute()) {
    throw DataError("model set: artifact path escapes the model directory: " + name);
  }
  std::string bytes = io::read_file(dir / name);
  if (sha256_hex(bytes) != sha) throw ConsistencyError("model set: checksum mismatch for " + name);
  return bytes;
}

struct ManifestLines {
  std::string kind;
  std::map<std::string, std::vector<std::string>> fields;
  std::vector<std::vector<std::string>> models;
};

ManifestLines parse_set_manifest(const fs::path& dir) {
  const std::string text = io::read_file(dir / kModelSetManifest);
  std::istringstream is(text);
  std::string line;
  ManifestLines out;
  std::getline(is, line);
  const auto head = io::split_ws(line);
  if (head.size() != 2 || head[0] != "ACSET1") throw DataError("model set: bad manifest header");
  out.kind = head[1];
  while (std::getline(is, line)) {
    auto tok = io::split_ws(line);
    if (tok.empty()) continue;
    const std::string key = tok.front();
    tok.erase(tok.begin());
    if (key == "model") {
      out.models.push_back(std::move(tok));
    } else {
      out.fields[key] = std::move(tok);
    }
  }
  return out;
}

const std::vector<std::string>& field(const ManifestLines& m, const std::string& key) {
  auto it = m.fields.find(key);
  if (it == m.fields.end()) throw DataError("model set: manifest lacks '" + key + "'");
  return it->second;
}

std::optional<LinearTransform> load_transform(const fs::path& dir, const ManifestLines& m) {
  auto it = m.fields.find("transform");
  if (it == m.fields.end()) return std::nullopt;
  if (it->second.size() != 2) throw DataError("model set: bad transform line");
  return deserialize_transform(fetch_artifact(dir, it->second[0], it->second[1]));
}

int load_context(const ManifestLines& m) {
  const auto& c = field(m, "context");
  if (c.empty()) return 0;
  const auto v = io::parse_int(c.front());
  if (!v || *v < 0 || *v > 1000) throw DataError("model set: bad context '" + c.front() + "'");
  return static_cast<int>(*v);
}

int index_of(const std::vector<std::string>& v, const std::string& x) {
  auto it = std::find(v.begin(), v.end(), x);
  if (it == v.end()) throw DataError("model set: unknown label '" + x + "'");
  return static_cast<int>(it - v.begin());
}

}  // namespace

void write_model_set(const fs::path& dir, const AccentModelSet& set) {
  set.validate();
  fs::create_directories(dir);
  std::ostringstream os;
  os << "ACSET1 baseline\n";
  os << "fingerprint " << set.fingerprint << '\n';
  os << "accents " << join(set.accents) << '\n';
  os << "context " << set.context << '\n';
  if (set.transform) os << "transform " << put_artifact(dir, "transform.achlda", serialize_transform(*set.transform)) << '\n';
  for (std::size_t s = 0; s < set.accents.size(); ++s) {
    os << "model " << set.accents[s] << ' '
       << put_artifact(dir, "gmm_" + set.accents[s] + ".acgmm", serialize_gmm(set.models[s])) << '\n';
  }
  io::write_file(dir / kModelSetManifest, os.str());
}

void write_model_set(const fs::path& dir, const VowelModelSet& set) {
  set.validate();
  fs::create_directories(dir);
  std::ostringstream os;
  os << "ACSET1 vowel\n";
  os << "fingerprint " << set.fingerprint << '\n';
  os << "accents " << join(set.accents) << '\n';
  os << "inventory " << join(set.inventory) << '\n';
  std::vector<std::string> sub, w;
  for (std::size_t i = 0; i < set.subset.size(); ++i) {
    sub.push_back(set.inventory[static_cast<std::size_t>(set.subset[i])]);
    w.push_back(io::format_double(set.weights[i]));
  }
  os << "subset " << join(sub) << '\n';
  os << "weights " << join(w) << '\n';
  os << "normalize " << (set.normalize_by_frames ? 1 : 0) << '\n';
  os << "confidence_threshold " << io::format_double(set.confidence_threshold) << '\n';
  os << "context " << set.context << '\n';
  if (set.transform) os << "transform " << put_artifact(dir, "transform.achlda", serialize_transform(*set.transform)) << '\n';
  for (std::size_t s = 0; s < set.accents.size(); ++s) {
    for (std::size_t t = 0; t < set.inventory.size(); ++t) {
      const auto& m = set.models[s][t];
      if (!m) continue;
      os << "model " << set.accents[s] << ' ' << set.inventory[t] << ' '
         << put_artifact(dir, "gmm_" + set.accents[s] + "_" + set.inventory[t] + ".acgmm", serialize_gmm(*m)) << '\n';
    }
  }
  io::write_file(dir / kModelSetManifest, os.str());
}

ModelSetKind read_model_set_kind(const fs::path& dir) {
  const auto m = parse_set_manifest(dir);
  if (m.kind == "baseline") return ModelSetKind::Baseline;
  if (m.kind == "vowel") return ModelSetKind::Vowel;
  throw DataError("model set: unknown kind '" + m.kind + "'");
}

AccentModelSet read_accent_model_set(const fs::path& dir) {
  const auto m = parse_set_manifest(dir);
  if (m.kind != "baseline") throw DataError("model set: expected a baseline set");
  AccentModelSet set;
  const auto& fp = field(m, "fingerprint");
  set.fingerprint = fp.empty() ? std::string() : fp.front();
  set.accents = field(m, "accents");
  set.context = load_context(m);
  set.transform = load_transform(dir, m);
  set.models.resize(set.accents.size());
  std::vector<bool> seen(set.accents.size(), false);
  for (const auto& line : m.models) {
    if (line.size() != 3) throw DataError("model set: bad model line");
    const int s = index_of(set.accents, line[0]);
    set.models[static_cast<std::size_t>(s)] = deserialize_gmm(fetch_artifact(dir, line[1], line[2]));
    seen[static_cast<std::size_t>(s)] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) throw DataError("model set: missing accent model");
  set.validate();
  return set;
}

VowelModelSet read_vowel_model_set(const fs::path& dir) {
  const auto m = parse_set_manifest(dir);
  if (m.kind != "vowel") throw DataError("model set: expected a vowel set");
  VowelModelSet set;
  const auto& fp = field(m, "fingerprint");
  set.fingerprint = fp.empty() ? std::string() : fp.front();
  set.accents = field(m, "accents");
  set.inventory = field(m, "inventory");
  for (const auto& v : field(m, "subset")) set.subset.push_back(index_of(set.inventory, v));
  for (const auto& w : field(m, "weights")) {
    const auto v = io::parse_double(w);
    if (!v) throw DataError("model set: bad weight '" + w + "'");
    set.weights.push_back(*v);
  }
  const auto& norm = field(m, "normalize");
  set.normalize_by_frames = !norm.empty() && norm.front() == "1";
  const auto& thr = field(m, "confidence_threshold");
  const auto tv = thr.empty() ? std::nullopt : io::parse_double(thr.front());
  if (!tv) throw DataError("model set: bad confidence threshold");
  set.confidence_threshold = *tv;
  set.context = load_context(m);
  set.transform = load_transform(dir, m);
  set.models.assign(set.accents.size(), std::vector<std::optional<GmmModel>>(set.inventory.size()));
  for (const auto& line : m.models) {
    if (line.size() != 4) throw DataError("model set: bad model line");
    const int s = index_of(set.accents, line[0]);
    const int t = index_of(set.inventory, line[1]);
    set.models[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)] =
        deserialize_gmm(fetch_artifact(dir, line[2], line[3]));
  }
  set.validate();
  return set;
}

}  // namespace accent
