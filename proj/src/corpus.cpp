// src/corpus.cpp

#include "accent/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

#include "accent/binary_io.hpp"
#include "accent/error.hpp"
#include "accent/rng.hpp"

namespace accent {

namespace fs = std::filesystem;

std::optional<int> vowel_index(std::string_view phone) {
  for (std::size_t i = 0; i < kVowelInventory.size(); ++i) {
    if (kVowelInventory[i] == phone) return static_cast<int>(i);
  }
  return std::nullopt;
}

std::vector<std::string> vowel_inventory() { return {kVowelInventory.begin(), kVowelInventory.end()}; }

int Manifest::label_index(const std::string& accent) const {
  auto it = std::find(labels.begin(), labels.end(), accent);
  if (it == labels.end()) throw DataError("manifest: unknown accent '" + accent + "'");
  return static_cast<int>(it - labels.begin());
}

Manifest parse_manifest(const fs::path& path) {
  return parse_manifest_text(io::read_file(path), path.parent_path());
}

Manifest parse_manifest_text(const std::string& text, const fs::path& base_dir) {
  Manifest m;
  bool declared = false;
  std::istringstream is(text);
  std::string raw;
  int line_no = 0;
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  auto where = [&] { return "manifest line " + std::to_string(line_no) + ": "; };
  while (std::getline(is, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.starts_with("#!labels")) {
      if (declared || !m.entries.empty()) throw DataError(where() + "label declaration must come first and only once");
      for (auto& l : io::split_ws(line.substr(8))) {
        if (std::find(m.labels.begin(), m.labels.end(), l) != m.labels.end()) {
          throw DataError(where() + "duplicate declared label '" + l + "'");
        }
        m.labels.push_back(l);
      }
      declared = true;
      continue;
    }
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (io::trim(line).empty()) continue;

    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      const auto tab = line.find('\t', pos);
      fields.emplace_back(io::trim(line.substr(pos, tab == std::string_view::npos ? line.npos : tab - pos)));
      if (tab == std::string_view::npos) break;
      pos = tab + 1;
    }
    while (fields.size() > 3 && fields.back().empty()) fields.pop_back();
    if (fields.size() < 3 || fields.size() > 4) throw DataError(where() + "expected 3 or 4 tab-separated fields");
    for (std::size_t i = 0; i < 3; ++i) {
      if (fields[i].empty()) throw DataError(where() + "empty field");
    }
    if (io::split_ws(fields[0]).size() != 1 || io::split_ws(fields[2]).size() != 1) {
      throw DataError(where() + "ids and labels may not contain whitespace");
    }
    for (const auto& e : m.entries) {
      if (e.id == fields[0]) throw DataError(where() + "duplicate utterance id '" + fields[0] + "'");
    }
    if (std::find(m.labels.begin(), m.labels.end(), fields[2]) == m.labels.end()) {
      if (declared) throw DataError(where() + "unknown accent label '" + fields[2] + "'");
      m.labels.push_back(fields[2]);
    }
    ManifestEntry e;
    e.id = fields[0];
    e.audio = resolve(fields[1]);
    e.accent = fields[2];
    if (fields.size() == 4 && !fields[3].empty()) e.alignment = resolve(fields[3]);
    m.entries.push_back(std::move(e));
  }
  return m;
}

std::string serialize_manifest(const Manifest& m) {
  std::ostringstream os;
  os << "#!labels";
  for (const auto& l : m.labels) os << ' ' << l;
  os << '\n';
  for (const auto& e : m.entries) {
    os << e.id << '\t' << e.audio.generic_string() << '\t' << e.accent;
    if (e.alignment) os << '\t' << e.alignment->generic_string();
    os << '\n';
  }
  return os.str();
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "?";
}

std::vector<std::size_t> SplitAssignment::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] == s) out.push_back(i);
  }
  return out;
}

std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3>& ratios) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = ratios[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rem[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  while (assigned < n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 3; ++i) {
      if (rem[i] > rem[best] + 1e-12) best = i;
    }
    ++counts[best];
    rem[best] = -1.0;
    ++assigned;
  }
  return counts;
}

SplitAssignment split_dataset(const Manifest& m, const std::array<double, 3>& ratios, std::uint64_t seed) {
  for (double r : ratios) {
    if (!(r > 0.0)) throw UsageError("split: ratios must be positive");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) throw UsageError("split: ratios must sum to one");

  SplitAssignment out;
  out.seed = seed;
  out.tags.assign(m.entries.size(), Split::Train);
  Rng rng(seed);
  for (const auto& label : m.labels) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
      if (m.entries[i].accent == label) idx.push_back(i);
    }
    if (idx.size() < 3) {
      if (!idx.empty()) {
        out.warnings.push_back("accent " + label + " has " + std::to_string(idx.size()) +
                               " utterances; all assigned to train");
      }
      continue;
    }
    rng.shuffle(idx.begin(), idx.end());
    const auto counts = apportion(idx.size(), ratios);
    std::size_t pos = 0;
    for (std::size_t part = 0; part < 3; ++part) {
      for (std::size_t c = 0; c < counts[part]; ++c) out.tags[idx[pos++]] = static_cast<Split>(part);
    }
  }
  return out;
}

std::vector<AlignmentSegment> parse_alignment(const fs::path& path) {
  try {
    return parse_alignment_text(io::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<AlignmentSegment> parse_alignment_text(const std::string& text) {
  std::vector<AlignmentSegment> out;
  std::istringstream is(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = io::split_ws(line);
    if (tok.empty()) continue;
    const std::string where = "alignment line " + std::to_string(line_no) + ": ";
    if (tok.size() < 3 || tok.size() > 4) throw DataError(where + "expected 'start end phone [confidence]'");
    const auto start = io::parse_double(tok[0]);
    const auto end = io::parse_double(tok[1]);
    if (!start || !end || !std::isfinite(*start) || !std::isfinite(*end)) throw DataError(where + "non-numeric time");
    if (*start < 0.0) throw DataError(where + "negative start time");
    if (!(*end > *start)) throw DataError(where + "end must be greater than start");
    AlignmentSegment seg;
    seg.start = *start;
    seg.end = *end;
    for (char c : tok[2]) {
      if (std::isdigit(static_cast<unsigned char>(c))) continue;
      seg.phone.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (seg.phone.empty()) throw DataError(where + "empty phone label");
    if (tok.size() == 4) {
      const auto conf = io::parse_double(tok[3]);
      if (!conf || std::isnan(*conf)) throw DataError(where + "non-numeric confidence");
      seg.confidence = *conf;
    }
    out.push_back(std::move(seg));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  return out;
}

std::string serialize_alignment(const std::vector<AlignmentSegment>& segments) {
  std::ostringstream os;
  for (const auto& s : segments) {
    os << io::format_double(s.start) << ' ' << io::format_double(s.end) << ' ' << s.phone;
    if (s.confidence) os << ' ' << io::format_double(*s.confidence);
    os << '\n';
  }
  return os.str();
}

ConfidenceFilter filter_by_confidence(const std::vector<AlignmentSegment>& segments, double threshold) {
  ConfidenceFilter out;
  const bool keep_all = threshold == -std::numeric_limits<double>::infinity();
  for (const auto& s : segments) {
    if (keep_all || (s.confidence && *s.confidence >= threshold)) {
      out.kept.push_back(s);
    } else {
      ++out.dropped;
    }
  }
  return out;
}

namespace {

// Marks frames whose centre lies in [start, end) of any segment with `phone`.
std::vector<bool> frame_membership(const FeatureMatrix& timing, Eigen::Index frames,
                                   const std::vector<AlignmentSegment>& segments, std::string_view phone) {
  std::vector<bool> in(static_cast<std::size_t>(frames), false);
  if (frames == 0 || !(timing.hop_ms > 0.0)) return in;
  for (const auto& s : segments) {
    if (s.phone != phone) continue;
    const double first_ms = timing.first_center_ms;
    auto lo = static_cast<Eigen::Index>(std::floor((s.start * 1000.0 - first_ms) / timing.hop_ms)) - 1;
    lo = std::max<Eigen::Index>(lo, 0);
    for (Eigen::Index i = lo; i < frames; ++i) {
      const double c = timing.center_seconds(i);
      if (c >= s.end) break;
      if (c >= s.start) in[static_cast<std::size_t>(i)] = true;
    }
  }
  return in;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& values, const std::vector<bool>& in) {
  const auto n = static_cast<Eigen::Index>(std::count(in.begin(), in.end(), true));
  Eigen::MatrixXd out(n, values.cols());
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i]) out.row(r++) = values.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

}  // namespace

FeatureMatrix extract_vowel_frames(const FeatureMatrix& f, const std::vector<AlignmentSegment>& segments,
                                   std::string_view vowel) {
  if (!vowel_index(vowel)) throw UsageError("extract_vowel_frames: '" + std::string(vowel) + "' is not an inventory vowel");
  return f.with_values(gather_rows(f.values, frame_membership(f, f.frames(), segments, vowel)));
}

std::vector<Eigen::MatrixXd> extract_all_vowel_frames(const Eigen::MatrixXd& values, const FeatureMatrix& timing,
                                                      const std::vector<AlignmentSegment>& segments) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(kVowelInventory.size());
  for (auto v : kVowelInventory) {
    out.push_back(gather_rows(values, frame_membership(timing, values.rows(), segments, v)));
  }
  return out;
}

TimeMap::TimeMap(const SpeechMask& mask) {
  identity_ = false;
  const double sr = mask.sample_rate;
  for (auto [b, e] : mask.kept_ranges()) kept_.emplace_back(static_cast<double>(b) / sr, static_cast<double>(e) / sr);
  // A mask that keeps everything maps time onto itself.
  identity_ = kept_.size() == 1 && kept_.front().first == 0.0 && mask.kept_samples() == mask.num_samples;
}

double TimeMap::map(double t) const {
  if (identity_) return t;
  double acc = 0.0;
  for (auto [b, e] : kept_) {
    if (t <= b) break;
    acc += std::min(t, e) - b;
  }
  return acc;
}

std::optional<std::pair<double, double>> TimeMap::map_segment(double start, double end) const {
  const double a = map(start);
  const double b = map(end);
  if (!(b > a)) return std::nullopt;
  return std::make_pair(a, b);
}

std::vector<AlignmentSegment> TimeMap::remap(const std::vector<AlignmentSegment>& segments) const {
  std::vector<AlignmentSegment> out;
  for (const auto& s : segments) {
    if (auto m = map_segment(s.start, s.end)) {
      AlignmentSegment r = s;
      r.start = m->first;
      r.end = m->second;
      out.push_back(std::move(r));
    }
  }
  return out;
}

double TimeMap::retained_seconds() const {
  double acc = 0.0;
  for (auto [b, e] : kept_) acc += e - b;
  return acc;
}

std::string serialize_mask(const SpeechMask& mask) {
  std::ostringstream os;
  os << "ACMASK1 " << mask.frame_len << ' ' << mask.hop << ' ' << mask.num_samples << ' ' << mask.sample_rate << ' '
     << mask.keep.size() << '\n';
  for (bool k : mask.keep) os << (k ? '1' : '0');
  os << '\n';
  return os.str();
}

SpeechMask deserialize_mask(const std::string& text) {
  std::istringstream is(text);
  std::string header, bits;
  std::getline(is, header);
  std::getline(is, bits);
  const auto tok = io::split_ws(header);
  if (tok.size() != 6 || tok[0] != "ACMASK1") throw DataError("ACMASK1: bad header");
  SpeechMask m;
  const auto fl = io::parse_int(tok[1]), hop = io::parse_int(tok[2]), ns = io::parse_int(tok[3]),
             sr = io::parse_int(tok[4]), nf = io::parse_int(tok[5]);
  if (!fl || !hop || !ns || !sr || !nf || *nf != static_cast<long long>(bits.size())) {
    throw DataError("ACMASK1: bad header");
  }
  m.frame_len = static_cast<std::size_t>(*fl);
  m.hop = static_cast<std::size_t>(*hop);
  m.num_samples = static_cast<std::size_t>(*ns);
  m.sample_rate = static_cast<int>(*sr);
  for (char c : bits) {
    if (c != '0' && c != '1') throw DataError("ACMASK1: bad mask bit");
    m.keep.push_back(c == '1');
  }
  return m;
}

}  // namespace accent
