#include "ttpp/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "ttpp/errors.hpp"
#include "ttpp/text.hpp"

namespace ttpp {

void FeatureSequence::validate() const {
  if (features.rank() != 2 || features.rows() != labels.size()) {
    throw DimensionError("sequence '" + video_id + "': " + std::to_string(labels.size()) + " labels for features " +
                         shape_string(features.shape()));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) {
      throw ContractError("sequence '" + video_id + "': label " + std::to_string(labels[i]) + " at chunk " +
                          std::to_string(i) + " is not below C=" + std::to_string(classes));
    }
  }
}

FeatureSequence chunk_frames(const Tensor& frame_features, std::span<const std::size_t> frame_labels,
                             std::size_t chunk_size, std::size_t classes, std::string video_id) {
  if (chunk_size < 1) throw ContractError("chunk_size must be >= 1");
  const std::size_t frames = frame_features.rows();
  if (frame_labels.size() != frames) {
    throw DimensionError(std::to_string(frame_labels.size()) + " frame labels for " + std::to_string(frames) +
                         " frames");
  }
  if (frames < chunk_size) {
    throw ContractError("cannot chunk " + std::to_string(frames) + " frames with chunk size " +
                        std::to_string(chunk_size) + ": empty sequence");
  }
  const std::size_t chunks = frames / chunk_size;
  const std::size_t d = frame_features.cols();
  FeatureSequence seq;
  seq.video_id = std::move(video_id);
  seq.classes = classes;
  seq.features = Tensor({chunks, d});
  seq.labels.resize(chunks);
  for (std::size_t c = 0; c < chunks; ++c) {
    for (std::size_t f = 0; f < chunk_size; ++f)
      for (std::size_t j = 0; j < d; ++j) seq.features(c, j) += frame_features(c * chunk_size + f, j);
    for (std::size_t j = 0; j < d; ++j) seq.features(c, j) /= static_cast<double>(chunk_size);
    seq.labels[c] = frame_labels[c * chunk_size + chunk_size / 2];
  }
  seq.validate();
  return seq;
}

// --- Binary format -----------------------------------------------------------

namespace {

constexpr std::size_t kHeaderBytes = 8 + 2 + 4 + 4 + 4;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(bytes[offset + i]) << (8 * i));
  return v;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

std::vector<std::uint8_t> encode_features(const FeatureSequence& seq) {
  seq.validate();
  if (seq.classes > 0xFFFF) throw ContractError("binary feature format stores labels as u16");
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + seq.features.size() * 8 + seq.length() * 2);
  out.insert(out.end(), kFeatureMagic.begin(), kFeatureMagic.end());
  put_le<std::uint16_t>(out, kFeatureVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.length()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.dim()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.classes));
  for (double v : seq.features.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  for (auto label : seq.labels) put_le<std::uint16_t>(out, static_cast<std::uint16_t>(label));
  return out;
}

FeatureSequence decode_features(std::span<const std::uint8_t> bytes, std::string video_id) {
  if (bytes.size() < kHeaderBytes) {
    throw TruncationError("feature file truncated inside the " + std::to_string(kHeaderBytes) + "-byte header",
                          bytes.size());
  }
  if (!std::equal(kFeatureMagic.begin(), kFeatureMagic.end(), bytes.begin())) {
    throw ParseError("bad magic, expected TTPPFEAT", 0);
  }
  const auto version = get_le<std::uint16_t>(bytes, 8);
  if (version != kFeatureVersion) {
    throw FormatVersionError("unsupported feature format version " + std::to_string(version), 8);
  }
  const std::size_t length = get_le<std::uint32_t>(bytes, 10);
  const std::size_t dim = get_le<std::uint32_t>(bytes, 14);
  const std::size_t classes = get_le<std::uint32_t>(bytes, 18);
  if (length == 0) throw ParseError("sequence length is zero", 10);
  if (dim == 0) throw ParseError("feature dimension is zero", 14);
  if (classes == 0) throw ParseError("class count is zero", 18);
  const std::size_t feature_bytes = length * dim * 8;
  const std::size_t expected = kHeaderBytes + feature_bytes + length * 2;
  if (bytes.size() < expected) {
    throw TruncationError("feature file truncated: header promises " + std::to_string(expected) + " bytes, file has " +
                              std::to_string(bytes.size()),
                          bytes.size());
  }
  if (bytes.size() > expected) {
    throw ParseError(std::to_string(bytes.size() - expected) + " trailing bytes after labels", expected);
  }
  FeatureSequence seq;
  seq.video_id = std::move(video_id);
  seq.classes = classes;
  seq.features = Tensor({length, dim});
  for (std::size_t i = 0; i < length * dim; ++i) {
    const std::size_t off = kHeaderBytes + 8 * i;
    const double f = std::bit_cast<double>(get_le<std::uint64_t>(bytes, off));
    if (!std::isfinite(f)) throw ParseError("non-finite feature value in row " + std::to_string(i / dim), off);
    seq.features[i] = f;
  }
  seq.labels.resize(length);
  for (std::size_t i = 0; i < length; ++i) {
    const std::size_t off = kHeaderBytes + feature_bytes + 2 * i;
    seq.labels[i] = get_le<std::uint16_t>(bytes, off);
    if (seq.labels[i] >= classes) {
      throw ParseError("label " + std::to_string(seq.labels[i]) + " of chunk " + std::to_string(i) +
                           " is not below C=" + std::to_string(classes),
                       off);
    }
  }
  return seq;
}

// --- CSV format --------------------------------------------------------------

std::string features_to_csv(const FeatureSequence& seq) {
  seq.validate();
  std::string out = seq.video_id + "," + std::to_string(seq.dim()) + "," + std::to_string(seq.classes) + "\n";
  for (std::size_t r = 0; r < seq.length(); ++r) {
    out += std::to_string(seq.labels[r]);
    for (double v : seq.features.row_span(r)) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

FeatureSequence features_from_csv(std::string_view text) {
  std::size_t offset = 0;
  std::size_t line_no = 0;
  FeatureSequence seq;
  std::size_t dim = 0;
  std::vector<double> values;
  while (offset < text.size()) {
    auto end = text.find('\n', offset);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(offset, end - offset));
    const std::size_t line_offset = offset;
    offset = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    try {
      if (dim == 0) {
        if (fields.size() != 3) throw ParseError("header must be 'video_id,d_model,classes'", line_offset);
        seq.video_id = std::string(trim(fields[0]));
        const auto d = parse_int(fields[1]);
        const auto c = parse_int(fields[2]);
        if (d <= 0 || c <= 0) throw ParseError("header dimensions must be positive", line_offset);
        dim = static_cast<std::size_t>(d);
        seq.classes = static_cast<std::size_t>(c);
        continue;
      }
      if (fields.size() != dim + 1) {
        throw RowDimensionError("row " + std::to_string(seq.labels.size()) + " (line " + std::to_string(line_no) +
                                    ") has " + std::to_string(fields.size() - 1) + " feature values, header says " +
                                    std::to_string(dim),
                                line_offset);
      }
      const auto label = parse_int(fields[0]);
      if (label < 0 || static_cast<std::size_t>(label) >= seq.classes) {
        throw ParseError("label " + std::to_string(label) + " on line " + std::to_string(line_no) +
                             " is outside [0, " + std::to_string(seq.classes) + ")",
                         line_offset);
      }
      seq.labels.push_back(static_cast<std::size_t>(label));
      for (std::size_t j = 1; j < fields.size(); ++j) values.push_back(parse_double(fields[j]));
    } catch (const std::invalid_argument& e) {
      throw ParseError(std::string(e.what()) + " on line " + std::to_string(line_no), line_offset);
    }
  }
  if (dim == 0) throw TruncationError("feature CSV has no header", text.size());
  if (seq.labels.empty()) throw TruncationError("feature CSV has no rows", text.size());
  seq.features = Tensor({seq.labels.size(), dim}, std::move(values));
  return seq;
}

void save_features(const FeatureSequence& seq, const std::filesystem::path& path) {
  if (path.extension() == ".csv") {
    const std::string text = features_to_csv(seq);
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  } else {
    write_file(path, encode_features(seq));
  }
}

FeatureSequence load_features(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const bool binary =
      bytes.size() >= kFeatureMagic.size() && std::equal(kFeatureMagic.begin(), kFeatureMagic.end(), bytes.begin());
  if (binary || path.extension() != ".csv") return decode_features(bytes, path.stem().string());
  return features_from_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::vector<FeatureSequence> load_feature_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("feature directory '" + dir.string() + "' not found");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<FeatureSequence> out;
  for (const auto& f : files) out.push_back(load_features(f));
  return out;
}

// --- Synthetic generator -----------------------------------------------------

std::string_view to_string(DurationLaw law) {
  switch (law) {
    case DurationLaw::geometric: return "geometric";
    case DurationLaw::fixed: return "fixed";
    case DurationLaw::uniform: return "uniform";
  }
  return "?";
}

DurationLaw parse_duration_law(std::string_view name) {
  if (name == "geometric") return DurationLaw::geometric;
  if (name == "fixed") return DurationLaw::fixed;
  if (name == "uniform") return DurationLaw::uniform;
  throw ConfigError("unknown duration law '" + std::string(name) + "' (expected geometric|fixed|uniform)");
}

namespace {

std::size_t rounded_mean(double mean) { return static_cast<std::size_t>(std::max(1.0, std::round(mean))); }

}  // namespace

std::size_t DurationModel::sample(Rng& rng) const {
  switch (law) {
    case DurationLaw::geometric: {
      std::geometric_distribution<std::size_t> g(1.0 / mean);
      return g(rng) + 1;
    }
    case DurationLaw::fixed: return rounded_mean(mean);
    case DurationLaw::uniform: {
      std::uniform_int_distribution<std::size_t> u(1, 2 * rounded_mean(mean) - 1);
      return u(rng);
    }
  }
  return 1;
}

double DurationModel::pmf(std::size_t d) const {
  if (d == 0) return 0.0;
  switch (law) {
    case DurationLaw::geometric: {
      const double p = 1.0 / mean;
      return p * std::pow(1.0 - p, static_cast<double>(d - 1));
    }
    case DurationLaw::fixed: return d == rounded_mean(mean) ? 1.0 : 0.0;
    case DurationLaw::uniform: {
      const std::size_t hi = 2 * rounded_mean(mean) - 1;
      return d <= hi ? 1.0 / static_cast<double>(hi) : 0.0;
    }
  }
  return 0.0;
}

double DurationModel::survival(std::size_t d) const {
  if (d <= 1) return 1.0;
  switch (law) {
    case DurationLaw::geometric: return std::pow(1.0 - 1.0 / mean, static_cast<double>(d - 1));
    case DurationLaw::fixed: return d <= rounded_mean(mean) ? 1.0 : 0.0;
    case DurationLaw::uniform: {
      const std::size_t hi = 2 * rounded_mean(mean) - 1;
      return d <= hi ? static_cast<double>(hi - d + 1) / static_cast<double>(hi) : 0.0;
    }
  }
  return 0.0;
}

double DurationModel::hazard(std::size_t age) const {
  const double s = survival(age);
  if (s <= 0.0) return 1.0;
  return std::min(1.0, pmf(age) / s);
}

void SyntheticConfig::validate() const {
  if (classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (d_model < 1) throw ConfigError("synthetic d_model must be positive");
  if (transition.rank() != 2 || transition.rows() != classes || transition.cols() != classes) {
    throw ConfigError("transition matrix must be " + std::to_string(classes) + "x" + std::to_string(classes));
  }
  for (std::size_t i = 0; i < classes; ++i) {
    double s = 0.0;
    for (double v : transition.row_span(i)) {
      if (v < 0.0) throw ConfigError("transition matrix has a negative entry in row " + std::to_string(i));
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ConfigError("transition row " + std::to_string(i) + " does not sum to 1");
  }
  if (!(duration.mean >= 1.0)) throw ConfigError("duration mean must be >= 1");
  if (prototypes.rank() != 2 || prototypes.rows() != classes || prototypes.cols() != d_model) {
    throw ConfigError("prototypes must be classes x d_model");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (phase_gain != 0.0 &&
      (phase_directions.rank() != 2 || phase_directions.rows() != classes || phase_directions.cols() != d_model)) {
    throw ConfigError("phase directions must be classes x d_model");
  }
}

SyntheticConfig SyntheticConfig::make(std::size_t classes, std::size_t d_model, Tensor transition,
                                      DurationModel duration, double noise_sigma, double phase_gain,
                                      std::uint64_t seed, double prototype_scale) {
  SyntheticConfig cfg;
  cfg.classes = classes;
  cfg.d_model = d_model;
  cfg.transition = std::move(transition);
  cfg.duration = duration;
  cfg.noise_sigma = noise_sigma;
  cfg.phase_gain = phase_gain;
  cfg.seed = seed;
  Rng rng(seed ^ 0x5eed'c0f1'9000'0001ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  cfg.prototypes = Tensor({classes, d_model});
  for (auto& v : cfg.prototypes.values()) v = prototype_scale * normal(rng);
  cfg.phase_directions = Tensor({classes, d_model});
  for (std::size_t c = 0; c < classes; ++c) {
    double norm = 0.0;
    for (auto& v : cfg.phase_directions.row_span(c)) {
      v = normal(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : cfg.phase_directions.row_span(c)) v /= norm;
  }
  cfg.validate();
  return cfg;
}

Tensor cyclic_transition(std::size_t classes) {
  Tensor t({classes, classes});
  for (std::size_t i = 0; i < classes; ++i) t(i, (i + 1) % classes) = 1.0;
  return t;
}

Tensor uniform_transition(std::size_t classes) {
  Tensor t({classes, classes});
  for (std::size_t i = 0; i < classes; ++i)
    for (std::size_t j = 0; j < classes; ++j)
      if (i != j) t(i, j) = 1.0 / static_cast<double>(classes - 1);
  return t;
}

namespace {

std::size_t sample_row(const Tensor& matrix, std::size_t row, Rng& rng) {
  const auto weights = matrix.row_span(row);
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  return dist(rng);
}

}  // namespace

std::vector<Segment> sample_segments(const SyntheticConfig& cfg, std::size_t min_chunks, Rng& rng) {
  std::uniform_int_distribution<std::size_t> first(0, cfg.classes - 1);
  std::vector<Segment> segments;
  std::size_t total = 0;
  std::size_t state = first(rng);
  while (total < min_chunks) {
    const std::size_t d = cfg.duration.sample(rng);
    segments.push_back(Segment{state, d});
    total += d;
    state = sample_row(cfg.transition, state, rng);
  }
  return segments;
}

std::vector<FeatureSequence> gen_synthetic(const SyntheticConfig& cfg, std::size_t n_sequences, std::size_t length) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<FeatureSequence> out;
  out.reserve(n_sequences);
  for (std::size_t s = 0; s < n_sequences; ++s) {
    FeatureSequence seq;
    char id[32];
    std::snprintf(id, sizeof(id), "syn_%04zu", s);
    seq.video_id = id;
    seq.classes = cfg.classes;
    seq.features = Tensor({length, cfg.d_model});
    seq.labels.reserve(length);
    const auto segments = sample_segments(cfg, length, rng);
    std::size_t row = 0;
    for (const auto& seg : segments) {
      for (std::size_t age = 1; age <= seg.duration && row < length; ++age, ++row) {
        seq.labels.push_back(seg.label);
        const double phase = cfg.phase_gain * static_cast<double>(age - 1) / cfg.duration.mean;
        for (std::size_t j = 0; j < cfg.d_model; ++j) {
          double v = cfg.prototypes(seg.label, j);
          if (cfg.phase_gain != 0.0) v += phase * cfg.phase_directions(seg.label, j);
          if (cfg.noise_sigma > 0.0) v += cfg.noise_sigma * noise(rng);
          seq.features(row, j) = v;
        }
      }
    }
    out.push_back(std::move(seq));
  }
  return out;
}

void corrupt_labels(std::vector<FeatureSequence>& seqs, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("label noise rate must lie in [0, 1]");
  Rng rng(seed);
  std::bernoulli_distribution flip(rate);
  for (auto& seq : seqs) {
    std::uniform_int_distribution<std::size_t> any(0, seq.classes - 1);
    for (auto& label : seq.labels) {
      if (flip(rng)) label = any(rng);
    }
  }
}

Tensor bayes_label_forecast(const SyntheticConfig& cfg, std::size_t label, std::size_t age, std::size_t horizon) {
  if (label >= cfg.classes) throw ContractError("label out of range");
  if (age < 1) throw ContractError("segment age counts the current chunk and must be >= 1");
  const std::size_t max_age = age + horizon + 1;
  // mass[c][a]: probability of being in class c with segment age a.
  std::vector<std::vector<double>> mass(cfg.classes, std::vector<double>(max_age + 1, 0.0));
  mass[label][age] = 1.0;
  Tensor out({horizon, cfg.classes});
  for (std::size_t step = 0; step < horizon; ++step) {
    std::vector<std::vector<double>> next(cfg.classes, std::vector<double>(max_age + 1, 0.0));
    for (std::size_t c = 0; c < cfg.classes; ++c) {
      for (std::size_t a = 1; a < max_age; ++a) {
        const double m = mass[c][a];
        if (m == 0.0) continue;
        const double h = cfg.duration.hazard(a);
        next[c][a + 1] += m * (1.0 - h);
        for (std::size_t c2 = 0; c2 < cfg.classes; ++c2) next[c2][1] += m * h * cfg.transition(c, c2);
      }
    }
    mass = std::move(next);
    for (std::size_t c = 0; c < cfg.classes; ++c)
      for (std::size_t a = 1; a <= max_age; ++a) out(step, c) += mass[c][a];
  }
  return out;
}

HorizonScorer bayes_scorer(const SyntheticConfig& cfg, std::size_t observed, std::size_t horizon) {
  return [cfg, observed, horizon](const FeatureSequence& seq, std::size_t anchor_end) {
    const std::size_t label = seq.labels.at(anchor_end);
    std::size_t run = 1;
    while (run < observed && anchor_end >= run && seq.labels[anchor_end - run] == label) ++run;
    return bayes_label_forecast(cfg, label, run, horizon);
  };
}

// --- Windows -----------------------------------------------------------------

std::vector<TrainingSample> make_samples(const FeatureSequence& seq, std::size_t observed, std::size_t horizon) {
  std::vector<TrainingSample> out;
  const std::size_t len = seq.length();
  if (len < observed + horizon) return out;
  const std::size_t d = seq.dim();
  const auto rows = [&](std::size_t begin, std::size_t count) {
    const auto first = seq.features.values().begin() + static_cast<std::ptrdiff_t>(begin * d);
    return Tensor({count, d}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count * d)));
  };
  for (std::size_t u = 0; u + observed + horizon <= len; ++u) {
    TrainingSample s;
    s.observed = rows(u, observed);
    s.future_features = rows(u + observed, horizon);
    s.future_labels = Tensor({horizon, seq.classes});
    for (std::size_t i = 0; i < horizon; ++i) s.future_labels(i, seq.labels[u + observed + i]) = 1.0;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TrainingSample> make_samples(std::span<const FeatureSequence> seqs, std::size_t observed,
                                         std::size_t horizon) {
  std::vector<TrainingSample> out;
  for (const auto& s : seqs) {
    auto part = make_samples(s, observed, horizon);
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

}  // namespace ttpp
