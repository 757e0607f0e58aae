#include "ttpp/config.hpp"

#include <functional>
#include <map>

#include "ttpp/errors.hpp"
#include "ttpp/report_io.hpp"
#include "ttpp/text.hpp"

namespace ttpp {

namespace {

std::size_t to_count(std::string_view key, std::string_view v) {
  try {
    const auto n = parse_int(v);
    if (n < 0) throw std::invalid_argument("negative");
    return static_cast<std::size_t>(n);
  } catch (const std::invalid_argument&) {
    throw ConfigError("'" + std::string(key) + "' expects a non-negative integer, got '" + std::string(v) + "'");
  }
}

double to_real(std::string_view key, std::string_view v) {
  try {
    return parse_double(v);
  } catch (const std::invalid_argument&) {
    throw ConfigError("'" + std::string(key) + "' expects a number, got '" + std::string(v) + "'");
  }
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("'" + std::string(key) + "' expects true|false, got '" + std::string(v) + "'");
}

Tensor parse_transition(std::string_view spec, std::size_t classes) {
  if (spec == "cyclic") return cyclic_transition(classes);
  if (spec == "uniform") return uniform_transition(classes);
  Tensor t({classes, classes});
  const auto rows = split(spec, ';');
  if (rows.size() != classes) {
    throw ConfigError("transition matrix needs " + std::to_string(classes) + " ';'-separated rows");
  }
  for (std::size_t i = 0; i < classes; ++i) {
    std::vector<double> vals;
    for (auto tok : split(trim(rows[i]), ' ')) {
      if (!trim(tok).empty()) vals.push_back(to_real("data.synthetic.transition", tok));
    }
    if (vals.size() != classes) throw ConfigError("transition row " + std::to_string(i) + " has wrong width");
    for (std::size_t j = 0; j < classes; ++j) t(i, j) = vals[j];
  }
  return t;
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Field {
  Setter set;
  Getter get;
};

const std::map<std::string, Field, std::less<>>& fields() {
  static const std::map<std::string, Field, std::less<>> table = [] {
    std::map<std::string, Field, std::less<>> m;
    auto count = [&m](const std::string& key, auto member) {
      m[key] = Field{[member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = to_count(k, v); },
                     [member](const RunConfig& c) { return std::to_string(member(c)); }};
    };
    auto real = [&m](const std::string& key, auto member) {
      m[key] = Field{[member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = to_real(k, v); },
                     [member](const RunConfig& c) { return format_double(member(c)); }};
    };
    auto text = [&m](const std::string& key, auto member) {
      m[key] = Field{[member](RunConfig& c, std::string_view, std::string_view v) { member(c) = std::string(v); },
                     [member](const RunConfig& c) { return member(c); }};
    };

    m["model.aggregator"] = Field{
        [](RunConfig& c, std::string_view, std::string_view v) { c.model.aggregator = parse_aggregator(v); },
        [](const RunConfig& c) { return std::string(to_string(c.model.aggregator)); }};
    m["model.predictor"] = Field{
        [](RunConfig& c, std::string_view, std::string_view v) { c.model.predictor = parse_predictor(v); },
        [](const RunConfig& c) { return std::string(to_string(c.model.predictor)); }};
    m["model.ppm_variant"] = Field{
        [](RunConfig& c, std::string_view, std::string_view v) { c.model.ppm_variant = parse_ppm_variant(v); },
        [](const RunConfig& c) { return std::string(to_string(c.model.ppm_variant)); }};
    m["model.shortcut"] =
        Field{[](RunConfig& c, std::string_view k, std::string_view v) { c.model.shortcut = to_bool(k, v); },
              [](const RunConfig& c) { return std::string(c.model.shortcut ? "true" : "false"); }};
    count("model.d_m", [](auto& c) -> auto& { return c.model.d_model; });
    count("model.n_heads", [](auto& c) -> auto& { return c.model.heads; });
    count("model.C", [](auto& c) -> auto& { return c.model.classes; });
    count("model.T", [](auto& c) -> auto& { return c.model.observed; });
    count("model.l", [](auto& c) -> auto& { return c.model.horizon; });
    real("model.dropout", [](auto& c) -> auto& { return c.model.dropout; });

    real("train.lr", [](auto& c) -> auto& { return c.train.lr; });
    real("train.momentum", [](auto& c) -> auto& { return c.train.momentum; });
    count("train.batch_size", [](auto& c) -> auto& { return c.train.batch_size; });
    count("train.epochs", [](auto& c) -> auto& { return c.train.epochs; });
    real("train.lambda", [](auto& c) -> auto& { return c.train.lambda; });
    m["train.seed"] = Field{
        [](RunConfig& c, std::string_view k, std::string_view v) { c.train.seed = to_count(k, v); },
        [](const RunConfig& c) { return std::to_string(c.train.seed); }};

    m["data.source"] = Field{[](RunConfig& c, std::string_view, std::string_view v) {
                               if (v == "synthetic") c.data.source = DataSource::synthetic;
                               else if (v == "files") c.data.source = DataSource::files;
                               else throw ConfigError("data.source must be synthetic|files");
                             },
                             [](const RunConfig& c) {
                               return std::string(c.data.source == DataSource::synthetic ? "synthetic" : "files");
                             }};
    text("data.train_dir", [](auto& c) -> auto& { return c.data.train_dir; });
    text("data.test_dir", [](auto& c) -> auto& { return c.data.test_dir; });
    text("data.synthetic.transition", [](auto& c) -> auto& { return c.data.synthetic.transition; });
    m["data.synthetic.duration_law"] = Field{
        [](RunConfig& c, std::string_view, std::string_view v) {
          c.data.synthetic.duration_law = parse_duration_law(v);
        },
        [](const RunConfig& c) { return std::string(to_string(c.data.synthetic.duration_law)); }};
    real("data.synthetic.duration_mean", [](auto& c) -> auto& { return c.data.synthetic.duration_mean; });
    real("data.synthetic.noise_sigma", [](auto& c) -> auto& { return c.data.synthetic.noise_sigma; });
    real("data.synthetic.phase_gain", [](auto& c) -> auto& { return c.data.synthetic.phase_gain; });
    real("data.synthetic.prototype_scale", [](auto& c) -> auto& { return c.data.synthetic.prototype_scale; });
    real("data.synthetic.train_label_noise", [](auto& c) -> auto& { return c.data.synthetic.train_label_noise; });
    m["data.synthetic.seed"] = Field{
        [](RunConfig& c, std::string_view k, std::string_view v) { c.data.synthetic.seed = to_count(k, v); },
        [](const RunConfig& c) { return std::to_string(c.data.synthetic.seed); }};
    count("data.synthetic.train_sequences", [](auto& c) -> auto& { return c.data.synthetic.train_sequences; });
    count("data.synthetic.test_sequences", [](auto& c) -> auto& { return c.data.synthetic.test_sequences; });
    count("data.synthetic.length", [](auto& c) -> auto& { return c.data.synthetic.length; });

    m["eval.metric"] = Field{[](RunConfig& c, std::string_view, std::string_view v) { c.metric = parse_metric(v); },
                             [](const RunConfig& c) { return std::string(to_string(c.metric)); }};
    text("output_dir", [](auto& c) -> auto& { return c.output_dir; });
    return m;
  }();
  return table;
}

}  // namespace

void RunConfig::finalize() {
  train.observed = model.observed;
  train.horizon = model.horizon;
  model.validate();
  train.validate();
  if (data.source == DataSource::synthetic) {
    synthetic_config();
    const double rate = data.synthetic.train_label_noise;
    if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("data.synthetic.train_label_noise must lie in [0, 1]");
  } else if (data.train_dir.empty()) {
    throw ConfigError("data.source = files needs data.train_dir");
  }
}

SyntheticConfig RunConfig::synthetic_config() const {
  const auto& s = data.synthetic;
  return SyntheticConfig::make(model.classes, model.d_model, parse_transition(s.transition, model.classes),
                               DurationModel{s.duration_law, s.duration_mean}, s.noise_sigma, s.phase_gain, s.seed,
                               s.prototype_scale);
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  const auto it = fields().find(trim(key));
  if (it == fields().end()) throw ConfigError("unknown configuration key '" + std::string(trim(key)) + "'");
  it->second.set(config, it->first, trim(value));
}

void apply_config_text(RunConfig& config, std::string_view text) {
  std::size_t line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    auto line = raw.substr(0, raw.find('#'));
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    apply_setting(config, line.substr(0, eq), line.substr(eq + 1));
  }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const std::runtime_error&) {
    throw ConfigError("cannot read config file '" + path.string() + "'");
  }
  apply_config_text(config, text);
}

std::string config_to_text(const RunConfig& config) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(config) + "\n";
  return out;
}

std::vector<FeatureSequence> load_split(const RunConfig& config, bool train) {
  if (config.data.source == DataSource::files) {
    const auto& dir = train ? config.data.train_dir : config.data.test_dir;
    if (dir.empty()) throw ConfigError(train ? "data.train_dir is not set" : "data.test_dir is not set");
    auto seqs = load_feature_dir(dir);
    if (seqs.empty()) throw ConfigError("no feature files in '" + dir + "'");
    for (const auto& s : seqs) {
      if (s.dim() != config.model.d_model || s.classes != config.model.classes) {
        throw DimensionError("feature file '" + s.video_id + "' has d=" + std::to_string(s.dim()) + ", C=" +
                             std::to_string(s.classes) + " but the model expects d=" +
                             std::to_string(config.model.d_model) + ", C=" + std::to_string(config.model.classes));
      }
    }
    return seqs;
  }
  auto cfg = config.synthetic_config();
  const auto& s = config.data.synthetic;
  if (!train) cfg.seed = s.seed + 0x9E3779B97F4A7C15ULL;
  auto seqs = gen_synthetic(cfg, train ? s.train_sequences : s.test_sequences, s.length);
  if (train && s.train_label_noise > 0.0) corrupt_labels(seqs, s.train_label_noise, s.seed + 0x51ED27);
  if (!train) {
    for (auto& q : seqs) q.video_id = "test_" + q.video_id.substr(4);
  }
  return seqs;
}

}  // namespace ttpp
