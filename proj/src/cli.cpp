#include "ttpp/cli.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "ttpp/checkpoint.hpp"
#include "ttpp/config.hpp"
#include "ttpp/errors.hpp"
#include "ttpp/experiment.hpp"
#include "ttpp/report_io.hpp"

namespace ttpp {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config_path, "Flat key = value configuration file");
  cmd->add_option("-s,--set", opts.overrides, "Override a setting, e.g. --set train.lr=0.01")->take_all();
  cmd->add_option("-o,--out", opts.out, "Output location (defaults to output_dir)");
}

/// Defaults, then the file, then --set flags.
RunConfig resolve(const CommonOptions& opts) {
  RunConfig cfg;
  if (!opts.config_path.empty()) apply_config_file(cfg, opts.config_path);
  for (const auto& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.finalize();
  return cfg;
}

fs::path out_dir(const CommonOptions& opts, const RunConfig& cfg) {
  return opts.out.empty() ? fs::path(cfg.output_dir) : fs::path(opts.out);
}

Model load_model(const RunConfig& cfg, const fs::path& checkpoint) {
  if (!fs::exists(checkpoint)) throw std::runtime_error("checkpoint '" + checkpoint.string() + "' does not exist");
  Rng rng(cfg.train.seed);
  Model model(cfg.model, rng);
  load_checkpoint(checkpoint, model.parameters());
  return model;
}

int cmd_gen(const CommonOptions& opts, bool csv, std::ostream& out) {
  const auto cfg = resolve(opts);
  if (cfg.data.source != DataSource::synthetic) throw ConfigError("gen needs data.source = synthetic");
  const fs::path dir = out_dir(opts, cfg);
  const char* ext = csv ? ".csv" : ".feat";
  std::size_t written = 0;
  for (bool train_split : {true, false}) {
    for (const auto& seq : load_split(cfg, train_split)) {
      save_features(seq, dir / (train_split ? "train" : "test") / (seq.video_id + ext));
      ++written;
    }
  }
  out << "wrote " << written << " sequences to " << dir.string() << "\n";
  return 0;
}

int cmd_train(const CommonOptions& opts, std::ostream& out) {
  const auto cfg = resolve(opts);
  const fs::path dir = out_dir(opts, cfg);
  const auto train_seqs = load_split(cfg, true);
  auto run = train_run(cfg, train_seqs);
  save_checkpoint(run.model.parameters(), dir / "checkpoint.bin");
  write_text(dir / "history.csv", history_to_csv(run.history));
  write_text(dir / "manifest.json", run_manifest(cfg, run.model.parameters()));
  const auto& last = run.history.back();
  out << cfg.model.method_name() << ": " << run.history.size() << " epochs, final total loss " << last.total
      << ", h1 accuracy " << last.acc_h1 << "\n";
  return 0;
}

int cmd_eval(const CommonOptions& opts, const std::string& checkpoint_arg, std::ostream& out) {
  const auto cfg = resolve(opts);
  const fs::path checkpoint =
      checkpoint_arg.empty() ? fs::path(cfg.output_dir) / "checkpoint.bin" : fs::path(checkpoint_arg);
  const Model model = load_model(cfg, checkpoint);
  const auto test_seqs = load_split(cfg, false);
  ReportTable table;
  table.add(cfg.model.method_name(), evaluate_model(model, test_seqs, cfg.metric));
  const fs::path target = opts.out.empty() ? fs::path(cfg.output_dir) / "report.csv" : fs::path(opts.out);
  write_text(target, report_to_csv(table));
  out << report_to_csv(table);
  return 0;
}

int cmd_grid(const CommonOptions& opts, std::size_t jobs, std::ostream& out) {
  const auto cfg = resolve(opts);
  const fs::path dir = out_dir(opts, cfg);
  const auto train_seqs = load_split(cfg, true);
  const auto test_seqs = load_split(cfg, false);
  const auto cells = grid_configs(cfg.model);

  std::vector<std::optional<HorizonReport>> reports(cells.size());
  std::vector<std::string> failures(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        RunConfig cell = cfg;
        cell.model = cells[i];
        auto run = train_run(cell, train_seqs);
        reports[i] = evaluate_model(run.model, test_seqs, cfg.metric);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, cells.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  ReportTable table;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!reports[i]) throw std::runtime_error(cells[i].method_name() + " failed: " + failures[i]);
    table.add(cells[i].method_name(), *reports[i]);
  }
  write_text(dir / "grid.csv", report_to_csv(table));
  out << report_to_csv(table);
  return 0;
}

int cmd_dump_attention(const CommonOptions& opts, const std::string& checkpoint_arg, bool train_split,
                       std::ostream& out) {
  const auto cfg = resolve(opts);
  if (cfg.model.aggregator != AggregatorKind::ttm) throw ConfigError("dump-attention needs model.aggregator = ttm");
  const fs::path checkpoint =
      checkpoint_arg.empty() ? fs::path(cfg.output_dir) / "checkpoint.bin" : fs::path(checkpoint_arg);
  const Model model = load_model(cfg, checkpoint);
  std::vector<AttentionRecord> records;
  for (const auto& seq : load_split(cfg, train_split)) {
    auto part = dump_attention(model, seq);
    records.insert(records.end(), part.begin(), part.end());
  }
  const fs::path target = opts.out.empty() ? fs::path(cfg.output_dir) / "attention.csv" : fs::path(opts.out);
  write_text(target, attention_to_csv(records));
  out << "wrote " << records.size() << " attention weights to " << target.string() << "\n";
  return 0;
}

int cmd_param_count(const CommonOptions& opts, std::ostream& out) {
  const auto cfg = resolve(opts);
  std::string csv = "method,d_m,C,closed_form,instantiated\n";
  auto row = [&](const std::string& name, const ModelConfig& mc) {
    Rng rng(0);
    Model model(mc, rng);
    csv += name + "," + std::to_string(mc.d_model) + "," + std::to_string(mc.classes) + "," +
           std::to_string(closed_form_param_count(mc)) + "," + std::to_string(model.parameters().count()) + "\n";
  };
  ModelConfig ttpp = cfg.model;
  ttpp.aggregator = AggregatorKind::ttm;
  ttpp.predictor = PredictorKind::ppm;
  ModelConfig ed = cfg.model;
  ed.aggregator = AggregatorKind::lstm;
  ed.predictor = PredictorKind::lstm;
  row("TTPP", ttpp);
  row("ED-LSTM", ed);
  for (const auto& mc : grid_configs(cfg.model)) row(mc.method_name(), mc);
  if (!opts.out.empty()) write_text(opts.out, csv);
  out << csv;
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temporal transformer with progressive prediction: training, evaluation and ablations", "ttpp"};
  app.require_subcommand(1);

  CommonOptions gen_opts, train_opts, eval_opts, grid_opts, attn_opts, count_opts;
  bool gen_csv = false;
  std::string eval_checkpoint, attn_checkpoint;
  std::size_t grid_jobs = 1;
  bool attn_train = false;

  auto* gen = app.add_subcommand("gen", "Write synthetic train/test feature files");
  add_common(gen, gen_opts);
  gen->add_flag("--csv", gen_csv, "Write the CSV feature format instead of binary");

  auto* train_cmd = app.add_subcommand("train", "Train a model; writes checkpoint, history and manifest");
  add_common(train_cmd, train_opts);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint per horizon and write a report CSV");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint file (defaults to <output_dir>/checkpoint.bin)");

  auto* grid = app.add_subcommand("grid", "Train and evaluate the aggregator x predictor grid");
  add_common(grid, grid_opts);
  grid->add_option("-j,--jobs", grid_jobs, "Cells trained concurrently")->check(CLI::PositiveNumber);

  auto* attn = app.add_subcommand("dump-attention", "Write per-head attention weights as CSV");
  add_common(attn, attn_opts);
  attn->add_option("--checkpoint", attn_checkpoint, "Checkpoint file (defaults to <output_dir>/checkpoint.bin)");
  attn->add_flag("--train-split", attn_train, "Dump the training sequences instead of the test split");

  auto* count = app.add_subcommand("param-count", "Closed-form parameter counts per model");
  add_common(count, count_opts);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_opts, gen_csv, out);
    if (train_cmd->parsed()) return cmd_train(train_opts, out);
    if (eval->parsed()) return cmd_eval(eval_opts, eval_checkpoint, out);
    if (grid->parsed()) return cmd_grid(grid_opts, grid_jobs, out);
    if (attn->parsed()) return cmd_dump_attention(attn_opts, attn_checkpoint, attn_train, out);
    if (count->parsed()) return cmd_param_count(count_opts, out);
  } catch (const std::exception& e) {
    err << "ttpp: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace ttpp
