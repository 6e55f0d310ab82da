#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <c10/util/Exception.h>

#include "hwdnet/ablation.hpp"
#include "hwdnet/checkpoint.hpp"
#include "hwdnet/config.hpp"
#include "hwdnet/error.hpp"
#include "hwdnet/evaluate.hpp"
#include "hwdnet/plot.hpp"
#include "hwdnet/synthetic.hpp"
#include "hwdnet/trainer.hpp"

namespace hwdnet::cli {

namespace fs = std::filesystem;

namespace {

struct ConfigFlags {
  std::string preset = "default";
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<double> lr;

  void add_to(CLI::App* app, bool with_seed = true) {
    app->add_option("--preset", preset, "Base recipe: default or desk")
        ->check(CLI::IsMember({"default", "desk"}))
        ->capture_default_str();
    app->add_option("--config", config_file, "Config file of `key = value` lines (default: $HWDNET_CONFIG)");
    app->add_option("--set", sets, "Override one config key, as key=value (repeatable)");
    if (with_seed) app->add_option("--seed", seed, "Training seed (train.seed)");
    app->add_option("--epochs", epochs, "Number of epochs (train.epochs)");
    app->add_option("--lr", lr, "Initial learning rate (train.lr)");
  }

  Settings overrides() const {
    Settings out;
    if (seed) out.emplace_back("train.seed", std::to_string(*seed));
    if (epochs) out.emplace_back("train.epochs", std::to_string(*epochs));
    if (lr) {
      std::ostringstream s;
      s << *lr;
      out.emplace_back("train.lr", s.str());
    }
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      out.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return out;
  }

  Settings file_settings() const {
    std::string file = config_file;
    if (file.empty()) {
      if (const char* env = std::getenv("HWDNET_CONFIG"); env && *env) file = env;
    }
    return file.empty() ? Settings{} : read_settings_file(file);
  }

  TrainConfig build() const {
    TrainConfig cfg = preset == "desk" ? desk_preset() : TrainConfig{};
    apply_settings(cfg, file_settings());
    apply_settings(cfg, overrides());
    cfg.validate();
    return cfg;
  }
};

void require_file(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw ValidationError(what + " not found: " + path);
}

void require_dir(const std::string& path, const std::string& what) {
  if (!fs::is_directory(path)) throw ValidationError(what + " not found: " + path);
}

void write_file(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  out << text;
  if (!out) throw IoError("failed writing " + file.string());
}

std::string summary(const DatasetIndex& index) {
  return std::to_string(index.size()) + " images, " + std::to_string(index.num_identities()) + " identities";
}

// synth ---------------------------------------------------------------------

struct SynthArgs {
  SyntheticSpec spec;
  std::string out;
  bool force = false;
};

void add_synth(CLI::App& app, SynthArgs& a) {
  auto* c = app.add_subcommand("synth", "Generate a synthetic paired RGB/IR vehicle dataset");
  c->add_option("--out", a.out, "Output directory")->required();
  c->add_option("--num-ids", a.spec.num_ids, "Training identities (>= 2)")->capture_default_str();
  c->add_option("--spm", a.spec.samples_per_id_per_modality, "Samples per identity per modality")
      ->capture_default_str();
  c->add_option("--seed", a.spec.seed, "Generator seed")->capture_default_str();
  c->add_option("--test-ids", a.spec.test_ids, "Extra identities written to the test split")->capture_default_str();
  c->add_option("--height", a.spec.height, "Image height in pixels")->capture_default_str();
  c->add_option("--width", a.spec.width, "Image width in pixels")->capture_default_str();
  c->add_flag("--force", a.force, "Replace an existing dataset in --out");
}

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const fs::path root(a.out);
  if (fs::exists(root) && !fs::is_empty(root)) {
    if (!a.force) throw ValidationError(root.string() + " is not empty; pass --force to replace it");
    for (const char* sub : {"rgb", "ir", "labels.tsv"}) fs::remove_all(root / sub);
  }
  const auto index = generate_synthetic_dataset(a.spec, root);
  out << summary(index) << "\n";
  return 0;
}

// train ---------------------------------------------------------------------

struct TrainArgs {
  ConfigFlags cfg;
  std::string data, out, labels, resume;
  bool quiet = false;
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* c = app.add_subcommand("train", "Train a model");
  c->add_option("--data", a.data, "Dataset root containing rgb/ and ir/")->required();
  c->add_option("--out", a.out, "Output directory for logs, checkpoints and reports")->required();
  c->add_option("--labels", a.labels, "labels.tsv sidecar (default: <data>/labels.tsv if present)");
  c->add_option("--resume", a.resume, "Continue from this checkpoint; config flags override its settings");
  c->add_flag("--quiet", a.quiet, "Do not print per-epoch progress");
  a.cfg.add_to(c);
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  require_dir(a.data, "dataset");
  const auto index = load_ucm_veid_index(a.data, a.labels);
  TrainOptions opts;
  opts.out_dir = a.out;
  if (!a.quiet) opts.progress = [&](const std::string& m) { out << m << std::endl; };
  TrainResult result;
  if (!a.resume.empty()) {
    require_file(a.resume, "checkpoint");
    auto overrides = a.cfg.file_settings();
    for (auto& kv : a.cfg.overrides()) overrides.push_back(kv);
    result = resume(load_checkpoint(a.resume), overrides, index, opts);
  } else {
    result = train(a.cfg.build(), index, opts);
  }
  for (const auto& r : result.reports) {
    char line[128];
    std::snprintf(line, sizeof line, "%-6s %-6s rank-1 %.4f  rank-10 %.4f  mAP %.4f",
                  std::string(to_string(r.direction)).c_str(), std::string(to_string(r.shot)).c_str(), r.rank(1),
                  r.cmc.size() >= 10 ? r.rank(10) : r.cmc.back(), r.map);
    out << line << "\n";
  }
  return 0;
}

// eval ----------------------------------------------------------------------

struct EvalArgs {
  std::string ckpt, data, labels, out, embeddings;
  std::string direction = "both", shot = "both";
  std::optional<int> dim;
  std::optional<int> seeds;
  std::optional<int> max_rank;
  std::vector<std::string> sets;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  auto* c = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  c->add_option("--ckpt", a.ckpt, "Checkpoint file")->required();
  c->add_option("--data", a.data, "Dataset root")->required();
  c->add_option("--labels", a.labels, "labels.tsv sidecar");
  c->add_option("--direction", a.direction, "ir2rgb, rgb2ir or both")
      ->check(CLI::IsMember({"ir2rgb", "rgb2ir", "both"}))
      ->capture_default_str();
  c->add_option("--shot", a.shot, "single, multi or both")
      ->check(CLI::IsMember({"single", "multi", "both"}))
      ->capture_default_str();
  c->add_option("--dim", a.dim, "Expected feature width; must match the checkpoint");
  c->add_option("--seeds", a.seeds, "Single-shot gallery draws (eval.seeds)");
  c->add_option("--max-rank", a.max_rank, "Length of the CMC curve (eval.max_rank)");
  c->add_option("--set", a.sets, "Override one config key, as key=value (repeatable)");
  c->add_option("--out", a.out, "Directory for report JSON files (default: print to stdout)");
  c->add_option("--embeddings", a.embeddings, "Also write test embeddings to this TSV file");
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  require_file(a.ckpt, "checkpoint");
  require_dir(a.data, "dataset");
  const auto ckpt = load_checkpoint(a.ckpt);
  TrainConfig cfg;
  apply_settings(cfg, ckpt.config);
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.dim) cfg.encoder.dim = *a.dim;
  if (a.seeds) cfg.eval.single_shot_seeds = *a.seeds;
  if (a.max_rank) cfg.eval.max_rank = *a.max_rank;
  cfg.validate();

  HwdNet model(model_spec(cfg, static_cast<int>(ckpt.identity_classes.size())));
  restore_state(*model, ckpt.model);

  const auto full = load_ucm_veid_index(a.data, a.labels);
  const auto test = full.test_subset().empty() ? full : full.test_subset();
  ImageStore store(test, cfg.batch.image_height, cfg.batch.image_width);
  const auto emb = embed_index(*model, store);
  if (!a.embeddings.empty()) write_embeddings_tsv(emb, a.embeddings);

  std::vector<Direction> directions;
  if (a.direction != "rgb2ir") directions.push_back(Direction::ir2rgb);
  if (a.direction != "ir2rgb") directions.push_back(Direction::rgb2ir);
  std::vector<Shot> shots;
  if (a.shot != "multi") shots.push_back(Shot::single);
  if (a.shot != "single") shots.push_back(Shot::multi);
  if (!a.out.empty()) fs::create_directories(a.out);
  for (auto d : directions) {
    for (auto s : shots) {
      const auto report = evaluate_embeddings(emb, test, d, s, cfg.eval);
      if (a.out.empty()) {
        out << report.to_json();
      } else {
        const auto file = fs::path(a.out) / report_file_name(report);
        write_file(file, report.to_json());
        out << file.string() << "\n";
      }
    }
  }
  return 0;
}

// ablate --------------------------------------------------------------------

struct AblateArgs {
  ConfigFlags cfg;
  std::string data, out, labels;
  std::vector<std::uint64_t> seeds{0};
  bool quiet = false;
};

void add_ablate(CLI::App& app, AblateArgs& a) {
  auto* c = app.add_subcommand("ablate", "Train and evaluate the loss-component grid");
  c->add_option("--data", a.data, "Dataset root with a test split")->required();
  c->add_option("--out", a.out, "Output directory")->required();
  c->add_option("--labels", a.labels, "labels.tsv sidecar");
  c->add_option("--seeds", a.seeds, "Training seeds, averaged per row")->capture_default_str();
  c->add_flag("--quiet", a.quiet, "Do not print per-epoch progress");
  a.cfg.add_to(c, false);
}

int cmd_ablate(const AblateArgs& a, std::ostream& out) {
  require_dir(a.data, "dataset");
  const auto index = load_ucm_veid_index(a.data, a.labels);
  const auto cfg = a.cfg.build();
  std::function<void(const std::string&)> progress;
  if (!a.quiet) progress = [&](const std::string& m) { out << m << std::endl; };
  const auto table = run_ablation(cfg, index, a.seeds, a.out, component_grid(), progress);
  write_file(fs::path(a.out) / "ablation.txt", table.to_text());
  write_file(fs::path(a.out) / "ablation.json", table.to_json());
  out << table.to_text();
  return 0;
}

// plot ----------------------------------------------------------------------

struct PlotArgs {
  std::vector<std::string> reports;
  std::string embeddings, out;
  bool force = false;
};

void add_plot(CLI::App& app, PlotArgs& a) {
  auto* c = app.add_subcommand("plot", "Draw CMC curves and a PCA embedding scatter");
  c->add_option("--report", a.reports, "EvalReport JSON file (repeatable)");
  c->add_option("--embeddings", a.embeddings, "Embedding TSV written by train or eval");
  c->add_option("--out", a.out, "Output directory for cmc.png and embeddings.png")->required();
  c->add_flag("--force", a.force, "Overwrite existing images");
}

int cmd_plot(const PlotArgs& a, std::ostream& out) {
  if (a.reports.empty() && a.embeddings.empty()) throw ValidationError("plot needs --report and/or --embeddings");
  for (const auto& r : a.reports) require_file(r, "report");
  if (!a.embeddings.empty()) require_file(a.embeddings, "embeddings");
  const fs::path dir(a.out);
  const auto cmc_file = dir / "cmc.png";
  const auto scatter_file = dir / "embeddings.png";
  if (!a.force) {
    if (!a.reports.empty() && fs::exists(cmc_file)) throw ValidationError(cmc_file.string() + " exists; pass --force");
    if (!a.embeddings.empty() && fs::exists(scatter_file)) {
      throw ValidationError(scatter_file.string() + " exists; pass --force");
    }
  }
  fs::create_directories(dir);
  if (!a.reports.empty()) {
    std::vector<EvalReport> reports;
    for (const auto& r : a.reports) {
      std::ifstream in(r);
      std::stringstream ss;
      ss << in.rdbuf();
      reports.push_back(EvalReport::from_json(ss.str()));
    }
    write_cmc_plot(reports, cmc_file);
    out << cmc_file.string() << "\n";
  }
  if (!a.embeddings.empty()) {
    const auto s = write_embedding_scatter(read_embeddings_tsv(a.embeddings), scatter_file);
    out << scatter_file.string() << ": " << s.points << " points, " << s.colors << " identities, " << s.markers
        << " modalities\n";
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-modality (RGB/IR) vehicle re-identification toolkit", "hwdnet"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "0.1.0");
  SynthArgs synth;
  TrainArgs train_args;
  EvalArgs eval_args;
  AblateArgs ablate_args;
  PlotArgs plot_args;
  add_synth(app, synth);
  add_train(app, train_args);
  add_eval(app, eval_args);
  add_ablate(app, ablate_args);
  add_plot(app, plot_args);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion& e) {
    out << e.what() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 1;
  }

  try {
    if (app.got_subcommand("synth")) return cmd_synth(synth, out);
    if (app.got_subcommand("train")) return cmd_train(train_args, out);
    if (app.got_subcommand("eval")) return cmd_eval(eval_args, out);
    if (app.got_subcommand("ablate")) return cmd_ablate(ablate_args, out);
    if (app.got_subcommand("plot")) return cmd_plot(plot_args, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.is_input_error() ? 1 : 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const c10::Error& e) {
    err << "error: " << e.what_without_backtrace() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace hwdnet::cli
