// Copyright 2026 The srnn-traffic Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// srnn: prepare / train / eval / cross-eval / synth / inspect.
//
// Exit status: 0 ok, 2 usage or configuration, 3 data/parse/io, 4 training
// divergence. Every run leaves a manifest.json next to its outputs.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "srnn.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";
constexpr const char* kOutDirEnv = "SRNN_OUT_DIR";

struct Options {
  std::string speeds, adj, out;
  std::vector<std::string> checkpoints, targets;
  std::uint64_t seed = 0;
  std::size_t epochs = 10;
  std::size_t seq_len = srnn::kDefaultSeqLen;
  double split = srnn::kDefaultTrainFraction;
  srnn::Hyperparams hp;
  std::size_t hidden = 64;
  srnn::TrainConfig train;
  bool no_shuffle = false;
  std::size_t threads = 0;
  // synth
  std::size_t nodes = 6;
  std::string topology = "ring-chord";
  srnn::SynthConfig synth;
};

/// Collects inputs/outputs for the manifest as the command runs.
class Manifest {
 public:
  Manifest(std::string verb, int argc, char** argv) : verb_(std::move(verb)) {
    for (int i = 1; i < argc; ++i) argv_.push_back(argv[i]);
  }
  void input(const std::string& role, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    char digest[17];
    std::snprintf(digest, sizeof digest, "%016llx",
                  static_cast<unsigned long long>(srnn::detail::fnv1a(ss.str())));
    inputs_.push_back({{"role", role}, {"path", path}, {"fnv1a", digest}});
  }
  void output(const std::string& path) { outputs_.push_back(path); }
  json& extra() { return extra_; }

  void write(const fs::path& dir, std::uint64_t seed, const std::string& out_source) const {
    json j;
    j["tool"] = "srnn";
    j["version"] = kToolVersion;
    j["verb"] = verb_;
    j["argv"] = argv_;
    j["seed"] = seed;
    j["out_dir"] = dir.string();
    j["out_dir_source"] = out_source;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["details"] = extra_;
    j["versions"] = {{"srnn", kToolVersion},
                     {"checkpoint_format", srnn::kCheckpointVersion},
                     {"prepared_format", srnn::kPreparedVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                   "." + std::to_string(EIGEN_MINOR_VERSION)}};
    const auto now = std::chrono::system_clock::now();
    j["created_at_unix"] = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    std::ofstream f(dir / "manifest.json");
    if (!f) throw srnn::IoError("cannot write " + (dir / "manifest.json").string());
    f << j.dump(2) << "\n";
  }

 private:
  std::string verb_;
  std::vector<std::string> argv_;
  json inputs_ = json::array();
  std::vector<std::string> outputs_;
  json extra_ = json::object();
};

void write_text(const fs::path& path, const std::string& content, Manifest& m) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw srnn::IoError("cannot write " + path.string());
  f << content;
  if (!f) throw srnn::IoError("write failed: " + path.string());
  m.output(path.string());
}

std::string stem(const std::string& path) { return fs::path(path).stem().string(); }

/// Dataset from either a prepared cache, or a speeds CSV plus --adj.
srnn::PreparedData load_dataset(const std::string& speeds, const std::string& adj, const Options& o,
                                bool resplit, Manifest& m) {
  if (speeds.empty()) throw srnn::ConfigError("--speeds is required");
  m.input("speeds", speeds);
  if (srnn::is_prepared_file(speeds)) {
    srnn::PreparedData p = srnn::load_prepared(speeds);
    if (resplit && (p.train_fraction != o.split || p.seq_len != o.seq_len)) {
      p = srnn::prepare(p.graph, p.data, o.split, o.seq_len);
    }
    return p;
  }
  if (adj.empty()) throw srnn::ConfigError("--adj is required when --speeds is a CSV file");
  m.input("adjacency", adj);
  const srnn::RoadGraph g = srnn::load_adjacency(adj, &std::cerr);
  return srnn::prepare(g, srnn::load_speeds(speeds), o.split, o.seq_len);
}

void print_report(const srnn::EvalReport& r) {
  std::cout << srnn::report_csv(r);
}

int run_prepare(const Options& o, Manifest& m, const fs::path& out) {
  srnn::PreparedData p = load_dataset(o.speeds, o.adj, o, true, m);
  const fs::path path = out / "prepared.json";
  srnn::save_prepared(path.string(), p);
  m.output(path.string());
  m.extra() = {{"nodes", p.graph.node_count()},
               {"steps", p.data.steps()},
               {"train_rows", p.split.train.size()},
               {"eval_rows", p.split.eval.size()},
               {"imputed", p.imputation.imputed}};
  std::cout << "prepared " << p.graph.node_count() << " segments x " << p.data.steps() << " steps ("
            << p.imputation.imputed << " imputed) -> " << path.string() << "\n";
  return 0;
}

int run_train(const Options& o, Manifest& m, const fs::path& out) {
  const srnn::PreparedData p = load_dataset(o.speeds, o.adj, o, true, m);
  srnn::TrainConfig cfg = o.train;
  cfg.epochs = o.epochs;
  cfg.seed = o.seed;
  cfg.shuffle = !o.no_shuffle;
  cfg.eval_threads = o.threads;
  srnn::Hyperparams hp = o.hp;
  hp.node_hidden = hp.spatial_hidden = hp.temporal_hidden = o.hidden;
  const srnn::TrainResult r = srnn::train(p, hp, cfg, &std::cerr);

  const fs::path ck = out / "checkpoint.srnn";
  srnn::save_checkpoint(ck.string(), r.checkpoint);
  m.output(ck.string());
  write_text(out / "history.csv", srnn::history_csv(r.history), m);
  m.extra() = json::parse(r.checkpoint.meta);
  m.extra()["param_count"] = srnn::param_count(hp);
  if (!r.history.empty()) {
    m.extra()["final_eval_rmse_kmh"] = r.history.back().eval_rmse;
    m.extra()["mean_eval_rmse_kmh"] = srnn::mean_eval_rmse(r.history);
  }
  std::cout << "checkpoint -> " << ck.string() << "\n";
  return 0;
}

int emit_report(const srnn::EvalReport& report, Manifest& m, const fs::path& out, std::uint64_t seed) {
  srnn::EvalReport r = report;
  r.seed = seed;
  write_text(out / "report.json", srnn::report_json(r).dump(2) + "\n", m);
  write_text(out / "report.csv", srnn::report_csv(r), m);
  print_report(r);
  return 0;
}

int run_eval(const Options& o, Manifest& m, const fs::path& out) {
  if (o.checkpoints.size() != 1) throw srnn::ConfigError("eval takes exactly one --checkpoint");
  m.input("checkpoint", o.checkpoints[0]);
  const srnn::Checkpoint ck = srnn::load_checkpoint(o.checkpoints[0]);
  const std::string speeds = o.speeds.empty() && o.targets.size() == 1 ? o.targets[0] : o.speeds;
  const srnn::PreparedData p = load_dataset(speeds, o.adj, o, false, m);
  // Same report shape as a 1x1 cross-eval, but scored with the checkpoint's
  // own scaler.
  auto report = srnn::cross_matrix({}, {}, {p}, {stem(speeds)}, o.threads);
  const srnn::EvalResult r = srnn::evaluate(ck, p, o.threads);
  report.sources = {stem(o.checkpoints[0])};
  report.rmse = srnn::Matrix::Constant(1, 1, r.rmse_kmh);
  report.per_step_rmse = {{r.per_step_rmse}};
  report.source_param_counts = {ck.params.scalar_count()};
  report.scaling = "checkpoint";
  return emit_report(report, m, out, o.seed);
}

int run_cross_eval(const Options& o, Manifest& m, const fs::path& out) {
  if (o.checkpoints.empty()) throw srnn::ConfigError("cross-eval needs at least one --checkpoint");
  if (o.targets.empty()) throw srnn::ConfigError("cross-eval needs at least one --targets dataset");
  std::vector<srnn::Checkpoint> sources;
  std::vector<std::string> source_labels, target_labels;
  for (const auto& c : o.checkpoints) {
    m.input("checkpoint", c);
    sources.push_back(srnn::load_checkpoint(c));
    source_labels.push_back(stem(c));
  }
  std::vector<srnn::PreparedData> targets;
  for (const auto& t : o.targets) {
    // A CSV target may name its adjacency as speeds.csv:adjacency.csv.
    std::string speeds = t, adj;
    if (const auto colon = t.find(':'); colon != std::string::npos && !fs::exists(t)) {
      speeds = t.substr(0, colon);
      adj = t.substr(colon + 1);
    }
    targets.push_back(load_dataset(speeds, adj, o, false, m));
    target_labels.push_back(stem(speeds));
  }
  const auto report = srnn::cross_matrix(sources, source_labels, targets, target_labels, o.threads);
  return emit_report(report, m, out, o.seed);
}

int run_synth(const Options& o, Manifest& m, const fs::path& out) {
  if (o.topology != "ring-chord") throw srnn::ConfigError("unknown --topology '" + o.topology + "'");
  if (o.nodes < 1) throw srnn::ConfigError("--nodes must be >= 1");
  srnn::SynthConfig cfg = o.synth;
  cfg.graph = srnn::ring_with_chord(o.nodes);
  cfg.seed = o.seed;
  const srnn::SpeedDataset ds = srnn::generate(cfg);
  const fs::path speeds = out / "speeds.csv", adj = out / "adjacency.csv";
  srnn::save_speeds(speeds.string(), ds);
  srnn::save_adjacency(adj.string(), cfg.graph);
  m.output(speeds.string());
  m.output(adj.string());
  m.extra() = {{"nodes", o.nodes}, {"topology", o.topology}, {"days", cfg.days},
               {"step_minutes", cfg.step_minutes}, {"base", cfg.base}, {"amplitude", cfg.amplitude},
               {"rho", cfg.rho}, {"kappa", cfg.kappa}, {"sigma", cfg.sigma}, {"start", cfg.start}};
  std::cout << "synth " << o.nodes << " segments x " << ds.steps() << " steps -> " << speeds.string() << ", "
            << adj.string() << "\n";
  return 0;
}

std::string with_commas(std::size_t v) {
  std::string s = std::to_string(v);
  for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
  return s;
}

int run_inspect(const Options& o, Manifest& m, const fs::path& out) {
  if (o.checkpoints.size() != 1) throw srnn::ConfigError("inspect takes exactly one --checkpoint");
  m.input("checkpoint", o.checkpoints[0]);
  const srnn::Checkpoint ck = srnn::load_checkpoint(o.checkpoints[0]);
  const auto& hp = ck.hp;
  json j = {{"node_hidden", hp.node_hidden},       {"spatial_hidden", hp.spatial_hidden},
            {"temporal_hidden", hp.temporal_hidden}, {"embed", hp.embed},
            {"dropout", hp.dropout},                {"param_count", srnn::param_count(hp)},
            {"scaler_min", ck.scaler.min()},        {"scaler_max", ck.scaler.max()}};
  if (!ck.meta.empty()) j["meta"] = json::parse(ck.meta, nullptr, false);
  m.extra() = j;
  write_text(out / "inspect.json", j.dump(2) + "\n", m);
  std::cout << "hidden node/spatial/temporal: " << hp.node_hidden << "/" << hp.spatial_hidden << "/"
            << hp.temporal_hidden << "\n"
            << "embed: " << hp.embed << "\n"
            << "dropout: " << hp.dropout << "\n"
            << "scaler: [" << ck.scaler.min() << ", " << ck.scaler.max() << "] km/h\n"
            << "parameters: " << with_commas(srnn::param_count(hp)) << "\n";
  return 0;
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const srnn::TrainingError*>(&e)) return 4;
  if (dynamic_cast<const srnn::ConfigError*>(&e) || dynamic_cast<const srnn::BindingError*>(&e)) return 2;
  return 3;
}

const char* failure_class(const std::exception& e) {
  if (dynamic_cast<const srnn::TrainingError*>(&e)) return "training";
  if (dynamic_cast<const srnn::ConfigError*>(&e)) return "config";
  if (dynamic_cast<const srnn::BindingError*>(&e)) return "config";
  if (dynamic_cast<const srnn::ParseError*>(&e) || dynamic_cast<const srnn::LoadError*>(&e)) return "parse";
  if (dynamic_cast<const srnn::IoError*>(&e)) return "io";
  return "data";
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Structural RNN traffic speed forecasting"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  auto out_opt = [&](CLI::App* c) { c->add_option("--out", o.out, "output directory (default $SRNN_OUT_DIR or .)"); };
  auto seed_opt = [&](CLI::App* c) { c->add_option("--seed", o.seed, "random seed"); };
  auto data_opts = [&](CLI::App* c) {
    c->add_option("--speeds", o.speeds, "speeds CSV or prepared cache");
    c->add_option("--adj", o.adj, "adjacency CSV (with a speeds CSV)");
    c->add_option("--split", o.split, "train fraction")->check(CLI::Range(0.0, 1.0));
    c->add_option("--seq-len", o.seq_len, "window length l")->check(CLI::PositiveNumber);
  };

  auto* prepare = app.add_subcommand("prepare", "speeds + adjacency -> prepared cache");
  data_opts(prepare);
  out_opt(prepare);
  seed_opt(prepare);

  auto* train = app.add_subcommand("train", "prepared data -> checkpoint + history");
  data_opts(train);
  out_opt(train);
  seed_opt(train);
  train->add_option("--epochs", o.epochs, "epochs");
  train->add_option("--hidden", o.hidden, "LSTM hidden size (node, spatial, temporal)")->check(CLI::PositiveNumber);
  train->add_option("--embed", o.hp.embed, "embedding width")->check(CLI::PositiveNumber);
  train->add_option("--lr", o.train.lr0, "initial learning rate");
  train->add_option("--decay", o.train.decay, "per-epoch learning rate decay");
  train->add_option("--dropout", o.hp.dropout, "dropout rate");
  train->add_option("--grad-clip", o.train.grad_clip, "global gradient norm clip (<= 0 disables)");
  train->add_flag("--no-shuffle", o.no_shuffle, "keep windows in time order");
  train->add_option("--threads", o.threads, "evaluation threads (0 = all cores)");

  auto* eval = app.add_subcommand("eval", "checkpoint + dataset -> RMSE report");
  data_opts(eval);
  out_opt(eval);
  seed_opt(eval);
  eval->add_option("--checkpoint", o.checkpoints, "checkpoint file");
  eval->add_option("--targets", o.targets, "dataset (alternative to --speeds)");
  eval->add_option("--threads", o.threads, "evaluation threads (0 = all cores)");

  auto* cross = app.add_subcommand("cross-eval", "checkpoints x datasets -> RMSE matrix");
  out_opt(cross);
  seed_opt(cross);
  cross->add_option("--checkpoint", o.checkpoints, "checkpoint file (repeatable)")->required();
  cross->add_option("--targets", o.targets, "prepared cache or speeds.csv:adjacency.csv (repeatable)")->required();
  cross->add_option("--threads", o.threads, "evaluation threads (0 = all cores)");

  auto* synth = app.add_subcommand("synth", "synthetic speeds + adjacency CSV pair");
  out_opt(synth);
  seed_opt(synth);
  synth->add_option("--nodes", o.nodes, "segments");
  synth->add_option("--topology", o.topology, "graph family")->check(CLI::IsMember({"ring-chord"}));
  synth->add_option("--days", o.synth.days, "days");
  synth->add_option("--step", o.synth.step_minutes, "minutes per step");
  synth->add_option("--base", o.synth.base, "base speed km/h");
  synth->add_option("--amplitude", o.synth.amplitude, "daily amplitude km/h");
  synth->add_option("--rho", o.synth.rho, "residual persistence");
  synth->add_option("--kappa", o.synth.kappa, "neighbour coupling");
  synth->add_option("--sigma", o.synth.sigma, "innovation std km/h");
  synth->add_option("--start", o.synth.start, "first timestamp YYYY-MM-DDTHH:MM");

  auto* inspect = app.add_subcommand("inspect", "checkpoint -> hyperparameters and parameter count");
  out_opt(inspect);
  inspect->add_option("--checkpoint", o.checkpoints, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  CLI::App* cmd = app.get_subcommands().front();
  Manifest manifest(cmd->get_name(), argc, argv);
  try {
    std::string out_source = "--out";
    fs::path out = o.out;
    if (o.out.empty()) {
      const char* env = std::getenv(kOutDirEnv);
      out = env != nullptr && *env != '\0' ? env : ".";
      out_source = env != nullptr && *env != '\0' ? kOutDirEnv : "default";
    }
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw srnn::IoError("cannot create " + out.string() + ": " + ec.message());

    const std::string& verb = cmd->get_name();
    int rc = 0;
    if (verb == "prepare") rc = run_prepare(o, manifest, out);
    else if (verb == "train") rc = run_train(o, manifest, out);
    else if (verb == "eval") rc = run_eval(o, manifest, out);
    else if (verb == "cross-eval") rc = run_cross_eval(o, manifest, out);
    else if (verb == "synth") rc = run_synth(o, manifest, out);
    else rc = run_inspect(o, manifest, out);
    manifest.write(out, o.seed, out_source);
    return rc;
  } catch (const std::exception& e) {
    std::cerr << "srnn " << cmd->get_name() << ": " << failure_class(e) << " error: " << e.what() << "\n";
    return exit_code(e);
  }
}
