#include "hydg/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "hydg/error.hpp"
#include "hydg/log.hpp"

namespace hydg {
namespace {

namespace fs = std::filesystem;

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) parts.push_back(item);
  return parts;
}

template <class T>
T number(const std::string& field, const std::string& text) {
  std::istringstream in(text);
  T v{};
  in >> v;
  if (in.fail() || !in.eof()) {
    throw ParameterError(field + ": cannot read '" + text + "' as a number");
  }
  return v;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("cannot write " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Flag values as parsed; unset ones leave the defaults alone.
struct Flags {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> data, sbm, tau, group_tau, agg, metric, prop, ablation, backbone;
  std::optional<std::size_t> split_t, k, group_k, m_clusters, epochs, hidden, layers,
      rebuild_every, feature_dim, degree_buckets;
  std::optional<double> alpha, beta, lr, feature_noise;
  std::optional<std::string> out, params;
};

template <class F>
auto labelled(const std::string& field, F&& f) {
  try {
    return f();
  } catch (const ParameterError& e) {
    throw ParameterError(field + ": " + e.what());
  }
}

RunConfig to_config(const Flags& f) {
  RunConfig c;
  TrainConfig& t = c.train;
  if (f.seed) t.seed = *f.seed;
  if (f.data) c.data = *f.data;
  if (f.sbm) c.sbm = parse_sbm(*f.sbm);
  if (c.sbm) {
    c.sbm->seed = t.seed;
    if (f.feature_noise) c.sbm->feature_noise = *f.feature_noise;
    if (f.feature_dim) c.sbm->feature_dim = *f.feature_dim;
  }
  c.split_t = f.split_t;
  if (f.k) t.k = *f.k;
  if (f.tau) t.scales = labelled("tau", [&] { return parse_scales(*f.tau); });
  if (f.group_k) t.group_k = *f.group_k;
  if (f.group_tau) {
    t.group_scales = labelled("group-tau", [&] { return parse_scales(*f.group_tau); });
  }
  if (f.m_clusters) t.m_clusters = *f.m_clusters;
  if (f.agg) t.agg = labelled("agg", [&] { return parse_aggregation(*f.agg); });
  if (f.metric) t.metric = labelled("metric", [&] { return parse_metric(*f.metric); });
  if (f.alpha) t.alpha = *f.alpha;
  if (f.beta) t.beta = *f.beta;
  if (f.lr) t.lr = *f.lr;
  if (f.epochs) t.epochs = *f.epochs;
  if (f.hidden) t.hidden = *f.hidden;
  if (f.layers) t.layers = *f.layers;
  if (f.rebuild_every) t.rebuild_every = *f.rebuild_every;
  if (f.backbone) t.backbone = labelled("backbone", [&] { return parse_backbone(*f.backbone); });
  if (f.prop) t.prop = labelled("prop", [&] { return parse_prop_mode(*f.prop); });
  if (f.ablation) {
    t.ablation = labelled("ablation", [&] { return parse_ablation(*f.ablation); });
  }
  if (f.out) c.out = *f.out;
  if (f.params) c.params = *f.params;
  if (f.degree_buckets) c.degree_buckets = *f.degree_buckets;
  return c;
}

void add_flags(CLI::App& app, Flags& f) {
  app.add_option("--seed", f.seed, "Seed for every random draw");
  app.add_option("--data", f.data, "Dataset directory");
  app.add_option("--sbm", f.sbm, "Drifting SBM: n,T,C,p_in,p_out,drift")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::Join);
  app.add_option("--feature-noise", f.feature_noise, "SBM feature noise std");
  app.add_option("--feature-dim", f.feature_dim, "SBM feature width");
  app.add_option("--degree-buckets", f.degree_buckets, "Degree features when none are stored");
  app.add_option("--split-t", f.split_t, "Last training slice");
  app.add_option("--k", f.k, "Neighbours per hyperedge");
  app.add_option("--tau", f.tau, "Temporal scales s,m,l")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::Join);
  app.add_option("--group-k", f.group_k, "Neighbours per group hyperedge");
  app.add_option("--group-tau", f.group_tau, "Group temporal scales s,m,l")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::Join);
  app.add_option("--m-clusters", f.m_clusters, "Clusters per class and slice");
  app.add_option("--agg", f.agg, "Prototype aggregation {avg,max,min}");
  app.add_option("--metric", f.metric, "Distance {euclidean,cosine,chebyshev}");
  app.add_option("--alpha", f.alpha, "Individual loss weight");
  app.add_option("--beta", f.beta, "Group loss weight");
  app.add_option("--lr", f.lr, "Adam learning rate");
  app.add_option("--epochs", f.epochs, "Training epochs");
  app.add_option("--hidden", f.hidden, "Embedding width");
  app.add_option("--layers", f.layers, "Hypergraph layers");
  app.add_option("--rebuild-every", f.rebuild_every, "Epochs between hypergraph rebuilds");
  app.add_option("--backbone", f.backbone, "Backbone {gcn,sage}");
  app.add_option("--prop", f.prop, "Propagation {message,spectral}");
  app.add_option("--ablation", f.ablation, "{full,individual_only,group_only}");
  app.add_option("--out", f.out, "Output directory");
  app.add_option("--params", f.params, "Parameter file for eval");
}

void print_report(const MetricsReport& r, std::ostream& out) {
  out << "evaluated " << r.evaluated << " accuracy " << fmt(r.accuracy) << " macro_auc "
      << fmt(r.macro_auc) << '\n';
}

}  // namespace

SbmSpec parse_sbm(const std::string& text) {
  const auto p = split_commas(text);
  if (p.size() != 6) throw ParameterError("sbm: expected n,T,C,p_in,p_out,drift");
  SbmSpec s;
  s.nodes = number<std::size_t>("sbm", p[0]);
  s.slices = number<std::size_t>("sbm", p[1]);
  s.classes = number<std::size_t>("sbm", p[2]);
  s.p_in = number<double>("sbm", p[3]);
  s.p_out = number<double>("sbm", p[4]);
  s.drift_rate = number<double>("sbm", p[5]);
  return s;
}

TemporalScales parse_scales(const std::string& text) {
  const auto p = split_commas(text);
  if (p.size() != 3) throw ParameterError("expected three scales s,m,l");
  return {number<std::size_t>("tau", p[0]), number<std::size_t>("tau", p[1]),
          number<std::size_t>("tau", p[2])};
}

void RunConfig::validate(bool needs_split) const {
  if (data.has_value() == sbm.has_value()) {
    throw ParameterError("data/sbm: exactly one of --data and --sbm is required");
  }
  if (needs_split && !split_t) throw ParameterError("split-t: required");
  if (degree_buckets == 0) throw ParameterError("degree-buckets: must be positive");
  if (sbm) {
    if (sbm->nodes == 0 || sbm->slices < 2 || sbm->classes == 0) {
      throw ParameterError("sbm: needs n >= 1, T >= 2, C >= 1");
    }
    for (double p : {sbm->p_in, sbm->p_out, sbm->drift_rate}) {
      if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("sbm: probabilities must lie in [0, 1]");
    }
    if (!(sbm->feature_noise >= 0.0)) throw ParameterError("feature-noise: must be >= 0");
    if (sbm->feature_dim == 0) throw ParameterError("feature-dim: must be positive");
    if (needs_split && *split_t + 2 > sbm->slices) {
      throw ParameterError("split-t: must be at most T-2");
    }
  }
  if (needs_split) train.validate();
  if (needs_split && data) {
    std::error_code ec;
    if (fs::exists(out) && fs::equivalent(out, *data, ec)) {
      throw ParameterError("out: must differ from the dataset directory");
    }
  }
}

DynamicGraph RunConfig::load_graph() const {
  if (sbm) return generate_sbm(*sbm);
  return load_dataset(*data, LoadOptions{degree_buckets});
}

fs::path RunConfig::params_path() const { return params.value_or(out / "params.bin"); }

void cmd_generate(const RunConfig& config, std::ostream& out) {
  config.validate(false);
  if (!config.sbm) throw ParameterError("sbm: generate needs --sbm");
  const DynamicGraph g = generate_sbm(*config.sbm);
  save_dataset(g, config.out);
  out << format_stats(g.stats()) << '\n';
}

void cmd_train(const RunConfig& config, std::ostream& out) {
  config.validate(true);
  const DynamicGraph g = config.load_graph();
  const SplitSpec sp = split(g, *config.split_t);
  const TrainResult r = train(g, sp, config.train);
  ensure_dir(config.out);
  save_params(r.params, config.out / "params.bin");
  write_text(config.out / "loss.csv", format_loss_csv(r.loss_curve()));
  out << "trained " << r.history.size() << " epochs, final loss " << fmt(r.history.back().total)
      << '\n';
}

MetricsReport cmd_eval(const RunConfig& config, std::ostream& out) {
  config.validate(true);
  const DynamicGraph g = config.load_graph();
  const SplitSpec sp = split(g, *config.split_t);
  const ModelParams params = load_params(config.params_path());
  check_same_shapes(params, init_model(config.train, g.attributes(), g.classes()));
  const PredictResult r = predict(g, sp, params, config.train);
  ensure_dir(config.out);
  write_text(config.out / "metrics.csv", format_metrics_csv(r.report));
  print_report(r.report, out);
  return r.report;
}

std::vector<AblationRow> cmd_ablate(const RunConfig& config, std::ostream& out) {
  std::vector<AblationRow> rows;
  for (Ablation a : {Ablation::full, Ablation::individual_only, Ablation::group_only}) {
    RunConfig c = config;
    c.train.ablation = a;
    c.validate(true);
  }
  const DynamicGraph g = config.load_graph();
  const SplitSpec sp = split(g, *config.split_t);
  std::string csv = "ablation,accuracy,macro_auc\n";
  for (Ablation a : {Ablation::full, Ablation::individual_only, Ablation::group_only}) {
    TrainConfig t = config.train;
    t.ablation = a;
    const PredictResult r = predict(g, sp, train(g, sp, t).params, t);
    rows.push_back({a, r.report.accuracy, r.report.macro_auc});
    csv += std::string(name(a)) + ',' + fmt(r.report.accuracy) + ',' +
           fmt(r.report.macro_auc) + '\n';
  }
  ensure_dir(config.out);
  write_text(config.out / "ablation.csv", csv);
  out << csv;
  return rows;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hypergraph node classification on discrete dynamic graphs", "hydg"};
  app.set_config("--config", "", "key=value file; flags override its values");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  Flags flags;
  add_flags(app, flags);
  auto* gen = app.add_subcommand("generate", "Write a drifting SBM dataset to --out");
  auto* tr = app.add_subcommand("train", "Train and write params.bin and loss.csv");
  auto* ev = app.add_subcommand("eval", "Score saved parameters and write metrics.csv");
  auto* ab = app.add_subcommand("ablate", "Train all three ablation modes, write ablation.csv");
  for (auto* s : {gen, tr, ev, ab}) s->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  const WarningHandler previous =
      set_warning_handler([&err](std::string_view m) { err << "warning: " << m << '\n'; });
  int code = 0;
  try {
    const RunConfig config = to_config(flags);
    if (gen->parsed()) cmd_generate(config, out);
    if (tr->parsed()) cmd_train(config, out);
    if (ev->parsed()) cmd_eval(config, out);
    if (ab->parsed()) cmd_ablate(config, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    code = 1;
  }
  set_warning_handler(previous);
  return code;
}

}  // namespace hydg
