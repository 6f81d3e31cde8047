#include "bregnext/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "bregnext/checkpoint.hpp"
#include "bregnext/data.hpp"
#include "bregnext/error.hpp"
#include "bregnext/features.hpp"
#include "bregnext/gradcheck.hpp"
#include "bregnext/metrics.hpp"
#include "bregnext/network.hpp"
#include "bregnext/trainer.hpp"

namespace bnx {
namespace fs = std::filesystem;
namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

std::string join(const std::vector<std::string>& args) {
  std::string out;
  for (const auto& a : args) {
    if (!out.empty()) out += ' ';
    const bool quote = a.empty() || a.find_first_of(" \t\"") != std::string::npos;
    out += quote ? "\"" + a + "\"" : a;
  }
  return out;
}

// Splits a manifest argv line written by join().
std::vector<std::string> split_args(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false, any = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
      any = true;
    } else if (c == ' ' && !quoted) {
      if (any || !cur.empty()) out.push_back(cur);
      cur.clear();
      any = false;
    } else {
      cur += c;
    }
  }
  if (any || !cur.empty()) out.push_back(cur);
  return out;
}

bool resolve_deterministic(bool flag) {
  if (const char* env = std::getenv(kDeterministicEnv)) {
    const std::string v = env;
    if (v == "0" || v == "false") return false;
    if (v == "1" || v == "true") return true;
  }
  return flag;
}

struct Manifest {
  std::vector<std::pair<std::string, std::string>> fields;
  void set(const std::string& k, const std::string& v) { fields.emplace_back(k, v); }
  std::string text() const {
    std::string out;
    for (const auto& [k, v] : fields) out += k + ": " + v + "\n";
    return out;
  }
};

std::map<std::string, std::string> parse_manifest(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto colon = line.find(": ");
    if (colon != std::string::npos) out[line.substr(0, colon)] = line.substr(colon + 2);
  }
  return out;
}

NetworkConfig resolve_config(const std::string& arch, const std::string& config_path) {
  if (!config_path.empty()) return config_from_text(read_file(config_path));
  return architecture_config(arch);
}

std::vector<std::size_t> parse_depths(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const auto v = std::stoul(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("bad depth '" + item + "'");
    }
  }
  return out;
}

Dataset select_split(const Dataset& data, const std::string& split) {
  if (split == "all") return data;
  auto sub = data.subset(split_from_name(split));
  if (sub.empty()) throw DataError("split '" + split + "' is empty");
  return sub;
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
  std::string arch = "breg-next-26";
  std::string config;
  std::string head = "categorical";
  std::string data = "synth:K=8";
  std::string split = "train";
  std::string out_dir;
  std::size_t epochs = 30;
  std::size_t batch = 128;
  std::size_t classes = 0;
  std::uint64_t seed = 1;
  double lr = 1e-4;
  double augment = 0.25;
  bool deterministic = true;
};

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  auto cfg = resolve_config(a.arch, a.config);
  cfg.head = head_from_name(a.head);
  const Dataset all = load_dataset_spec(a.data, a.seed);
  const Dataset data = select_split(all, a.split);
  if (cfg.head == HeadKind::Categorical) cfg.num_classes = a.classes ? a.classes : std::max<std::size_t>(2, data.num_classes);
  cfg.validate();

  const fs::path dir = a.out_dir.empty() ? fs::path("runs") / cfg.name : fs::path(a.out_dir);
  fs::create_directories(dir / "reports");
  const bool deterministic = resolve_deterministic(a.deterministic);

  Manifest m;
  m.set("command", "train");
  m.set("argv", join(argv));
  m.set("architecture", cfg.name);
  m.set("config", a.config.empty() ? "(builtin)" : a.config);
  m.set("head", head_name(cfg.head));
  m.set("dataset", a.data);
  m.set("split", a.split);
  m.set("samples", std::to_string(data.size()));
  m.set("seed", std::to_string(a.seed));
  m.set("epochs", std::to_string(a.epochs));
  m.set("batch_size", std::to_string(a.batch));
  m.set("learning_rate", fixed(a.lr, 8));
  m.set("augment_probability", fixed(a.augment, 4));
  m.set("output", dir.string());
  m.set("deterministic", deterministic ? "1" : "0");
  write_file(dir / "manifest.txt", m.text());
  write_file(dir / "network.json", config_to_text(cfg));
  write_file(dir / "reports" / "dataset_stats.json", dataset_stats_json(data));

  Model model = build_network<float>(cfg, a.seed);
  out << cfg.name << ": " << count_parameters(model).parameters << " parameters, " << data.size()
      << " samples, batch " << a.batch << "\n";
  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.batch_size = a.batch;
  tc.seed = a.seed;
  tc.adam.base_lr = a.lr;
  tc.augment.probability = a.augment;
  const bool categorical = cfg.head == HeadKind::Categorical;
  tc.on_epoch = [&](const EpochRecord& r) {
    out << "epoch " << r.epoch << " lr " << r.lr << " loss " << fixed(r.loss) << (categorical ? " accuracy " : " rmse ")
        << fixed(r.metric) << "\n";
    out.flush();
  };
  const TrainingLog log = train_epochs(model, data, tc);
  const std::string csv = log.to_csv();
  write_file(dir / "log.csv", csv);
  // Keep the last few log lines in the checkpoint.
  std::string tail;
  {
    std::vector<std::string> lines;
    std::istringstream in(csv);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    const std::size_t from = lines.size() > 6 ? lines.size() - 5 : 1;
    if (!lines.empty()) tail = lines[0] + "\n";
    for (std::size_t i = from; i < lines.size(); ++i) tail += lines[i] + "\n";
  }
  save_checkpoint(model, dir / "model.bngx", tail);

  std::string summary = "architecture: " + cfg.name + "\nparameters: " + std::to_string(count_parameters(model).parameters) +
                        "\nepochs: " + std::to_string(log.epochs.size()) + "\n";
  if (!log.epochs.empty()) {
    summary += "final_loss: " + fixed(log.epochs.back().loss) + "\n";
    summary += std::string(categorical ? "final_accuracy: " : "final_rmse: ") + fixed(log.epochs.back().metric) + "\n";
    summary += "max_alpha_drift: " + fixed(log.max_alpha_drift()) + "\n";
  }
  write_file(dir / "reports" / "train_summary.txt", summary);
  out << "wrote " << (dir / "model.bngx").string() << "\n";
  return kExitOk;
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string data = "synth:K=8";
  std::string split = "train";
  std::string out_dir;
  std::string predictions;
  std::string labels;
  std::string head = "categorical";
  std::size_t classes = 0;
  std::size_t batch = 64;
  std::size_t bins = 40;
  std::uint64_t seed = 1;
};

std::vector<std::vector<double>> read_csv_numbers(const fs::path& path) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') numeric = false;
      row.push_back(v);
    }
    if (!numeric) {
      if (n == 1) continue;  // header
      throw RowError(n, "non-numeric value in " + path.string());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string write_categorical(const fs::path& dir, const std::vector<int>& pred, const std::vector<int>& truth,
                              std::size_t classes, const std::vector<std::string>& names) {
  const auto report = class_report(pred, truth, classes);
  write_file(dir / "class_report.csv", report.to_csv(names));
  write_file(dir / "confusion.csv", report.confusion_csv(names));
  const auto text = report.to_text(names);
  write_file(dir / "report.txt", text);
  return text;
}

std::string write_dimensional(const fs::path& dir, const std::vector<double>& pred, const std::vector<double>& truth,
                              std::size_t bins) {
  const auto report = dimensional_report(pred, truth);
  write_file(dir / "metrics.csv", dimensional_csv(report));
  const auto text = dimensional_text(report);
  write_file(dir / "report.txt", text);
  for (std::size_t d = 0; d < 2; ++d) {
    std::vector<double> p, t;
    for (std::size_t i = d; i < pred.size(); i += 2) {
      p.push_back(pred[i]);
      t.push_back(truth[i]);
    }
    write_file(dir / ("error_histogram_" + report[d].name + ".csv"), histogram_csv(error_histogram(p, t, bins)));
  }
  return text;
}

int cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const fs::path dir = a.out_dir.empty() ? fs::path("eval") : fs::path(a.out_dir);
  fs::create_directories(dir);
  Manifest m;
  m.set("command", "eval");
  m.set("argv", join(argv));
  m.set("output", dir.string());

  if (!a.predictions.empty()) {
    if (a.labels.empty()) throw ConfigError("--predictions needs --labels");
    const auto p = read_csv_numbers(a.predictions);
    const auto t = read_csv_numbers(a.labels);
    if (p.size() != t.size()) throw DataError("predictions and labels differ in length");
    m.set("mode", "oracle");
    m.set("head", a.head);
    write_file(dir / "manifest.txt", m.text());
    std::string text;
    if (head_from_name(a.head) == HeadKind::Categorical) {
      std::vector<int> pi, ti;
      int top = 0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        pi.push_back(static_cast<int>(p[i].at(0)));
        ti.push_back(static_cast<int>(t[i].at(0)));
        top = std::max({top, pi.back(), ti.back()});
      }
      text = write_categorical(dir, pi, ti, a.classes ? a.classes : static_cast<std::size_t>(top) + 1, {});
    } else {
      std::vector<double> pv, tv;
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i].size() < 2 || t[i].size() < 2) throw RowError(i + 1, "dimensional rows need valence,arousal");
        pv.insert(pv.end(), {p[i][0], p[i][1]});
        tv.insert(tv.end(), {t[i][0], t[i][1]});
      }
      text = write_dimensional(dir, pv, tv, a.bins);
    }
    out << text;
    return kExitOk;
  }

  if (a.checkpoint.empty()) throw ConfigError("eval needs --checkpoint or --predictions/--labels");
  auto ck = load_checkpoint(a.checkpoint);
  Model& model = ck.model;
  const Dataset data = select_split(load_dataset_spec(a.data, a.seed), a.split);
  const bool categorical = model.config.head == HeadKind::Categorical;
  if (!categorical && !data.has_dimensional)
    throw DataError("dimensional checkpoint but dataset '" + a.data + "' has no valence/arousal labels");
  if (categorical && data.num_classes > model.config.num_classes)
    throw DataError("dataset has more classes than the checkpoint head");
  m.set("checkpoint", a.checkpoint);
  m.set("architecture", model.config.name);
  m.set("head", head_name(model.config.head));
  m.set("dataset", a.data);
  m.set("split", a.split);
  m.set("samples", std::to_string(data.size()));
  write_file(dir / "manifest.txt", m.text());

  const Tensor pred = predict_dataset(model, data, a.batch);
  std::string text;
  if (categorical) {
    std::vector<int> p, t;
    const std::size_t k = pred.dim(1);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const float* row = pred.raw() + i * k;
      p.push_back(static_cast<int>(std::max_element(row, row + k) - row));
      t.push_back(data.samples[i].label);
    }
    auto names = data.class_names;
    while (names.size() < model.config.num_classes) names.push_back(std::to_string(names.size()));
    text = write_categorical(dir, p, t, model.config.num_classes, names);
  } else {
    std::vector<double> p(pred.data().begin(), pred.data().end()), t;
    for (const auto& s : data.samples) t.insert(t.end(), {s.valence_arousal[0], s.valence_arousal[1]});
    text = write_dimensional(dir, p, t, a.bins);
  }
  out << text;
  return kExitOk;
}

// --- gradcheck ---------------------------------------------------------------

struct GradcheckArgs {
  std::string arch = "breg-next-26";
  std::string mapping;
  double tolerance = 1e-3;
  std::uint64_t seed = 1;
  std::size_t coords = 160;
  std::size_t image = 16;
  std::size_t batch = 4;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  GradcheckOptions o;
  o.seed = a.seed;
  o.network_coords = a.coords;
  o.network_image = a.image;
  o.network_batch = a.batch;
  std::vector<GradcheckResult> results;
  if (!a.mapping.empty()) {
    results.push_back(gradcheck_fixed_mappings(o, MappingKind::parse(a.mapping)));
  } else if (a.arch == "none") {
    // A graph without parameters: nothing to differentiate against.
    BasicGraph<double> g;
    BasicParamStore<double> store;
    const NodeId x = g.placeholder("x", Shape{2, 3});
    const NodeId loss = g.sum(g.elu(x));
    Feeds<double> feeds{{"x", TensorD(Shape{2, 3}, 0.5)}};
    results.push_back(check_graph("network none", g, store, loss, feeds, Mode::Train, o, o.coords_per_entry));
  } else {
    results.push_back(gradcheck_adaptive_mapping(o));
    results.push_back(gradcheck_fixed_mappings(o));
    for (auto& r : gradcheck_primitives(o)) results.push_back(std::move(r));
    results.push_back(gradcheck_network(architecture_config(a.arch), o));
  }
  bool ok = true;
  out << "category,max_relative_error,checked,status,worst\n";
  for (const auto& r : results) {
    const bool pass = r.passed(a.tolerance);
    ok = ok && pass;
    out << r.category << "," << std::scientific << std::setprecision(3) << r.max_error << std::defaultfloat << ","
        << r.checked << "," << (pass ? "PASS" : "FAIL") << "," << (r.note.empty() ? r.worst : r.note) << "\n";
  }
  return ok ? kExitOk : kExitNumeric;
}

// --- params ------------------------------------------------------------------

int cmd_params(const std::vector<std::string>& archs, bool series, bool per_layer, std::ostream& out) {
  std::vector<NetworkConfig> cfgs;
  if (series)
    for (auto d : depth_series()) cfgs.push_back(depth_config(d));
  for (const auto& a : archs) cfgs.push_back(architecture_config(a));
  if (cfgs.empty())
    for (const auto& n : named_architectures()) cfgs.push_back(named_config(n));

  out << "architecture,weight_layers,units,parameters,flops" << (series ? ",parameter_delta,flop_delta" : "") << "\n";
  std::uint64_t prev_p = 0, prev_f = 0;
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    const auto r = cost_report(cfgs[i]);
    out << cfgs[i].name << "," << cfgs[i].weight_layers() << "," << cfgs[i].unit_count() << "," << r.parameters << ","
        << r.flops;
    if (series) {
      if (i == 0) out << ",,";
      else out << "," << static_cast<std::int64_t>(r.parameters - prev_p) << "," << static_cast<std::int64_t>(r.flops - prev_f);
    }
    out << "\n";
    prev_p = r.parameters;
    prev_f = r.flops;
    if (per_layer) {
      for (const auto& l : r.layers) out << "  " << l.layer << "," << l.parameters << "," << l.flops << "\n";
    }
  }
  return kExitOk;
}

// --- plot-mapping ------------------------------------------------------------

struct PlotArgs {
  std::string kind = "adaptive";
  std::string preset;
  double alpha = 1.0;
  double beta = 0.0;
  double lo = -5.0;
  double hi = 5.0;
  std::size_t points = 201;
  std::string out_file;
};

int cmd_plot_mapping(PlotArgs a, std::ostream& out) {
  if (!a.preset.empty()) {
    a.kind = "adaptive";
    if (a.preset == "a") a.alpha = 1.0, a.beta = 1.0;
    else if (a.preset == "b") a.alpha = 1.0, a.beta = 0.0;
    else if (a.preset == "c") a.alpha = 0.0, a.beta = 1.0;
    else if (a.preset == "d") a.alpha = 0.0, a.beta = 0.0;
    else throw ConfigError("preset must be one of a, b, c, d");
  }
  const auto kind = MappingKind::parse(a.kind);
  if (a.points < 2 || !(a.hi > a.lo)) throw ConfigError("grid needs at least two points and min < max");
  std::string csv = "x,H,Hprime\n";
  char buf[96];
  for (std::size_t i = 0; i < a.points; ++i) {
    const double x = a.lo + (a.hi - a.lo) * static_cast<double>(i) / static_cast<double>(a.points - 1);
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g\n", x, mapping_value(kind, x, a.alpha, a.beta),
                  mapping_slope(kind, x, a.alpha, a.beta));
    csv += buf;
  }
  if (a.out_file.empty()) out << csv;
  else write_file(a.out_file, csv);
  return kExitOk;
}

// --- dump-features -----------------------------------------------------------

struct DumpArgs {
  std::string checkpoint;
  std::string data = "synth:K=8";
  std::size_t index = 0;
  std::string depths;
  std::string out_dir = "features";
  std::uint64_t seed = 1;
};

int cmd_dump_features(const DumpArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  auto ck = load_checkpoint(a.checkpoint);
  const auto depths = parse_depths(a.depths);
  for (auto d : depths) feature_node(ck.model, d);
  const Dataset data = load_dataset_spec(a.data, a.seed);
  if (a.index >= data.size()) throw DataError("sample index " + std::to_string(a.index) + " out of range");
  fs::create_directories(a.out_dir);
  Manifest m;
  m.set("command", "dump-features");
  m.set("argv", join(argv));
  m.set("checkpoint", a.checkpoint);
  m.set("dataset", a.data);
  m.set("index", std::to_string(a.index));
  m.set("depths", a.depths);
  m.set("output", a.out_dir);
  write_file(fs::path(a.out_dir) / "manifest.txt", m.text());
  for (const auto& p : dump_feature_maps(ck.model, data.samples[a.index].image(), depths, a.out_dir))
    out << "wrote " << p.string() << "\n";
  return kExitOk;
}

// --- compare -----------------------------------------------------------------

int cmd_compare(const std::vector<std::string>& runs, const std::string& out_file, std::ostream& out) {
  std::string table = "run,architecture,parameters,epochs,final_loss,final_metric,max_alpha_drift\n";
  for (const auto& run : runs) {
    const auto summary = parse_manifest(read_file(fs::path(run) / "reports" / "train_summary.txt"));
    auto get = [&](const std::string& k) {
      auto it = summary.find(k);
      return it == summary.end() ? std::string() : it->second;
    };
    const std::string metric = get("final_accuracy").empty() ? get("final_rmse") : get("final_accuracy");
    table += run + "," + get("architecture") + "," + get("parameters") + "," + get("epochs") + "," + get("final_loss") +
             "," + metric + "," + get("max_alpha_drift") + "\n";
  }
  if (!out_file.empty()) write_file(out_file, table);
  out << table;
  return kExitOk;
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Usage: return kExitUsage;
    case ErrorKind::Data: return kExitData;
    case ErrorKind::Numeric: return kExitNumeric;
    case ErrorKind::State: return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bounded residual gradient networks: training, evaluation and verification", "bregnext"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a network and write manifest, log, checkpoint and reports");
  train->add_option("--arch", ta.arch, "Architecture name (named architecture or breg-next-<depth>)");
  train->add_option("--config", ta.config, "Network config JSON instead of --arch");
  train->add_option("--head", ta.head, "categorical | dimensional");
  train->add_option("--data", ta.data, "synth:K=8,N=200,seed=1 | fer2013:<csv>");
  train->add_option("--split", ta.split, "train | validation | test | all");
  train->add_option("--epochs", ta.epochs);
  train->add_option("--batch-size", ta.batch);
  train->add_option("--classes", ta.classes, "Categorical head width (default: dataset classes)");
  train->add_option("--seed", ta.seed);
  train->add_option("--lr", ta.lr, "Base learning rate");
  train->add_option("--augment", ta.augment, "Augmentation probability per image");
  train->add_option("--out", ta.out_dir, "Output directory");
  train->add_flag("--deterministic,!--no-deterministic", ta.deterministic);

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint, or score a predictions file against labels");
  eval->add_option("--checkpoint", ea.checkpoint);
  eval->add_option("--data", ea.data);
  eval->add_option("--split", ea.split);
  eval->add_option("--out", ea.out_dir);
  eval->add_option("--predictions", ea.predictions, "CSV of predicted class or valence,arousal per row");
  eval->add_option("--labels", ea.labels, "CSV of ground truth in the same layout");
  eval->add_option("--head", ea.head, "Head for --predictions mode");
  eval->add_option("--classes", ea.classes);
  eval->add_option("--batch-size", ea.batch);
  eval->add_option("--bins", ea.bins, "Error histogram bins on [-2,2]");
  eval->add_option("--seed", ea.seed, "Seed for synthetic datasets");

  GradcheckArgs ga;
  auto* grad = app.add_subcommand("gradcheck", "Compare autodiff gradients with central differences");
  grad->add_option("--arch", ga.arch, "Network for the whole-model check, or 'none'");
  grad->add_option("--mapping", ga.mapping, "Check one mapping only (identity, h1, h2, h3[:a], lambda:v, adaptive)");
  grad->add_option("--tolerance", ga.tolerance);
  grad->add_option("--seed", ga.seed);
  grad->add_option("--coords", ga.coords, "Sampled network coordinates");
  grad->add_option("--image", ga.image, "Square input size for the network check");
  grad->add_option("--batch", ga.batch);

  std::vector<std::string> param_archs;
  bool series = false, per_layer = false;
  auto* params = app.add_subcommand("params", "Parameter and FLOP counts");
  params->add_option("--arch", param_archs, "Architecture (repeatable); default: all named architectures");
  params->add_flag("--series", series, "Depth series 26..68 with per-step deltas");
  params->add_flag("--per-layer", per_layer);

  PlotArgs pa;
  auto* plot = app.add_subcommand("plot-mapping", "Tabulate a mapping and its derivative as CSV");
  plot->add_option("--kind", pa.kind);
  plot->add_option("--preset", pa.preset, "a: alpha=1 beta=1, b: alpha=1 beta=0, c: alpha->0 beta=1, d: alpha->0 beta=0");
  plot->add_option("--alpha", pa.alpha);
  plot->add_option("--beta", pa.beta);
  plot->add_option("--min", pa.lo);
  plot->add_option("--max", pa.hi);
  plot->add_option("--points", pa.points);
  plot->add_option("--out", pa.out_file);

  DumpArgs da;
  auto* dump = app.add_subcommand("dump-features", "Write feature-map grids as PNG");
  dump->add_option("--checkpoint", da.checkpoint)->required();
  dump->add_option("--data", da.data);
  dump->add_option("--index", da.index, "Sample index in the dataset");
  dump->add_option("--depths", da.depths, "Comma-separated weight-layer depths, e.g. 15,17,33,50");
  dump->add_option("--out", da.out_dir);
  dump->add_option("--seed", da.seed);

  std::vector<std::string> runs;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "Tabulate final metrics of several training runs");
  compare->add_option("runs", runs, "Run directories")->required();
  compare->add_option("--out", compare_out);

  std::string manifest_path, replay_out;
  auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay->add_option("manifest", manifest_path)->required();
  replay->add_option("--out", replay_out, "Override the output directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*train) return cmd_train(ta, args, out);
    if (*eval) return cmd_eval(ea, args, out);
    if (*grad) return cmd_gradcheck(ga, out);
    if (*params) return cmd_params(param_archs, series, per_layer, out);
    if (*plot) return cmd_plot_mapping(pa, out);
    if (*dump) return cmd_dump_features(da, args, out);
    if (*compare) return cmd_compare(runs, compare_out, out);
    if (*replay) {
      const auto fields = parse_manifest(read_file(manifest_path));
      auto it = fields.find("argv");
      if (it == fields.end()) throw DataError(manifest_path + " has no argv line");
      auto again = split_args(it->second);
      if (!replay_out.empty()) {
        auto o = std::find(again.begin(), again.end(), "--out");
        if (o != again.end() && o + 1 != again.end()) *(o + 1) = replay_out;
        else again.insert(again.end(), {"--out", replay_out});
      }
      if (!again.empty() && again.front() == "replay") throw ConfigError("manifest records a replay");
      return run_cli(again, out, err);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace bnx
