#include "ack/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ack/complexity.hpp"
#include "ack/dataset.hpp"
#include "ack/error.hpp"
#include "ack/explore.hpp"
#include "ack/model_io.hpp"
#include "ack/quant.hpp"
#include "ack/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace ack {

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write '" + path.string() + "'");
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw ConfigError("cannot create output directory '" + dir + "'");
  return p;
}

// Recorded before any work starts, then rewritten with the finish time.
class RunManifest {
 public:
  RunManifest(std::string command, fs::path out) : out_(std::move(out)) {
    j_["command"] = std::move(command);
  }
  ordered_json& operator[](const char* key) { return j_[key]; }
  void begin() {
    j_["out"] = out_.string();
    j_["started_at"] = utc_now();
    flush();
  }
  void finish(const std::string& status) {
    j_["status"] = status;
    j_["finished_at"] = utc_now();
    flush();
  }

 private:
  void flush() const { write_text(out_ / "manifest.json", j_.dump(2) + "\n"); }
  ordered_json j_;
  fs::path out_;
};

Dataset load_dataset(const std::string& format, const std::vector<std::string>& data, const std::string& labels) {
  if (format == "idx") {
    if (data.size() != 1) throw ConfigError("idx format takes exactly one --data images file");
    if (labels.empty()) throw ConfigError("idx format needs --labels");
    return load_idx(data[0], labels);
  }
  if (format == "cifar") return load_cifar10(data);
  throw ConfigError("unknown dataset format '" + format + "'");
}

std::string fmt(double v, int digits = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

QuantMode parse_mode(const std::string& mode) {
  if (mode == "per-channel" || mode == "channel") return QuantMode::kPerChannel;
  if (mode == "per-tensor" || mode == "tensor") return QuantMode::kPerTensor;
  throw ConfigError("unknown quantization mode '" + mode + "' (per-tensor|per-channel)");
}

Shape parse_shape(const std::string& text) {
  std::vector<std::size_t> dims;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != part.size() || v == 0) throw ConfigError("bad input shape '" + text + "', expected CxHxW");
    dims.push_back(v);
  }
  if (dims.size() != 3) throw ConfigError("bad input shape '" + text + "', expected CxHxW");
  return Shape{1, dims[0], dims[1], dims[2]};
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string spec, format = "idx", labels, test_labels, out;
  std::vector<std::string> data, test_data;
  std::size_t epochs = 1, batch = 32;
  double lr = 0.01, momentum = 0.9;
  std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const fs::path dir = prepare_out(a.out);
  RunManifest manifest("train", dir);
  manifest["spec"] = a.spec;
  manifest["data"] = a.data;
  manifest["labels"] = a.labels;
  manifest["test_data"] = a.test_data;
  manifest["test_labels"] = a.test_labels;
  manifest["seed"] = a.seed;
  manifest["overrides"] = {{"epochs", a.epochs}, {"lr", a.lr}, {"batch", a.batch}, {"momentum", a.momentum},
                           {"format", a.format}};
  manifest.begin();

  const NetworkSpec spec = parse_dsl_file(a.spec);
  const Dataset train_set = load_dataset(a.format, a.data, a.labels);
  std::optional<Dataset> test_set;
  if (!a.test_data.empty()) test_set = load_dataset(a.format, a.test_data, a.test_labels);

  TrainConfig cfg;
  cfg.learning_rate = a.lr;
  cfg.momentum = a.momentum;
  cfg.batch_size = a.batch;
  cfg.epochs = a.epochs;
  cfg.seed = a.seed;
  cfg.validate();

  Network net = Network::compile(spec, a.seed);
  std::ostringstream csv;
  csv << "epoch,learning_rate,train_loss,train_top1" << (test_set ? ",test_loss,test_top1" : "") << '\n';
  out << "epoch  train_loss  train_top1" << (test_set ? "   test_loss   test_top1" : "") << '\n';
  train(net, train_set, cfg, [&](const EpochStats& s) {
    std::string line = std::to_string(s.epoch) + ',' + fmt(s.learning_rate) + ',' + fmt(s.mean_loss) + ',' +
                       fmt(s.train_accuracy);
    out << std::setw(5) << s.epoch << std::setw(12) << fmt(s.mean_loss) << std::setw(12) << fmt(s.train_accuracy);
    if (test_set) {
      const EvalResult r = evaluate(net, *test_set);
      line += ',' + fmt(r.mean_loss) + ',' + fmt(r.top1);
      out << std::setw(12) << fmt(r.mean_loss) << std::setw(12) << fmt(r.top1);
    }
    csv << line << '\n';
    out << std::endl;
  });
  save_model(to_model_file(net), (dir / "model.ackm").string());
  write_text(dir / "metrics.csv", csv.str());
  manifest.finish("ok");
  out << "wrote " << (dir / "model.ackm").string() << " and " << (dir / "metrics.csv").string() << '\n';
  return kExitOk;
}

// ---- eval -----------------------------------------------------------------

int cmd_eval(const std::string& model, const std::string& format, const std::vector<std::string>& data,
             const std::string& labels, std::ostream& out) {
  const ModelFile file = read_model(model);
  const Dataset ds = load_dataset(format, data, labels);
  EvalResult r;
  if (file.quantized()) {
    const QuantizedNetwork q(file.spec, file.params);
    r = evaluate(q.dequantized(), ds);
  } else {
    r = evaluate(load_network(model), ds);
  }
  out << "samples    top1        mean_loss\n"
      << std::left << std::setw(11) << ds.size() << std::setw(12) << fmt(r.top1) << fmt(r.mean_loss) << '\n'
      << std::right << "samples,top1,mean_loss\n"
      << ds.size() << ',' << fmt(r.top1) << ',' << fmt(r.mean_loss) << '\n';
  return kExitOk;
}

// ---- quantize -------------------------------------------------------------

int cmd_quantize(const std::string& model, const std::string& mode, const std::string& out_dir, std::ostream& out) {
  const fs::path dir = prepare_out(out_dir);
  RunManifest manifest("quantize", dir);
  manifest["model"] = model;
  manifest["overrides"] = {{"mode", mode}};
  manifest.begin();
  const QuantMode m = parse_mode(mode);
  const Network net = load_network(model);
  const QuantizedNetwork q = quantize_weights(net, m);
  save_model(to_model_file(q), (dir / "model.ackm").string());
  const auto b32 = weight_memory_bytes(net, 32);
  const auto b8 = weight_memory_bytes(q, 8);
  const auto b8s = weight_memory_bytes(q, 8, true);
  out << "params  bytes_32bit  bytes_8bit  bytes_8bit_with_scales\n"
      << std::left << std::setw(8) << net.param_count() << std::setw(13) << b32 << std::setw(12) << b8 << b8s << '\n'
      << std::right << "params,bytes_32bit,bytes_8bit,bytes_8bit_with_scales\n"
      << net.param_count() << ',' << b32 << ',' << b8 << ',' << b8s << '\n';
  manifest.finish("ok");
  return kExitOk;
}

// ---- count ----------------------------------------------------------------

int cmd_count(const std::string& spec_path, const std::string& shape, unsigned bits, bool bias_adds, bool csv_only,
              const std::string& out_dir, std::ostream& out) {
  const NetworkSpec spec = parse_dsl_file(spec_path);
  const Shape in = shape.empty() ? spec.input_shape() : parse_shape(shape);
  const ComplexityReport report = count_mult_adds(spec, in, bits, CountOptions{bias_adds});
  if (!csv_only) out << report.table() << '\n';
  out << report.csv();
  if (!out_dir.empty()) write_text(prepare_out(out_dir) / "complexity.csv", report.csv());
  return kExitOk;
}

// ---- compare --------------------------------------------------------------

int cmd_compare(const std::string& csv_path, bool csv_only, const std::string& out_dir, std::ostream& out) {
  const auto rows = compare(parse_model_csv(read_text(csv_path)));
  if (!csv_only) out << format_ratio_table(rows) << '\n';
  out << format_ratio_csv(rows);
  if (!out_dir.empty()) write_text(prepare_out(out_dir) / "ratios.csv", format_ratio_csv(rows));
  return kExitOk;
}

// ---- search ---------------------------------------------------------------

struct SearchArgs {
  std::string space, out;
  std::uint64_t budget = 8, seed = 0;
  double tau = 0.9;
  unsigned bits = 8;
};

// Candidates are looked up in the space's "metrics" table (keyed by spec hash)
// or, failing that, trained and evaluated per the "train" section.
EvalFn make_eval(const nlohmann::json& j, const fs::path& base) {
  std::map<std::string, CandidateResult> cached;
  if (j.contains("metrics")) {
    for (const auto& [hash, m] : j["metrics"].items()) {
      cached[hash] = CandidateResult{m.at("top1").get<double>(), m.value("bits", 32u)};
    }
  }
  struct TrainSetup {
    Dataset train_set, test_set;
    TrainConfig cfg;
    std::optional<QuantMode> quant;
  };
  std::shared_ptr<TrainSetup> setup;
  if (j.contains("train")) {
    const auto& t = j["train"];
    auto rel = [&](const char* key) { return (base / t.at(key).get<std::string>()).string(); };
    setup = std::make_shared<TrainSetup>();
    setup->train_set = load_idx(rel("images"), rel("labels"));
    setup->test_set = load_idx(rel("test_images"), rel("test_labels"));
    if (t.contains("limit")) {
      const auto n = std::min(setup->train_set.size(), t["limit"].get<std::size_t>());
      setup->train_set = setup->train_set.slice(0, n);
    }
    setup->cfg.epochs = t.value("epochs", std::size_t{1});
    setup->cfg.learning_rate = t.value("lr", 0.01);
    setup->cfg.batch_size = t.value("batch", std::size_t{32});
    setup->cfg.validate();
    const std::string q = t.value("quantize", std::string("per-channel"));
    if (q != "none") setup->quant = parse_mode(q);
  }
  return [cached, setup](const Candidate& c, std::uint64_t seed) {
    if (auto it = cached.find(spec_hash(c.text)); it != cached.end()) return it->second;
    if (!setup) throw ConfigError("no cached metrics for candidate " + std::to_string(c.id) + " (hash " +
                                  spec_hash(c.text) + ") and no train section");
    Network net = Network::compile(c.spec, seed);
    TrainConfig cfg = setup->cfg;
    cfg.seed = seed;
    train(net, setup->train_set, cfg);
    if (!setup->quant) return CandidateResult{evaluate(net, setup->test_set).top1, 32};
    const QuantizedNetwork q = quantize_weights(net, *setup->quant);
    return CandidateResult{evaluate(q.dequantized(), setup->test_set).top1, 8};
  };
}

int cmd_search(const SearchArgs& a, std::ostream& out) {
  const fs::path dir = prepare_out(a.out);
  RunManifest manifest("search", dir);
  manifest["space"] = a.space;
  manifest["seed"] = a.seed;
  manifest["overrides"] = {{"budget", a.budget}, {"tau", a.tau}, {"bits", a.bits}};
  manifest.begin();

  const std::string text = read_text(a.space);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("search space: ") + e.what());
  }
  const SearchSpace space = SearchSpace::from_json(text);
  PerformanceFunction pf;
  if (j.contains("score")) {
    pf.kappa = j["score"].value("kappa", pf.kappa);
    pf.beta = j["score"].value("beta", pf.beta);
    pf.gamma = j["score"].value("gamma", pf.gamma);
  }
  EvalFn eval;
  try {
    eval = make_eval(j, fs::path(a.space).parent_path());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("search space: ") + e.what());
  }
  const SearchResult result = search(space, a.budget, IndicatorConfig{a.tau, a.bits}, pf, eval, a.seed);
  write_text(dir / "audit.ndjson", result.audit_ndjson());

  std::ostringstream csv;
  csv << "rank,candidate_id,spec_hash,top1,params,mult_adds,U\n";
  out << "rank  candidate  spec_hash         top1      params    mult_adds  U\n";
  for (std::size_t i = 0; i < result.ranked.size(); ++i) {
    const auto& c = result.ranked[i];
    const std::string h = spec_hash(c.candidate.text);
    csv << i + 1 << ',' << c.candidate.id << ',' << h << ',' << fmt(c.top1) << ',' << c.params << ',' << c.mult_adds
        << ',' << fmt(*c.u) << '\n';
    out << std::setw(4) << i + 1 << std::setw(11) << c.candidate.id << "  " << h << std::setw(10) << fmt(c.top1, 4)
        << std::setw(10) << c.params << std::setw(13) << c.mult_adds << "  " << fmt(*c.u, 3) << '\n';
  }
  write_text(dir / "ranking.csv", csv.str());
  if (!result.found()) {
    out << "no feasible candidate among " << result.audit.size() << " evaluated\n";
    manifest.finish("infeasible");
    return kExitInfeasible;
  }
  out << '\n' << csv.str() << "\nbest:\n" << result.ranked.front().candidate.text;
  write_text(dir / "best.dsl", result.ranked.front().candidate.text);
  manifest.finish("ok");
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"attention condenser toolkit", "ack"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ack 1.0");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train a network description on a dataset");
  train_cmd->add_option("--spec", ta.spec, "network description file")->required();
  train_cmd->add_option("--data", ta.data, "image file (idx) or batch files (cifar)")->required();
  train_cmd->add_option("--labels", ta.labels, "label file (idx)");
  train_cmd->add_option("--test-data", ta.test_data, "held-out images, evaluated after every epoch");
  train_cmd->add_option("--test-labels", ta.test_labels, "held-out labels");
  train_cmd->add_option("--format", ta.format, "idx or cifar")->capture_default_str();
  train_cmd->add_option("--epochs", ta.epochs)->capture_default_str();
  train_cmd->add_option("--lr", ta.lr)->capture_default_str();
  train_cmd->add_option("--momentum", ta.momentum)->capture_default_str();
  train_cmd->add_option("--batch", ta.batch)->capture_default_str();
  train_cmd->add_option("--seed", ta.seed)->capture_default_str();
  train_cmd->add_option("--out", ta.out, "output directory")->required();

  std::string model, format = "idx", labels, mode = "per-channel", out_dir, spec, shape, csv;
  std::vector<std::string> data;
  unsigned bits = 32;
  bool bias_adds = false, csv_only = false;

  auto* eval_cmd = app.add_subcommand("eval", "report top-1 accuracy of a saved model");
  eval_cmd->add_option("--model", model)->required();
  eval_cmd->add_option("--data", data)->required();
  eval_cmd->add_option("--labels", labels);
  eval_cmd->add_option("--format", format)->capture_default_str();

  auto* quant_cmd = app.add_subcommand("quantize", "store weights as 8-bit integers");
  quant_cmd->add_option("--model", model)->required();
  quant_cmd->add_option("--mode", mode, "per-tensor or per-channel")->capture_default_str();
  quant_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* count_cmd = app.add_subcommand("count", "parameters, mult-adds and weight memory per layer");
  count_cmd->add_option("--spec", spec)->required();
  count_cmd->add_option("--input-shape", shape, "CxHxW (defaults to the description's input)");
  count_cmd->add_option("--bits", bits)->capture_default_str();
  count_cmd->add_flag("--bias-adds", bias_adds, "count one multiply-add per bias addition");
  count_cmd->add_flag("--csv-only", csv_only);
  count_cmd->add_option("--out", out_dir, "also write complexity.csv here");

  auto* compare_cmd = app.add_subcommand("compare", "pairwise parameter / mult-add / memory ratios");
  compare_cmd->add_option("--csv", csv, "rows of name,params,mult_adds,bits")->required();
  compare_cmd->add_flag("--csv-only", csv_only);
  compare_cmd->add_option("--out", out_dir, "also write ratios.csv here");

  SearchArgs sa;
  auto* search_cmd = app.add_subcommand("search", "constrained random architecture search");
  search_cmd->add_option("--space", sa.space, "search space JSON")->required();
  search_cmd->add_option("--budget", sa.budget)->capture_default_str();
  search_cmd->add_option("--tau", sa.tau, "minimum top-1 fraction")->capture_default_str();
  search_cmd->add_option("--bits", sa.bits, "required weight precision")->capture_default_str();
  search_cmd->add_option("--seed", sa.seed)->capture_default_str();
  search_cmd->add_option("--out", sa.out, "output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(ta, out);
    if (*eval_cmd) return cmd_eval(model, format, data, labels, out);
    if (*quant_cmd) return cmd_quantize(model, mode, out_dir, out);
    if (*count_cmd) return cmd_count(spec, shape, bits, bias_adds, csv_only, out_dir, out);
    if (*compare_cmd) return cmd_compare(csv, csv_only, out_dir, out);
    if (*search_cmd) return cmd_search(sa, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace ack
