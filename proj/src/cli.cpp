#include "hpmn/cli.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "hpmn/baseline.hpp"
#include "hpmn/data.hpp"
#include "hpmn/eval.hpp"
#include "hpmn/model.hpp"
#include "hpmn/store.hpp"
#include "hpmn/trainer.hpp"

namespace hpmn::cli {

using nlohmann::json;

Preset preset(const std::string& name) {
  if (name == "amazon") return {name, UpdateSchedule{{1, 2, 4}}, 32, 16};
  if (name == "taobao") return {name, UpdateSchedule{{1, 2, 4, 12}}, 32, 16};
  if (name == "xlong") return {name, UpdateSchedule{{1, 2, 4, 8, 16, 32}}, 32, 16};
  if (name == "small") return {name, UpdateSchedule{{1, 2, 4}}, 8, 8};
  throw std::invalid_argument("unknown preset '" + name + "' (amazon, taobao, xlong, small)");
}

UpdateSchedule parse_periods(const std::string& text) {
  UpdateSchedule s;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t used = 0;
    const long long v = std::stoll(tok, &used);
    if (used != tok.size()) throw std::invalid_argument("bad period '" + tok + "'");
    s.periods.push_back(v);
  }
  s.validate();
  return s;
}

namespace {

struct ModelOptions {
  std::string preset = "amazon";
  std::string periods;
  std::size_t memory_dim = 0;
  std::size_t embed_dim = 0;
  double gate_timescale = 0.0;

  void add(CLI::App* app) {
    app->add_option("--preset", preset, "Model structure: amazon, taobao, xlong, small")
        ->check(CLI::IsMember({"amazon", "taobao", "xlong", "small"}));
    app->add_option("--periods", periods, "Comma-separated update periods, overrides the preset");
    app->add_option("--memory-dim", memory_dim, "Slot width, overrides the preset")->check(CLI::PositiveNumber);
    app->add_option("--embed-dim", embed_dim, "Embedding width, overrides the preset")->check(CLI::PositiveNumber);
    app->add_option("--gate-timescale", gate_timescale, "Largest update-gate time scale at init, 0 for none")
        ->check(CLI::NonNegativeNumber);
  }

  ModelConfig config(const VocabSizes& vocab) const {
    const Preset p = cli::preset(preset);
    ModelConfig c;
    c.vocab = vocab;
    c.schedule = periods.empty() ? p.schedule : parse_periods(periods);
    c.memory_dim = memory_dim ? memory_dim : p.memory_dim;
    c.embed_dim = embed_dim ? embed_dim : p.embed_dim;
    c.gate_timescale = gate_timescale;
    c.validate();
    return c;
  }
};

struct TrainOptions {
  std::size_t epochs = 5;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  double lambda = 1e-4;
  double mu = 1e-5;

  void add(CLI::App* app) {
    app->add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
    app->add_option("--batch-size", batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
    app->add_option("--lr", lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
    app->add_option("--lambda", lambda, "Covariance regularizer weight")->check(CLI::NonNegativeNumber);
    app->add_option("--mu", mu, "L2 weight")->check(CLI::NonNegativeNumber);
  }

  TrainConfig config(const ModelConfig& model, std::uint64_t seed) const {
    TrainConfig t;
    t.learning_rate = lr;
    t.lambda = lambda;
    t.mu = mu;
    t.batch_size = batch_size;
    t.epochs = epochs;
    t.seed = seed;
    t.schedule = model.schedule;
    t.memory_dim = model.memory_dim;
    t.embed_dim = model.embed_dim;
    t.validate();
    return t;
  }
};

Dataset load_split(const std::string& data, const std::string& test_data, double train_fraction,
                   VocabSizes& vocab) {
  SampleFile file = read_samples(data);
  vocab = file.vocab;
  if (!test_data.empty()) {
    SampleFile test = read_samples(test_data);
    if (!(test.vocab == file.vocab)) throw DataError("train and test files disagree on vocabulary sizes");
    return {std::move(file.samples), std::move(test.samples)};
  }
  return split_by_time(file.samples, train_fraction);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

void add_config(CLI::App* app) {
  app->add_option("--config", "Config file (key=value lines or a JSON object); command-line flags take precedence")
      ->check(CLI::ExistingFile);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::FileError::Missing(path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::vector<std::pair<std::string, std::string>> out;
  if (trim(text).starts_with("{")) {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw CLI::ConversionError("config " + path + ": " + e.what());
    }
    for (const auto& [key, value] : j.items()) {
      out.emplace_back(key, value.is_string() ? value.get<std::string>() : value.dump());
    }
    return out;
  }
  std::size_t line_no = 0;
  for (std::string line; std::getline(ss, line);) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';' || line[0] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw CLI::ConversionError("config " + path + " line " + std::to_string(line_no) + ": expected key=value");
    }
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    out.emplace_back(trim(line.substr(0, eq)), value);
  }
  return out;
}

// Appends config-file entries as flags unless the command line already sets them.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out = args;
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] != "--config") continue;
    for (auto [key, value] : read_config(args[i + 1])) {
      if (key.starts_with("--")) key = key.substr(2);
      std::replace(key.begin(), key.end(), '_', '-');
      const std::string flag = "--" + key;
      const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
        return a == flag || a.starts_with(flag + "=");
      });
      if (given) continue;
      if (value == "true") {
        out.push_back(flag);
      } else if (value != "false") {
        out.push_back(flag);
        out.push_back(value);
      }
    }
  }
  return out;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical periodic memory network for lifelong sequential modeling", "hpmn"};
  app.require_subcommand(1);
  app.fallthrough(false);

  std::uint64_t seed = 0;
  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", seed, "Random seed"); };
  std::function<int()> run;

  // synth
  SyntheticConfig synth;
  std::string plant = "random";
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic samples with planted dependencies");
  add_config(synth_cmd);
  add_seed(synth_cmd);
  synth_cmd->add_option("--users", synth.n_users, "Number of users")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seq-len", synth.seq_len, "History length per user")->check(CLI::Range(8, 100000));
  synth_cmd->add_option("--items", synth.n_items, "Item catalog size")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--categories", synth.n_categories, "Number of categories")->check(CLI::Range(2, 1000000));
  synth_cmd->add_option("--interests", synth.interests_per_user, "Background categories per user")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--plant", plant, "random, none, long, recent, both or middle");
  synth_cmd->add_option("--out", synth_out, "Sample file to write")->required();
  synth_cmd->callback([&] {
    run = [&] {
      synth.seed = seed;
      synth.plant = parse_plant(plant);
      const auto samples = generate_synthetic(synth);
      write_samples(synth_out, samples, synthetic_vocab(synth));
      spdlog::info("wrote {} samples to {}", samples.size(), synth_out);
      return 0;
    };
  });

  // build-dataset
  std::string events_path, vocab_path, vocab_out, train_out, test_out;
  std::int64_t cut_time = 0;
  double neg_ratio = 0.5;
  LogSchema schema;
  auto* build_cmd = app.add_subcommand("build-dataset", "Turn a JSONL behavior log into train/test samples");
  add_config(build_cmd);
  add_seed(build_cmd);
  build_cmd->add_option("--events", events_path, "Behavior log (JSONL)")->required()->check(CLI::ExistingFile);
  build_cmd->add_option("--vocab", vocab_path, "Vocabulary file; built from the log when omitted")
      ->check(CLI::ExistingFile);
  build_cmd->add_option("--vocab-out", vocab_out, "Where to save the vocabulary used");
  build_cmd->add_option("--cut-time", cut_time, "Samples predicted before this time go to train")->required();
  build_cmd->add_option("--neg-ratio", neg_ratio, "Fraction of targets replaced by negatives")
      ->check(CLI::Range(0.0, 1.0));
  build_cmd->add_option("--max-side", schema.max_side_features, "Side features allowed per event");
  build_cmd->add_option("--max-len", schema.max_sequence_length, "Longest accepted history");
  build_cmd->add_option("--train-out", train_out, "Train sample file")->required();
  build_cmd->add_option("--test-out", test_out, "Test sample file")->required();
  build_cmd->callback([&] {
    run = [&] {
      const Vocabulary vocab = vocab_path.empty() ? build_vocabulary(events_path) : load_vocabulary(vocab_path);
      if (!vocab_out.empty()) save_vocabulary(vocab_out, vocab);
      const auto sequences = load_events(events_path, vocab, schema);
      const Dataset ds = build_dataset(sequences, cut_time, neg_ratio, seed);
      VocabSizes sizes = vocab.sizes();
      write_samples(train_out, ds.train, sizes);
      write_samples(test_out, ds.test, sizes);
      spdlog::info("{} train / {} test samples", ds.train.size(), ds.test.size());
      return 0;
    };
  });

  // train
  ModelOptions model_opts;
  TrainOptions train_opts;
  std::string data_path, test_path, model_out, curve_out;
  double train_fraction = 0.7;
  auto* train_cmd = app.add_subcommand("train", "Train a model and keep the best epoch by test AUC");
  add_config(train_cmd);
  add_seed(train_cmd);
  model_opts.add(train_cmd);
  train_opts.add(train_cmd);
  train_cmd->add_option("--data", data_path, "Sample file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--test-data", test_path, "Separate test sample file")->check(CLI::ExistingFile);
  train_cmd->add_option("--train-fraction", train_fraction, "Time quantile for the split")
      ->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--out", model_out, "Checkpoint to write")->required();
  train_cmd->add_option("--curve", curve_out, "Learning-curve CSV");
  train_cmd->callback([&] {
    run = [&] {
      VocabSizes vocab;
      const Dataset ds = load_split(data_path, test_path, train_fraction, vocab);
      if (ds.train.empty()) throw std::invalid_argument("no training samples after the split");
      const ModelConfig mc = model_opts.config(vocab);
      const TrainConfig tc = train_opts.config(mc, seed);
      auto result = fit(HpmnModel::create(mc, seed), ds.train, ds.test, tc);
      save_checkpoint(model_out, result.best_model);
      if (!curve_out.empty()) write_learning_curve(curve_out, result.curve);
      json summary;
      summary["best_epoch"] = result.best_epoch;
      if (!ds.test.empty()) {
        summary["test_auc"] = result.best_auc;
        summary["test_logloss"] = result.best_logloss;
      }
      summary["model_version"] = result.best_model.fingerprint();
      out << summary.dump() << "\n";
      return 0;
    };
  });

  // eval
  std::string model_path, metrics_out;
  double eval_fraction = 0.0;
  auto* eval_cmd = app.add_subcommand("eval", "Score a sample file with a checkpoint");
  add_config(eval_cmd);
  eval_cmd->add_option("--model", model_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", data_path, "Sample file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--train-fraction", eval_fraction,
                       "Evaluate only the part after this time quantile (0 = all samples)")
      ->check(CLI::Range(0.0, 1.0));
  eval_cmd->add_option("--out", metrics_out, "Metrics JSON file");
  eval_cmd->callback([&] {
    run = [&] {
      const HpmnModel model = load_checkpoint(model_path);
      SampleFile file = read_samples(data_path);
      if (!(file.vocab == model.config.vocab)) {
        throw DataError("sample file vocabulary does not match the checkpoint");
      }
      const std::vector<Sample> samples =
          eval_fraction > 0.0 ? split_by_time(file.samples, eval_fraction).test : std::move(file.samples);
      const std::string report = to_json(metrics(score_all(model, samples)));
      if (!metrics_out.empty()) write_file(metrics_out, report + "\n");
      out << report << "\n";
      return 0;
    };
  });

  // gradcheck
  std::string gc_preset = "small";
  std::size_t gc_len = 16;
  std::size_t gc_batch = 4;
  GradCheckOptions gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  add_config(gc_cmd);
  add_seed(gc_cmd);
  gc_cmd->add_option("--preset", gc_preset, "Model structure")
      ->check(CLI::IsMember({"amazon", "taobao", "xlong", "small"}));
  gc_cmd->add_option("--seq-len", gc_len, "History length")->check(CLI::Range(8, 10000));
  gc_cmd->add_option("--batch", gc_batch, "Samples in the batch")->check(CLI::PositiveNumber);
  gc_cmd->add_option("--tolerance", gc.tolerance, "Maximum relative error")->check(CLI::PositiveNumber);
  gc_cmd->add_option("--step", gc.step, "Central difference step")->check(CLI::PositiveNumber);
  gc_cmd->callback([&] {
    run = [&] {
      SyntheticConfig sc;
      sc.n_users = gc_batch;
      sc.seq_len = gc_len;
      sc.seed = seed;
      const auto batch = generate_synthetic(sc);
      ModelOptions mo;
      mo.preset = gc_preset;
      const ModelConfig mc = mo.config(synthetic_vocab(sc));
      const HpmnModel model = HpmnModel::create(mc, seed);
      const auto report = grad_check_model(model, batch, TrainOptions{}.config(mc, seed).loss_weights(), gc);
      out << format_report(report);
      return report.passed ? 0 : 1;
    };
  });

  // serve-sim
  std::string trace_path, store_in, store_out, predictions_out;
  auto* serve_cmd = app.add_subcommand("serve-sim", "Replay an ingest/query trace against the memory store");
  add_config(serve_cmd);
  serve_cmd->add_option("--model", model_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--trace", trace_path, "Trace JSONL with op ingest|query")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--store", store_in, "Existing store file")->check(CLI::ExistingFile);
  serve_cmd->add_option("--store-out", store_out, "Where to persist the store afterwards");
  serve_cmd->add_option("--out", predictions_out, "Predictions JSONL (default stdout)");
  serve_cmd->callback([&] {
    run = [&] {
      const HpmnModel model = load_checkpoint(model_path);
      const std::string version = model.fingerprint();
      MemoryStore store = store_in.empty() ? MemoryStore(version) : MemoryStore::load(store_in, version);
      std::ifstream in(trace_path);
      std::ofstream file_out;
      if (!predictions_out.empty()) {
        file_out.open(predictions_out);
        if (!file_out) throw std::runtime_error("cannot write " + predictions_out);
      }
      std::ostream& sink = predictions_out.empty() ? out : file_out;
      std::string text;
      std::size_t line = 0;
      std::size_t ingested = 0, queried = 0;
      while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
          const json j = json::parse(text);
          const auto op = j.at("op").get<std::string>();
          const auto user = j.at("user").get<std::string>();
          BehaviorEvent e;
          e.item_id = j.at("item").get<std::int32_t>();
          e.category_id = j.at("cat").get<std::int32_t>();
          e.timestamp = j.value("ts", std::int64_t{0});
          e.side_features = j.value("side", std::vector<std::int32_t>{});
          if (op == "ingest") {
            store.ingest(user, e, model);
            ++ingested;
          } else if (op == "query") {
            const auto context = j.value("context", std::vector<std::int32_t>{});
            const auto user_side = j.value("user_side", std::vector<std::int32_t>{});
            json row;
            row["user"] = user;
            row["item"] = e.item_id;
            try {
              const Scored s = store.query(user, e, context, user_side, model);
              row["probability"] = s.probability;
              row["weights"] = s.weights;
            } catch (const ColdStartError&) {
              row["error"] = "cold_start";
            }
            sink << row.dump() << "\n";
            ++queried;
          } else {
            throw DataError("unknown op '" + op + "'", line);
          }
        } catch (const json::exception& ex) {
          throw DataError(std::string("bad trace record: ") + ex.what(), line);
        } catch (const DataError&) {
          throw;
        } catch (const std::exception& ex) {
          throw DataError(ex.what(), line);
        }
      }
      if (!store_out.empty()) store.persist(store_out);
      spdlog::info("{} ingests, {} queries, {} users in store", ingested, queried, store.size());
      return 0;
    };
  });

  // expand
  std::int64_t new_period = 0;
  auto* expand_cmd = app.add_subcommand("expand", "Add a memory layer with a longer period");
  add_config(expand_cmd);
  add_seed(expand_cmd);
  expand_cmd->add_option("--model", model_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  expand_cmd->add_option("--period", new_period, "Period of the new layer (default: twice the top period)");
  expand_cmd->add_option("--out", model_out, "Expanded checkpoint")->required();
  expand_cmd->add_option("--store", store_in, "Store to expand alongside")->check(CLI::ExistingFile);
  expand_cmd->add_option("--store-out", store_out, "Expanded store file");
  expand_cmd->callback([&] {
    run = [&] {
      if (!store_in.empty() && store_out.empty()) throw std::invalid_argument("--store needs --store-out");
      HpmnModel model = load_checkpoint(model_path);
      const std::string old_version = model.fingerprint();
      const std::int64_t period = new_period ? new_period : 2 * model.config.schedule.periods.back();
      model.expand(period, seed);
      save_checkpoint(model_out, model);
      if (!store_in.empty()) {
        MemoryStore store = MemoryStore::load(store_in, old_version);
        store.expand(model.fingerprint());
        store.persist(store_out);
      }
      json summary;
      summary["layers"] = model.config.schedule.layers();
      summary["periods"] = model.config.schedule.periods;
      summary["model_version"] = model.fingerprint();
      out << summary.dump() << "\n";
      return 0;
    };
  });

  // export-attention
  std::string attention_out;
  auto* attn_cmd = app.add_subcommand("export-attention", "Write per-sample attention weights over layers");
  add_config(attn_cmd);
  attn_cmd->add_option("--model", model_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  attn_cmd->add_option("--data", data_path, "Sample file")->required()->check(CLI::ExistingFile);
  attn_cmd->add_option("--out", attention_out, "JSONL output")->required();
  attn_cmd->callback([&] {
    run = [&] {
      const HpmnModel model = load_checkpoint(model_path);
      const SampleFile file = read_samples(data_path);
      if (!(file.vocab == model.config.vocab)) {
        throw DataError("sample file vocabulary does not match the checkpoint");
      }
      std::ofstream file_out(attention_out);
      if (!file_out) throw std::runtime_error("cannot write " + attention_out);
      for (const auto& s : file.samples) {
        json row;
        row["user"] = s.sequence.user_id;
        row["target_item"] = s.target.item_id;
        row["weights"] = model.score(s).weights;
        file_out << row.dump() << "\n";
      }
      return 0;
    };
  });

  // sweep-capacity
  std::string layer_list = "1,2,3,4,5";
  std::string sweep_out;
  bool with_baseline = false;
  auto* sweep_cmd = app.add_subcommand("sweep-capacity", "Train with 1..D layers and report test AUC per D");
  add_config(sweep_cmd);
  add_seed(sweep_cmd);
  train_opts.add(sweep_cmd);
  sweep_cmd->add_option("--data", data_path, "Sample file")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--test-data", test_path, "Separate test sample file")->check(CLI::ExistingFile);
  sweep_cmd->add_option("--train-fraction", train_fraction, "Time quantile for the split")
      ->check(CLI::Range(0.0, 1.0));
  sweep_cmd->add_option("--layers", layer_list, "Comma-separated layer counts");
  sweep_cmd->add_option("--memory-dim", model_opts.memory_dim, "Slot width")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--embed-dim", model_opts.embed_dim, "Embedding width")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--gate-timescale", model_opts.gate_timescale, "Largest update-gate time scale at init")
      ->check(CLI::NonNegativeNumber);
  sweep_cmd->add_flag("--baseline", with_baseline, "Add a row for the sum-pooling baseline (layers = 0)");
  sweep_cmd->add_option("--out", sweep_out, "CSV output")->required();
  sweep_cmd->callback([&] {
    run = [&] {
      VocabSizes vocab;
      const Dataset ds = load_split(data_path, test_path, train_fraction, vocab);
      if (ds.train.empty() || ds.test.empty()) throw std::invalid_argument("sweep needs train and test samples");
      std::ofstream csv(sweep_out);
      if (!csv) throw std::runtime_error("cannot write " + sweep_out);
      csv << "layers,periods,test_auc,test_logloss,best_epoch\n";
      std::vector<std::size_t> counts;
      std::stringstream list(layer_list);
      for (std::string tok; std::getline(list, tok, ',');) {
        const auto d = std::stoul(tok);
        if (d == 0) throw std::invalid_argument("layer counts must be >= 1");
        counts.push_back(d);
      }
      if (with_baseline) {
        ModelConfig mc = model_opts.config(vocab);
        auto r = fit(SumPoolingModel::create(mc, seed), ds.train, ds.test, train_opts.config(mc, seed));
        csv << "0,," << r.best_auc << "," << r.best_logloss << "," << r.best_epoch << "\n";
      }
      for (std::size_t d : counts) {
        ModelOptions mo = model_opts;
        mo.periods.clear();
        ModelConfig mc = mo.config(vocab);
        mc.schedule = UpdateSchedule::exponential(d);
        auto r = fit(HpmnModel::create(mc, seed), ds.train, ds.test, train_opts.config(mc, seed));
        std::string periods;
        for (auto p : mc.schedule.periods) periods += (periods.empty() ? "" : " ") + std::to_string(p);
        csv << d << "," << periods << "," << r.best_auc << "," << r.best_logloss << "," << r.best_epoch << "\n";
        spdlog::info("D={}: auc {:.5f}", d, r.best_auc);
      }
      return 0;
    };
  });

  try {
    const std::vector<std::string> expanded = expand_config(args);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  if (!run) {
    err << app.help();
    return 2;
  }
  try {
    return run();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace hpmn::cli
