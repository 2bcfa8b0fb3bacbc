// Command-line front end: data preparation, training, evaluation, path
// explanation, demonstration sampling, and synthetic data generation.
//
// Every failure path prints exactly one line to stderr of the form
//   error:<category>: <message>
// and exits with a category-specific nonzero code (see category_exit_code).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tkgr/common.hpp"
#include "tkgr/eval.hpp"
#include "tkgr/sampler.hpp"
#include "tkgr/synth.hpp"
#include "tkgr/trainer.hpp"

namespace fs = std::filesystem;
using namespace tkgr;

namespace {

int category_exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parse: return 10;
    case ErrorKind::vocab: return 11;
    case ErrorKind::config: return 12;
    case ErrorKind::io: return 13;
    case ErrorKind::contract: return 14;
    case ErrorKind::integrity: return 15;
    case ErrorKind::argument: return 16;
  }
  return 1;
}

std::string one_line(std::string text) {
  for (char& c : text)
    if (c == '\n' || c == '\r') c = ' ';
  return text;
}

std::string default_out_dir() {
  if (const char* env = std::getenv("TKGR_OUT_DIR"); env && *env)
    return env;
  return "tkgr_out";
}

// ---------------------------------------------------------------------------
// Training configuration plumbing: every TrainConfig key becomes both a CLI
// flag and a config-file key; flags override the file, the file overrides
// the built-in defaults. Unknown keys anywhere are rejected.

struct ConfigStaging {
  std::map<std::string, std::string> flag_values;
  std::vector<CLI::Option*> options;
};

void add_config_flags(CLI::App& cmd, ConfigStaging& staging) {
  const auto defaults = TrainConfig{}.to_strings();
  for (const auto& [key, value] : defaults) {
    auto& slot = staging.flag_values[key];
    auto* opt = cmd.add_option("--" + key, slot,
                               strf("training key (default %s)", value.c_str()));
    staging.options.push_back(opt);
  }
}

std::map<std::string, std::string> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in)
    fail(ErrorKind::io, strf("cannot open config file '%s'",
                             path.string().c_str()));
  const auto known = TrainConfig{}.to_strings();
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::config,
           strf("%s:%zu: expected 'key = value'", path.string().c_str(),
                lineno));
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string()
                                    : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!known.count(key))
      fail(ErrorKind::config, strf("%s:%zu: unknown configuration key '%s'",
                                   path.string().c_str(), lineno, key.c_str()));
    out[key] = value;
  }
  return out;
}

TrainConfig merge_config(const std::string& config_path,
                         const ConfigStaging& staging) {
  auto merged = TrainConfig{}.to_strings();
  if (!config_path.empty())
    for (const auto& [key, value] : read_config_file(config_path))
      merged[key] = value;
  for (const auto* opt : staging.options)
    if (opt->count() > 0) {
      const std::string key = opt->get_name().substr(2);  // strip "--"
      merged[key] = staging.flag_values.at(key);
    }
  return TrainConfig::from_strings(merged);
}

void echo_effective_config(const TrainConfig& cfg, const fs::path& out_dir) {
  const auto path = out_dir / "effective_config.txt";
  std::ofstream out(path);
  if (!out)
    fail(ErrorKind::io, strf("cannot write '%s'", path.string().c_str()));
  for (const auto& [key, value] : cfg.to_strings())
    out << key << " = " << value << "\n";
}

// ---------------------------------------------------------------------------
// Shared helpers

Dataset load_data(const std::string& dir) {
  return Dataset::load_prepared(dir);
}

std::int64_t normalize_time(const Dataset& data, std::int64_t raw) {
  const std::int64_t offset = raw - data.origin;
  if (offset % data.granularity != 0)
    fail(ErrorKind::argument,
         strf("timestamp %lld is not aligned to the dataset granularity %lld "
              "(origin %lld)",
              static_cast<long long>(raw),
              static_cast<long long>(data.granularity),
              static_cast<long long>(data.origin)));
  return offset / data.granularity;
}

// "subject<TAB>relation<TAB>timestamp", names resolved via the vocabularies.
QueryTask parse_query(const Dataset& data, const std::string& text) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = text.find('\t', start);
    fields.push_back(text.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  if (fields.size() != 3)
    fail(ErrorKind::argument,
         strf("expected 'subject<TAB>relation<TAB>timestamp', got %zu fields",
              fields.size()));
  QueryTask query;
  query.subject = data.entities.require(fields[0]);
  query.relation = data.relations.require(fields[1]);
  try {
    std::size_t consumed = 0;
    const long long raw = std::stoll(fields[2], &consumed);
    if (consumed != fields[2].size()) throw std::invalid_argument(fields[2]);
    query.time = normalize_time(data, raw);
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorKind::argument,
         strf("bad timestamp '%s' in query", fields[2].c_str()));
  }
  return query;
}

void render_path(std::ostream& out, const Dataset& data, std::uint32_t start,
                 const Policy::BeamPath& path) {
  out << data.entities.name(start);
  std::uint32_t at = start;
  for (const ActionCandidate& step : path.actions) {
    out << " --[" << relation_display(step.relation, data.relations) << " @ "
        << step.time << "]--> " << data.entities.name(step.entity);
    at = step.entity;
  }
  if (path.actions.empty()) out << " (stays)";
  (void)at;
}

struct LoadedModel {
  std::unique_ptr<Dataset> data;  // stable address: the trainer refers to it
  TrainConfig cfg;
  std::unique_ptr<Trainer> trainer;
};

// Rebuilds the full stack around checkpointed weights; architecture keys come
// from the checkpoint so the parameter shapes always line up with the config.
LoadedModel load_model(const std::string& data_dir,
                       const std::string& checkpoint) {
  auto [store, cfg] = load_train_checkpoint(checkpoint);
  auto data = std::make_unique<Dataset>(load_data(data_dir));
  auto trainer = std::make_unique<Trainer>(*data, cfg, std::move(store));
  return {std::move(data), cfg, std::move(trainer)};
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_prepare(const std::string& train, const std::string& valid,
                const std::string& test, const std::string& out) {
  const Dataset data = Dataset::from_files(train, valid, test);
  fs::create_directories(out);
  data.save_prepared(out);

  std::ostringstream report;
  auto span = [](const std::vector<Quadruple>& qs) {
    std::int64_t lo = qs.front().t, hi = qs.front().t;
    for (const Quadruple& q : qs) {
      lo = std::min(lo, q.t);
      hi = std::max(hi, q.t);
    }
    return std::pair(lo, hi);
  };
  report << "entities\t" << data.entities.size() << "\n"
         << "relations\t" << data.relations.size() << "\n"
         << "origin\t" << data.origin << "\n"
         << "granularity\t" << data.granularity << "\n";
  const std::pair<const char*, const std::vector<Quadruple>*> splits[] = {
      {"train", &data.train}, {"valid", &data.valid}, {"test", &data.test}};
  for (const auto& [name, qs] : splits) {
    const auto [lo, hi] = span(*qs);
    report << name << "\t" << qs->size() << "\ttime " << lo << ".." << hi
           << "\n";
  }
  std::cout << report.str();
  std::ofstream file(fs::path(out) / "prepare_report.txt");
  if (!file) fail(ErrorKind::io, "cannot write the preparation report");
  file << report.str();
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& out,
              const TrainConfig& cfg, const std::string& resume,
              std::size_t checkpoint_every) {
  Dataset data = load_data(data_dir);
  fs::create_directories(out);
  echo_effective_config(cfg, out);

  ParameterStore initial;
  if (!resume.empty()) {
    auto [store, ignored_cfg] = load_train_checkpoint(resume);
    initial = std::move(store);
  }
  Trainer trainer(data, cfg, std::move(initial));

  const fs::path csv_path = fs::path(out) / "metrics.csv";
  std::ofstream csv(csv_path);
  if (!csv)
    fail(ErrorKind::io, strf("cannot write '%s'", csv_path.string().c_str()));
  Trainer::write_metrics_header(csv);

  double best_mrr = -1.0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const EpochMetrics m = trainer.train_epoch(epoch);
    Trainer::write_metrics_row(csv, m);
    csv.flush();
    std::ostringstream line;
    Trainer::write_metrics_row(line, m);
    std::cout << line.str();
    std::cout.flush();

    if (!data.valid.empty() && m.valid_mrr > best_mrr) {
      best_mrr = m.valid_mrr;
      save_train_checkpoint(trainer.parameters(), cfg,
                            fs::path(out) / "checkpoint_best.ckpt");
    }
    if (checkpoint_every > 0 && (epoch + 1) % checkpoint_every == 0)
      save_train_checkpoint(
          trainer.parameters(), cfg,
          fs::path(out) / strf("checkpoint_epoch_%zu.ckpt", epoch + 1));
  }
  save_train_checkpoint(trainer.parameters(), cfg,
                        fs::path(out) / "checkpoint_final.ckpt");
  if (!csv) fail(ErrorKind::io, "metrics CSV write failed");
  return 0;
}

int cmd_eval(const std::string& data_dir, const std::string& checkpoint,
             const std::string& split, const std::string& out,
             std::size_t beam_override) {
  LoadedModel model = load_model(data_dir, checkpoint);
  const std::vector<Quadruple>* facts = nullptr;
  if (split == "valid")
    facts = &model.data->valid;
  else if (split == "test")
    facts = &model.data->test;
  else
    fail(ErrorKind::argument,
         strf("unknown split '%s' (expected valid or test)", split.c_str()));

  const std::size_t beam =
      beam_override > 0 ? beam_override : model.cfg.beam_width;
  const MetricsReport report =
      evaluate(model.trainer->policy(), *facts, *model.data, beam);

  fs::create_directories(out);
  write_report_text(std::cout, report);
  std::ofstream text(fs::path(out) / ("report_" + split + ".txt"));
  std::ofstream csv(fs::path(out) / ("report_" + split + ".csv"));
  if (!text || !csv) fail(ErrorKind::io, "cannot write evaluation reports");
  write_report_text(text, report);
  write_report_csv(csv, report);
  return 0;
}

int cmd_explain(const std::string& data_dir, const std::string& checkpoint,
                const std::string& query_text, const std::string& query_file,
                std::size_t top_k, std::size_t beam_override) {
  if (query_text.empty() == query_file.empty())
    fail(ErrorKind::argument,
         "provide exactly one of --query and --query-file");
  LoadedModel model = load_model(data_dir, checkpoint);

  std::vector<std::string> lines;
  if (!query_text.empty()) {
    lines.push_back(query_text);
  } else {
    std::ifstream in(query_file);
    if (!in)
      fail(ErrorKind::io,
           strf("cannot open query file '%s'", query_file.c_str()));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty() && line[0] != '#') lines.push_back(line);
    }
    if (lines.empty())
      fail(ErrorKind::argument, "query file holds no queries");
  }

  const std::size_t beam = beam_override > 0 ? beam_override
                                             : model.cfg.beam_width;
  for (const std::string& line : lines) {
    const QueryTask query = parse_query(*model.data, line);
    const auto result = model.trainer->policy().beam_inference(query, beam);
    std::cout << "query: " << model.data->entities.name(query.subject) << " "
              << relation_display(query.relation, model.data->relations)
              << " ? @ " << query.time << "\n";
    const std::size_t shown = std::min(top_k, result.paths.size());
    for (std::size_t i = 0; i < shown; ++i) {
      std::cout << strf("#%zu  p=%.6f  ", i + 1, result.paths[i].probability);
      render_path(std::cout, *model.data, query.subject, result.paths[i]);
      std::cout << "\n";
    }
    if (shown == 0) std::cout << "(no surviving paths)\n";
  }
  return 0;
}

int cmd_sample_demos(const std::string& data_dir, const std::string& query_text,
                     std::size_t count, std::size_t max_hops,
                     std::uint64_t seed) {
  Dataset data = load_data(data_dir);
  QueryTask query = parse_query(data, query_text);
  // Demonstrations need the answer: resolve it from the filter if unique.
  std::vector<std::uint32_t> answers;
  for (std::uint32_t e = 0; e < data.entities.size(); ++e)
    if (data.known_fact(query.subject, query.relation, e, query.time))
      answers.push_back(e);
  if (answers.empty())
    fail(ErrorKind::argument,
         "no recorded answer for this query; demonstrations need a gold "
         "entity");
  const auto kg = TemporalKG::build(data.train, data.entities.size(),
                                    data.num_base_relations());
  Env env(kg, EnvConfig{});
  Rng rng(seed);
  std::size_t printed = 0;
  for (const std::uint32_t gold : answers) {
    query.gold = gold;
    for (const Demonstration& demo :
         sample_demonstrations(env, query, max_hops, count, rng)) {
      std::cout << data.entities.name(query.subject);
      for (const Quadruple& edge : demo.edges)
        std::cout << " --[" << relation_display(edge.r, data.relations)
                  << " @ " << edge.t << "]--> " << data.entities.name(edge.o);
      std::cout << "\n";
      ++printed;
    }
  }
  if (printed == 0) std::cout << "(no admissible demonstrations)\n";
  return 0;
}

int cmd_gen_synthetic(const SynthSpec& spec, const std::string& out) {
  SynthReport report;
  const Dataset data = gen_synthetic(spec, &report);
  write_synthetic_files(data, out);
  std::cout << "chains\t" << report.chains << "\n"
            << "train_instances\t" << report.train_instances << "\n"
            << "valid_instances\t" << report.valid_instances << "\n"
            << "test_instances\t" << report.test_instances << "\n"
            << "noise_facts\t" << report.noise_facts << "\n"
            << "verified_heads\t" << report.verified_heads << "\n"
            << "train_facts\t" << data.train.size() << "\n"
            << "valid_facts\t" << data.valid.size() << "\n"
            << "test_facts\t" << data.test.size() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Temporal knowledge-graph reasoner: multi-hop prediction of future "
      "facts with explainable reasoning paths"};
  app.require_subcommand(1);

  std::string out = default_out_dir();

  // prepare
  auto* prepare = app.add_subcommand(
      "prepare", "Parse raw TSV splits into a prepared dataset directory");
  std::string p_train, p_valid, p_test;
  std::string p_out = out;
  prepare->add_option("--train", p_train, "raw training TSV")->required();
  prepare->add_option("--valid", p_valid, "raw validation TSV")->required();
  prepare->add_option("--test", p_test, "raw test TSV")->required();
  prepare->add_option("--out", p_out, "output directory")
      ->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train a model on prepared data");
  std::string t_data, t_resume, t_config;
  std::string t_out = out;
  std::size_t t_ckpt_every = 50;
  train->add_option("--data", t_data, "prepared dataset directory")
      ->required();
  train->add_option("--out", t_out, "output directory")->capture_default_str();
  train->add_option("--config", t_config, "training config file (key = value)");
  train->add_option("--resume", t_resume, "checkpoint to resume from");
  train
      ->add_option("--checkpoint-every", t_ckpt_every,
                   "periodic checkpoint interval in epochs (0 disables)")
      ->capture_default_str();
  ConfigStaging staging;
  add_config_flags(*train, staging);

  // eval
  auto* eval_cmd = app.add_subcommand(
      "eval", "Rank a held-out split with a trained checkpoint");
  std::string e_data, e_ckpt, e_split = "test";
  std::string e_out = out;
  std::size_t e_beam = 0;
  eval_cmd->add_option("--data", e_data, "prepared dataset directory")
      ->required();
  eval_cmd->add_option("--checkpoint", e_ckpt, "trained checkpoint")
      ->required();
  eval_cmd->add_option("--split", e_split, "valid or test")
      ->capture_default_str();
  eval_cmd->add_option("--beam", e_beam,
                       "beam width override (0 = checkpoint setting)");
  eval_cmd->add_option("--out", e_out, "output directory")
      ->capture_default_str();

  // explain
  auto* explain = app.add_subcommand(
      "explain", "Show the top reasoning paths for a query");
  std::string x_data, x_ckpt, x_query, x_query_file;
  std::size_t x_top = 5, x_beam = 0;
  explain->add_option("--data", x_data, "prepared dataset directory")
      ->required();
  explain->add_option("--checkpoint", x_ckpt, "trained checkpoint")
      ->required();
  explain->add_option("--query", x_query,
                      "query 'subject<TAB>relation<TAB>timestamp'");
  explain->add_option("--query-file", x_query_file,
                      "file with one query per line");
  explain->add_option("--top", x_top, "paths to show per query")
      ->capture_default_str();
  explain->add_option("--beam", x_beam,
                      "beam width override (0 = checkpoint setting)");

  // sample-demos
  auto* demos = app.add_subcommand(
      "sample-demos", "Sample shortest-path demonstrations for a query");
  std::string d_data, d_query;
  std::size_t d_count = 8, d_hops = 2;
  std::uint64_t d_seed = 7;
  demos->add_option("--data", d_data, "prepared dataset directory")
      ->required();
  demos->add_option("--query", d_query,
                    "query 'subject<TAB>relation<TAB>timestamp'")
      ->required();
  demos->add_option("--count", d_count, "demonstrations per answer")
      ->capture_default_str();
  demos->add_option("--max-hops", d_hops, "walk length bound")
      ->capture_default_str();
  demos->add_option("--seed", d_seed, "sampling seed")->capture_default_str();

  // gen-synthetic
  auto* gen = app.add_subcommand(
      "gen-synthetic", "Generate a planted-pattern synthetic dataset");
  SynthSpec spec;
  std::string g_out = out;
  gen->add_option("--entities", spec.entities)->capture_default_str();
  gen->add_option("--relations", spec.relations)->capture_default_str();
  gen->add_option("--timestamps", spec.timestamps)->capture_default_str();
  gen->add_option("--patterns", spec.patterns)->capture_default_str();
  gen->add_option("--noise", spec.noise_facts)->capture_default_str();
  gen->add_option("--seed", spec.seed)->capture_default_str();
  gen->add_option("--out", g_out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
    if (*prepare) return cmd_prepare(p_train, p_valid, p_test, p_out);
    if (*train)
      return cmd_train(t_data, t_out, merge_config(t_config, staging),
                       t_resume, t_ckpt_every);
    if (*eval_cmd) return cmd_eval(e_data, e_ckpt, e_split, e_out, e_beam);
    if (*explain)
      return cmd_explain(x_data, x_ckpt, x_query, x_query_file, x_top, x_beam);
    if (*demos)
      return cmd_sample_demos(d_data, d_query, d_count, d_hops, d_seed);
    if (*gen) return cmd_gen_synthetic(spec, g_out);
    fail(ErrorKind::argument, "no subcommand selected");
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    std::cerr << "error:usage_error: " << one_line(e.what()) << "\n";
    return 17;
  } catch (const Error& e) {
    std::cerr << "error:" << to_string(e.kind()) << ": " << one_line(e.what())
              << "\n";
    return category_exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error:internal_error: " << one_line(e.what()) << "\n";
    return 70;
  }
}
