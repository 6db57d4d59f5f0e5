#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "premise/checkpoint.hpp"
#include "premise/corpus.hpp"
#include "premise/eval.hpp"
#include "premise/http_server.hpp"
#include "premise/mepo.hpp"
#include "premise/orchestrator.hpp"
#include "premise/service.hpp"
#include "premise/trainer.hpp"

using namespace premise;
using nlohmann::json;

namespace {

struct CorpusArgs {
  std::string path;
  std::string blacklist;

  void add(CLI::App* app) {
    app->add_option("--corpus", path, "corpus JSONL")->required()->check(CLI::ExistingFile);
    app->add_option("--blacklist", blacklist, "file of premise names to exclude")->check(CLI::ExistingFile);
  }

  Corpus load() const {
    LoadOptions opts;
    if (!blacklist.empty()) opts.blacklist = read_names_file(blacklist);
    return load_corpus(path, opts);
  }
};

std::size_t resolve_state(const Corpus& corpus, const std::string& id) {
  if (!id.empty() && std::all_of(id.begin(), id.end(), [](unsigned char c) { return std::isdigit(c); })) {
    const std::size_t i = std::stoul(id);
    if (i >= corpus.states().size()) throw Error(ErrorCode::unknown_name, "state index " + id + " out of range");
    return i;
  }
  for (std::size_t i = 0; i < corpus.states().size(); ++i)
    if (corpus.states()[i].theorem_name == id) return i;
  throw Error(ErrorCode::unknown_name, "no state for theorem '" + id + "'");
}

std::vector<std::size_t> parse_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(std::stoul(item));
  return out;
}

json ranked_json(const std::vector<ScoredName>& ranked) {
  json out = json::array();
  for (const auto& r : ranked) out.push_back({{"name", r.name}, {"score", r.score}});
  return out;
}

std::atomic<HttpServer*> g_server{nullptr};

void on_signal(int) {
  if (HttpServer* s = g_server.load()) s->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Premise selection engine: training, retrieval service, MePo and hammer evaluation"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "train the encoder");
  CorpusArgs train_corpus;
  train_corpus.add(train_cmd);
  TrainConfig tc;
  tc.steps = 1000;
  std::string train_out, loss_csv;
  train_cmd->add_option("--out", train_out, "checkpoint path")->required();
  train_cmd->add_option("--steps", tc.steps)->capture_default_str();
  train_cmd->add_option("--batch-size", tc.batch_size)->capture_default_str();
  train_cmd->add_option("--negatives", tc.negatives_per_pair)->capture_default_str();
  train_cmd->add_option("--temperature", tc.temperature)->capture_default_str();
  train_cmd->add_option("--lr", tc.learning_rate)->capture_default_str();
  train_cmd->add_option("--seed", tc.seed)->capture_default_str();
  train_cmd->add_option("--dim", tc.dim)->capture_default_str();
  train_cmd->add_option("--max-len", tc.max_len)->capture_default_str();
  train_cmd->add_option("--loss-csv", loss_csv, "loss curve CSV (default: <out>.loss.csv)");

  // mepo
  auto* mepo_cmd = app.add_subcommand("mepo", "symbolic MePo selection for one state");
  CorpusArgs mepo_corpus;
  mepo_corpus.add(mepo_cmd);
  std::string goal;
  std::size_t mepo_k = 32;
  MepoConfig mc;
  mepo_cmd->add_option("--goal", goal, "state index or theorem name")->required();
  mepo_cmd->add_option("--k", mepo_k)->capture_default_str();
  mepo_cmd->add_option("--p", mc.p)->capture_default_str();
  mepo_cmd->add_option("--c", mc.c)->capture_default_str();

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "run the retrieval server");
  CorpusArgs serve_corpus;
  serve_corpus.add(serve_cmd);
  std::string serve_model, serve_addr, cache_dir;
  serve_cmd->add_option("--model", serve_model)->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--addr", serve_addr, std::string("host:port (default: $") + kServerAddrEnv + " or " +
                                                  kDefaultServerAddr + ")");
  serve_cmd->add_option("--cache-dir", cache_dir, "directory for persisted snapshots");

  // client retrieve
  auto* client_cmd = app.add_subcommand("client", "reference client");
  client_cmd->require_subcommand(1);
  auto* retrieve_cmd = client_cmd->add_subcommand("retrieve", "query a running server for one corpus state");
  CorpusArgs client_corpus;
  client_corpus.add(retrieve_cmd);
  std::string client_addr, client_state, new_premises_path, client_selector = "neural";
  std::size_t client_k = 32;
  bool upload = false;
  retrieve_cmd->add_option("--addr", client_addr);
  retrieve_cmd->add_option("--state", client_state, "state index or theorem name")->required();
  retrieve_cmd->add_option("--k", client_k)->capture_default_str();
  retrieve_cmd->add_option("--selector", client_selector)->check(CLI::IsMember({"neural", "mepo"}))->capture_default_str();
  retrieve_cmd->add_option("--new-premises", new_premises_path, "JSONL of {name, signature}")->check(CLI::ExistingFile);
  retrieve_cmd->add_flag("--upload", upload, "upload the corpus snapshot first");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluation reports");
  std::string eval_mode;
  eval_cmd->add_option("mode", eval_mode)->required()->check(CLI::IsMember({"recall", "sweep", "errors", "difficulty"}));
  CorpusArgs eval_corpus;
  eval_corpus.add(eval_cmd);
  std::string eval_model, eval_selector = "neural", eval_out, batch_path, ks_text = "1,8,16,32", k1s_text = "0,1,2,4,8,16,32",
                          k2s_text = "0,8,16,32", sweep_variant = "full";
  std::uint64_t eval_seed = 0;
  std::size_t threads = 1;
  bool micro = false;
  eval_cmd->add_option("--model", eval_model)->check(CLI::ExistingFile);
  eval_cmd->add_option("--selector", eval_selector)->check(CLI::IsMember({"neural", "mepo", "random", "oracle"}))->capture_default_str();
  eval_cmd->add_option("--out", eval_out)->required();
  eval_cmd->add_option("--batch", batch_path, "hammer batch JSONL (sweep, errors, difficulty)")->check(CLI::ExistingFile);
  eval_cmd->add_option("--ks", ks_text)->capture_default_str();
  eval_cmd->add_option("--k1s", k1s_text)->capture_default_str();
  eval_cmd->add_option("--k2s", k2s_text)->capture_default_str();
  eval_cmd->add_option("--variant", sweep_variant)->capture_default_str();
  eval_cmd->add_option("--seed", eval_seed)->capture_default_str();
  eval_cmd->add_option("--threads", threads)->capture_default_str();
  eval_cmd->add_flag("--micro", micro, "micro-average recall");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus and hammer batch");
  SyntheticSpec spec;
  std::string synth_out;
  synth_cmd->add_option("--out-dir", synth_out)->required();
  synth_cmd->add_option("--premises", spec.num_premises)->capture_default_str();
  synth_cmd->add_option("--states", spec.num_states)->capture_default_str();
  synth_cmd->add_option("--seed", spec.seed)->capture_default_str();

  // hammer
  auto* hammer_cmd = app.add_subcommand("hammer", "run a hammer batch with its scripted rankings");
  std::string hammer_batch, hammer_variant, trace_path;
  std::size_t hammer_threads = 1;
  hammer_cmd->add_option("--batch", hammer_batch)->required()->check(CLI::ExistingFile);
  hammer_cmd->add_option("--variant", hammer_variant, "override every task's variant");
  hammer_cmd->add_option("--threads", hammer_threads)->capture_default_str();
  hammer_cmd->add_option("--trace", trace_path, "JSONL trace of the first task");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      tc.validate();
      const Corpus corpus = filter_premises(train_corpus.load());
      const TrainResult result = train(corpus, tc);
      save_checkpoint(result.model, train_out);
      const std::string csv_path = loss_csv.empty() ? train_out + ".loss.csv" : loss_csv;
      std::ofstream csv(csv_path);
      if (!csv) throw Error(ErrorCode::io_error, "cannot write " + csv_path);
      write_loss_csv(result.curve, csv);
      std::cout << json{{"checkpoint", train_out},
                        {"loss_csv", csv_path},
                        {"model_version", result.model.version()},
                        {"first_loss", result.curve.empty() ? 0.0 : result.curve.front().loss},
                        {"last_loss", result.curve.empty() ? 0.0 : result.curve.back().loss},
                        {"short_negative_draws", result.short_negative_draws}}
                       .dump(2)
                << '\n';
    } else if (*mepo_cmd) {
      mc.validate();
      const Corpus corpus = filter_premises(mepo_corpus.load());
      const std::size_t s = resolve_state(corpus, goal);
      std::vector<NamedSymbols> pool;
      for (const auto& name : corpus.accessible_premises(corpus.states()[s]))
        pool.emplace_back(name, premise_symbols(*corpus.find_premise(name)));
      const auto sel = mepo_select(extract_symbols(corpus.states()[s].state_text), pool, mc);
      std::cout << json{{"state", s},
                        {"rounds", sel.rounds},
                        {"thresholds", sel.thresholds},
                        {"selected", sel.names.size()},
                        {"ranked", ranked_json(mepo_last_k(sel, mepo_k))}}
                       .dump(2)
                << '\n';
    } else if (*serve_cmd) {
      PremiseService::Options opts;
      if (!cache_dir.empty()) opts.cache_dir = cache_dir;
      PremiseService service(load_checkpoint(serve_model), opts);
      const std::string id = service.warm_cache(serve_corpus.load());
      const auto [host, port] = parse_address(resolve_address(serve_addr));
      HttpServer server(service);
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "serving snapshot " << id << " on " << host << ':' << bound << std::endl;
      server.run();
      g_server = nullptr;
    } else if (*retrieve_cmd) {
      const Corpus corpus = client_corpus.load();
      const auto [host, port] = parse_address(resolve_address(client_addr));
      RetrieveClient client(host, port);
      if (upload) client.upload_snapshot(to_jsonl(corpus));
      const auto& state = corpus.states()[resolve_state(corpus, client_state)];
      RetrieveRequest req;
      req.state = state.state_text;
      req.k = client_k;
      req.module = state.module;
      req.decl_index = state.decl_index;
      req.corpus_snapshot_id = corpus.snapshot_id();
      req.selector = client_selector == "mepo" ? SelectorKind::mepo : SelectorKind::neural;
      if (!new_premises_path.empty()) {
        std::ifstream in(new_premises_path);
        for (std::string line; std::getline(in, line);) {
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          const auto j = json::parse(line);
          req.new_premises.push_back({j.at("name").get<std::string>(), j.at("signature").get<std::string>()});
        }
      }
      std::cout << to_json(client.retrieve(req)).dump(2) << '\n';
    } else if (*eval_cmd) {
      const Corpus corpus = filter_premises(eval_corpus.load());
      std::optional<Encoder> model;
      if (!eval_model.empty()) model = load_checkpoint(eval_model);
      const StateSelector selector = make_selector(eval_selector, corpus, model ? &*model : nullptr, eval_seed);
      std::filesystem::create_directories(eval_out);
      json config = {{"mode", eval_mode}, {"corpus", eval_corpus.path}, {"selector", eval_selector}, {"seed", eval_seed}};
      if (model) {
        config["model_version"] = model->version();
        config["truncated_states"] = count_truncated_states(model->tokenizer(), corpus);
      }

      if (eval_mode == "recall") {
        const auto ks = parse_list(ks_text);
        const auto r = recall_at_k(selector, corpus, ks, {micro, std::nullopt});
        EvalReport report;
        report.recall_at_k = r.recall;
        config["evaluated_states"] = r.evaluated_states;
        config["skipped_zero_positive"] = r.skipped_zero_positive;
        config["average"] = micro ? "micro" : "macro";
        report.config = config;
        write_report(report, eval_out);
        std::cout << to_json(report).dump(2) << '\n';
        return 0;
      }

      if (batch_path.empty()) throw Error(ErrorCode::malformed_request, "--batch is required for " + eval_mode);
      const HammerBatch batch = load_hammer_batch(batch_path);
      auto shared = std::make_shared<const Corpus>(corpus);
      const Selector hs = hammer_selector(selector, shared);
      const auto table = batch.table;
      const BackendFactory backends = [table] { return mock_backend(table); };
      config["batch"] = batch_path;

      if (eval_mode == "sweep") {
        const auto k1s = parse_list(k1s_text), k2s = parse_list(k2s_text);
        const auto grid = sweep_k(batch.tasks, hs, backends, batch.rules, k1s, k2s, parse_variant(sweep_variant), threads);
        std::ofstream csv(std::filesystem::path(eval_out) / "sweep.csv");
        write_sweep_csv(grid, csv);
        write_sweep_csv(grid, std::cout);
        return 0;
      }

      EvalReport report = evaluate_proofs(batch.tasks, hs, backends, batch.rules, shared.get(), threads);
      report.config = config;
      write_report(report, eval_out);
      if (eval_mode == "errors") {
        std::vector<ProofOutcome> full = run_batch(batch.tasks, hs, backends, batch.rules, threads);
        const auto fractions = error_report(full);
        std::ofstream csv(std::filesystem::path(eval_out) / "errors.csv");
        csv << "category,fraction\n";
        for (const auto& [k, v] : fractions) csv << k << ',' << v << '\n';
        std::cout << json(fractions).dump(2) << '\n';
      } else {
        const auto hist = difficulty_report(report.per_theorem);
        std::ofstream csv(std::filesystem::path(eval_out) / "difficulty.csv");
        write_histogram_csv(hist, csv);
        write_histogram_csv(hist, std::cout);
      }
    } else if (*synth_cmd) {
      const SyntheticData data = generate_synthetic(spec);
      std::filesystem::create_directories(synth_out);
      write_corpus(data.corpus, std::filesystem::path(synth_out) / "corpus.jsonl");
      std::ofstream batch(std::filesystem::path(synth_out) / "hammer.jsonl");
      batch << to_jsonl(data.batch);
      std::cout << json{{"snapshot_id", data.corpus.snapshot_id()},
                        {"premises", data.corpus.premises().size()},
                        {"states", data.corpus.states().size()},
                        {"tasks", data.batch.tasks.size()}}
                       .dump(2)
                << '\n';
    } else if (*hammer_cmd) {
      HammerBatch batch = load_hammer_batch(hammer_batch);
      if (!hammer_variant.empty())
        for (auto& t : batch.tasks) t.variant = parse_variant(hammer_variant);
      const auto table = batch.table;
      const BackendFactory backends = [table] { return mock_backend(table); };
      if (!trace_path.empty() && !batch.tasks.empty()) {
        Trace trace;
        auto backend = backends();
        run_task(batch.tasks.front(), scripted_selector(), *backend, batch.rules, &trace);
        std::ofstream out(trace_path);
        write_trace_jsonl(trace, out);
      }
      const auto outcomes = run_batch(batch.tasks, scripted_selector(), backends, batch.rules, hammer_threads);
      json rows = json::array();
      for (const auto& o : outcomes)
        rows.push_back({{"task", o.task_id},
                        {"proved", o.proved},
                        {"premises_used", o.premises_used},
                        {"failure_category", to_string(o.failure_category)},
                        {"steps", o.steps}});
      std::cout << json{{"outcomes", rows}, {"errors", error_report(outcomes)}}.dump(2) << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
