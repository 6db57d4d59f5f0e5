// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "premise/eval.hpp"
#include "premise/http_server.hpp"
#include "premise/service.hpp"
#include "premise/snapshot_io.hpp"
#include "support.hpp"

using namespace premise;
using namespace premise::testing;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

int failures = 0;

void criterion(const std::string& name, const std::function<void(Verdict&)>& body) {
  Verdict v;
  try {
    body(v);
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail << "[exception: " << e.what() << "]";
  }
  if (!v.pass) ++failures;
  std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail.str() << std::endl;
}

std::string fmt(double x, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << x;
  return s.str();
}

// Training corpus and model shared by the efficacy and server checks.
SyntheticData& training_data() {
  static SyntheticData data = [] {
    SyntheticSpec spec;
    spec.num_premises = 200;
    spec.num_states = 400;
    spec.seed = 1;
    return generate_synthetic(spec);
  }();
  return data;
}

std::optional<Encoder> trained_model;

void gradients(Verdict& v) {
  const auto t0 = Clock::now();
  std::size_t instances = 0, checked = 0, failed = 0;
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const auto inst = tiny_instance(seed, 8, 2, 1);
    const auto fd = finite_difference_check(inst.model, inst.batch, 0.05, 1e-3, 1e-6);
    ++instances;
    checked += fd.checked;
    failed += fd.failures;
    worst = std::max(worst, fd.worst_excess);
  }
  const double secs = seconds_since(t0);
  v.expect(failed == 0, std::to_string(failed) + " parameters outside tolerance, worst excess " + fmt(worst));
  v.expect(secs < 10, "runtime " + fmt(secs) + " s");
  v.detail << instances << " instances, " << checked << " parameters within 1e-3 rel / 1e-6 abs, " << fmt(secs, 3)
           << " s";
}

void masking(Verdict& v) {
  SyntheticSpec spec;
  spec.num_premises = 120;
  spec.num_states = 160;
  spec.num_modules = 6;
  spec.seed = 5;
  const auto data = generate_synthetic(spec);
  const TrainingSet set(data.corpus);
  TrainConfig cfg;
  cfg.batch_size = 12;
  cfg.negatives_per_pair = 3;
  cfg.dim = 8;
  const Encoder model = initial_model(data.corpus, cfg);
  std::map<std::string, std::string> sig;
  for (const auto& p : data.corpus.premises()) sig[p.name] = p.signature;
  std::mt19937_64 rng(17);
  std::size_t leaks = 0, mask_mismatch = 0, loss_checked = 0;
  double worst_rel = 0;
  for (int b = 0; b < 1000; ++b) {
    const auto batch = set.sample(cfg, rng);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto names = batch.negative_names(i);
      const auto& pos = batch.examples[i].positive_set;
      for (const auto& n : names)
        if (std::binary_search(pos.begin(), pos.end(), n)) ++leaks;
      if (std::set<std::string>(names.begin(), names.end()) != naive_negative_set(batch, i)) ++mask_mismatch;
    }
    if (b % 10 == 0) {
      const double fast = masked_contrastive_loss(model, batch, cfg.temperature).loss;
      const double slow = naive_masked_loss(model, batch, cfg.temperature, sig);
      worst_rel = std::max(worst_rel, std::abs(fast - slow) / std::max(1.0, std::abs(slow)));
      ++loss_checked;
    }
  }
  v.expect(leaks == 0, std::to_string(leaks) + " own positives inside N_i");
  v.expect(mask_mismatch == 0, std::to_string(mask_mismatch) + " masks differ from the set definition");
  v.expect(worst_rel <= 1e-9, "loss differs from reference by " + fmt(worst_rel));
  v.detail << "1000 batches, 0 leaks, " << loss_checked << " losses vs reference, max rel diff " << fmt(worst_rel, 3);
}

Corpus word_corpus(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> word(0, 59);
  std::vector<PremiseRecord> ps;
  for (std::size_t i = 0; i < n; ++i) {
    PremiseRecord p;
    p.name = "Q" + std::to_string(i);
    p.signature = "theorem " + p.name + " :";
    for (int j = 0; j < 5; ++j) p.signature += " w" + std::to_string(word(rng));
    p.module = "M";
    p.decl_index = static_cast<std::int64_t>(i);
    ps.push_back(p);
  }
  return Corpus(ps, {}, {{"M", {}}}, {});
}

Encoder word_model(const Corpus& corpus, std::uint64_t seed) {
  std::vector<std::string> texts;
  for (int i = 0; i < 60; ++i) texts.push_back("w" + std::to_string(i));
  for (const auto& p : corpus.premises()) texts.push_back(p.signature);
  return Encoder::random(Tokenizer::build(texts), 16, seed);
}

void retrieval(Verdict& v) {
  const Corpus corpus = word_corpus(500, 21);
  const Encoder model = word_model(corpus, 22);
  const auto snap = build_snapshot(model, corpus);
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  for (const auto& p : corpus.premises()) rows.emplace_back(p.name, naive_encode(model, p.signature));
  std::mt19937_64 rng(23);
  std::size_t compared = 0, name_mismatch = 0;
  double worst = 0;
  for (int q = 0; q < 50; ++q) {
    std::string text;
    for (int j = 0; j < 3; ++j) text += " w" + std::to_string(rng() % 60);
    const auto query = model.encode(text);
    const auto qv = naive_encode(model, text);
    for (std::size_t k : {1u, 16u, 32u}) {
      const auto got = select_premises(query, k, std::nullopt, snap).ranked;
      const auto want = brute_force_topk(qv, rows, k);
      if (got.size() != want.size()) {
        ++name_mismatch;
        continue;
      }
      for (std::size_t i = 0; i < got.size(); ++i) {
        if (got[i].name != want[i].name) ++name_mismatch;
        worst = std::max(worst, std::abs(got[i].score - want[i].score));
      }
      ++compared;
    }
  }
  v.expect(name_mismatch == 0, std::to_string(name_mismatch) + " rank positions differ");
  v.expect(worst <= 1e-9, "score diff " + fmt(worst));
  v.detail << compared << " rankings (50 queries x k in {1,16,32}) identical to full sort, max score diff "
           << fmt(worst, 3);
}

void cache_delta(Verdict& v) {
  const Corpus full = word_corpus(550, 31);
  const Encoder model = word_model(full, 32);
  std::vector<PremiseRecord> base_ps(full.premises().begin(), full.premises().begin() + 500);
  std::vector<NewPremise> uploads;
  for (auto it = full.premises().begin() + 500; it != full.premises().end(); ++it) uploads.push_back({it->name, it->signature});
  const Corpus base(base_ps, {}, {{"M", {}}}, {});

  PremiseService service(model);
  const auto id = service.warm_cache(base);
  const auto after_warm = service.counters();
  const auto rebuilt = build_snapshot(model, full);

  std::mt19937_64 rng(33);
  std::size_t mismatches = 0;
  std::size_t requests = 0;
  for (int q = 0; q < 20; ++q) {
    RetrieveRequest req;
    for (int j = 0; j < 3; ++j) req.state += " w" + std::to_string(rng() % 60);
    req.corpus_snapshot_id = id;
    req.new_premises = uploads;
    for (std::size_t k : {1u, 16u, 32u}) {
      req.k = k;
      const auto got = service.handle_retrieve(req).ranked;
      ++requests;
      const auto want = select_premises(model.encode(req.state), k, std::nullopt, rebuilt).ranked;
      if (got != want) ++mismatches;
    }
  }
  const auto end = service.counters();
  service.warm_cache(base);
  const auto rewarm = service.counters();
  v.expect(mismatches == 0, std::to_string(mismatches) + " overlay rankings differ from the rebuild");
  v.expect(after_warm.premise_embeds == 500 && after_warm.snapshot_builds == 1, "warm embed count");
  v.expect(end.premise_embeds == 550, "premise embeds " + std::to_string(end.premise_embeds) + " != 550");
  v.expect(end.upload_cache_hits == 50 * (requests - 1), "upload cache hits " + std::to_string(end.upload_cache_hits));
  v.expect(rewarm.premise_embeds == end.premise_embeds && rewarm.snapshot_builds == 1, "re-warm embedded again");
  v.detail << requests << " overlay queries identical to rebuild; premise embeds 500 base + 50 uploads, "
           << end.upload_cache_hits << " cache hits, re-warm embeds 0";
}

void training(Verdict& v) {
  const auto& data = training_data();
  TrainConfig cfg;
  cfg.steps = 2000;
  cfg.learning_rate = 0.2;
  cfg.seed = 1;
  const auto t0 = Clock::now();
  auto result = train(data.corpus, cfg);
  const double secs = seconds_since(t0);
  trained_model = result.model;
  const double first = result.curve.front().loss;
  double tail = 0;
  for (std::size_t i = result.curve.size() - 50; i < result.curve.size(); ++i) tail += result.curve[i].loss;
  tail /= 50;
  const std::vector<std::size_t> ks = {16};
  const double neural = recall_at_k(neural_selector(result.model, data.corpus), data.corpus, ks).recall.at(16);
  const double random = recall_at_k(random_selector(1), data.corpus, ks).recall.at(16);
  v.expect(neural >= random + 0.3, "recall@16 gap " + fmt(neural - random));
  v.expect(tail <= 0.5 * first, "final/initial loss " + fmt(tail / first));
  v.expect(secs < 300, "runtime " + fmt(secs) + " s");
  v.detail << "recall@16 " << fmt(neural) << " vs random " << fmt(random) << "; loss " << fmt(first) << " -> "
           << fmt(tail) << " (last-50 mean, ratio " << fmt(tail / first, 3) << "); " << fmt(secs, 3) << " s";
}

void mepo(Verdict& v) {
  const MepoConfig defaults;
  std::size_t fixtures = 0;
  auto one_round = [&](const SymbolSet& goal, const std::vector<NamedSymbols>& premises, const std::string& what) {
    const auto sel = mepo_select(goal, premises, defaults);
    ++fixtures;
    v.expect(sel.rounds == 1, what + " ran " + std::to_string(sel.rounds) + " rounds");
  };

  std::vector<NamedSymbols> chain;
  for (auto& [name, syms] : symbol_chain(20)) chain.emplace_back(name, syms);
  one_round({"S0"}, chain, "chain");

  LoadOptions opts;
  opts.blacklist = read_names_file(fixture("opens_blacklist.txt"));
  for (const Corpus& c : {filter_premises(load_corpus(fixture("opens_example.jsonl"), opts)),
                          load_corpus(fixture("gcd_example.jsonl")), training_data().corpus}) {
    for (const auto& s : c.states()) {
      std::vector<NamedSymbols> premises;
      for (const auto& n : c.accessible_premises(s)) premises.emplace_back(n, premise_symbols(*c.find_premise(n)));
      one_round(extract_symbols(s.state_text), premises, "state of " + s.theorem_name);
    }
  }

  MepoConfig slow;
  slow.p = 0.2;
  slow.c = 6;
  const auto sel = mepo_select({"S0"}, chain, slow);
  v.expect(sel.names == std::vector<std::string>{"P01", "P02", "P03"}, "chain acceptance order");
  v.detail << "1 round on " << fixtures << " fixtures at p=0.6 c=0.9; chain golden P01,P02,P03 at p=0.2 c=6";
}

void orchestrator(Verdict& v) {
  const auto batch = load_hammer_batch(fixture("gcd_hammer.jsonl"));
  const ProofTask& task = batch.tasks.at(0);
  MockBackend backend(batch.table);
  Trace trace;
  const auto out = run_task(task, scripted_selector(), backend, batch.rules, &trace);
  v.expect(out.proved && out.premises_used.size() == 7, "worked example not proved with 7 premises");

  std::map<std::string, std::vector<std::string>> cores;
  std::vector<std::vector<std::string>> reconstructed;
  std::size_t translated_sizes_ok = 0, translations = 0;
  for (const auto& c : backend.calls()) {
    if (c.kind == MockBackend::Call::Kind::translate) {
      ++translations;
      translated_sizes_ok += c.premises.size() == task.k1 ? 1 : 0;
    }
  }
  for (const auto& e : trace) {
    if (e.kind == "prove" && e.ok) cores[e.goal] = e.premises;
    if (e.kind == "reconstruct") {
      reconstructed.push_back(e.premises);
      v.expect(cores.contains(e.goal) && cores[e.goal] == e.premises, "reconstruction input differs from core");
      v.expect(e.premises.size() < task.k1, "reconstruction received the full premise list");
    }
  }
  v.expect(translations > 0 && translated_sizes_ok == translations, "prover problems are not top-k1");
  v.expect(!reconstructed.empty() && reconstructed.front().size() == 2, "first reconstruction is not a 2-premise core");

  // Where a goal admits both a premise application and a prover call, the
  // application is expanded first.
  std::map<std::string, std::size_t> first_app, first_prover;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace[i].kind == "premise_application") first_app.try_emplace(trace[i].goal, i);
    if (trace[i].kind == "translate") first_prover.try_emplace(trace[i].goal, i);
  }
  std::size_t both = 0;
  for (const auto& [goal, i] : first_app) {
    if (!first_prover.contains(goal)) continue;
    ++both;
    v.expect(i < first_prover[goal], "prover ran before premise application on " + goal);
  }
  v.expect(both > 0, "no goal with both expansions");
  v.detail << "reconstruction got cores of sizes ";
  for (const auto& r : reconstructed) v.detail << r.size() << ' ';
  v.detail << "(prover saw " << task.k1 << "); premise application first on " << both << " shared goal(s)";
}

void variants(Verdict& v) {
  SyntheticSpec spec;
  spec.num_premises = 200;
  spec.num_states = 100;
  spec.seed = 2;
  const auto data = generate_synthetic(spec);
  const auto corpus = std::make_shared<const Corpus>(data.corpus);
  const auto selector = hammer_selector(oracle_selector(), corpus);
  const BackendFactory factory = [&] { return mock_backend(data.batch.table); };
  const auto report = evaluate_proofs(data.batch.tasks, selector, factory, data.batch.rules, corpus.get());
  v.expect(report.task_count == 50, "batch has " + std::to_string(report.task_count) + " tasks");
  std::size_t violations = 0;
  for (const auto& row : report.per_theorem)
    for (Variant var : kBaseVariants)
      if (row.proved.at(var) && !row.proved.at(Variant::cumul)) ++violations;
  v.expect(violations == 0, std::to_string(violations) + " tasks proved by a variant but not cumul");

  // Separating fixtures: a rule-only goal and a prover-only goal.
  const EntailmentTable table = {{"prover_goal", {{{"a"}}, false, false}}};
  const RuleBook rules = {{"r", {"r", {}, "rule_goal"}}};
  auto proved = [&](const std::string& goal, Variant var) {
    ProofTask t;
    t.id = goal;
    t.goal = Formula::make_atom(goal);
    t.accessible = t.ranking = {"a", "r"};
    t.variant = var;
    MockBackend b(std::make_shared<const EntailmentTable>(table));
    return run_task(t, scripted_selector(), b, rules).proved;
  };
  v.expect(proved("rule_goal", Variant::aesop) && !proved("rule_goal", Variant::auto_), "aesop-only fixture");
  v.expect(proved("prover_goal", Variant::auto_) && !proved("prover_goal", Variant::aesop), "auto-only fixture");
  v.detail << "50 tasks, cumul superset of every variant (rates:";
  for (const auto& [var, rate] : report.proof_rate) v.detail << ' ' << to_string(var) << '=' << fmt(rate, 3);
  v.detail << "); aesop-only and auto-only fixtures separate";
}

void taxonomy(Verdict& v) {
  // Planted batch: 4 untranslatable, 6 out of prover reach, 3 poisoned, 7 solvable.
  auto table = std::make_shared<EntailmentTable>();
  std::vector<ProofTask> tasks;
  std::vector<std::string> ranking;
  for (int i = 0; i < 40; ++i) ranking.push_back("x" + std::to_string(i));
  auto plant = [&](int count, const std::string& tag, EntailmentEntry entry) {
    for (int i = 0; i < count; ++i) {
      const std::string g = tag + std::to_string(i);
      (*table)[g] = entry;
      ProofTask t;
      t.id = g;
      t.goal = Formula::make_atom(g);
      t.accessible = t.ranking = ranking;
      t.variant = Variant::full;
      tasks.push_back(t);
    }
  };
  plant(4, "untranslatable", {{{"x1"}}, true, false});
  plant(6, "deep", {{{"x1", "x30"}}, false, false});
  plant(3, "poison", {{{"x2"}}, false, true});
  plant(7, "ok", {{{"x3", "x4"}}, false, false});
  const BackendFactory factory = [&] { return mock_backend(table); };
  const auto rep = error_report(run_batch(tasks, scripted_selector(), factory, {}));
  const std::map<std::string, double> want = {{"translation_failure", 0.2}, {"prover_failure", 0.3},
                                              {"reconstruction_failure", 0.15}, {"other_error", 0.0},
                                              {"proved", 0.35}};
  for (const auto& [k, f] : want) v.expect(std::abs(rep.at(k) - f) < 1e-12, k + " = " + fmt(rep.at(k)));

  // Synthetic batch plants one in ten of each pipeline failure.
  SyntheticSpec spec;
  spec.seed = 4;
  const auto data = generate_synthetic(spec);
  const auto corpus = std::make_shared<const Corpus>(data.corpus);
  const BackendFactory synth = [&] { return mock_backend(data.batch.table); };
  const auto srep = error_report(
      run_batch(data.batch.tasks, hammer_selector(oracle_selector(), corpus), synth, data.batch.rules));
  v.expect(std::abs(srep.at("translation_failure") - 0.1) < 1e-12, "synthetic translation fraction");
  v.expect(std::abs(srep.at("reconstruction_failure") - 0.1) < 1e-12, "synthetic reconstruction fraction");
  v.detail << "planted 0.20/0.30/0.15 translation/prover/reconstruction reproduced exactly; synthetic 200 tasks "
           << fmt(srep.at("translation_failure")) << '/' << fmt(srep.at("reconstruction_failure"))
           << " translation/reconstruction";
}

void server(Verdict& v) {
  // Golden: the worked-example model and corpus, as frozen by the unit tests.
  const Corpus worked = load_corpus(fixture("gcd_example.jsonl"));
  PremiseService golden_service(worked_example_model(worked));
  const auto wid = golden_service.warm_cache(worked);
  const auto& ws = worked.states()[0];
  RetrieveRequest greq;
  greq.state = ws.state_text;
  greq.k = 5;
  greq.module = ws.module;
  greq.decl_index = ws.decl_index;
  greq.corpus_snapshot_id = wid;
  std::ifstream in(golden("retrieve_worked_example.json"));
  const json want = json::parse(in);
  for (int run = 0; run < 2; ++run) {
    const auto [status, body] = golden_service.handle_retrieve_body(to_json(greq).dump());
    v.expect(status == 200, "golden request status " + std::to_string(status));
    const auto got = json::parse(body).at("ranked");
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < got.size(); ++i)
      same = got[i]["name"] == want[i]["name"] &&
             std::abs(got[i]["score"].get<double>() - want[i]["score"].get<double>()) <= 1e-9;
    v.expect(same, "golden response differs on run " + std::to_string(run));
  }

  // Stress and latency on the synthetic corpus over HTTP.
  const auto& data = training_data();
  if (!trained_model) trained_model = initial_model(data.corpus, TrainConfig{});
  PremiseService service(*trained_model);
  HttpServer http(service);
  const int port = http.bind("127.0.0.1", 0);
  std::thread runner([&] { http.run(); });
  while (!http.running()) std::this_thread::sleep_for(std::chrono::milliseconds(2));
  RetrieveClient client("127.0.0.1", port);
  std::string sid;
  try {
    sid = client.upload_snapshot(to_jsonl(data.corpus));
    auto request_for = [&](std::size_t s) {
      const auto& st = data.corpus.states()[s];
      RetrieveRequest r;
      r.state = st.state_text;
      r.k = 16;
      r.module = st.module;
      r.decl_index = st.decl_index;
      r.corpus_snapshot_id = sid;
      return r;
    };
    const auto reference = client.retrieve(request_for(0)).ranked;
    std::vector<std::future<std::vector<ScoredName>>> futures;
    for (int i = 0; i < 32; ++i)
      futures.push_back(std::async(std::launch::async, [&] { return client.retrieve(request_for(0)).ranked; }));
    std::size_t differing = 0;
    for (auto& f : futures)
      if (f.get() != reference) ++differing;
    v.expect(differing == 0, std::to_string(differing) + " of 32 concurrent responses differ");

    std::vector<double> service_ms, round_trip_ms;
    for (std::size_t s = 0; s < data.corpus.states().size(); ++s) {
      const auto t0 = Clock::now();
      const auto r = client.retrieve(request_for(s));
      round_trip_ms.push_back(seconds_since(t0) * 1e3);
      service_ms.push_back(r.timings.total_ms);
    }
    auto median = [](std::vector<double> xs) {
      std::sort(xs.begin(), xs.end());
      return xs[xs.size() / 2];
    };
    const double p50 = median(service_ms), p50_rt = median(round_trip_ms);
    v.expect(p50_rt < 50, "p50 round trip " + fmt(p50_rt) + " ms");
    v.detail << "golden stable over 2 runs; 32 concurrent identical; p50 over " << service_ms.size()
             << " requests: service " << fmt(p50, 3) << " ms, HTTP round trip " << fmt(p50_rt, 3) << " ms";
  } catch (...) {
    http.stop();
    runner.join();
    throw;
  }
  http.stop();
  runner.join();
}

void corpus_fixture(Verdict& v) {
  LoadOptions opts;
  opts.blacklist = read_names_file(fixture("opens_blacklist.txt"));
  const Corpus raw = load_corpus(fixture("opens_example.jsonl"), opts);
  const Corpus again = parse_corpus(to_jsonl(raw), opts);
  v.expect(again.snapshot_id() == raw.snapshot_id() && again.states() == raw.states(), "load round trip");
  const Corpus filtered = filter_premises(raw);
  const std::vector<std::string> expected = {"TopologicalSpace.Opens.mem_sSup", "exists_exists_and_eq_and",
                                             "exists_prop", "funext"};
  std::size_t before = raw.states().at(0).positive_premises.size();
  for (const auto& s : filtered.states()) v.expect(s.positive_premises == expected, "filtered positives");
  const TrainingSet pairs(filtered);
  v.expect(before == 12, "raw positives " + std::to_string(before));
  v.expect(pairs.num_pairs() == 2 * expected.size(), "pairs " + std::to_string(pairs.num_pairs()));
  v.detail << before << " -> " << filtered.states()[0].positive_premises.size() << " positives per state, "
           << pairs.num_pairs() << " training pairs";
}

}  // namespace

int main() {
  criterion("loss gradient correctness", gradients);
  criterion("masking property", masking);
  criterion("retrieval oracle equivalence", retrieval);
  criterion("cache-delta equivalence", cache_delta);
  criterion("training efficacy", training);
  criterion("mepo behavior", mepo);
  criterion("orchestrator data flow", orchestrator);
  criterion("variant lattice", variants);
  criterion("error taxonomy", taxonomy);
  criterion("server contract", server);
  criterion("corpus fixtures", corpus_fixture);
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
