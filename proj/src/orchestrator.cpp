#include "premise/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <deque>
#include <fstream>
#include <ostream>
#include <queue>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "premise/error.hpp"

namespace premise {

using nlohmann::json;

FormulaPtr Formula::make_atom(std::string name) {
  auto f = std::make_shared<Formula>();
  f->kind = Kind::atom;
  f->atom = std::move(name);
  return f;
}

FormulaPtr Formula::make_true() {
  auto f = std::make_shared<Formula>();
  f->kind = Kind::truth;
  return f;
}

FormulaPtr Formula::make(Kind kind, FormulaPtr lhs, FormulaPtr rhs) {
  auto f = std::make_shared<Formula>();
  f->kind = kind;
  f->lhs = std::move(lhs);
  f->rhs = std::move(rhs);
  return f;
}

std::string to_string(const Formula& f) {
  switch (f.kind) {
    case Formula::Kind::atom: return f.atom;
    case Formula::Kind::truth: return "True";
    case Formula::Kind::conj: return "(and " + to_string(*f.lhs) + " " + to_string(*f.rhs) + ")";
    case Formula::Kind::iff: return "(iff " + to_string(*f.lhs) + " " + to_string(*f.rhs) + ")";
    case Formula::Kind::implies: return "(imp " + to_string(*f.lhs) + " " + to_string(*f.rhs) + ")";
  }
  return "?";
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::aesop: return "aesop";
    case Variant::auto_: return "auto";
    case Variant::aesop_auto: return "aesop_auto";
    case Variant::full: return "full";
    case Variant::cumul: return "cumul";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  if (s == "aesop") return Variant::aesop;
  if (s == "auto") return Variant::auto_;
  if (s == "aesop_auto" || s == "aesop+auto") return Variant::aesop_auto;
  if (s == "full") return Variant::full;
  if (s == "cumul") return Variant::cumul;
  throw Error(ErrorCode::schema_violation, "unknown variant '" + std::string(s) + "'");
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::builtin_search: return "builtin_search";
    case Phase::premise_application: return "premise_application";
    case Phase::translation: return "translation";
    case Phase::external_prover: return "external_prover";
    case Phase::reconstruction: return "reconstruction";
  }
  return "?";
}

std::string_view to_string(FailureCategory c) {
  switch (c) {
    case FailureCategory::none: return "none";
    case FailureCategory::translation_failure: return "translation_failure";
    case FailureCategory::prover_failure: return "prover_failure";
    case FailureCategory::reconstruction_failure: return "reconstruction_failure";
    case FailureCategory::other_error: return "other_error";
    case FailureCategory::timeout: return "timeout";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Mock backend

MockBackend::MockBackend(std::shared_ptr<const EntailmentTable> table) : table_(std::move(table)) {}

std::optional<TranslatedProblem> MockBackend::translate(const std::string& goal_id,
                                                        std::span<const std::string> premises) {
  {
    std::lock_guard lock(mu_);
    calls_.push_back({Call::Kind::translate, goal_id, {premises.begin(), premises.end()}});
  }
  auto it = table_->find(goal_id);
  if (it != table_->end() && it->second.untranslatable) return std::nullopt;
  return TranslatedProblem{goal_id, {premises.begin(), premises.end()}};
}

std::optional<std::vector<std::string>> MockBackend::prove(const TranslatedProblem& problem, double) {
  {
    std::lock_guard lock(mu_);
    calls_.push_back({Call::Kind::prove, problem.goal_id, problem.premises});
  }
  auto it = table_->find(problem.goal_id);
  if (it == table_->end()) return std::nullopt;
  const std::set<std::string> given(problem.premises.begin(), problem.premises.end());
  std::optional<std::vector<std::string>> best;
  for (auto subset : it->second.minimal_subsets) {
    std::sort(subset.begin(), subset.end());
    subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
    const bool contained = std::all_of(subset.begin(), subset.end(), [&](const auto& n) { return given.contains(n); });
    if (contained && (!best || subset < *best)) best = std::move(subset);
  }
  return best;
}

std::optional<std::string> MockBackend::reconstruct(const std::string& goal_id, std::span<const std::string> core) {
  {
    std::lock_guard lock(mu_);
    calls_.push_back({Call::Kind::reconstruct, goal_id, {core.begin(), core.end()}});
  }
  auto it = table_->find(goal_id);
  if (it != table_->end() && it->second.reconstruction_poison) return std::nullopt;
  std::string proof = "duper [";
  for (std::size_t i = 0; i < core.size(); ++i) proof += (i ? ", " : "") + core[i];
  return proof + "]";
}

std::vector<MockBackend::Call> MockBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::unique_ptr<ProverBackend> mock_backend(std::shared_ptr<const EntailmentTable> table) {
  return std::make_unique<MockBackend>(std::move(table));
}

void write_trace_jsonl(const Trace& trace, std::ostream& out) {
  for (const auto& e : trace) {
    json j = {{"step", e.step}, {"event", e.kind}, {"goal", e.goal}, {"premises", e.premises},
              {"ok", e.ok},     {"priority", e.priority}};
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Search

namespace {

using Clock = std::chrono::steady_clock;

struct Goal {
  FormulaPtr target;
  std::vector<std::string> hyps;  // canonical strings, sorted

  bool assumed() const { return std::binary_search(hyps.begin(), hyps.end(), to_string(*target)); }
};

struct Node {
  std::vector<Goal> open;
  std::set<std::string> used;
  bool via_prover = false;
  bool via_premise = false;
};

struct Pending {
  std::shared_ptr<const Node> node;
  bool prover = false;
  std::string premise;
  double priority = 0;
  std::uint64_t seq = 0;
};

struct PendingOrder {
  bool operator()(const Pending& a, const Pending& b) const {
    if (a.priority != b.priority) return a.priority < b.priority;
    return a.seq > b.seq;
  }
};

void add_hypothesis(std::vector<std::string>& hyps, const FormulaPtr& h) {
  if (h->kind == Formula::Kind::conj) {
    add_hypothesis(hyps, h->lhs);
    add_hypothesis(hyps, h->rhs);
  }
  auto s = to_string(*h);
  auto pos = std::lower_bound(hyps.begin(), hyps.end(), s);
  if (pos == hyps.end() || *pos != s) hyps.insert(pos, std::move(s));
}

struct ProverResult {
  std::optional<std::vector<std::string>> core;
  FailureCategory failure = FailureCategory::none;
};

class Search {
 public:
  Search(const ProofTask& task, ProverBackend& backend, const RuleBook& rules, Trace* trace,
         std::vector<std::string> ranked)
      : task_(task), backend_(backend), rules_(rules), trace_(trace), start_(Clock::now()) {
    outcome_.task_id = task.id;
    const bool apps = task.variant == Variant::aesop || task.variant == Variant::full;
    const bool prover = task.variant != Variant::aesop;
    if (apps) app_premises_.assign(ranked.begin(), ranked.begin() + std::min(task.k2, ranked.size()));
    if (prover) prover_premises_.assign(ranked.begin(), ranked.begin() + std::min(task.k1, ranked.size()));
    use_apps_ = apps;
    use_prover_ = prover;
  }

  ProofOutcome run() {
    if (task_.variant == Variant::auto_)
      run_auto();
    else
      run_search();
    outcome_.total_ms = elapsed_ms();
    outcome_.steps = steps_;
    return outcome_;
  }

 private:
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(Clock::now() - start_).count();
  }
  bool out_of_budget() const {
    return steps_ >= task_.step_budget || elapsed_ms() >= task_.wall_timeout_s * 1000.0;
  }
  void record(std::string kind, std::string goal, std::vector<std::string> premises, bool ok, double priority) {
    if (trace_ != nullptr) trace_->push_back({steps_, std::move(kind), std::move(goal), std::move(premises), ok, priority});
  }
  void charge(Phase p, Clock::time_point since) {
    outcome_.phase_ms[p] += std::chrono::duration<double, std::milli>(Clock::now() - since).count();
  }

  // Translation, external proof search and reconstruction of one goal.
  ProverResult call_prover(const std::string& goal_id, double priority) {
    if (auto it = memo_.find(goal_id); it != memo_.end()) {
      record("prover_cached", goal_id, it->second.core.value_or(std::vector<std::string>{}), it->second.core.has_value(),
             priority);
      return it->second;
    }
    ProverResult result;
    auto t0 = Clock::now();
    auto problem = backend_.translate(goal_id, prover_premises_);
    charge(Phase::translation, t0);
    record("translate", goal_id, prover_premises_, problem.has_value(), priority);
    if (!problem) {
      result.failure = FailureCategory::translation_failure;
    } else {
      t0 = Clock::now();
      auto core = backend_.prove(*problem, task_.prover_timeout_s);
      charge(Phase::external_prover, t0);
      if (core) {
        // A core may only mention premises that were supplied.
        const std::set<std::string> supplied(problem->premises.begin(), problem->premises.end());
        std::erase_if(*core, [&](const std::string& n) { return !supplied.contains(n); });
      }
      record("prove", goal_id, core.value_or(std::vector<std::string>{}), core.has_value(), priority);
      if (!core) {
        result.failure = FailureCategory::prover_failure;
      } else {
        t0 = Clock::now();
        auto proof = backend_.reconstruct(goal_id, *core);
        charge(Phase::reconstruction, t0);
        record("reconstruct", goal_id, *core, proof.has_value(), priority);
        if (proof)
          result.core = std::move(core);
        else
          result.failure = FailureCategory::reconstruction_failure;
      }
    }
    note_failure(result.failure);
    memo_.emplace(goal_id, result);
    return result;
  }

  void note_failure(FailureCategory f) {
    auto rank = [](FailureCategory c) {
      switch (c) {
        case FailureCategory::translation_failure: return 1;
        case FailureCategory::prover_failure: return 2;
        case FailureCategory::reconstruction_failure: return 3;
        default: return 0;
      }
    };
    if (rank(f) > rank(worst_)) worst_ = f;
  }

  void run_auto() {
    ++steps_;
    const std::string goal_id = to_string(*task_.goal);
    ProverResult r = call_prover(goal_id, 1.0);
    if (r.core) {
      succeed(Node{{}, {r.core->begin(), r.core->end()}, true, false});
    } else {
      fail(false);
    }
  }

  // Applies built-in rules to a fixpoint; the remaining open goals are atoms.
  void normalize(Node& node) {
    const auto t0 = Clock::now();
    std::deque<Goal> work(node.open.begin(), node.open.end());
    std::vector<Goal> open;
    while (!work.empty()) {
      Goal g = std::move(work.front());
      work.pop_front();
      const Formula& f = *g.target;
      if (f.kind == Formula::Kind::truth) {
        ++steps_;
        record("builtin", "True", {"trivial"}, true, 0);
      } else if (g.assumed()) {
        ++steps_;
        record("builtin", to_string(f), {"assumption"}, true, 0);
      } else if (f.kind == Formula::Kind::conj || f.kind == Formula::Kind::iff) {
        ++steps_;
        record("builtin", to_string(f), {f.kind == Formula::Kind::conj ? "And.intro" : "Iff.intro"}, true, 0);
        Goal a{f.lhs, g.hyps}, b{f.rhs, g.hyps};
        if (f.kind == Formula::Kind::iff) {
          a.target = Formula::make(Formula::Kind::implies, f.lhs, f.rhs);
          b.target = Formula::make(Formula::Kind::implies, f.rhs, f.lhs);
        }
        work.push_front(std::move(b));
        work.push_front(std::move(a));
      } else if (f.kind == Formula::Kind::implies) {
        ++steps_;
        record("builtin", to_string(f), {"intro"}, true, 0);
        add_hypothesis(g.hyps, f.lhs);
        g.target = f.rhs;
        work.push_front(std::move(g));
      } else {
        open.push_back(std::move(g));
      }
    }
    node.open = std::move(open);
    charge(Phase::builtin_search, t0);
  }

  void expand(const std::shared_ptr<const Node>& node, double priority) {
    const Goal& g = node->open.front();
    if (use_apps_ && g.target->kind == Formula::Kind::atom) {
      for (const auto& name : app_premises_) {
        auto it = rules_.find(name);
        if (it != rules_.end() && it->second.conclusion == g.target->atom)
          queue_.push({node, false, name, priority * kPremiseApplicationWeight, seq_++});
      }
    }
    if (use_prover_) queue_.push({node, true, {}, priority * kProverWeight, seq_++});
  }

  void run_search() {
    Node root{{Goal{task_.goal, {}}}, {}, false, false};
    normalize(root);
    if (root.open.empty()) return succeed(root);
    expand(std::make_shared<const Node>(std::move(root)), 1.0);

    while (!queue_.empty()) {
      if (out_of_budget()) return fail(true);
      Pending p = queue_.top();
      queue_.pop();
      ++steps_;
      const Goal& g = p.node->open.front();
      const std::string goal_id = to_string(*g.target);
      Node child;
      if (p.prover) {
        ProverResult r = call_prover(goal_id, p.priority);
        if (!r.core) continue;
        child = *p.node;
        child.open.erase(child.open.begin());
        child.used.insert(r.core->begin(), r.core->end());
        child.via_prover = true;
      } else {
        const auto t0 = Clock::now();
        const PremiseRule& rule = rules_.at(p.premise);
        record("premise_application", goal_id, {p.premise}, true, p.priority);
        child = *p.node;
        Goal closed = std::move(child.open.front());
        child.open.erase(child.open.begin());
        std::vector<Goal> subgoals;
        for (const auto& h : rule.hypotheses) subgoals.push_back(Goal{h, closed.hyps});
        child.open.insert(child.open.begin(), subgoals.begin(), subgoals.end());
        child.used.insert(p.premise);
        child.via_premise = true;
        charge(Phase::premise_application, t0);
      }
      normalize(child);
      if (child.open.empty()) {
        if (out_of_budget()) return fail(true);
        return succeed(child);
      }
      expand(std::make_shared<const Node>(std::move(child)), p.priority);
    }
    fail(out_of_budget());
  }

  void succeed(const Node& node) {
    outcome_.proved = true;
    outcome_.failure_category = FailureCategory::none;
    outcome_.premises_used = node.used;
    outcome_.phase = node.via_prover    ? Phase::reconstruction
                     : node.via_premise ? Phase::premise_application
                                        : Phase::builtin_search;
    record("proved", to_string(*task_.goal), {node.used.begin(), node.used.end()}, true, 0);
  }

  void fail(bool budget) {
    outcome_.proved = false;
    if (budget) {
      outcome_.failure_category = FailureCategory::timeout;
      record("timeout", to_string(*task_.goal), {}, false, 0);
    } else if (worst_ != FailureCategory::none) {
      outcome_.failure_category = worst_;
    } else {
      outcome_.failure_category = FailureCategory::other_error;
    }
    switch (outcome_.failure_category) {
      case FailureCategory::translation_failure: outcome_.phase = Phase::translation; break;
      case FailureCategory::prover_failure: outcome_.phase = Phase::external_prover; break;
      case FailureCategory::reconstruction_failure: outcome_.phase = Phase::reconstruction; break;
      default: outcome_.phase = use_apps_ ? Phase::premise_application : Phase::builtin_search; break;
    }
  }

  const ProofTask& task_;
  ProverBackend& backend_;
  const RuleBook& rules_;
  Trace* trace_;
  Clock::time_point start_;
  ProofOutcome outcome_;
  std::vector<std::string> app_premises_;
  std::vector<std::string> prover_premises_;
  bool use_apps_ = false;
  bool use_prover_ = false;
  std::size_t steps_ = 0;
  std::uint64_t seq_ = 0;
  FailureCategory worst_ = FailureCategory::none;
  std::unordered_map<std::string, ProverResult> memo_;
  std::priority_queue<Pending, std::vector<Pending>, PendingOrder> queue_;
};

std::vector<std::string> ranked_for(const ProofTask& task, const Selector& selector) {
  std::size_t k = 0;
  switch (task.variant) {
    case Variant::aesop: k = task.k2; break;
    case Variant::auto_:
    case Variant::aesop_auto: k = task.k1; break;
    default: k = std::max(task.k1, task.k2); break;
  }
  if (k == 0) return {};
  const std::unordered_set<std::string> accessible(task.accessible.begin(), task.accessible.end());
  std::unordered_set<std::string> seen;
  std::vector<std::string> out;
  for (auto& name : selector(task, k)) {
    if (out.size() == k) break;
    if (accessible.contains(name) && seen.insert(name).second) out.push_back(std::move(name));
  }
  return out;
}

}  // namespace

ProofOutcome run_task(const ProofTask& task, const Selector& selector, ProverBackend& backend, const RuleBook& rules,
                      Trace* trace) {
  if (!task.goal) throw Error(ErrorCode::schema_violation, "task '" + task.id + "' has no goal");
  if (task.variant == Variant::cumul) {
    auto suite = run_variant_suite(task, selector, backend, rules);
    return suite.at(Variant::cumul);
  }
  Search search(task, backend, rules, trace, ranked_for(task, selector));
  return search.run();
}

std::map<Variant, ProofOutcome> run_variant_suite(const ProofTask& base, const Selector& selector,
                                                  ProverBackend& backend, const RuleBook& rules,
                                                  const VariantSuiteOptions& options) {
  std::map<Variant, ProofOutcome> out;
  double remaining_s = base.wall_timeout_s;
  ProofOutcome cumul;
  cumul.task_id = base.id;
  for (Variant v : kBaseVariants) {
    ProofTask t = base;
    t.variant = v;
    if (options.shared_wall_clock) t.wall_timeout_s = std::max(0.0, remaining_s);
    ProofOutcome o = run_task(t, selector, backend, rules);
    if (options.shared_wall_clock) remaining_s -= o.total_ms / 1000.0;
    cumul.total_ms += o.total_ms;
    cumul.steps += o.steps;
    for (const auto& [phase, ms] : o.phase_ms) cumul.phase_ms[phase] += ms;
    if (o.proved && !cumul.proved) {
      cumul.proved = true;
      cumul.premises_used = o.premises_used;
      cumul.phase = o.phase;
      cumul.failure_category = FailureCategory::none;
    }
    out.emplace(v, std::move(o));
  }
  if (!cumul.proved) {
    cumul.failure_category = out.at(Variant::full).failure_category;
    cumul.phase = out.at(Variant::full).phase;
  }
  out.emplace(Variant::cumul, std::move(cumul));
  return out;
}

// ---------------------------------------------------------------------------
// Batch files

namespace {

[[noreturn]] void batch_error(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::schema_violation, "line " + std::to_string(line) + ": " + what);
}

FormulaPtr parse_formula(const json& j, std::size_t line) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s.empty()) batch_error(line, "empty atom");
    return s == "True" ? Formula::make_true() : Formula::make_atom(s);
  }
  if (!j.is_object() || j.size() != 1) batch_error(line, "formula must be a string or a one-key object");
  const auto& [key, args] = *j.items().begin();
  Formula::Kind kind;
  if (key == "and")
    kind = Formula::Kind::conj;
  else if (key == "iff")
    kind = Formula::Kind::iff;
  else if (key == "imp")
    kind = Formula::Kind::implies;
  else
    batch_error(line, "unknown connective '" + key + "'");
  if (!args.is_array() || args.size() != 2) batch_error(line, "connective '" + key + "' takes two operands");
  return Formula::make(kind, parse_formula(args[0], line), parse_formula(args[1], line));
}

json formula_json(const Formula& f) {
  switch (f.kind) {
    case Formula::Kind::atom: return f.atom;
    case Formula::Kind::truth: return "True";
    case Formula::Kind::conj: return {{"and", {formula_json(*f.lhs), formula_json(*f.rhs)}}};
    case Formula::Kind::iff: return {{"iff", {formula_json(*f.lhs), formula_json(*f.rhs)}}};
    case Formula::Kind::implies: return {{"imp", {formula_json(*f.lhs), formula_json(*f.rhs)}}};
  }
  return nullptr;
}

std::vector<std::string> string_list(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || j[key].is_null()) return {};
  if (!j[key].is_array()) batch_error(line, std::string(key) + " must be an array");
  std::vector<std::string> out;
  for (const auto& e : j[key]) {
    if (!e.is_string()) batch_error(line, std::string(key) + " must hold strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace

HammerBatch parse_hammer_batch(std::string_view jsonl) {
  HammerBatch batch;
  auto table = std::make_shared<EntailmentTable>();
  std::istringstream in{std::string(jsonl)};
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      batch_error(line, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) batch_error(line, "missing type");
    const auto type = j["type"].get<std::string>();
    try {
      if (type == "rule") {
        PremiseRule r;
        r.premise = j.at("premise").get<std::string>();
        r.conclusion = j.at("conclusion").get<std::string>();
        for (const auto& h : j.value("hypotheses", json::array())) r.hypotheses.push_back(parse_formula(h, line));
        batch.rules[r.premise] = std::move(r);
      } else if (type == "entailment") {
        EntailmentEntry e;
        for (const auto& s : j.value("subsets", json::array())) e.minimal_subsets.push_back(s.get<std::vector<std::string>>());
        e.untranslatable = j.value("untranslatable", false);
        e.reconstruction_poison = j.value("reconstruction_poison", false);
        (*table)[j.at("goal").get<std::string>()] = std::move(e);
      } else if (type == "task") {
        ProofTask t;
        t.id = j.at("id").get<std::string>();
        t.goal = parse_formula(j.at("goal"), line);
        t.accessible = string_list(j, "accessible", line);
        t.ranking = string_list(j, "ranking", line);
        if (j.contains("variant")) t.variant = parse_variant(j["variant"].get<std::string>());
        t.k1 = j.value("k1", t.k1);
        t.k2 = j.value("k2", t.k2);
        t.prover_timeout_s = j.value("prover_timeout_s", t.prover_timeout_s);
        t.wall_timeout_s = j.value("wall_timeout_s", t.wall_timeout_s);
        t.step_budget = j.value("step_budget", t.step_budget);
        if (j.contains("state") && j["state"].is_string()) t.state_text = j["state"].get<std::string>();
        if (j.contains("state_index") && j["state_index"].is_number_unsigned())
          t.state_index = j["state_index"].get<std::size_t>();
        batch.tasks.push_back(std::move(t));
      } else {
        batch_error(line, "unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      batch_error(line, e.what());
    }
  }
  batch.table = std::move(table);
  return batch;
}

HammerBatch load_hammer_batch(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_hammer_batch(buf.str());
}

std::string to_jsonl(const HammerBatch& batch) {
  std::string out;
  for (const auto& [name, r] : batch.rules) {
    json hyps = json::array();
    for (const auto& h : r.hypotheses) hyps.push_back(formula_json(*h));
    out += json{{"type", "rule"}, {"premise", name}, {"hypotheses", hyps}, {"conclusion", r.conclusion}}.dump() + "\n";
  }
  for (const auto& [goal, e] : *batch.table) {
    out += json{{"type", "entailment"},
                {"goal", goal},
                {"subsets", e.minimal_subsets},
                {"untranslatable", e.untranslatable},
                {"reconstruction_poison", e.reconstruction_poison}}
               .dump() +
           "\n";
  }
  for (const auto& t : batch.tasks) {
    json j = {{"type", "task"},
              {"id", t.id},
              {"goal", formula_json(*t.goal)},
              {"accessible", t.accessible},
              {"variant", to_string(t.variant)},
              {"k1", t.k1},
              {"k2", t.k2},
              {"prover_timeout_s", t.prover_timeout_s},
              {"wall_timeout_s", t.wall_timeout_s},
              {"step_budget", t.step_budget}};
    if (!t.ranking.empty()) j["ranking"] = t.ranking;
    if (!t.state_text.empty()) j["state"] = t.state_text;
    if (t.state_index) j["state_index"] = *t.state_index;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<ProofOutcome> run_batch(std::span<const ProofTask> tasks, const Selector& selector,
                                    const BackendFactory& backends, const RuleBook& rules, std::size_t threads) {
  std::vector<ProofOutcome> out(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    auto backend = backends();
    for (std::size_t i = next++; i < tasks.size(); i = next++) out[i] = run_task(tasks[i], selector, *backend, rules);
  };
  threads = std::max<std::size_t>(1, std::min(threads, tasks.size()));
  if (threads == 1) {
    worker();
    return out;
  }
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();
  return out;
}

Selector scripted_selector() {
  return [](const ProofTask& task, std::size_t k) {
    std::vector<std::string> out(task.ranking.begin(), task.ranking.begin() + std::min(k, task.ranking.size()));
    return out;
  };
}

}  // namespace premise
