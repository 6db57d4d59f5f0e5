#include <algorithm>
#include <cstdio>
#include <random>
#include <set>

#include "premise/eval.hpp"

namespace premise {

namespace {

std::string padded(std::size_t v, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, v);
  return buf;
}

template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t n, std::mt19937_64& rng) {
  n = std::min(n, pool.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(n);
  return pool;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_premises == 0 || spec.num_modules == 0 || spec.symbols_per_premise == 0)
    throw Error(ErrorCode::empty_corpus, "synthetic corpus needs premises, modules and symbols");
  std::mt19937_64 rng(spec.seed);

  std::vector<std::string> pool;
  for (std::size_t i = 0; i < 2 * spec.num_premises; ++i)
    pool.push_back("Op" + padded(i, 4));
  std::uniform_int_distribution<std::size_t> any_symbol(0, pool.size() - 1);

  ModuleGraph modules;
  std::vector<std::string> module_names;
  for (std::size_t m = 0; m < spec.num_modules; ++m) {
    module_names.push_back("Syn.M" + padded(m, 2));
    modules[module_names.back()] = m == 0 ? std::vector<std::string>{} : std::vector<std::string>{module_names[m - 1]};
  }

  std::vector<PremiseRecord> premises;
  std::map<std::string, std::vector<std::string>> symbols_of;
  std::vector<std::size_t> per_module(spec.num_modules, 0);
  for (std::size_t i = 0; i < spec.num_premises; ++i) {
    const std::size_t m = i * spec.num_modules / spec.num_premises;
    PremiseRecord p;
    p.module = module_names[m];
    p.decl_index = static_cast<std::int64_t>(per_module[m]++);
    p.name = p.module + ".thm" + padded(i, 4);
    p.kind = i % 5 == 4 ? PremiseKind::definition : PremiseKind::theorem;
    std::set<std::size_t> picks;
    while (picks.size() < spec.symbols_per_premise) picks.insert(any_symbol(rng));
    std::vector<std::string> syms;
    for (std::size_t s : picks) syms.push_back(pool[s]);
    std::shuffle(syms.begin(), syms.end(), rng);
    std::string sig = std::string(p.kind == PremiseKind::theorem ? "theorem " : "def ") + p.name + " : Rel";
    for (const auto& sym : syms) sig += " " + sym;
    p.signature = std::move(sig);
    symbols_of[p.name] = std::move(syms);
    premises.push_back(std::move(p));
  }

  const Corpus premises_only(premises, {}, modules, {});
  const std::size_t num_theorems = spec.num_states / 2;
  const std::size_t first_module = std::min(spec.num_modules - 1, spec.num_modules * 3 / 10);
  std::uniform_int_distribution<std::size_t> theorem_module(first_module, spec.num_modules - 1);
  std::poisson_distribution<int> extra_positives(std::max(0.0, spec.mean_positives - 1.0));
  std::bernoulli_distribution keep_symbol(0.5);

  struct Planted {
    std::string name;
    std::string module;
    std::int64_t decl_index;
    std::vector<std::string> positives;  // sampled order
  };
  std::vector<Planted> theorems;
  std::vector<StateRecord> states;
  for (std::size_t t = 0; t < num_theorems; ++t) {
    Planted th;
    const std::size_t m = theorem_module(rng);
    th.module = module_names[m];
    std::uniform_int_distribution<std::int64_t> decl(0, static_cast<std::int64_t>(per_module[m]));
    th.decl_index = decl(rng);
    th.name = th.module + ".goal" + padded(t, 4);
    const auto accessible = premises_only.accessible_premises(th.module, th.decl_index);
    const std::size_t want = std::clamp<std::size_t>(1 + static_cast<std::size_t>(extra_positives(rng)), 1,
                                                     std::min<std::size_t>(40, accessible.size()));
    th.positives = sample_without_replacement(accessible, want, rng);
    std::poisson_distribution<int> lines_dist(static_cast<double>(want) / 2.0);
    const int proof_lines = 1 + lines_dist(rng);

    for (std::int64_t tactic = 0; tactic < 2; ++tactic) {
      std::vector<std::string> shown;
      for (const auto& name : th.positives) {
        const auto& syms = symbols_of[name];
        std::vector<std::string> kept;
        for (const auto& s : syms)
          if (keep_symbol(rng)) kept.push_back(s);
        if (kept.empty()) kept.push_back(syms[std::uniform_int_distribution<std::size_t>(0, syms.size() - 1)(rng)]);
        shown.insert(shown.end(), kept.begin(), kept.end());
      }
      for (std::size_t n = 0; n < spec.noise_symbols; ++n) shown.push_back(pool[any_symbol(rng)]);
      std::shuffle(shown.begin(), shown.end(), rng);
      const std::size_t split = shown.size() / 3;
      std::string text = "h : Rel";
      for (std::size_t j = 0; j < split; ++j) text += " " + shown[j];
      text += "\n⊢ Rel";
      for (std::size_t j = split; j < shown.size(); ++j) text += " " + shown[j];

      StateRecord s;
      s.state_text = std::move(text);
      s.theorem_name = th.name;
      s.tactic_index = tactic;
      s.positive_premises = th.positives;
      std::sort(s.positive_premises.begin(), s.positive_premises.end());
      s.module = th.module;
      s.decl_index = th.decl_index;
      s.proof_lines = proof_lines;
      states.push_back(std::move(s));
    }
    theorems.push_back(std::move(th));
  }

  SyntheticData data{Corpus(std::move(premises), std::move(states), std::move(modules), {}), {}, {}};

  // One proof task per theorem. The task kind cycles through failure and
  // solvability patterns so every variant and failure category shows up.
  auto table = std::make_shared<EntailmentTable>();
  std::set<std::string> rule_premises;
  for (std::size_t t = 0; t < theorems.size(); ++t) {
    const Planted& th = theorems[t];
    ProofTask task;
    task.id = th.name;
    task.state_index = 2 * t;
    task.state_text = data.corpus.states()[2 * t].state_text;
    task.accessible = data.corpus.accessible_premises(th.module, th.decl_index);

    const std::size_t core_size = std::min<std::size_t>(th.positives.size(), 2 + t % 2);
    std::vector<std::string> core(th.positives.begin(), th.positives.begin() + static_cast<std::ptrdiff_t>(core_size));
    std::sort(core.begin(), core.end());
    const std::string g = "g" + padded(t, 4);

    std::size_t kind = t % 10;
    if ((kind == 2 || kind == 3) && (core.size() < 2 || rule_premises.contains(th.positives[0]))) kind = 5;
    switch (kind) {
      case 0:
        task.goal = Formula::make_atom(g);
        (*table)[g] = {{core}, true, false};
        break;
      case 1:
        task.goal = Formula::make_atom(g);
        (*table)[g] = {{core}, false, true};
        break;
      case 2: {
        // Closed by one premise application.
        task.goal = Formula::make_atom(g);
        data.batch.rules[th.positives[0]] = {th.positives[0], {}, g};
        rule_premises.insert(th.positives[0]);
        core = {th.positives[0]};
        break;
      }
      case 3: {
        // Premise application whose hypothesis needs the prover.
        const std::string h = "h" + padded(t, 4);
        task.goal = Formula::make_atom(g);
        data.batch.rules[th.positives[0]] = {th.positives[0], {Formula::make_atom(h)}, g};
        rule_premises.insert(th.positives[0]);
        std::vector<std::string> rest(th.positives.begin() + 1,
                                      th.positives.begin() + static_cast<std::ptrdiff_t>(std::max<std::size_t>(2, core_size)));
        std::sort(rest.begin(), rest.end());
        (*table)[h] = {{rest}, false, false};
        core = rest;
        core.push_back(th.positives[0]);
        std::sort(core.begin(), core.end());
        break;
      }
      case 4: {
        // Conjunction: split by the built-in rules, each half by the prover.
        const std::string a = g + "a", b = g + "b";
        task.goal = Formula::make(Formula::Kind::conj, Formula::make_atom(a), Formula::make_atom(b));
        (*table)[a] = {{{core.front()}}, false, false};
        (*table)[b] = {{{core.back()}}, false, false};
        break;
      }
      default:
        task.goal = Formula::make_atom(g);
        (*table)[g] = {{core}, false, false};
        break;
    }
    data.planted_core[task.id] = core;
    data.batch.tasks.push_back(std::move(task));
  }
  data.batch.table = std::move(table);
  return data;
}

}  // namespace premise
