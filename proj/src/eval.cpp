#include "premise/eval.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <numeric>
#include <random>
#include <thread>
#include <unordered_set>

namespace premise {

using nlohmann::json;

StateSelector neural_selector(const Encoder& model, const Corpus& corpus) {
  auto snapshot = std::make_shared<const IndexSnapshot>(build_snapshot(model, corpus));
  auto encoder = std::make_shared<const Encoder>(model);
  return [snapshot, encoder](const Corpus& c, std::size_t s, std::span<const std::string> accessible, std::size_t k) {
    const Embedding q = encoder->encode(c.states().at(s).state_text);
    const auto result = select_premises(q, k, std::optional<std::span<const std::string>>(accessible), *snapshot);
    std::vector<std::string> names;
    names.reserve(result.ranked.size());
    for (const auto& r : result.ranked) names.push_back(r.name);
    return names;
  };
}

StateSelector mepo_selector(const MepoConfig& config) {
  config.validate();
  return [config](const Corpus& c, std::size_t s, std::span<const std::string> accessible, std::size_t k) {
    std::vector<NamedSymbols> pool;
    pool.reserve(accessible.size());
    for (const auto& name : accessible) {
      const PremiseRecord* p = c.find_premise(name);
      if (p == nullptr) throw Error(ErrorCode::unknown_name, "unknown premise '" + name + "'");
      pool.emplace_back(name, premise_symbols(*p));
    }
    const auto sel = mepo_select(extract_symbols(c.states().at(s).state_text), pool, config);
    std::vector<std::string> names;
    for (const auto& r : mepo_last_k(sel, k)) names.push_back(r.name);
    return names;
  };
}

StateSelector random_selector(std::uint64_t seed) {
  return [seed](const Corpus&, std::size_t s, std::span<const std::string> accessible, std::size_t k) {
    std::vector<std::string> names(accessible.begin(), accessible.end());
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + s);
    std::shuffle(names.begin(), names.end(), rng);
    names.resize(std::min(k, names.size()));
    return names;
  };
}

StateSelector oracle_selector() {
  return [](const Corpus& c, std::size_t s, std::span<const std::string> accessible, std::size_t k) {
    const auto& positives = c.states().at(s).positive_premises;
    std::vector<std::string> names;
    for (const auto& n : accessible)
      if (std::binary_search(positives.begin(), positives.end(), n)) names.push_back(n);
    for (const auto& n : accessible)
      if (!std::binary_search(positives.begin(), positives.end(), n)) names.push_back(n);
    names.resize(std::min(k, names.size()));
    return names;
  };
}

StateSelector make_selector(const std::string& name, const Corpus& corpus, const Encoder* model, std::uint64_t seed) {
  if (name == "neural") {
    if (model == nullptr) throw Error(ErrorCode::malformed_request, "the neural selector needs a model");
    return neural_selector(*model, corpus);
  }
  if (name == "mepo") return mepo_selector();
  if (name == "random") return random_selector(seed);
  if (name == "oracle") return oracle_selector();
  throw Error(ErrorCode::malformed_request, "unknown selector '" + name + "'");
}

Selector hammer_selector(StateSelector selector, std::shared_ptr<const Corpus> corpus) {
  const Selector scripted = scripted_selector();
  return [selector = std::move(selector), corpus = std::move(corpus), scripted](const ProofTask& task, std::size_t k) {
    if (!task.state_index || corpus == nullptr) return scripted(task, k);
    return selector(*corpus, *task.state_index, task.accessible, k);
  };
}

RecallResult recall_at_k(const StateSelector& selector, const Corpus& corpus, std::span<const std::size_t> ks,
                         const RecallOptions& options) {
  std::vector<std::size_t> states;
  if (options.states) {
    states = *options.states;
  } else {
    states.resize(corpus.states().size());
    std::iota(states.begin(), states.end(), 0);
  }
  RecallResult result;
  std::map<std::size_t, double> sum;
  std::map<std::size_t, std::size_t> hits_total;
  std::size_t positives_total = 0;
  for (std::size_t s : states) {
    const auto& state = corpus.states().at(s);
    if (state.positive_premises.empty()) {
      ++result.skipped_zero_positive;
      continue;
    }
    ++result.evaluated_states;
    positives_total += state.positive_premises.size();
    const auto accessible = corpus.accessible_premises(state);
    for (std::size_t k : ks) {
      const auto top = selector(corpus, s, accessible, k);
      std::unordered_set<std::string> seen;
      std::size_t hits = 0;
      for (std::size_t i = 0; i < std::min(k, top.size()); ++i)
        if (seen.insert(top[i]).second &&
            std::binary_search(state.positive_premises.begin(), state.positive_premises.end(), top[i]))
          ++hits;
      sum[k] += static_cast<double>(hits) / static_cast<double>(state.positive_premises.size());
      hits_total[k] += hits;
    }
  }
  for (std::size_t k : ks) {
    if (result.evaluated_states == 0) {
      result.recall[k] = 0;
    } else if (options.micro_average) {
      result.recall[k] = static_cast<double>(hits_total[k]) / static_cast<double>(positives_total);
    } else {
      result.recall[k] = sum[k] / static_cast<double>(result.evaluated_states);
    }
  }
  return result;
}

std::size_t count_truncated_states(const Tokenizer& tokenizer, const Corpus& corpus) {
  return static_cast<std::size_t>(std::count_if(corpus.states().begin(), corpus.states().end(), [&](const StateRecord& s) {
    return tokenizer.raw_length(s.state_text) > tokenizer.max_len();
  }));
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

EvalReport evaluate_proofs(std::span<const ProofTask> tasks, const Selector& selector, const BackendFactory& backends,
                           const RuleBook& rules, const Corpus* corpus, std::size_t threads,
                           const VariantSuiteOptions& options) {
  std::vector<std::map<Variant, ProofOutcome>> outcomes(tasks.size());
  parallel_for(tasks.size(), threads, [&](std::size_t i) {
    auto backend = backends();
    outcomes[i] = run_variant_suite(tasks[i], selector, *backend, rules, options);
  });

  EvalReport report;
  report.task_count = tasks.size();
  std::map<Variant, std::size_t> proved;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    TheoremRow row;
    row.name = tasks[i].id;
    for (const auto& [variant, outcome] : outcomes[i]) {
      row.proved[variant] = outcome.proved;
      if (outcome.proved) ++proved[variant];
    }
    row.runtime_ms = outcomes[i].at(Variant::cumul).total_ms;
    row.failure_category = outcomes[i].at(Variant::full).failure_category;
    if (corpus != nullptr && tasks[i].state_index && *tasks[i].state_index < corpus->states().size()) {
      const auto& state = corpus->states()[*tasks[i].state_index];
      row.human_proof_lines = state.proof_lines;
      row.num_positives = state.positive_premises.size();
    }
    report.per_theorem.push_back(std::move(row));
  }
  for (Variant v : {Variant::aesop, Variant::auto_, Variant::aesop_auto, Variant::full, Variant::cumul})
    report.proof_rate[v] = tasks.empty() ? 0.0 : static_cast<double>(proved[v]) / static_cast<double>(tasks.size());
  return report;
}

std::vector<SweepCell> sweep_k(std::span<const ProofTask> tasks, const Selector& selector,
                               const BackendFactory& backends, const RuleBook& rules,
                               std::span<const std::size_t> k1s, std::span<const std::size_t> k2s, Variant variant,
                               std::size_t threads) {
  std::vector<SweepCell> grid;
  for (std::size_t k1 : k1s) {
    for (std::size_t k2 : k2s) {
      std::vector<ProofTask> cell(tasks.begin(), tasks.end());
      for (auto& t : cell) {
        t.k1 = k1;
        t.k2 = k2;
        t.variant = variant;
      }
      const auto outcomes = run_batch(cell, selector, backends, rules, threads);
      const auto n = std::count_if(outcomes.begin(), outcomes.end(), [](const ProofOutcome& o) { return o.proved; });
      grid.push_back({k1, k2, cell.empty() ? 0.0 : static_cast<double>(n) / static_cast<double>(cell.size())});
    }
  }
  return grid;
}

void write_sweep_csv(std::span<const SweepCell> grid, std::ostream& out) {
  out << "k1,k2,proof_rate\n";
  for (const auto& c : grid) out << c.k1 << ',' << c.k2 << ',' << c.proof_rate << '\n';
}

std::string positives_bucket(std::size_t n) {
  if (n == 0) return "0";
  if (n <= 8) return "1-8";
  if (n <= 16) return "9-16";
  if (n <= 32) return "17-32";
  return "33+";
}

std::string proof_lines_bucket(std::optional<int> lines) {
  if (!lines || *lines < 1) return "unknown";
  const int n = *lines;
  if (n == 1) return "1";
  if (n == 2) return "2";
  if (n <= 4) return "3-4";
  if (n <= 8) return "5-8";
  if (n <= 16) return "9-16";
  return "17+";
}

std::vector<HistogramRow> difficulty_report(std::span<const TheoremRow> rows, Variant variant) {
  static const std::vector<std::string> kPositiveBuckets = {"0", "1-8", "9-16", "17-32", "33+"};
  static const std::vector<std::string> kLineBuckets = {"1", "2", "3-4", "5-8", "9-16", "17+", "unknown"};
  std::vector<HistogramRow> out;
  for (const auto& b : kPositiveBuckets) out.push_back({"positives", b, 0, 0});
  for (const auto& b : kLineBuckets) out.push_back({"proof_lines", b, 0, 0});
  auto bump = [&](const std::string& dim, const std::string& bucket, bool proved) {
    for (auto& r : out)
      if (r.dimension == dim && r.bucket == bucket) (proved ? r.proved : r.unproved)++;
  };
  for (const auto& row : rows) {
    auto it = row.proved.find(variant);
    const bool proved = it != row.proved.end() && it->second;
    bump("positives", positives_bucket(row.num_positives), proved);
    bump("proof_lines", proof_lines_bucket(row.human_proof_lines), proved);
  }
  return out;
}

void write_histogram_csv(std::span<const HistogramRow> rows, std::ostream& out) {
  out << "dimension,bucket,proved,unproved\n";
  for (const auto& r : rows) out << r.dimension << ',' << r.bucket << ',' << r.proved << ',' << r.unproved << '\n';
}

std::map<std::string, double> error_report(std::span<const ProofOutcome> outcomes) {
  std::map<std::string, double> f = {{"translation_failure", 0}, {"prover_failure", 0}, {"reconstruction_failure", 0},
                                     {"other_error", 0},         {"proved", 0}};
  if (outcomes.empty()) return f;
  for (const auto& o : outcomes) {
    std::string key;
    if (o.proved) {
      key = "proved";
    } else {
      switch (o.failure_category) {
        case FailureCategory::translation_failure: key = "translation_failure"; break;
        case FailureCategory::prover_failure: key = "prover_failure"; break;
        case FailureCategory::reconstruction_failure: key = "reconstruction_failure"; break;
        default: key = "other_error"; break;
      }
    }
    f[key] += 1;
  }
  for (auto& [k, v] : f) v /= static_cast<double>(outcomes.size());
  return f;
}

json to_json(const EvalReport& r) {
  json recall = json::object();
  for (const auto& [k, v] : r.recall_at_k) recall[std::to_string(k)] = v;
  json rate = json::object();
  for (const auto& [v, x] : r.proof_rate) rate[std::string(to_string(v))] = x;
  json rows = json::array();
  for (const auto& row : r.per_theorem) {
    json proved = json::object();
    for (const auto& [v, ok] : row.proved) proved[std::string(to_string(v))] = ok;
    rows.push_back({{"name", row.name},
                    {"proved", proved},
                    {"runtime_ms", row.runtime_ms},
                    {"failure_category", to_string(row.failure_category)},
                    {"human_proof_lines", row.human_proof_lines ? json(*row.human_proof_lines) : json(nullptr)},
                    {"num_positives", row.num_positives}});
  }
  return {{"recall_at_k", recall}, {"proof_rate", rate}, {"task_count", r.task_count}, {"per_theorem", rows},
          {"config", r.config}};
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out.precision(17);
  return out;
}

}  // namespace

void write_report(const EvalReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "recall.csv");
    out << "k,recall\n";
    for (const auto& [k, v] : r.recall_at_k) out << k << ',' << v << '\n';
  }
  {
    auto out = open_out(dir / "proof_rate.csv");
    out << "variant,proof_rate,tasks\n";
    for (const auto& [v, x] : r.proof_rate) out << to_string(v) << ',' << x << ',' << r.task_count << '\n';
  }
  {
    auto out = open_out(dir / "per_theorem.csv");
    out << "name,aesop,auto,aesop_auto,full,cumul,runtime_ms,failure_category,human_proof_lines,num_positives\n";
    for (const auto& row : r.per_theorem) {
      out << row.name;
      for (Variant v : {Variant::aesop, Variant::auto_, Variant::aesop_auto, Variant::full, Variant::cumul}) {
        auto it = row.proved.find(v);
        out << ',' << (it != row.proved.end() && it->second ? 1 : 0);
      }
      out << ',' << row.runtime_ms << ',' << to_string(row.failure_category) << ',';
      if (row.human_proof_lines) out << *row.human_proof_lines;
      out << ',' << row.num_positives << '\n';
    }
  }
  auto out = open_out(dir / "report.json");
  out << to_json(r).dump(2) << '\n';
}

}  // namespace premise
