#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "premise/corpus.hpp"
#include "premise/encoder.hpp"
#include "premise/index.hpp"
#include "premise/mepo.hpp"
#include "premise/orchestrator.hpp"

namespace premise {

// Ranks the candidates `accessible` of corpus state `state_index`; returns at
// most k names.
using StateSelector = std::function<std::vector<std::string>(
    const Corpus& corpus, std::size_t state_index, std::span<const std::string> accessible, std::size_t k)>;

// Cosine top-k with `model` over a snapshot of `corpus` built once.
StateSelector neural_selector(const Encoder& model, const Corpus& corpus);
StateSelector mepo_selector(const MepoConfig& config = {});
// Uniform random order, fixed per (seed, state); nested across k.
StateSelector random_selector(std::uint64_t seed);
// Positives first (in accessible order), then the rest.
StateSelector oracle_selector();
// "neural" needs a model; throws Error(malformed_request) on unknown names.
StateSelector make_selector(const std::string& name, const Corpus& corpus, const Encoder* model,
                            std::uint64_t seed = 0);

// Orchestrator adapter: tasks carrying a state index are ranked by `selector`
// on `corpus`; others fall back to their scripted ranking.
Selector hammer_selector(StateSelector selector, std::shared_ptr<const Corpus> corpus);

struct RecallOptions {
  bool micro_average = false;
  // Subset of state indices to evaluate; all states when absent.
  std::optional<std::vector<std::size_t>> states;
};

struct RecallResult {
  std::map<std::size_t, double> recall;
  std::size_t evaluated_states = 0;
  std::size_t skipped_zero_positive = 0;
};

// Per state |top-k & P+| / |P+| over accessible_premises, averaged over states
// with at least one positive.
RecallResult recall_at_k(const StateSelector& selector, const Corpus& corpus, std::span<const std::size_t> ks,
                         const RecallOptions& options = {});

// States whose token count exceeds the encoder's max_len.
std::size_t count_truncated_states(const Tokenizer& tokenizer, const Corpus& corpus);

struct TheoremRow {
  std::string name;
  std::map<Variant, bool> proved;
  double runtime_ms = 0;
  FailureCategory failure_category = FailureCategory::none;  // of the full variant
  std::optional<int> human_proof_lines;
  std::size_t num_positives = 0;
};

struct EvalReport {
  std::map<std::size_t, double> recall_at_k;
  std::map<Variant, double> proof_rate;
  std::size_t task_count = 0;
  std::vector<TheoremRow> per_theorem;
  nlohmann::json config = nlohmann::json::object();
};

// Runs every variant (including cumul) on every task; one fresh backend per
// task. Rows carry corpus metadata when the task has a state index.
EvalReport evaluate_proofs(std::span<const ProofTask> tasks, const Selector& selector,
                           const BackendFactory& backends, const RuleBook& rules, const Corpus* corpus = nullptr,
                           std::size_t threads = 1, const VariantSuiteOptions& options = {});

struct SweepCell {
  std::size_t k1 = 0;
  std::size_t k2 = 0;
  double proof_rate = 0;
};

// Proof rate of `variant` for every (k1, k2) pair.
std::vector<SweepCell> sweep_k(std::span<const ProofTask> tasks, const Selector& selector,
                               const BackendFactory& backends, const RuleBook& rules,
                               std::span<const std::size_t> k1s, std::span<const std::size_t> k2s,
                               Variant variant = Variant::full, std::size_t threads = 1);
void write_sweep_csv(std::span<const SweepCell> grid, std::ostream& out);

struct HistogramRow {
  std::string dimension;  // "positives" or "proof_lines"
  std::string bucket;
  std::size_t proved = 0;
  std::size_t unproved = 0;
};

// Proved/unproved counts by number of positives (0, 1-8, 9-16, 17-32, 33+)
// and by human proof length (1, 2, 3-4, 5-8, 9-16, 17+, unknown), judged on
// `variant`.
std::vector<HistogramRow> difficulty_report(std::span<const TheoremRow> rows, Variant variant = Variant::cumul);
std::string positives_bucket(std::size_t positives);
std::string proof_lines_bucket(std::optional<int> lines);
void write_histogram_csv(std::span<const HistogramRow> rows, std::ostream& out);

// Fractions over translation_failure, prover_failure, reconstruction_failure,
// other_error (timeouts included) and proved.
std::map<std::string, double> error_report(std::span<const ProofOutcome> outcomes);

nlohmann::json to_json(const EvalReport& report);
// recall.csv, proof_rate.csv, per_theorem.csv and report.json under `dir`.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

// Planted-structure corpus generator.
struct SyntheticSpec {
  std::size_t num_premises = 200;
  std::size_t num_states = 400;  // two states per theorem
  std::size_t num_modules = 10;
  std::size_t symbols_per_premise = 4;
  double mean_positives = 12.45;
  std::size_t noise_symbols = 4;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  Corpus corpus;
  HammerBatch batch;  // one task per theorem, on its first state
  // Planted minimal entailment subset per task id.
  std::map<std::string, std::vector<std::string>> planted_core;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec = {});

}  // namespace premise
