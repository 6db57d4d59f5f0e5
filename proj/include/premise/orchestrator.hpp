#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace premise {

// Goals live in a small propositional logic: named atoms, True, conjunction,
// bi-implication and implication.
struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  enum class Kind { atom, truth, conj, iff, implies };
  Kind kind = Kind::atom;
  std::string atom;
  FormulaPtr lhs, rhs;

  static FormulaPtr make_atom(std::string name);
  static FormulaPtr make_true();
  static FormulaPtr make(Kind kind, FormulaPtr lhs, FormulaPtr rhs);
};

// Canonical text: `a`, `True`, `(and A B)`, `(iff A B)`, `(imp A B)`.
// Doubles as the goal id seen by prover backends.
std::string to_string(const Formula& f);

// Backward-chaining semantics of a premise: proves `conclusion` (an atom)
// from `hypotheses`.
struct PremiseRule {
  std::string premise;
  std::vector<FormulaPtr> hypotheses;
  std::string conclusion;
};
using RuleBook = std::map<std::string, PremiseRule>;

enum class Variant { aesop, auto_, aesop_auto, full, cumul };
std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);
inline constexpr Variant kBaseVariants[] = {Variant::aesop, Variant::auto_, Variant::aesop_auto, Variant::full};

enum class Phase { builtin_search, premise_application, translation, external_prover, reconstruction };
std::string_view to_string(Phase p);

enum class FailureCategory { none, translation_failure, prover_failure, reconstruction_failure, other_error, timeout };
std::string_view to_string(FailureCategory c);

struct ProofTask {
  std::string id;
  FormulaPtr goal;
  std::vector<std::string> accessible;
  Variant variant = Variant::full;
  std::size_t k1 = 16;  // premises handed to the external prover (weight 0.10)
  std::size_t k2 = 32;  // premise-application rules (weight 0.20)
  double prover_timeout_s = 10;
  double wall_timeout_s = 300;
  std::size_t step_budget = 200000;
  // Selector input: the normalized state text, or a corpus state index.
  std::string state_text;
  std::optional<std::size_t> state_index;
  // Fixed ranking for scripted scenarios.
  std::vector<std::string> ranking;
};

struct ProofOutcome {
  std::string task_id;
  bool proved = false;
  std::set<std::string> premises_used;
  Phase phase = Phase::builtin_search;
  FailureCategory failure_category = FailureCategory::other_error;
  std::map<Phase, double> phase_ms;
  double total_ms = 0;
  std::size_t steps = 0;
};

// External prover pipeline: translation, proof search, reconstruction.
struct TranslatedProblem {
  std::string goal_id;
  std::vector<std::string> premises;
};

class ProverBackend {
 public:
  virtual ~ProverBackend() = default;
  virtual std::optional<TranslatedProblem> translate(const std::string& goal_id,
                                                     std::span<const std::string> premises) = 0;
  // Unsat core: a subset of the problem's premises.
  virtual std::optional<std::vector<std::string>> prove(const TranslatedProblem& problem, double timeout_s) = 0;
  // Proof text on success.
  virtual std::optional<std::string> reconstruct(const std::string& goal_id, std::span<const std::string> core) = 0;
};

struct EntailmentEntry {
  std::vector<std::vector<std::string>> minimal_subsets;
  bool untranslatable = false;
  bool reconstruction_poison = false;
};
using EntailmentTable = std::map<std::string, EntailmentEntry>;

// Table-driven stand-in for translation + external prover + reconstruction.
class MockBackend : public ProverBackend {
 public:
  struct Call {
    enum class Kind { translate, prove, reconstruct };
    Kind kind;
    std::string goal_id;
    std::vector<std::string> premises;
  };

  explicit MockBackend(std::shared_ptr<const EntailmentTable> table);

  std::optional<TranslatedProblem> translate(const std::string& goal_id, std::span<const std::string> premises) override;
  std::optional<std::vector<std::string>> prove(const TranslatedProblem& problem, double timeout_s) override;
  std::optional<std::string> reconstruct(const std::string& goal_id, std::span<const std::string> core) override;

  std::vector<Call> calls() const;

 private:
  std::shared_ptr<const EntailmentTable> table_;
  mutable std::mutex mu_;
  std::vector<Call> calls_;
};

std::unique_ptr<ProverBackend> mock_backend(std::shared_ptr<const EntailmentTable> table);

struct TraceEvent {
  std::size_t step;
  std::string kind;  // normalize, premise_application, translate, prove, reconstruct, prover_cached, proved, timeout
  std::string goal;
  std::vector<std::string> premises;
  bool ok = true;
  double priority = 0;
};

using Trace = std::vector<TraceEvent>;
void write_trace_jsonl(const Trace& trace, std::ostream& out);

// Ranked premise names for a task; only names in `task.accessible` are used.
using Selector = std::function<std::vector<std::string>(const ProofTask& task, std::size_t k)>;

inline constexpr double kPremiseApplicationWeight = 0.20;
inline constexpr double kProverWeight = 0.10;

// Best-first search over rule applications. Built-in rules (True,
// assumption, conjunction/iff split, implication intro) run eagerly; premise
// applications and prover calls are queued with priority parent * weight.
ProofOutcome run_task(const ProofTask& task, const Selector& selector, ProverBackend& backend,
                      const RuleBook& rules = {}, Trace* trace = nullptr);

struct VariantSuiteOptions {
  // Variants run one after another against the base task's wall clock;
  // otherwise each gets a fresh budget.
  bool shared_wall_clock = true;
};

// Runs aesop, auto, aesop_auto and full, plus cumul (proved iff any proved).
std::map<Variant, ProofOutcome> run_variant_suite(const ProofTask& base, const Selector& selector,
                                                  ProverBackend& backend, const RuleBook& rules = {},
                                                  const VariantSuiteOptions& options = {});

// Task batch: rules, entailment table and tasks from one JSONL file.
struct HammerBatch {
  RuleBook rules;
  std::shared_ptr<const EntailmentTable> table = std::make_shared<const EntailmentTable>();
  std::vector<ProofTask> tasks;
};

HammerBatch parse_hammer_batch(std::string_view jsonl);
HammerBatch load_hammer_batch(const std::filesystem::path& path);
std::string to_jsonl(const HammerBatch& batch);

using BackendFactory = std::function<std::unique_ptr<ProverBackend>()>;

// Runs tasks on `threads` workers; outcome i belongs to task i.
std::vector<ProofOutcome> run_batch(std::span<const ProofTask> tasks, const Selector& selector,
                                    const BackendFactory& backends, const RuleBook& rules,
                                    std::size_t threads = 1);

// Selector that returns `task.ranking` restricted to the accessible set.
Selector scripted_selector();

}  // namespace premise
