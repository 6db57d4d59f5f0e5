#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace premise {

enum class PremiseKind { theorem, definition };

std::string_view to_string(PremiseKind kind);

// A retrievable fact. `signature` is the normalized serialization
// `docstring? kind name arguments* : type`, produced upstream by the
// exporter; here it is only linted.
struct PremiseRecord {
  std::string name;
  PremiseKind kind = PremiseKind::theorem;
  std::string signature;
  std::optional<std::string> docstring;
  std::string module;
  std::int64_t decl_index = 0;
  bool is_blacklisted = false;
  bool is_language_internal = false;

  bool eligible() const { return !is_blacklisted && !is_language_internal; }
  bool operator==(const PremiseRecord&) const = default;
};

// A proof state paired with the premises used by the whole enclosing proof.
// Every state of one theorem carries the same positive set.
struct StateRecord {
  std::string state_text;
  std::string theorem_name;
  std::optional<std::int64_t> tactic_index;
  std::vector<std::string> positive_premises;  // sorted, unique
  std::string module;
  std::int64_t decl_index = 0;
  std::optional<int> proof_lines;

  bool operator==(const StateRecord&) const = default;
};

struct LintConfig {
  bool enabled = true;
  // Notation that a normalized serialization must never contain.
  std::vector<std::string> shorthands = {"∃", "∧", "↔", "∣", "⤏", "ℕ"};
};

struct LintIssue {
  enum class Severity { warning, error };
  Severity severity;
  std::string where;  // premise name or "state:<index>"
  std::string message;
};

std::vector<LintIssue> lint_text(std::string_view text, const LintConfig& config,
                                 const std::string& where);

struct LoadOptions {
  LintConfig lint;
  // Names marked `is_blacklisted` on load, in addition to the per-record flag.
  std::vector<std::string> blacklist;
};

using ModuleGraph = std::map<std::string, std::vector<std::string>>;

// Immutable corpus: premises, states, and the module import DAG.
// Construction validates every invariant; a Corpus that exists is valid.
class Corpus {
 public:
  Corpus() : Corpus(std::vector<PremiseRecord>{}, {}, {}, {}) {}
  Corpus(std::vector<PremiseRecord> premises, std::vector<StateRecord> states,
         ModuleGraph modules, std::set<std::string> blacklist);

  const std::vector<PremiseRecord>& premises() const { return premises_; }
  const std::vector<StateRecord>& states() const { return states_; }
  const ModuleGraph& modules() const { return modules_; }
  const std::set<std::string>& blacklist() const { return blacklist_; }
  const std::string& snapshot_id() const { return snapshot_id_; }

  const PremiseRecord* find_premise(std::string_view name) const;
  bool has_module(std::string_view module) const { return module_rank_.contains(std::string(module)); }

  // Modules in deterministic topological order (imports first, ties by name).
  const std::vector<std::string>& module_order() const { return module_order_; }

  // P_s: premises of every module transitively imported by `module`, then the
  // premises of `module` itself with a smaller declaration index. Ordered by
  // (module topological rank, decl_index, name).
  std::vector<std::string> accessible_premises(std::string_view module,
                                               std::int64_t decl_index) const;
  std::vector<std::string> accessible_premises(const StateRecord& state) const {
    return accessible_premises(state.module, state.decl_index);
  }

  std::vector<LintIssue> lint(const LintConfig& config) const;

 private:
  std::vector<PremiseRecord> premises_;
  std::vector<StateRecord> states_;
  ModuleGraph modules_;
  std::set<std::string> blacklist_;
  std::string snapshot_id_;

  std::unordered_map<std::string, std::size_t> by_name_;
  std::vector<std::string> module_order_;
  std::unordered_map<std::string, std::size_t> module_rank_;
  // Indexed by module rank: premise indices sorted by (decl_index, name).
  std::vector<std::vector<std::size_t>> module_premises_;
  // Indexed by module rank: ranks of every module reachable through imports.
  std::vector<std::vector<std::size_t>> closure_;
};

Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options = {});
Corpus parse_corpus(std::string_view jsonl, const LoadOptions& options = {});

std::vector<std::string> read_names_file(const std::filesystem::path& path);

// Drops blacklisted and language-internal premises and removes their names
// from every positive set. Idempotent.
Corpus filter_premises(const Corpus& corpus);

std::string to_jsonl(const Corpus& corpus);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Content hash over the premise records only, independent of line order.
std::string premises_snapshot_id(const std::vector<PremiseRecord>& premises);

}  // namespace premise
