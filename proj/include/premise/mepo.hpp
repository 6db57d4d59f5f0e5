#pragma once

#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "premise/corpus.hpp"
#include "premise/index.hpp"

namespace premise {

using SymbolSet = std::set<std::string>;

// Dotted identifiers and capitalized constants (two or more characters),
// without keywords such as `theorem` or `Type`.
SymbolSet extract_symbols(std::string_view text);

// Symbols of a premise signature, minus the premise's own name.
SymbolSet premise_symbols(const PremiseRecord& premise);

struct MepoConfig {
  double p = 0.6;  // initial relevance threshold
  double c = 0.9;  // threshold growth divisor
  std::size_t max_selected = 1024;
  double irrelevance_weight = 1.0;

  void validate() const;
};

struct MepoSelection {
  std::vector<std::string> names;  // acceptance order
  std::vector<double> marks;       // mark at acceptance
  std::size_t rounds = 0;          // relevance-filter rounds executed
  std::vector<double> thresholds;  // threshold used in each round
};

using NamedSymbols = std::pair<std::string, SymbolSet>;

// Iterative relevance filter. Round r accepts every remaining premise whose
// mark |S & R| / (|S & R| + w |S \ R|) reaches the threshold t_r, ordered by
// ascending mark then input position; accepted symbols join R and
// t_{r+1} = t_r + (1 - t_r) / c. Stops when a round accepts nothing, the
// threshold exceeds 1, or max_selected is reached.
MepoSelection mepo_select(const SymbolSet& goal, std::span<const NamedSymbols> premises, const MepoConfig& config);

// The last `k` accepted premises, most relevant first (mark descending,
// later acceptance first on ties).
std::vector<ScoredName> mepo_last_k(const MepoSelection& selection, std::size_t k);

}  // namespace premise
