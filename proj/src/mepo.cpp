#include "premise/mepo.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace premise {

namespace {

const std::set<std::string_view> kKeywords = {
    "theorem", "definition", "def", "lemma", "fun", "let", "have", "show", "from", "by",
    "at", "with", "match", "if", "then", "else", "Type", "Prop", "Sort", "forall", "exists"};

bool is_ident_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
         c == '\'' || c == '.';
}

}  // namespace

SymbolSet extract_symbols(std::string_view text) {
  SymbolSet out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_ident_char(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_ident_char(text[j])) ++j;
    std::string_view tok = text.substr(i, j - i);
    i = j;
    while (!tok.empty() && tok.front() == '.') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == '.') tok.remove_suffix(1);
    if (tok.empty() || (tok.front() >= '0' && tok.front() <= '9')) continue;
    if (kKeywords.contains(tok)) continue;
    const bool dotted = tok.find('.') != std::string_view::npos;
    const bool capitalized = tok.front() >= 'A' && tok.front() <= 'Z' && tok.size() >= 2;
    if (dotted || capitalized) out.emplace(tok);
  }
  return out;
}

SymbolSet premise_symbols(const PremiseRecord& premise) {
  SymbolSet s = extract_symbols(premise.signature);
  s.erase(premise.name);
  return s;
}

void MepoConfig::validate() const {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("MePo p must lie in (0, 1]");
  if (!(c > 0.0)) throw std::invalid_argument("MePo c must be positive");
  if (!(irrelevance_weight > 0.0)) throw std::invalid_argument("MePo irrelevance weight must be positive");
}

MepoSelection mepo_select(const SymbolSet& goal, std::span<const NamedSymbols> premises, const MepoConfig& config) {
  config.validate();
  MepoSelection sel;
  SymbolSet relevant = goal;
  std::vector<char> taken(premises.size(), 0);
  double threshold = config.p;

  while (threshold <= 1.0 && sel.names.size() < config.max_selected) {
    ++sel.rounds;
    sel.thresholds.push_back(threshold);
    std::vector<std::pair<double, std::size_t>> accepted;
    for (std::size_t i = 0; i < premises.size(); ++i) {
      if (taken[i]) continue;
      const SymbolSet& syms = premises[i].second;
      if (syms.empty()) continue;
      std::size_t hit = 0;
      for (const auto& s : syms) hit += relevant.contains(s) ? 1 : 0;
      if (hit == 0) continue;
      const double miss = static_cast<double>(syms.size() - hit);
      const double mark = static_cast<double>(hit) / (static_cast<double>(hit) + config.irrelevance_weight * miss);
      if (mark >= threshold) accepted.emplace_back(mark, i);
    }
    if (accepted.empty()) break;
    std::sort(accepted.begin(), accepted.end());
    for (const auto& [mark, i] : accepted) {
      if (sel.names.size() == config.max_selected) break;
      taken[i] = 1;
      sel.names.push_back(premises[i].first);
      sel.marks.push_back(mark);
      relevant.insert(premises[i].second.begin(), premises[i].second.end());
    }
    threshold += (1.0 - threshold) / config.c;
  }
  return sel;
}

std::vector<ScoredName> mepo_last_k(const MepoSelection& selection, std::size_t k) {
  const std::size_t n = selection.names.size();
  const std::size_t start = n > k ? n - k : 0;
  std::vector<std::size_t> order(n - start);
  std::iota(order.begin(), order.end(), start);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (selection.marks[a] != selection.marks[b]) return selection.marks[a] > selection.marks[b];
    return a > b;
  });
  std::vector<ScoredName> out;
  for (std::size_t i : order) out.push_back({selection.names[i], selection.marks[i]});
  return out;
}

}  // namespace premise
