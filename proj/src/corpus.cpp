#include "premise/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>

#include <json.hpp>

#include "premise/error.hpp"
#include "premise/hash.hpp"

namespace premise {

using nlohmann::json;

std::string_view to_string(PremiseKind kind) {
  return kind == PremiseKind::theorem ? "theorem" : "definition";
}

namespace {

bool is_ident_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
         c == '\'' || c == '.';
}

std::vector<std::string_view> identifiers(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_ident_char(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_ident_char(text[j])) ++j;
    std::string_view tok = text.substr(i, j - i);
    while (!tok.empty() && tok.front() == '.') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == '.') tok.remove_suffix(1);
    if (!tok.empty()) out.push_back(tok);
    i = j;
  }
  return out;
}

[[noreturn]] void schema_error(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::schema_violation, "line " + std::to_string(line) + ": " + what);
}

const json& require(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(line, std::string("missing field '") + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key, std::size_t line) {
  const json& v = require(obj, key, line);
  if (!v.is_string()) schema_error(line, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::int64_t require_index(const json& obj, const char* key, std::size_t line) {
  const json& v = require(obj, key, line);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
    schema_error(line, std::string("field '") + key + "' must be a nonnegative integer");
  return v.get<std::int64_t>();
}

bool require_bool(const json& obj, const char* key, std::size_t line) {
  const json& v = require(obj, key, line);
  if (!v.is_boolean()) schema_error(line, std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

std::vector<std::string> require_names(const json& obj, const char* key, std::size_t line) {
  const json& v = require(obj, key, line);
  if (!v.is_array()) schema_error(line, std::string("field '") + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) schema_error(line, std::string("field '") + key + "' must hold strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

void sort_unique(std::vector<std::string>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

std::vector<LintIssue> lint_text(std::string_view text, const LintConfig& config,
                                 const std::string& where) {
  std::vector<LintIssue> issues;
  if (!config.enabled) return issues;
  for (const auto& sh : config.shorthands) {
    if (!sh.empty() && text.find(sh) != std::string_view::npos)
      issues.push_back({LintIssue::Severity::error, where, "contains notation shorthand '" + sh + "'"});
  }
  return issues;
}

std::string premises_snapshot_id(const std::vector<PremiseRecord>& premises) {
  std::vector<const PremiseRecord*> order;
  order.reserve(premises.size());
  for (const auto& p : premises) order.push_back(&p);
  std::sort(order.begin(), order.end(), [](const PremiseRecord* a, const PremiseRecord* b) {
    return std::tie(a->module, a->decl_index, a->name) < std::tie(b->module, b->decl_index, b->name);
  });
  ContentHasher h;
  h.str("premise-corpus-v1").u64(order.size());
  for (const PremiseRecord* p : order) {
    h.str(p->name).str(to_string(p->kind)).str(p->signature);
    h.u64(p->docstring.has_value() ? 1 : 0).str(p->docstring.value_or(""));
    h.str(p->module).u64(static_cast<std::uint64_t>(p->decl_index));
    h.u64(p->is_blacklisted ? 1 : 0).u64(p->is_language_internal ? 1 : 0);
  }
  return h.hex();
}

Corpus::Corpus(std::vector<PremiseRecord> premises, std::vector<StateRecord> states,
               ModuleGraph modules, std::set<std::string> blacklist)
    : premises_(std::move(premises)),
      states_(std::move(states)),
      modules_(std::move(modules)),
      blacklist_(std::move(blacklist)) {
  // Modules referenced by records or imports but never declared are leaves.
  for (const auto& p : premises_) modules_.try_emplace(p.module);
  for (const auto& s : states_) modules_.try_emplace(s.module);
  std::vector<std::string> imported;
  for (auto& [name, imports] : modules_) {
    sort_unique(imports);
    imported.insert(imported.end(), imports.begin(), imports.end());
  }
  for (const auto& m : imported) modules_.try_emplace(m);

  for (std::size_t i = 0; i < premises_.size(); ++i) {
    if (!by_name_.emplace(premises_[i].name, i).second)
      throw Error(ErrorCode::schema_violation, "duplicate premise name '" + premises_[i].name + "'");
  }

  // Kahn's algorithm; the min-heap on names makes the order deterministic.
  std::map<std::string, std::size_t> indegree;
  std::map<std::string, std::vector<std::string>> importers;
  for (const auto& [name, imports] : modules_) {
    indegree[name] = imports.size();
    for (const auto& dep : imports) importers[dep].push_back(name);
  }
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& [name, deg] : indegree)
    if (deg == 0) ready.push(name);
  while (!ready.empty()) {
    std::string m = ready.top();
    ready.pop();
    module_rank_[m] = module_order_.size();
    module_order_.push_back(m);
    for (const auto& up : importers[m])
      if (--indegree[up] == 0) ready.push(up);
  }
  if (module_order_.size() != modules_.size()) {
    std::string stuck;
    for (const auto& [name, deg] : indegree)
      if (deg > 0) stuck += (stuck.empty() ? "" : ", ") + name;
    throw Error(ErrorCode::import_cycle, "import cycle among modules: " + stuck);
  }

  const std::size_t nm = module_order_.size();
  closure_.assign(nm, {});
  for (std::size_t r = 0; r < nm; ++r) {
    std::vector<char> seen(nm, 0);
    for (const auto& dep : modules_.at(module_order_[r])) {
      const std::size_t d = module_rank_.at(dep);
      seen[d] = 1;
      for (std::size_t t : closure_[d]) seen[t] = 1;  // d < r, already closed
    }
    for (std::size_t t = 0; t < nm; ++t)
      if (seen[t]) closure_[r].push_back(t);
  }

  module_premises_.assign(nm, {});
  for (std::size_t i = 0; i < premises_.size(); ++i)
    module_premises_[module_rank_.at(premises_[i].module)].push_back(i);
  for (auto& list : module_premises_) {
    std::sort(list.begin(), list.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(premises_[a].decl_index, premises_[a].name) <
             std::tie(premises_[b].decl_index, premises_[b].name);
    });
    for (std::size_t j = 1; j < list.size(); ++j) {
      const auto& prev = premises_[list[j - 1]];
      const auto& cur = premises_[list[j]];
      if (prev.decl_index == cur.decl_index)
        throw Error(ErrorCode::schema_violation, "decl_index " + std::to_string(cur.decl_index) +
                                                     " repeated in module '" + cur.module + "' ('" +
                                                     prev.name + "', '" + cur.name + "')");
    }
  }

  for (std::size_t s = 0; s < states_.size(); ++s) {
    auto& positives = states_[s].positive_premises;
    sort_unique(positives);
    for (const auto& name : positives) {
      if (!by_name_.contains(name))
        throw Error(ErrorCode::dangling_premise, "state " + std::to_string(s) + " (" +
                                                     states_[s].theorem_name +
                                                     ") names unknown premise '" + name + "'");
    }
  }

  snapshot_id_ = premises_snapshot_id(premises_);
}

const PremiseRecord* Corpus::find_premise(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  return it == by_name_.end() ? nullptr : &premises_[it->second];
}

std::vector<std::string> Corpus::accessible_premises(std::string_view module,
                                                     std::int64_t decl_index) const {
  auto it = module_rank_.find(std::string(module));
  if (it == module_rank_.end())
    throw Error(ErrorCode::unknown_module, "unknown module '" + std::string(module) + "'");
  std::vector<std::string> out;
  for (std::size_t dep : closure_[it->second])
    for (std::size_t i : module_premises_[dep]) out.push_back(premises_[i].name);
  for (std::size_t i : module_premises_[it->second]) {
    if (premises_[i].decl_index >= decl_index) break;
    out.push_back(premises_[i].name);
  }
  return out;
}

std::vector<LintIssue> Corpus::lint(const LintConfig& config) const {
  std::vector<LintIssue> issues;
  if (!config.enabled) return issues;
  // A bare identifier that is the last component of a qualified premise name,
  // but not itself a premise, is an unqualified reference.
  std::unordered_map<std::string, std::string> suffixes;
  for (const auto& p : premises_) {
    const auto dot = p.name.rfind('.');
    if (dot != std::string::npos) suffixes.try_emplace(p.name.substr(dot + 1), p.name);
  }
  auto check_refs = [&](std::string_view text, const std::string& where) {
    for (std::string_view id : identifiers(text)) {
      if (id.find('.') != std::string_view::npos) continue;
      auto s = suffixes.find(std::string(id));
      if (s != suffixes.end() && !by_name_.contains(s->first))
        issues.push_back({LintIssue::Severity::warning, where,
                          "'" + s->first + "' may be an unqualified reference to '" + s->second + "'"});
    }
  };
  for (const auto& p : premises_) {
    auto found = lint_text(p.signature, config, p.name);
    issues.insert(issues.end(), found.begin(), found.end());
    check_refs(p.signature, p.name);
  }
  for (std::size_t s = 0; s < states_.size(); ++s) {
    const std::string where = "state:" + std::to_string(s);
    auto found = lint_text(states_[s].state_text, config, where);
    issues.insert(issues.end(), found.begin(), found.end());
    check_refs(states_[s].state_text, where);
  }
  return issues;
}

Corpus parse_corpus(std::string_view jsonl, const LoadOptions& options) {
  std::vector<PremiseRecord> premises;
  std::vector<StateRecord> states;
  ModuleGraph modules;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      schema_error(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) schema_error(line_no, "expected a JSON object");
    const std::string type = require_string(obj, "type", line_no);

    if (type == "premise") {
      PremiseRecord p;
      p.name = require_string(obj, "name", line_no);
      const std::string kind = require_string(obj, "kind", line_no);
      if (kind == "theorem")
        p.kind = PremiseKind::theorem;
      else if (kind == "definition")
        p.kind = PremiseKind::definition;
      else
        schema_error(line_no, "kind must be \"theorem\" or \"definition\"");
      p.signature = require_string(obj, "signature", line_no);
      const json& doc = require(obj, "docstring", line_no);
      if (doc.is_string())
        p.docstring = doc.get<std::string>();
      else if (!doc.is_null())
        schema_error(line_no, "docstring must be a string or null");
      p.module = require_string(obj, "module", line_no);
      p.decl_index = require_index(obj, "decl_index", line_no);
      p.is_blacklisted = require_bool(obj, "blacklisted", line_no);
      p.is_language_internal = require_bool(obj, "language_internal", line_no);
      if (p.name.empty()) schema_error(line_no, "premise name must be nonempty");
      premises.push_back(std::move(p));
    } else if (type == "state") {
      StateRecord s;
      s.state_text = require_string(obj, "state", line_no);
      s.theorem_name = require_string(obj, "theorem", line_no);
      const json& tac = require(obj, "tactic_index", line_no);
      if (tac.is_number_integer() && tac.get<std::int64_t>() >= 0)
        s.tactic_index = tac.get<std::int64_t>();
      else if (!tac.is_null())
        schema_error(line_no, "tactic_index must be a nonnegative integer or null");
      s.module = require_string(obj, "module", line_no);
      s.decl_index = require_index(obj, "decl_index", line_no);
      s.positive_premises = require_names(obj, "positives", line_no);
      if (auto it = obj.find("proof_lines"); it != obj.end() && !it->is_null()) {
        if (!it->is_number_integer()) schema_error(line_no, "proof_lines must be an integer");
        s.proof_lines = it->get<int>();
      }
      states.push_back(std::move(s));
    } else if (type == "module") {
      const std::string name = require_string(obj, "name", line_no);
      auto imports = require_names(obj, "imports", line_no);
      auto [it, inserted] = modules.try_emplace(name, std::move(imports));
      if (!inserted) schema_error(line_no, "module '" + name + "' declared twice");
    } else {
      schema_error(line_no, "unknown record type '" + type + "'");
    }
  }

  std::set<std::string> blacklist(options.blacklist.begin(), options.blacklist.end());
  for (auto& p : premises)
    if (blacklist.contains(p.name)) p.is_blacklisted = true;

  Corpus corpus(std::move(premises), std::move(states), std::move(modules), std::move(blacklist));
  std::string failures;
  for (const auto& issue : corpus.lint(options.lint)) {
    if (issue.severity == LintIssue::Severity::error)
      failures += (failures.empty() ? "" : "; ") + issue.where + ": " + issue.message;
  }
  if (!failures.empty()) throw Error(ErrorCode::lint_failure, failures);
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open corpus file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str(), options);
}

std::vector<std::string> read_names_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open names file " + path.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t\r");
    names.push_back(line.substr(b, e - b + 1));
  }
  return names;
}

Corpus filter_premises(const Corpus& corpus) {
  std::vector<PremiseRecord> kept;
  std::set<std::string> dropped;
  for (const auto& p : corpus.premises()) {
    if (p.eligible())
      kept.push_back(p);
    else
      dropped.insert(p.name);
  }
  std::vector<StateRecord> states = corpus.states();
  for (auto& s : states) {
    std::erase_if(s.positive_premises, [&](const std::string& n) { return dropped.contains(n); });
  }
  return Corpus(std::move(kept), std::move(states), corpus.modules(), corpus.blacklist());
}

std::string to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& [name, imports] : corpus.modules()) {
    json j = {{"type", "module"}, {"name", name}, {"imports", imports}};
    out += j.dump() + "\n";
  }
  for (const auto& p : corpus.premises()) {
    json j = {{"type", "premise"},
              {"name", p.name},
              {"kind", to_string(p.kind)},
              {"signature", p.signature},
              {"docstring", p.docstring ? json(*p.docstring) : json(nullptr)},
              {"module", p.module},
              {"decl_index", p.decl_index},
              {"blacklisted", p.is_blacklisted},
              {"language_internal", p.is_language_internal}};
    out += j.dump() + "\n";
  }
  for (const auto& s : corpus.states()) {
    json j = {{"type", "state"},
              {"state", s.state_text},
              {"theorem", s.theorem_name},
              {"tactic_index", s.tactic_index ? json(*s.tactic_index) : json(nullptr)},
              {"module", s.module},
              {"decl_index", s.decl_index},
              {"positives", s.positive_premises}};
    if (s.proof_lines) j["proof_lines"] = *s.proof_lines;
    out += j.dump() + "\n";
  }
  return out;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << to_jsonl(corpus);
}

}  // namespace premise
