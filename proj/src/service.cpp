#include "premise/service.hpp"

#include <chrono>

#include "premise/snapshot_io.hpp"

namespace premise {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::malformed_request, what); }

bool well_formed_name(const std::string& name) {
  if (name.empty() || name.size() > 1024) return false;
  return std::none_of(name.begin(), name.end(), [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; });
}

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::unknown_snapshot: return 404;
    case ErrorCode::request_too_large: return 413;
    case ErrorCode::version_mismatch:
    case ErrorCode::conflicting_duplicate: return 409;
    case ErrorCode::io_error:
    case ErrorCode::non_finite_loss: return 500;
    default: return 400;
  }
}

json error_json(ErrorCode code, const std::string& detail) {
  std::string_view name = to_string(code);
  if (code == ErrorCode::unknown_name) name = "unknown_premise";
  return {{"error", name}, {"detail", detail}};
}

RetrieveRequest parse_retrieve_request(const json& j, const ServiceLimits& limits) {
  if (!j.is_object()) malformed("request must be a JSON object");
  RetrieveRequest r;
  auto string_field = [&](const char* key, bool required) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
      if (required) malformed(std::string("missing field '") + key + "'");
      return std::nullopt;
    }
    if (!it->is_string()) malformed(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
  };
  r.state = *string_field("state", true);
  r.corpus_snapshot_id = *string_field("corpus_snapshot_id", true);
  auto k = j.find("k");
  if (k == j.end() || !k->is_number_integer() || k->get<std::int64_t>() < 1) malformed("k must be an integer >= 1");
  r.k = k->get<std::size_t>();

  if (auto it = j.find("candidate_names"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) malformed("candidate_names must be an array");
    std::vector<std::string> names;
    for (const auto& e : *it) {
      if (!e.is_string() || !well_formed_name(e.get<std::string>())) malformed("candidate_names must hold premise names");
      names.push_back(e.get<std::string>());
    }
    r.candidate_names = std::move(names);
  }
  r.module = string_field("module", false);
  if (auto it = j.find("decl_index"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer() || it->get<std::int64_t>() < 0) malformed("decl_index must be a nonnegative integer");
    r.decl_index = it->get<std::int64_t>();
  }
  if (r.module && !r.decl_index) malformed("module requires decl_index");

  if (auto it = j.find("new_premises"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) malformed("new_premises must be an array");
    if (it->size() > limits.max_new_premises)
      throw Error(ErrorCode::request_too_large, "at most " + std::to_string(limits.max_new_premises) +
                                                     " new premises per request");
    for (const auto& e : *it) {
      if (!e.is_object() || !e.contains("name") || !e.contains("signature") || !e["name"].is_string() ||
          !e["signature"].is_string())
        malformed("new_premises entries need string 'name' and 'signature'");
      NewPremise p{e["name"].get<std::string>(), e["signature"].get<std::string>()};
      if (!well_formed_name(p.name)) malformed("ill-formed new premise name '" + p.name + "'");
      r.new_premises.push_back(std::move(p));
    }
  }
  const std::string selector = string_field("selector", false).value_or("neural");
  if (selector == "neural")
    r.selector = SelectorKind::neural;
  else if (selector == "mepo")
    r.selector = SelectorKind::mepo;
  else
    malformed("selector must be \"neural\" or \"mepo\"");
  return r;
}

json to_json(const RetrieveRequest& r) {
  json j = {{"state", r.state},
            {"k", r.k},
            {"corpus_snapshot_id", r.corpus_snapshot_id},
            {"selector", r.selector == SelectorKind::neural ? "neural" : "mepo"}};
  j["candidate_names"] = r.candidate_names ? json(*r.candidate_names) : json(nullptr);
  if (r.module) j["module"] = *r.module;
  if (r.decl_index) j["decl_index"] = *r.decl_index;
  json np = json::array();
  for (const auto& p : r.new_premises) np.push_back({{"name", p.name}, {"signature", p.signature}});
  j["new_premises"] = std::move(np);
  return j;
}

json to_json(const RetrieveResponse& r) {
  json ranked = json::array();
  for (const auto& s : r.ranked) ranked.push_back({{"name", s.name}, {"score", s.score}});
  return {{"ranked", std::move(ranked)},
          {"model_version", r.model_version},
          {"timings", {{"embed_ms", r.timings.embed_ms}, {"search_ms", r.timings.search_ms}, {"total_ms", r.timings.total_ms}}}};
}

RetrieveResponse parse_retrieve_response(const json& j) {
  RetrieveResponse r;
  for (const auto& e : j.at("ranked")) r.ranked.push_back({e.at("name").get<std::string>(), e.at("score").get<double>()});
  r.model_version = j.at("model_version").get<std::string>();
  const auto& t = j.at("timings");
  r.timings = {t.at("embed_ms").get<double>(), t.at("search_ms").get<double>(), t.at("total_ms").get<double>()};
  return r;
}

PremiseService::PremiseService(Encoder model, Options options)
    : model_(std::move(model)), options_(std::move(options)) {
  options_.mepo.validate();
}

std::shared_ptr<const PremiseService::Entry> PremiseService::find_entry(const std::string& id) const {
  std::shared_lock lock(registry_mu_);
  auto it = registry_.find(id);
  return it == registry_.end() ? nullptr : it->second;
}

bool PremiseService::has_snapshot(const std::string& id) const { return find_entry(id) != nullptr; }

std::string PremiseService::warm_cache(const Corpus& corpus) {
  const std::string id = corpus.snapshot_id();
  if (has_snapshot(id)) return id;
  std::lock_guard warm(warm_mu_);
  if (has_snapshot(id)) return id;

  auto entry = std::make_shared<Entry>(Entry{filter_premises(corpus), nullptr, {}});
  if (options_.cache_dir) {
    bool built = false;
    entry->snapshot = load_or_build_snapshot(*options_.cache_dir, model_, entry->corpus, &built);
    if (built) premise_embeds_ += static_cast<std::size_t>(entry->snapshot->size());
  } else {
    entry->snapshot = std::make_shared<const IndexSnapshot>(build_snapshot(model_, entry->corpus));
    premise_embeds_ += static_cast<std::size_t>(entry->snapshot->size());
  }
  for (const auto& p : entry->corpus.premises()) entry->symbols.emplace(p.name, premise_symbols(p));
  ++snapshot_builds_;

  std::unique_lock lock(registry_mu_);
  registry_.emplace(id, std::move(entry));
  return id;
}

Encoder::Vector PremiseService::embed_upload(const NewPremise& p) const {
  {
    std::lock_guard lock(upload_mu_);
    if (auto it = upload_cache_.find(p.signature); it != upload_cache_.end()) {
      ++upload_hits_;
      return it->second;
    }
  }
  Encoder::Vector v = model_.encode(p.signature).vector;
  ++premise_embeds_;
  std::lock_guard lock(upload_mu_);
  upload_cache_.try_emplace(p.signature, v);
  return v;
}

RetrieveResponse PremiseService::handle_retrieve(const RetrieveRequest& request) const {
  const auto t_start = Clock::now();
  if (request.k < 1) throw Error(ErrorCode::malformed_request, "k must be >= 1");
  if (request.new_premises.size() > options_.limits.max_new_premises)
    throw Error(ErrorCode::request_too_large, "too many new premises");
  auto entry = find_entry(request.corpus_snapshot_id);
  if (!entry) throw Error(ErrorCode::unknown_snapshot, "snapshot '" + request.corpus_snapshot_id + "' is not loaded; upload it first");

  RetrieveResponse response;
  response.model_version = model_.version();

  // Embedding: the state plus any uploaded premise not cached yet.
  auto t0 = Clock::now();
  const Embedding query = model_.encode(request.state);
  ++state_embeds_;
  std::vector<PremiseRecord> uploads;
  uploads.reserve(request.new_premises.size());
  for (const auto& np : request.new_premises) {
    PremiseRecord p;
    p.name = np.name;
    p.signature = np.signature;
    uploads.push_back(std::move(p));
  }
  const DeltaOverlay overlay = apply_delta(entry->snapshot, std::span<const PremiseRecord>(uploads),
                                           [&](const PremiseRecord& p) { return embed_upload({p.name, p.signature}); });
  response.timings.embed_ms = ms_since(t0);

  // Candidate set P_s plus the uploaded names.
  t0 = Clock::now();
  std::optional<std::vector<std::string>> mask;
  if (request.candidate_names) {
    mask = *request.candidate_names;
  } else if (request.module) {
    if (!entry->corpus.has_module(*request.module))
      throw Error(ErrorCode::unknown_module, "unknown module '" + *request.module + "'");
    mask = entry->corpus.accessible_premises(*request.module, *request.decl_index);
  }
  if (mask) mask->insert(mask->end(), overlay.names.begin(), overlay.names.end());

  if (request.selector == SelectorKind::neural) {
    std::optional<std::span<const std::string>> view;
    if (mask) view = std::span<const std::string>(*mask);
    response.ranked = select_premises(query, request.k, view, *entry->snapshot, &overlay).ranked;
  } else {
    std::vector<NamedSymbols> pool;
    const std::vector<std::string>& names = mask ? *mask : entry->snapshot->names();
    std::set<std::string> seen;
    for (const auto& name : names) {
      if (!seen.insert(name).second) continue;
      if (auto it = entry->symbols.find(name); it != entry->symbols.end()) {
        pool.emplace_back(name, it->second);
      } else if (overlay.row_of.contains(name)) {
        const auto& p = uploads[static_cast<std::size_t>(
            std::find_if(uploads.begin(), uploads.end(), [&](const PremiseRecord& u) { return u.name == name; }) - uploads.begin())];
        pool.emplace_back(name, premise_symbols(p));
      } else {
        throw Error(ErrorCode::unknown_name, "candidate '" + name + "' is not in the index");
      }
    }
    if (!mask) {
      for (std::size_t i = 0; i < overlay.names.size(); ++i) {
        const auto& p = *std::find_if(uploads.begin(), uploads.end(), [&](const PremiseRecord& u) { return u.name == overlay.names[i]; });
        pool.emplace_back(p.name, premise_symbols(p));
      }
    }
    const auto sel = mepo_select(extract_symbols(request.state), pool, options_.mepo);
    response.ranked = mepo_last_k(sel, request.k);
  }
  response.timings.search_ms = ms_since(t0);
  response.timings.total_ms = ms_since(t_start);
  return response;
}

std::pair<int, std::string> PremiseService::handle_retrieve_body(std::string_view body) const {
  try {
    if (body.size() > options_.limits.max_body_bytes)
      throw Error(ErrorCode::request_too_large, "request body exceeds " + std::to_string(options_.limits.max_body_bytes) + " bytes");
    json j;
    try {
      j = json::parse(body);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::malformed_request, std::string("invalid JSON: ") + e.what());
    }
    return {200, to_json(handle_retrieve(parse_retrieve_request(j, options_.limits))).dump()};
  } catch (const Error& e) {
    return {http_status(e.code()), error_json(e.code(), e.what()).dump()};
  }
}

std::pair<int, std::string> PremiseService::handle_snapshot_upload(std::string_view body) {
  try {
    if (body.size() > options_.limits.max_upload_bytes)
      throw Error(ErrorCode::request_too_large, "corpus upload too large");
    const Corpus corpus = parse_corpus(body);
    const auto before = snapshot_builds_.load();
    const std::string id = warm_cache(corpus);
    return {200, json{{"snapshot_id", id}, {"built", snapshot_builds_.load() != before}}.dump()};
  } catch (const Error& e) {
    const ErrorCode code = e.code() == ErrorCode::io_error ? ErrorCode::io_error : e.code();
    return {http_status(code), error_json(code, e.what()).dump()};
  }
}

json PremiseService::health() const {
  json ids = json::array();
  {
    std::shared_lock lock(registry_mu_);
    for (const auto& [id, entry] : registry_) ids.push_back(id);
  }
  return {{"status", "ok"}, {"model_version", model_.version()}, {"snapshots", ids}};
}

PremiseService::Counters PremiseService::counters() const {
  return {premise_embeds_.load(), state_embeds_.load(), upload_hits_.load(), snapshot_builds_.load()};
}

}  // namespace premise
