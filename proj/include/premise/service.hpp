#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "premise/corpus.hpp"
#include "premise/encoder.hpp"
#include "premise/index.hpp"
#include "premise/mepo.hpp"

namespace premise {

enum class SelectorKind { neural, mepo };

struct NewPremise {
  std::string name;
  std::string signature;
};

struct RetrieveRequest {
  std::string state;
  std::size_t k = 0;
  // Explicit P_s; otherwise derived from (module, decl_index); otherwise every
  // premise of the snapshot.
  std::optional<std::vector<std::string>> candidate_names;
  std::optional<std::string> module;
  std::optional<std::int64_t> decl_index;
  std::vector<NewPremise> new_premises;
  std::string corpus_snapshot_id;
  SelectorKind selector = SelectorKind::neural;
};

struct RetrieveTimings {
  double embed_ms = 0;
  double search_ms = 0;
  double total_ms = 0;
};

struct RetrieveResponse {
  std::vector<ScoredName> ranked;
  std::string model_version;
  RetrieveTimings timings;
};

struct ServiceLimits {
  std::size_t max_body_bytes = 4u << 20;
  std::size_t max_new_premises = 10000;
  std::size_t max_upload_bytes = 256u << 20;
};

// Wire format. Parsing failures raise Error(malformed_request) or
// Error(request_too_large).
RetrieveRequest parse_retrieve_request(const nlohmann::json& j, const ServiceLimits& limits = {});
nlohmann::json to_json(const RetrieveRequest& request);
nlohmann::json to_json(const RetrieveResponse& response);
RetrieveResponse parse_retrieve_response(const nlohmann::json& j);
nlohmann::json error_json(ErrorCode code, const std::string& detail);
int http_status(ErrorCode code);

// Transport-independent premise selection service: a registry of corpus
// snapshots with cached premise embeddings, plus a per-signature cache for
// premises uploaded with requests.
class PremiseService {
 public:
  struct Counters {
    std::size_t premise_embeds = 0;  // premise signatures encoded (snapshots + uploads)
    std::size_t state_embeds = 0;
    std::size_t upload_cache_hits = 0;
    std::size_t snapshot_builds = 0;
  };

  struct Options {
    ServiceLimits limits;
    MepoConfig mepo;
    std::optional<std::filesystem::path> cache_dir;
  };

  explicit PremiseService(Encoder model) : PremiseService(std::move(model), Options{}) {}
  PremiseService(Encoder model, Options options);

  // Registers the (filtered) corpus and its snapshot; a corpus already
  // registered costs no embedding work. Returns the corpus snapshot id.
  std::string warm_cache(const Corpus& corpus);

  RetrieveResponse handle_retrieve(const RetrieveRequest& request) const;

  // HTTP-shaped entry points: (status, JSON body).
  std::pair<int, std::string> handle_retrieve_body(std::string_view body) const;
  std::pair<int, std::string> handle_snapshot_upload(std::string_view body);
  nlohmann::json health() const;

  Counters counters() const;
  const Encoder& model() const { return model_; }
  const Options& options() const { return options_; }
  bool has_snapshot(const std::string& id) const;

 private:
  struct Entry {
    Corpus corpus;
    std::shared_ptr<const IndexSnapshot> snapshot;
    std::unordered_map<std::string, SymbolSet> symbols;
  };

  std::shared_ptr<const Entry> find_entry(const std::string& id) const;
  Encoder::Vector embed_upload(const NewPremise& p) const;

  Encoder model_;
  Options options_;

  mutable std::shared_mutex registry_mu_;
  std::map<std::string, std::shared_ptr<const Entry>> registry_;
  std::mutex warm_mu_;

  mutable std::mutex upload_mu_;
  mutable std::unordered_map<std::string, Encoder::Vector> upload_cache_;

  mutable std::atomic<std::size_t> premise_embeds_{0};
  mutable std::atomic<std::size_t> state_embeds_{0};
  mutable std::atomic<std::size_t> upload_hits_{0};
  std::atomic<std::size_t> snapshot_builds_{0};
};

}  // namespace premise
