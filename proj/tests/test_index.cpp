#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "premise/index.hpp"
#include "premise/snapshot_io.hpp"
#include "support.hpp"

using namespace premise;
using premise::testing::brute_force_topk;

namespace {

std::vector<std::string> vocabulary() {
  std::vector<std::string> w;
  for (int i = 0; i < 40; ++i) w.push_back("w" + std::to_string(i));
  return w;
}

Corpus random_corpus(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto words = vocabulary();
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  std::vector<PremiseRecord> ps;
  for (std::size_t i = 0; i < n; ++i) {
    PremiseRecord p;
    p.name = "P" + std::to_string(i);
    p.signature = "theorem " + p.name + " :";
    for (int j = 0; j < 4; ++j) p.signature += " " + words[pick(rng)];
    p.module = "M";
    p.decl_index = static_cast<std::int64_t>(i);
    ps.push_back(p);
  }
  return Corpus(ps, {}, {{"M", {}}}, {});
}

Encoder model_for(const Corpus& corpus, std::uint64_t seed) {
  std::vector<std::string> texts = vocabulary();
  for (const auto& p : corpus.premises()) texts.push_back(p.signature);
  return Encoder::random(Tokenizer::build(texts), 8, seed);
}

std::vector<std::pair<std::string, std::vector<double>>> naive_rows(const Encoder& m,
                                                                    const std::vector<PremiseRecord>& ps) {
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  for (const auto& p : ps) rows.emplace_back(p.name, premise::testing::naive_encode(m, p.signature));
  return rows;
}

void check_same(const RetrievalResult& got, const std::vector<ScoredName>& want) {
  REQUIRE(got.ranked.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(got.ranked[i].name == want[i].name);
    CHECK(got.ranked[i].score == doctest::Approx(want[i].score).epsilon(1e-9));
  }
}

}  // namespace

TEST_CASE("exact top-k equals brute force") {
  const Corpus corpus = random_corpus(200, 3);
  const Encoder m = model_for(corpus, 4);
  const auto snap = build_snapshot(m, corpus);
  const auto rows = naive_rows(m, corpus.premises());
  std::mt19937_64 rng(9);
  for (int q = 0; q < 20; ++q) {
    const std::string text = "w" + std::to_string(rng() % 40) + " w" + std::to_string(rng() % 40);
    const auto query = m.encode(text);
    const auto qv = premise::testing::naive_encode(m, text);
    for (std::size_t k : {1u, 16u, 32u, 500u}) check_same(select_premises(query, k, std::nullopt, snap), brute_force_topk(qv, rows, k));
  }
}

TEST_CASE("masked top-k ranks only the mask") {
  const Corpus corpus = random_corpus(50, 5);
  const Encoder m = model_for(corpus, 6);
  const auto snap = build_snapshot(m, corpus);
  std::vector<std::string> mask = {"P3", "P7", "P11", "P7", "P40"};
  std::vector<PremiseRecord> subset;
  for (const auto& p : corpus.premises())
    if (p.name == "P3" || p.name == "P7" || p.name == "P11" || p.name == "P40") subset.push_back(p);
  const auto query = m.encode("w1 w2 w3");
  const auto want = brute_force_topk(premise::testing::naive_encode(m, "w1 w2 w3"), naive_rows(m, subset), 10);
  check_same(select_premises(query, 10, std::span<const std::string>(mask), snap), want);
}

TEST_CASE("ties break by ascending name") {
  std::vector<PremiseRecord> ps;
  for (const char* n : {"Zeta", "Alpha", "Mid"}) {
    PremiseRecord p;
    p.name = n;
    p.signature = "same text";
    p.module = "M";
    p.decl_index = static_cast<std::int64_t>(ps.size());
    ps.push_back(p);
  }
  const Corpus corpus(ps, {}, {{"M", {}}}, {});
  const Encoder m = Encoder::random(Tokenizer::build(std::vector<std::string>{"same text"}), 4, 1);
  const auto snap = build_snapshot(m, corpus);
  const auto r = select_premises(m.encode("same"), 2, std::nullopt, snap);
  REQUIRE(r.ranked.size() == 2);
  CHECK(r.ranked[0].name == "Alpha");
  CHECK(r.ranked[1].name == "Mid");
}

TEST_CASE("k = 0 returns nothing and unknown mask names are typed errors") {
  const Corpus corpus = random_corpus(5, 1);
  const Encoder m = model_for(corpus, 1);
  const auto snap = build_snapshot(m, corpus);
  CHECK(select_premises(m.encode("w1"), 0, std::nullopt, snap).ranked.empty());
  std::vector<std::string> mask = {"P1", "Nope"};
  try {
    select_premises(m.encode("w1"), 3, std::span<const std::string>(mask), snap);
    FAIL("expected unknown_name");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::unknown_name);
  }
  const Encoder other = model_for(corpus, 2);
  CHECK_THROWS_AS(select_premises(other.encode("w1"), 3, std::nullopt, snap), Error);
}

TEST_CASE("ineligible premises are not indexed") {
  auto ps = random_corpus(4, 2).premises();
  ps[1].is_blacklisted = true;
  ps[2].is_language_internal = true;
  const Corpus corpus(ps, {}, {{"M", {}}}, {});
  const auto snap = build_snapshot(model_for(corpus, 1), corpus);
  CHECK(snap.names() == std::vector<std::string>{"P0", "P3"});
}

TEST_CASE("overlay retrieval equals a full rebuild") {
  const Corpus full = random_corpus(120, 8);
  const Encoder m = model_for(full, 3);
  std::vector<PremiseRecord> base_ps(full.premises().begin(), full.premises().begin() + 70);
  std::vector<PremiseRecord> extra(full.premises().begin() + 70, full.premises().end());
  const auto base = std::make_shared<const IndexSnapshot>(build_snapshot(m, Corpus(base_ps, {}, {{"M", {}}}, {})));
  extra.push_back(base_ps[5]);  // already present, same signature: dropped
  const auto overlay = apply_delta(base, std::span<const PremiseRecord>(extra), m);
  CHECK(overlay.size() == 50);
  const auto rebuilt = build_snapshot(m, full);
  for (const char* text : {"w0 w1", "w5 w9 w33", "w12"}) {
    const auto q = m.encode(text);
    for (std::size_t k : {1u, 16u, 32u}) {
      const auto a = select_premises(q, k, std::nullopt, *base, &overlay);
      const auto b = select_premises(q, k, std::nullopt, rebuilt);
      CHECK(a.ranked == b.ranked);
    }
    std::vector<std::string> mask = {"P1", "P80", "P119", "P69"};
    CHECK(select_premises(q, 4, std::span<const std::string>(mask), *base, &overlay).ranked ==
          select_premises(q, 4, std::span<const std::string>(mask), rebuilt).ranked);
  }
  const auto empty = apply_delta(base, std::span<const PremiseRecord>(), m);
  CHECK(empty.size() == 0);
  CHECK(select_premises(m.encode("w3"), 8, std::nullopt, *base, &empty).ranked ==
        select_premises(m.encode("w3"), 8, std::nullopt, *base).ranked);
}

TEST_CASE("conflicting duplicates are rejected") {
  const Corpus corpus = random_corpus(10, 4);
  const Encoder m = model_for(corpus, 5);
  const auto base = std::make_shared<const IndexSnapshot>(build_snapshot(m, corpus));
  PremiseRecord clash = corpus.premises()[2];
  clash.signature += " w39";
  try {
    apply_delta(base, std::span<const PremiseRecord>(&clash, 1), m);
    FAIL("expected conflicting_duplicate");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::conflicting_duplicate);
  }
  PremiseRecord a = corpus.premises()[0], b;
  a.name = "New";
  b = a;
  b.signature += " w1";
  std::vector<PremiseRecord> twice = {a, b};
  CHECK_THROWS_AS(apply_delta(base, std::span<const PremiseRecord>(twice), m), Error);
}

TEST_CASE("snapshot io round trip and cache") {
  const Corpus corpus = random_corpus(30, 6);
  const Encoder m = model_for(corpus, 7);
  const auto snap = build_snapshot(m, corpus);
  std::stringstream buf;
  write_snapshot(snap, buf);
  const auto back = read_snapshot(buf);
  CHECK(back.names() == snap.names());
  CHECK(back.rows() == snap.rows());
  CHECK(back.signature_hashes() == snap.signature_hashes());
  CHECK(back.model_version() == snap.model_version());
  CHECK(back.corpus_snapshot_id() == snap.corpus_snapshot_id());

  const auto dir = std::filesystem::temp_directory_path() / "premise_index_cache_test";
  std::filesystem::remove_all(dir);
  bool built = false;
  const auto first = load_or_build_snapshot(dir, m, corpus, &built);
  CHECK(built);
  const auto second = load_or_build_snapshot(dir, m, corpus, &built);
  CHECK_FALSE(built);
  CHECK(second->rows() == first->rows());
  std::filesystem::remove_all(dir);
}
