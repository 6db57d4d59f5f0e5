#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "premise/eval.hpp"
#include "premise/trainer.hpp"
#include "support.hpp"

using namespace premise;
using premise::testing::naive_negative_set;

namespace {

// One module, premises a..d before the state plus its positive e.
Corpus pool_corpus() {
  std::vector<PremiseRecord> premises;
  std::int64_t idx = 0;
  for (const char* n : {"a", "b", "c", "d", "e"}) {
    PremiseRecord p;
    p.name = n;
    p.signature = std::string("theorem ") + n + " : Rel";
    p.module = "M";
    p.decl_index = idx++;
    premises.push_back(p);
  }
  StateRecord s;
  s.state_text = "⊢ Rel";
  s.theorem_name = "goal";
  s.positive_premises = {"e"};
  s.module = "M";
  s.decl_index = 10;
  return Corpus(premises, {s}, {{"M", {}}}, {});
}

Corpus small_synthetic(std::uint64_t seed = 2) {
  SyntheticSpec spec;
  spec.num_premises = 60;
  spec.num_states = 40;
  spec.num_modules = 4;
  spec.seed = seed;
  return generate_synthetic(spec).corpus;
}

}  // namespace

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.temperature = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.learning_rate = -1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("negatives are uniform subsets of the pool") {
  const Corpus corpus = pool_corpus();
  const TrainingSet data(corpus);
  REQUIRE(data.negative_pool(0).size() == 4);
  TrainConfig cfg;
  cfg.batch_size = 1;
  cfg.negatives_per_pair = 2;
  std::mt19937_64 rng(123);
  std::map<std::set<std::string>, int> counts;
  const int draws = 12000;
  for (int i = 0; i < draws; ++i) {
    const auto batch = data.sample(cfg, rng);
    const auto& neg = batch.examples[0].negatives;
    REQUIRE(neg.size() == 2);
    std::set<std::string> subset(neg.begin(), neg.end());
    REQUIRE(subset.size() == 2);
    CHECK_FALSE(subset.contains("e"));
    ++counts[subset];
  }
  REQUIRE(counts.size() == 6);
  const double expected = draws / 6.0;
  double chi2 = 0;
  for (const auto& [subset, n] : counts) chi2 += (n - expected) * (n - expected) / expected;
  const double df = 5;
  CHECK(chi2 < df + 3 * std::sqrt(2 * df));
}

TEST_CASE("small pools are used whole and the shortfall counted") {
  const Corpus corpus = pool_corpus();
  TrainConfig cfg;
  cfg.batch_size = 3;
  cfg.negatives_per_pair = 6;
  std::mt19937_64 rng(1);
  const auto batch = sample_batch(corpus, cfg, rng);
  CHECK(batch.short_negative_draws == 3 * 2);
  for (const auto& ex : batch.examples) CHECK(ex.negatives.size() == 4);
}

TEST_CASE("assemble_batch rejects inconsistent examples") {
  const std::map<std::string, std::string> sig = {{"p", "x"}, {"q", "y"}};
  const auto lookup = [&sig](const std::string& n) -> const std::string& { return sig.at(n); };
  CHECK_THROWS_AS(assemble_batch({{"s", {"p", "q"}, "p", {"q"}}}, lookup), std::invalid_argument);
  CHECK_THROWS_AS(assemble_batch({{"s", {"p"}, "q", {}}}, lookup), std::invalid_argument);
}

TEST_CASE("sampled batch masks equal the set definition") {
  const Corpus corpus = small_synthetic();
  const TrainingSet data(corpus);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.negatives_per_pair = 3;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto batch = data.sample(cfg, rng);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto names = batch.negative_names(i);
      const std::set<std::string> got(names.begin(), names.end());
      CHECK(got.size() == names.size());
      CHECK(got == naive_negative_set(batch, i));
      const auto& pos = batch.examples[i].positive_set;
      for (const auto& n : batch.examples[i].negatives) CHECK_FALSE(std::binary_search(pos.begin(), pos.end(), n));
    }
  }
}

TEST_CASE("sampled batch loss equals the direct definition") {
  const Corpus corpus = small_synthetic();
  const TrainingSet data(corpus);
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.dim = 8;
  const Encoder model = initial_model(corpus, cfg);
  std::map<std::string, std::string> sig;
  for (const auto& p : corpus.premises()) sig[p.name] = p.signature;
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto batch = data.sample(cfg, rng);
    CHECK(masked_contrastive_loss(model, batch, 0.05).loss ==
          doctest::Approx(premise::testing::naive_masked_loss(model, batch, 0.05, sig)).epsilon(1e-9));
  }
}

TEST_CASE("zero steps leaves the initial model") {
  const Corpus corpus = small_synthetic();
  TrainConfig cfg;
  cfg.steps = 0;
  cfg.dim = 8;
  const auto r = train(corpus, cfg);
  CHECK(r.curve.empty());
  CHECK(r.model.version() == initial_model(corpus, cfg).version());
}

TEST_CASE("training is deterministic for a fixed seed") {
  const Corpus corpus = small_synthetic();
  TrainConfig cfg;
  cfg.steps = 15;
  cfg.batch_size = 16;
  cfg.dim = 8;
  cfg.learning_rate = 0.1;
  cfg.seed = 42;
  const auto a = train(corpus, cfg);
  const auto b = train(corpus, cfg);
  CHECK(a.model.version() == b.model.version());
  REQUIRE(a.curve.size() == 15);
  for (std::size_t i = 0; i < a.curve.size(); ++i) CHECK(a.curve[i].loss == b.curve[i].loss);
  cfg.seed = 43;
  CHECK(train(corpus, cfg).model.version() != a.model.version());
}

TEST_CASE("training lowers the loss") {
  const Corpus corpus = small_synthetic();
  TrainConfig cfg;
  cfg.steps = 200;
  cfg.batch_size = 32;
  cfg.dim = 16;
  cfg.learning_rate = 0.2;
  cfg.seed = 1;
  const auto r = train(corpus, cfg);
  double tail = 0;
  for (std::size_t i = r.curve.size() - 20; i < r.curve.size(); ++i) tail += r.curve[i].loss;
  tail /= 20;
  CHECK(tail < 0.8 * r.curve.front().loss);
}

TEST_CASE("loss curve csv") {
  std::ostringstream out;
  write_loss_csv({{1, 2.5, 0.25}, {2, 1.5, 0.125}}, out);
  CHECK(out.str() == "step,loss,grad_norm\n1,2.5,0.25\n2,1.5,0.125\n");
}
