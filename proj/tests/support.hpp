#pragma once

// Independent reference implementations used as test oracles. They follow
// the definitions directly (double loops, full sorts, set logic on names) and
// share no code with the library paths they check.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "premise/corpus.hpp"
#include "premise/encoder.hpp"
#include "premise/index.hpp"
#include "premise/trainer.hpp"

namespace premise::testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(PREMISE_FIXTURE_DIR) / name;
}

inline std::filesystem::path golden(const std::string& name) {
  return std::filesystem::path(PREMISE_GOLDEN_DIR) / name;
}

// N_i straight from the definition: every positive and sampled negative of
// the batch, minus the positives of state i, deduplicated by name.
inline std::set<std::string> naive_negative_set(const TrainBatch& batch, std::size_t i) {
  std::set<std::string> pool;
  for (const auto& ex : batch.examples) {
    pool.insert(ex.positive);
    pool.insert(ex.negatives.begin(), ex.negatives.end());
  }
  for (const auto& p : batch.examples[i].positive_set) pool.erase(p);
  return pool;
}

// Scalar encoder forward pass: mean of embedding rows, projection, L2 norm.
inline std::vector<double> naive_encode(const Encoder& model, const std::string& text) {
  const auto ids = model.tokenizer().tokenize(text);
  const auto d = static_cast<std::size_t>(model.dim());
  std::vector<double> u(d, 0.0);
  if (ids.empty()) {
    for (std::size_t j = 0; j < d; ++j) u[j] = model.embedding_table()(Tokenizer::kEmptyId, static_cast<Eigen::Index>(j));
  } else {
    for (auto t : ids)
      for (std::size_t j = 0; j < d; ++j) u[j] += model.embedding_table()(t, static_cast<Eigen::Index>(j));
    for (auto& x : u) x /= static_cast<double>(ids.size());
  }
  std::vector<double> z(d, 0.0);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c)
      z[r] += model.projection()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * u[c];
  double n = 0;
  for (double x : z) n += x * x;
  n = std::sqrt(n);
  for (auto& x : z) x /= n;
  return z;
}

inline double naive_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Masked loss by direct evaluation of -log(e^{s+/t} / (e^{s+/t} + sum e^{s-/t})).
inline double naive_masked_loss(const Encoder& model, const TrainBatch& batch, double tau,
                                 const std::map<std::string, std::string>& signature) {
  double total = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& ex = batch.examples[i];
    const auto s = naive_encode(model, ex.state_text);
    const double pos = naive_dot(s, naive_encode(model, signature.at(ex.positive))) / tau;
    double denom = std::exp(pos);
    for (const auto& n : naive_negative_set(batch, i))
      denom += std::exp(naive_dot(s, naive_encode(model, signature.at(n))) / tau);
    total += -std::log(std::exp(pos) / denom);
  }
  return total / static_cast<double>(batch.size());
}

// Top-k by sorting every candidate: score descending, then name ascending.
inline std::vector<ScoredName> brute_force_topk(const std::vector<double>& query,
                                                const std::vector<std::pair<std::string, std::vector<double>>>& rows,
                                                std::size_t k) {
  std::vector<ScoredName> all;
  for (const auto& [name, v] : rows) all.push_back({name, naive_dot(query, v)});
  std::sort(all.begin(), all.end(), [](const ScoredName& a, const ScoredName& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.name < b.name;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

// Small deterministic model trained on the worked-example corpus; the golden
// retrieval responses are produced with it.
inline Encoder worked_example_model(const Corpus& corpus) {
  TrainConfig cfg;
  cfg.dim = 16;
  cfg.steps = 60;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.2;
  cfg.seed = 7;
  return train(corpus, cfg).model;
}

// Premise i carries symbols {Si-1, Si}; from goal {S0} each link has mark 1/2.
inline std::vector<std::pair<std::string, std::set<std::string>>> symbol_chain(std::size_t n = 20) {
  std::vector<std::pair<std::string, std::set<std::string>>> out;
  for (std::size_t i = 1; i <= n; ++i) {
    char name[8];
    std::snprintf(name, sizeof name, "P%02zu", i);
    out.push_back({name, {"S" + std::to_string(i - 1), "S" + std::to_string(i)}});
  }
  return out;
}

// Random small contrastive problem: premises p0..p{n-1} over a fixed word
// list, B examples, B- negatives each, random non-identity projection.
struct TinyInstance {
  Encoder model;
  TrainBatch batch;
  std::map<std::string, std::string> signature;
};

inline TinyInstance tiny_instance(std::uint64_t seed, Eigen::Index d = 8, std::size_t B = 2, std::size_t negatives = 1,
                                  std::size_t num_premises = 6) {
  static const std::vector<std::string> words = {"alpha", "beta", "gamma", "delta", "eps", "zeta",
                                                 "eta",   "theta", "iota", "kappa", "lam", "mu"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> word(0, words.size() - 1);
  auto phrase = [&](std::size_t n) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) out += (i ? " " : "") + words[word(rng)];
    return out;
  };
  std::map<std::string, std::string> sig;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < num_premises; ++i) {
    names.push_back("p" + std::to_string(i));
    sig[names.back()] = phrase(2 + i % 3);
  }
  std::vector<BatchExample> examples;
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<std::string> shuffled = names;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    BatchExample ex;
    ex.state_text = phrase(3 + b % 2);
    const std::size_t num_pos = 1 + rng() % 2;
    ex.positive_set.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(num_pos));
    ex.positive = ex.positive_set.front();
    for (std::size_t j = 0; j < negatives && num_pos + j < shuffled.size(); ++j) ex.negatives.push_back(shuffled[num_pos + j]);
    examples.push_back(std::move(ex));
  }
  TrainBatch batch = assemble_batch(examples, [&sig](const std::string& n) -> const std::string& { return sig.at(n); });
  std::vector<std::string> texts(words.begin(), words.end());
  Encoder model = Encoder::random(Tokenizer::build(texts), d, seed + 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c) model.mutable_projection()(r, c) = (r == c ? 1.0 : 0.0) + 0.3 * normal(rng);
  model.refresh_version();
  return {std::move(model), std::move(batch), std::move(sig)};
}

struct GradientCheck {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double worst_excess = 0;  // max of |a - n| - tolerance over failures
};

// Central differences over every parameter against the analytic gradient.
inline GradientCheck finite_difference_check(Encoder model, const TrainBatch& batch, double tau,
                                             double rel = 1e-3, double abs_floor = 1e-6, double h = 1e-5) {
  auto grads = model.zero_gradients();
  masked_contrastive_loss(model, batch, tau, &grads);
  GradientCheck out;
  auto probe = [&](Encoder::Matrix& param, const Encoder::Matrix& analytic) {
    for (Eigen::Index r = 0; r < param.rows(); ++r) {
      for (Eigen::Index c = 0; c < param.cols(); ++c) {
        const double saved = param(r, c);
        param(r, c) = saved + h;
        const double up = masked_contrastive_loss(model, batch, tau).loss;
        param(r, c) = saved - h;
        const double down = masked_contrastive_loss(model, batch, tau).loss;
        param(r, c) = saved;
        const double numeric = (up - down) / (2 * h);
        const double a = analytic(r, c);
        const double tol = std::max(abs_floor, rel * std::max(std::abs(a), std::abs(numeric)));
        ++out.checked;
        if (std::abs(a - numeric) > tol) {
          ++out.failures;
          out.worst_excess = std::max(out.worst_excess, std::abs(a - numeric) - tol);
        }
      }
    }
  };
  probe(model.mutable_embedding_table(), grads.embedding_table);
  probe(model.mutable_projection(), grads.projection);
  return out;
}

}  // namespace premise::testing
