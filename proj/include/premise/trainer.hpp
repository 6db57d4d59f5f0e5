#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "premise/corpus.hpp"
#include "premise/encoder.hpp"
#include "premise/loss.hpp"

namespace premise {

struct TrainConfig {
  std::size_t batch_size = 256;
  std::size_t negatives_per_pair = 3;
  double temperature = 0.05;
  double learning_rate = 2e-4;
  std::size_t steps = 1000;
  std::uint64_t seed = 0;
  Eigen::Index dim = 64;
  std::size_t max_len = Tokenizer::kDefaultMaxLen;

  void validate() const;
};

// One (state, positive) pair with its sampled negatives. `positive_set` is the
// whole ground-truth set P_s+ of the state.
struct BatchExample {
  std::string state_text;
  std::vector<std::string> positive_set;  // sorted
  std::string positive;
  std::vector<std::string> negatives;
};

struct TrainBatch {
  std::vector<BatchExample> examples;
  // Distinct premises of the batch in first-appearance order.
  std::vector<std::string> candidates;
  std::vector<std::string> candidate_texts;
  // N_i = (all positives and negatives of the batch) \ P_{s_i}+, as candidate rows.
  ContrastiveLayout layout;
  std::size_t short_negative_draws = 0;

  std::size_t size() const { return examples.size(); }
  // Names of N_i, for inspection.
  std::vector<std::string> negative_names(std::size_t i) const;
};

using SignatureLookup = std::function<const std::string&(const std::string&)>;

// Builds candidates and masks; pure function of the examples.
TrainBatch assemble_batch(std::vector<BatchExample> examples, const SignatureLookup& signature);

// Pairs and negative pools precomputed once from a filtered corpus.
class TrainingSet {
 public:
  explicit TrainingSet(const Corpus& corpus);

  std::size_t num_pairs() const { return pairs_.size(); }
  const Corpus& corpus() const { return *corpus_; }
  // Accessible premises of state `s` that are not among its positives.
  const std::vector<std::string>& negative_pool(std::size_t s) const { return pools_[s]; }

  // Uniform pairs (with replacement), uniform negatives per pair without
  // replacement. A pool smaller than B- contributes all of its members and
  // the shortfall is counted in `short_negative_draws`.
  TrainBatch sample(const TrainConfig& config, std::mt19937_64& rng) const;

 private:
  const Corpus* corpus_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;  // (state, positive slot)
  std::vector<std::vector<std::string>> pools_;
};

TrainBatch sample_batch(const Corpus& corpus, const TrainConfig& config, std::mt19937_64& rng);

struct LossReport {
  double loss = 0;
  std::vector<double> per_example;
  double grad_norm = 0;
};

// Encodes every state and candidate of the batch and evaluates the masked
// loss. When `grads` is non-null the exact parameter gradient is added into it.
LossReport masked_contrastive_loss(const Encoder& model, const TrainBatch& batch, double temperature,
                                   EncoderGradients* grads = nullptr);

struct LossPoint {
  std::size_t step;
  double loss;
  double grad_norm;
};

struct TrainResult {
  Encoder model;
  std::vector<LossPoint> curve;
  std::size_t short_negative_draws = 0;
};

// Vocabulary from every premise signature and state text; random parameters.
Encoder initial_model(const Corpus& corpus, const TrainConfig& config);

// `steps` plain SGD updates at a fixed learning rate on exact gradients.
TrainResult train(const Corpus& corpus, const TrainConfig& config,
                  std::optional<Encoder> initial = std::nullopt);

void write_loss_csv(const std::vector<LossPoint>& curve, std::ostream& out);

}  // namespace premise
