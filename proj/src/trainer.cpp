#include "premise/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <unordered_map>

namespace premise {

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(temperature > 0)) throw std::invalid_argument("temperature must be > 0");
  if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be > 0");
  if (dim < 1) throw std::invalid_argument("dim must be >= 1");
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
}

std::vector<std::string> TrainBatch::negative_names(std::size_t i) const {
  std::vector<std::string> out;
  for (Eigen::Index row : layout.negatives.at(i)) out.push_back(candidates[static_cast<std::size_t>(row)]);
  return out;
}

TrainBatch assemble_batch(std::vector<BatchExample> examples, const SignatureLookup& signature) {
  TrainBatch batch;
  std::unordered_map<std::string, Eigen::Index> row_of;
  auto add = [&](const std::string& name) {
    auto [it, inserted] = row_of.try_emplace(name, static_cast<Eigen::Index>(batch.candidates.size()));
    if (inserted) {
      batch.candidates.push_back(name);
      batch.candidate_texts.push_back(signature(name));
    }
    return it->second;
  };
  for (auto& ex : examples) {
    std::sort(ex.positive_set.begin(), ex.positive_set.end());
    ex.positive_set.erase(std::unique(ex.positive_set.begin(), ex.positive_set.end()), ex.positive_set.end());
    if (!std::binary_search(ex.positive_set.begin(), ex.positive_set.end(), ex.positive))
      throw std::invalid_argument("positive '" + ex.positive + "' is not in its state's positive set");
    batch.layout.positive.push_back(add(ex.positive));
    for (const auto& n : ex.negatives) {
      if (std::binary_search(ex.positive_set.begin(), ex.positive_set.end(), n))
        throw std::invalid_argument("sampled negative '" + n + "' is a positive of its own state");
      add(n);
    }
  }
  for (const auto& ex : examples) {
    std::vector<Eigen::Index> mask;
    for (std::size_t c = 0; c < batch.candidates.size(); ++c) {
      if (!std::binary_search(ex.positive_set.begin(), ex.positive_set.end(), batch.candidates[c]))
        mask.push_back(static_cast<Eigen::Index>(c));
    }
    batch.layout.negatives.push_back(std::move(mask));
  }
  batch.examples = std::move(examples);
  return batch;
}

TrainingSet::TrainingSet(const Corpus& corpus) : corpus_(&corpus) {
  const auto& states = corpus.states();
  pools_.resize(states.size());
  for (std::size_t s = 0; s < states.size(); ++s) {
    const auto& pos = states[s].positive_premises;
    for (std::size_t j = 0; j < pos.size(); ++j) pairs_.emplace_back(s, j);
    if (pos.empty()) continue;
    for (auto& name : corpus.accessible_premises(states[s])) {
      if (!std::binary_search(pos.begin(), pos.end(), name)) pools_[s].push_back(std::move(name));
    }
  }
}

TrainBatch TrainingSet::sample(const TrainConfig& config, std::mt19937_64& rng) const {
  if (pairs_.empty()) throw Error(ErrorCode::empty_corpus, "corpus has no (state, positive) pairs");
  std::uniform_int_distribution<std::size_t> pick_pair(0, pairs_.size() - 1);
  std::vector<BatchExample> examples;
  examples.reserve(config.batch_size);
  std::size_t short_draws = 0;
  for (std::size_t b = 0; b < config.batch_size; ++b) {
    const auto [s, slot] = pairs_[pick_pair(rng)];
    const StateRecord& state = corpus_->states()[s];
    BatchExample ex;
    ex.state_text = state.state_text;
    ex.positive_set = state.positive_premises;
    ex.positive = state.positive_premises[slot];

    const auto& pool = pools_[s];
    const std::size_t want = config.negatives_per_pair;
    if (pool.size() <= want) {
      short_draws += want - pool.size();
      ex.negatives = pool;
    } else {
      // Floyd's algorithm: a uniform `want`-subset of the pool.
      std::set<std::size_t> chosen;
      for (std::size_t j = pool.size() - want; j < pool.size(); ++j) {
        const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
        if (!chosen.insert(t).second) chosen.insert(j);
      }
      for (std::size_t idx : chosen) ex.negatives.push_back(pool[idx]);
    }
    examples.push_back(std::move(ex));
  }
  auto lookup = [this](const std::string& name) -> const std::string& {
    return corpus_->find_premise(name)->signature;
  };
  TrainBatch batch = assemble_batch(std::move(examples), lookup);
  batch.short_negative_draws = short_draws;
  return batch;
}

TrainBatch sample_batch(const Corpus& corpus, const TrainConfig& config, std::mt19937_64& rng) {
  return TrainingSet(corpus).sample(config, rng);
}

LossReport masked_contrastive_loss(const Encoder& model, const TrainBatch& batch, double temperature,
                                   EncoderGradients* grads) {
  std::vector<std::string> state_texts;
  state_texts.reserve(batch.size());
  for (const auto& ex : batch.examples) state_texts.push_back(ex.state_text);
  const auto states = encode_forward(model, std::span<const std::string>(state_texts));
  const auto cands = encode_forward(model, std::span<const std::string>(batch.candidate_texts));
  const auto r = masked_infonce(states.outputs, cands.outputs, batch.layout, temperature, grads != nullptr);

  LossReport report;
  report.loss = r.loss;
  report.per_example.assign(r.per_example.data(), r.per_example.data() + r.per_example.size());
  if (grads != nullptr) {
    auto local = model.zero_gradients();
    accumulate_gradients(model, states, r.grad_states, local);
    accumulate_gradients(model, cands, r.grad_candidates, local);
    report.grad_norm = std::sqrt(local.squared_norm());
    *grads += local;
  }
  return report;
}

Encoder initial_model(const Corpus& corpus, const TrainConfig& config) {
  std::vector<std::string> texts;
  for (const auto& p : corpus.premises()) texts.push_back(p.signature);
  for (const auto& s : corpus.states()) texts.push_back(s.state_text);
  return Encoder::random(Tokenizer::build(texts, config.max_len), config.dim, config.seed);
}

TrainResult train(const Corpus& corpus, const TrainConfig& config, std::optional<Encoder> initial) {
  config.validate();
  Encoder model = initial ? std::move(*initial) : initial_model(corpus, config);
  TrainResult result{std::move(model), {}, 0};
  if (config.steps == 0) return result;

  const TrainingSet data(corpus);
  // Separate stream from the parameter initialization.
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  Encoder& m = result.model;
  for (std::size_t step = 1; step <= config.steps; ++step) {
    const TrainBatch batch = data.sample(config, rng);
    result.short_negative_draws += batch.short_negative_draws;
    auto grads = m.zero_gradients();
    const LossReport report = masked_contrastive_loss(m, batch, config.temperature, &grads);
    if (!std::isfinite(report.loss) || !std::isfinite(report.grad_norm)) {
      throw Error(ErrorCode::non_finite_loss, "non-finite loss at step " + std::to_string(step) +
                                                  " (loss=" + std::to_string(report.loss) +
                                                  ", grad_norm=" + std::to_string(report.grad_norm) + ")");
    }
    result.curve.push_back({step, report.loss, report.grad_norm});
    m.apply_gradients(grads, config.learning_rate);
  }
  m.refresh_version();
  return result;
}

void write_loss_csv(const std::vector<LossPoint>& curve, std::ostream& out) {
  out << "step,loss,grad_norm\n";
  out.precision(17);
  for (const auto& p : curve) out << p.step << ',' << p.loss << ',' << p.grad_norm << '\n';
}

}  // namespace premise
