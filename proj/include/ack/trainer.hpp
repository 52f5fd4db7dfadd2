#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "ack/dataset.hpp"
#include "ack/network.hpp"

namespace ack {

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  bool shuffle = true;
  // Step decay: lr *= decay_factor every decay_every epochs (0 disables).
  double decay_factor = 1.0;
  std::size_t decay_every = 0;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double mean_loss = 0.0;       // over the epoch's training samples, before each update
  double train_accuracy = 0.0;  // same samples, same forward passes
  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t steps = 0;
  friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Minibatch SGD with momentum (v = mu v + g; w -= lr v) on mean cross-entropy.
// Samples are shuffled each epoch with Rng(seed) (mt19937_64 + Fisher-Yates).
// Gradients are computed on fixed 8-sample shards and summed in shard order,
// so results are bitwise independent of ACK_THREADS.
// Throws DivergenceError on a non-finite loss.
TrainReport train(Network& net, const Dataset& data, const TrainConfig& config, const EpochCallback& on_epoch = {});

struct EvalResult {
  double top1 = 0.0;
  double mean_loss = 0.0;
};

// Argmax ties go to the lowest class index.
EvalResult evaluate(const Network& net, const Dataset& data);
EvalResult evaluate_probs(const Tensor& probs, const std::vector<std::size_t>& labels);

// Runs net.forward over the dataset in fixed chunks, possibly in parallel.
Tensor predict(const Network& net, const Tensor& images);

inline constexpr std::size_t kShardSize = 8;

}  // namespace ack
