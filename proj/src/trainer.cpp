#include "ack/trainer.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "ack/error.hpp"
#include "ack/kernels.hpp"
#include "ack/parallel.hpp"
#include "ack/rng.hpp"

namespace ack {

namespace {

std::size_t argmax_lowest(std::span<const Real> row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

void check_shapes(const Network& net, const Dataset& data) {
  data.validate();
  if (data.size() == 0) throw ConfigError("dataset is empty");
  const Shape expected = net.spec().input_shape(data.size());
  if (data.images.shape() != expected) {
    throw DimensionError("network expects images " + expected.str() + ", dataset has " + data.images.shape().str());
  }
  if (data.classes > net.spec().classes()) {
    throw ConfigError("dataset has " + std::to_string(data.classes) + " classes, network predicts " +
                      std::to_string(net.spec().classes()));
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be finite and >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (!(decay_factor > 0.0)) throw ConfigError("decay factor must be > 0");
}

TrainReport train(Network& net, const Dataset& data, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  check_shapes(net, data);

  Rng rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<Real> params = net.flat_params();
  std::vector<Real> velocity(params.size(), 0.0);
  TrainReport report;
  double lr = config.learning_rate;
  const std::size_t classes = net.spec().classes();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.decay_every > 0 && epoch > 0 && epoch % config.decay_every == 0) lr *= config.decay_factor;
    if (config.shuffle) rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      const std::size_t shards = (count + kShardSize - 1) / kShardSize;
      std::vector<BatchGradients> results(shards);
      std::vector<std::size_t> shard_correct(shards, 0);
      parallel_for(shards, [&](std::size_t s) {
        const std::size_t first = start + s * kShardSize;
        const std::size_t n = std::min(kShardSize, start + count - first);
        std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(first),
                                      order.begin() + static_cast<std::ptrdiff_t>(first + n));
        Dataset shard = data.gather(rows);
        Trace trace = net.forward_train(shard.images);
        results[s] = net.backward(trace, shard.labels);
        for (std::size_t i = 0; i < n; ++i) {
          if (argmax_lowest(trace.probs.data().subspan(i * classes, classes)) == shard.labels[i]) ++shard_correct[s];
        }
      });

      double batch_loss = 0.0;
      std::vector<Real> grad(params.size(), 0.0);
      for (std::size_t s = 0; s < shards; ++s) {
        batch_loss += results[s].loss_sum;
        correct += shard_correct[s];
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += results[s].gradient[i];
      }
      ++report.steps;
      if (!std::isfinite(batch_loss)) throw DivergenceError(report.steps, "non-finite loss");
      loss_sum += batch_loss;

      const Real inv = 1.0 / static_cast<Real>(count);
      for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = config.momentum * velocity[i] + grad[i] * inv;
        params[i] -= lr * velocity[i];
      }
      net.set_flat_params(params);
    }

    EpochStats stats{epoch + 1, lr, loss_sum / static_cast<double>(data.size()),
                     static_cast<double>(correct) / static_cast<double>(data.size())};
    report.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return report;
}

Tensor predict(const Network& net, const Tensor& images) {
  constexpr std::size_t kChunk = 32;
  const std::size_t n = images.shape().n;
  const std::size_t classes = net.spec().classes();
  Tensor probs({n, classes, 1, 1});
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t first = c * kChunk;
    const std::size_t count = std::min(kChunk, n - first);
    Tensor p = net.forward(images.slice_batch(first, count));
    std::copy(p.data().begin(), p.data().end(), probs.raw() + first * classes);
  });
  return probs;
}

EvalResult evaluate_probs(const Tensor& probs, const std::vector<std::size_t>& labels) {
  if (labels.empty()) throw ConfigError("cannot evaluate on an empty dataset");
  const std::size_t k = probs.shape().c * probs.shape().h * probs.shape().w;
  if (probs.shape().n != labels.size()) throw DimensionError("prediction and label counts differ");
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto row = probs.data().subspan(i * k, k);
    if (argmax_lowest(row) == labels[i]) ++correct;
    loss += cross_entropy(row, labels[i]);
  }
  const double n = static_cast<double>(labels.size());
  return {static_cast<double>(correct) / n, loss / n};
}

EvalResult evaluate(const Network& net, const Dataset& data) {
  if (data.size() == 0) throw ConfigError("cannot evaluate on an empty dataset");
  check_shapes(net, data);
  return evaluate_probs(predict(net, data.images), data.labels);
}

}  // namespace ack
