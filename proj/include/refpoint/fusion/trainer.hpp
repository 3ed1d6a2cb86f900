#pragma once

#include "refpoint/fusion/adam.hpp"
#include "refpoint/fusion/config.hpp"
#include "refpoint/fusion/dataset.hpp"

#include <functional>
#include <span>
#include <vector>

namespace refpoint::fusion {

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;

    bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;  // 1-based; 0 before the first epoch

    bool operator==(const TrainHistory&) const = default;
};

/// Trained network plus the input normalization it expects.
struct FusionModel {
    NetworkConfig net;
    Normalizer norm;
    std::vector<float> params;
    std::uint64_t seed = 0;

    /// Raw (unnormalized) fused direction per sample.
    std::vector<Vec3> predict(std::span<const SampleTensor> samples) const;
};

/// Everything needed to continue training bit-exactly.
struct TrainState {
    std::vector<float> params;  // after the last completed epoch
    AdamState adam;
    double lr = 0.0;
    int wait = 0;
    double best_val = 0.0;
    int epochs_done = 0;
};

struct TrainResult {
    FusionModel model;  // parameters of the best validation epoch
    TrainHistory history;
    TrainState state;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam on the mean angular distance. Batches are reshuffled each
/// epoch from (seed, epoch); the learning rate is multiplied by plateau_factor
/// after plateau_patience epochs without a new validation minimum.
/// With `resume`, continues from its state until cfg.epochs epochs are done.
/// Throws Errc::EmptySplit, Errc::NumericalFailure.
TrainResult train(std::span<const SampleTensor> train_set, std::span<const SampleTensor> val_set,
                  const NetworkConfig& net, const TrainConfig& cfg, const TrainResult* resume = nullptr,
                  const EpochCallback& on_epoch = {});

/// Mean angular distance of the model over the samples, radians.
double evaluate_loss(const FusionModel& model, std::span<const SampleTensor> samples);

}  // namespace refpoint::fusion
