#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "transfact/config.hpp"
#include "transfact/features.hpp"
#include "transfact/losses.hpp"
#include "transfact/model.hpp"
#include "transfact/videodata.hpp"

namespace transfact {

/// One video ready for the network.
struct Sample {
    std::string id;
    FeatureSequence input;
    std::optional<FeatureSequence> mhi;
    std::vector<StageLabel> labels;
    Transfer transfer = Transfer::T;

    /// First `length` frames.
    Sample truncated(int length) const;
};

struct Dataset {
    std::vector<Sample> train;
    std::vector<Sample> val;
    std::vector<Sample> test;
};

/// Loads labels from the TFV1 files and features from `feature_dir` for the
/// modalities the model needs.
Dataset load_dataset(const std::filesystem::path& manifest_path, const std::filesystem::path& feature_dir,
                     const ModelConfig& model);

/// Linear warm-up to the base rate, constant afterwards.
double warmup_lr(std::int64_t step, const TrainConfig& config);

/// Decoupled-weight-decay adaptive moments.
struct AdamState {
    std::int64_t step = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;

    friend bool operator==(const AdamState&, const AdamState&) = default;
};

AdamState make_adam_state(const Parameters& params);

/// One update: p <- p - lr*wd*p, then p <- p - lr * mhat / (sqrt(vhat) + eps).
void adamw_step(Parameters& params, const std::vector<Matrix>& grads, AdamState& state, double lr,
                const TrainConfig& config);

struct Checkpoint {
    ModelConfig model;
    TrainConfig train;
    Parameters params;
    AdamState optimizer;
    int epoch = -1;
    double val_loss = 0.0;

    std::uint64_t config_fingerprint() const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// `expected_fingerprint`, when given, must match the stored one.
Checkpoint decode_checkpoint(std::vector<std::uint8_t> bytes, const std::string& source = "<memory>",
                             std::optional<std::uint64_t> expected_fingerprint = std::nullopt);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint64_t> expected_fingerprint = std::nullopt);

struct EpochRecord {
    int epoch = 0;
    LossBreakdown train;
    LossBreakdown val;
    double val_trans_accuracy = 0.0;
    double val_frame_accuracy = 0.0;
};

struct TrainResult {
    Checkpoint best;
    Checkpoint last;
    std::vector<EpochRecord> history;
};

struct TrainHooks {
    /// Called after every epoch with the current state.
    std::function<void(const Checkpoint& last, const EpochRecord&)> on_epoch;
    /// Per-step loss rows (step, trans, frame, stage, cross, smooth, total).
    std::function<void(std::int64_t step, const LossBreakdown&)> on_step;
    bool verbose = false;
};

/// Deterministic given config.seed. Resuming from a checkpoint continues at
/// checkpoint.epoch + 1 and reproduces the uninterrupted run.
TrainResult train(const ModelConfig& model, const TrainConfig& config, const Dataset& data,
                  const TrainHooks& hooks = {}, const Checkpoint* resume = nullptr);

/// Gradients of the batch-mean loss; used by training and the gradient checks.
LossBreakdown batch_gradients(const ModelConfig& model, const Parameters& params, const LossWeights& weights,
                              const std::vector<const Sample*>& batch, std::vector<Matrix>& grads);

struct Prediction {
    std::string id;
    int transfer = 0;
    int truth = 0;
    std::vector<int> stages;
    std::vector<StageLabel> stage_truth;
};

std::vector<Prediction> predict(const ModelConfig& model, const Parameters& params,
                                const std::vector<Sample>& samples);

/// Mean loss breakdown over samples (no gradients).
LossBreakdown evaluate_loss(const ModelConfig& model, const Parameters& params, const LossWeights& weights,
                            const std::vector<Sample>& samples);

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

} // namespace transfact
