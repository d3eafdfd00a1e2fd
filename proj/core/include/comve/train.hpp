#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "comve/checkpoint.hpp"
#include "comve/data.hpp"
#include "comve/models.hpp"

namespace comve {

struct TrainConfig {
    Task task = Task::sen_making;
    double learning_rate = 3e-4; // desk-scale default; 2e-5 suits large warm starts
    size_t batch_size = 48;
    size_t epochs = 10;
    uint64_t seed = 1;
    size_t eval_every = 0; // steps between dev evals; 0 = end of every epoch
    size_t patience = 3;   // non-improving evals before stopping; 0 disables
    bool hint_enabled = true;
    std::optional<std::string> transfer_checkpoint; // warm-start encoder from here
    ModelConfig model;
};

struct TrainData {
    DatasetSplit train;
    DatasetSplit dev;
    std::optional<DatasetSplit> test;
};

struct EvalRecord {
    uint64_t step = 0;
    double train_loss = 0.0; // mean batch loss since the previous eval
    double dev_accuracy = 0.0;
};

struct RunHistory {
    std::vector<EvalRecord> records;
    std::optional<double> final_test_accuracy;
};

struct TrainResult {
    Checkpoint best;
    RunHistory history;
};

/// Seeded per-epoch shuffling, AdamW updates, dev evals on the configured
/// cadence. Keeps the checkpoint with the best dev accuracy (ties keep the
/// earlier step). Bitwise deterministic for a fixed config, including across
/// thread counts: per-instance gradients are reduced in instance order.
TrainResult train(const TrainConfig& config, const TrainData& data,
                  std::shared_ptr<const Vocab> vocab, size_t threads = 1,
                  const std::optional<Checkpoint>& transfer_source = std::nullopt);

struct Prediction {
    std::string id;
    int predicted = 0;
    std::vector<double> probabilities;
};

struct Evaluation {
    double accuracy = 0.0;
    std::vector<Prediction> predictions;
};

Evaluation evaluate(const Model& model, Task task, bool hint_enabled,
                    const DatasetSplit& split, size_t threads = 1);
Evaluation evaluate(const Checkpoint& checkpoint, std::shared_ptr<const Vocab> vocab,
                    const DatasetSplit& split, size_t threads = 1);

/// Mean cross-entropy of the true labels under the model.
double mean_loss(const Model& model, Task task, bool hint_enabled, const DatasetSplit& split,
                 size_t threads = 1);

struct EnsembleVote {
    std::string id;
    int label = 0;
};

/// Per-id plurality vote over member predictions. Ties go to the highest
/// summed probability among the tied labels, then the lowest label. All
/// members must cover the same id set.
std::vector<EnsembleVote> ensemble_predict(
    const std::vector<std::vector<Prediction>>& member_predictions);

struct CurveRow {
    double fraction = 1.0;
    uint64_t seed = 0;
    std::string variant; // fresh | transfer
    double dev_accuracy = 0.0;
};

/// Grid of (fraction, seed, variant) runs over nested subsamples of the train
/// split. When `transfer_source` is set, each grid point runs both fresh and
/// transfer-initialized variants. `jobs` grid points run concurrently; inner
/// training stays single-threaded in that case.
std::vector<CurveRow> learning_curve(const TrainConfig& base_config, const TrainData& data,
                                     std::shared_ptr<const Vocab> vocab,
                                     const std::vector<double>& fractions,
                                     const std::vector<uint64_t>& seeds,
                                     const std::optional<Checkpoint>& transfer_source,
                                     size_t jobs = 1);

void write_curve_csv(const std::vector<CurveRow>& rows, const std::string& path);

/// JSON metrics plus a step/loss/accuracy CSV for external plotting.
/// Re-emission of the same history is byte-identical.
void emit_metrics(const RunHistory& history, const std::string& json_path,
                  const std::string& csv_path);

} // namespace comve
