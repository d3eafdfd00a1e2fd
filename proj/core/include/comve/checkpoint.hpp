#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "comve/models.hpp"

namespace comve {

enum class Task { sen_making, explanation, baseline_sen_making };

std::string to_string(Task task);
Task task_from_string(const std::string& s);

/// Serialized parameter sets partitioned into the named groups
/// {embeddings, blocks, fusion, head}, plus training metadata. Tensors in a
/// checkpoint own value copies; they never alias a live model.
struct Checkpoint {
    uint32_t format_version = 1;
    ModelConfig model_config;
    Task task = Task::sen_making;
    bool hint_enabled = true;
    uint64_t seed = 0;
    uint64_t step = 0;
    double dev_accuracy = 0.0;
    std::vector<NamedTensor> tensors;
};

/// Deep copy of the model's current parameters plus metadata.
Checkpoint snapshot(const Model& model, Task task, bool hint_enabled, uint64_t seed,
                    uint64_t step, double dev_accuracy);

/// Container layout: magic, version, JSON header (config, metadata, tensor
/// manifest with shapes), then raw little-endian f64 buffers. Save -> load ->
/// save reproduces the file byte for byte.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Rebuilds a runnable model; every tensor is shape-checked against the
/// stored config.
Model model_from_checkpoint(const Checkpoint& checkpoint,
                            std::shared_ptr<const Vocab> vocab);

/// Copies the embeddings and blocks groups of `source` into `target`, leaving
/// target's fusion and head exactly as initialized. The encoder geometries
/// must agree; mismatches raise a DimensionError naming the offending groups.
void transfer_init(Model& target, const Checkpoint& source);

} // namespace comve
