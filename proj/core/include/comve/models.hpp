#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "comve/encoder.hpp"
#include "comve/rng.hpp"
#include "comve/tensor.hpp"
#include "comve/tokenizer.hpp"

namespace comve {

/// Trainable logits over the last K transformer blocks; softmax turns them
/// into the convex layer weights.
struct FusionWeights {
    Tensor layer_logits; // [K]

    size_t window() const { return layer_logits.shape()[0]; }
};

/// Scores one fused representation: weight . x + bias.
struct AnswerHead {
    Tensor weight; // [d]
    Tensor bias;   // [1]
};

struct ModelConfig {
    EncoderConfig encoder;
    size_t fusion_window = 4;
    size_t max_sequence_length = 64;

    bool operator==(const ModelConfig&) const = default;
};

/// One encoder + fusion + head serves every candidate of an instance; the
/// candidate forwards below differ only in how they build input sequences.
struct Model {
    ModelConfig config;
    EncoderParams encoder;
    FusionWeights fusion;
    AnswerHead head;
    std::shared_ptr<const Vocab> vocab;
};

Model init_model(const ModelConfig& config, std::shared_ptr<const Vocab> vocab, uint64_t seed);

/// Fresh fusion + head for `seed`, exactly as init_model would produce them.
void init_fusion_head(Model& model, uint64_t seed);

/// Convex combination of the first-token (CLS) columns of the last K block
/// outputs: x = sum_j alpha_j * states[L-K+1+j][:, 0], alpha = softmax(logits).
/// The embedding output (states[0]) is never part of the window.
Tensor fuse(const LayerStack& stack, const FusionWeights& fusion);

/// Pre-softmax scores of the two concatenation orders [CLS]s1[SEP]s2[SEP]
/// and [CLS]s2[SEP]s1[SEP] through the shared encoder/fusion/head.
std::array<Tensor, 2> senmaking_scores(const Model& model, const std::string& s1,
                                       const std::string& s2, bool train_mode = false,
                                       Rng* dropout_rng = nullptr);

/// Probability that statement k+1 is the one that makes sense (index 0 for
/// s1, index 1 for s2).
Tensor senmaking_forward(const Model& model, const std::string& s1, const std::string& s2,
                         bool train_mode = false, Rng* dropout_rng = nullptr);

/// Scores each statement alone as [CLS]s[SEP]; the two candidates never see
/// each other before the final softmax.
std::array<Tensor, 2> baseline_senmaking_scores(const Model& model, const std::string& s1,
                                                const std::string& s2, bool train_mode = false,
                                                Rng* dropout_rng = nullptr);

Tensor baseline_senmaking_forward(const Model& model, const std::string& s1,
                                  const std::string& s2, bool train_mode = false,
                                  Rng* dropout_rng = nullptr);

/// Probabilities over the three candidate reasons for the statement being
/// against common sense, each encoded as [CLS]s[SEP]hint[SEP]option[SEP]
/// with shared weights. The hint may be empty.
Tensor explanation_forward(const Model& model, const std::string& statement,
                           const std::string& hint, const std::vector<std::string>& options,
                           bool train_mode = false, Rng* dropout_rng = nullptr);

/// Groups: embeddings, blocks, fusion, head — fixed order.
std::vector<NamedTensor> named_parameters(const Model& model);
std::vector<Tensor> parameters(const Model& model);

} // namespace comve
