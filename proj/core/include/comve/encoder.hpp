#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "comve/rng.hpp"
#include "comve/tensor.hpp"
#include "comve/tokenizer.hpp"

namespace comve {

struct EncoderConfig {
    size_t vocab_size = 0;
    size_t hidden_size = 64;    // d
    size_t embedding_size = 32; // e <= d; factorized projection when e != d
    size_t num_layers = 4;      // L
    size_t num_heads = 4;
    size_t ffn_size = 256;
    size_t max_position = 64;
    bool share_parameters = true; // one block reused for all layers
    double dropout = 0.1;

    bool operator==(const EncoderConfig&) const = default;
};

/// Throws ConfigError on an inconsistent configuration.
void validate(const EncoderConfig& config);

struct TransformerBlockParams {
    Tensor attn_query_w, attn_query_b;
    Tensor attn_key_w, attn_key_b;
    Tensor attn_value_w, attn_value_b;
    Tensor attn_out_w, attn_out_b;
    Tensor attn_ln_gain, attn_ln_bias;
    Tensor ffn_in_w, ffn_in_b;   // [ffn x d], [ffn]
    Tensor ffn_out_w, ffn_out_b; // [d x ffn], [d]
    Tensor ffn_ln_gain, ffn_ln_bias;
};

struct EncoderParams {
    EncoderConfig config;
    Tensor token_embedding;      // [V x e]
    Tensor position_embedding;   // [max_position x e]
    Tensor segment_embedding;    // [3 x e]
    Tensor embedding_projection; // [d x e]; undefined when e == d
    Tensor embedding_ln_gain, embedding_ln_bias; // [d]
    std::vector<TransformerBlockParams> blocks;  // size 1 when shared, else L

    const TransformerBlockParams& block(size_t layer) const {
        return blocks[config.share_parameters ? 0 : layer];
    }
};

/// All layer outputs of one forward pass: states[0] is the embedding output,
/// states[i] the output of the i-th transformer block; each is [d x n].
struct LayerStack {
    std::vector<Tensor> states;

    size_t layer_count() const { return states.size() - 1; }
};

/// Truncated-normal(0.02) weights, zero biases, unit layer-norm gains.
/// The same seed always yields bit-identical parameters.
EncoderParams init_encoder(const EncoderConfig& config, uint64_t seed);

/// Post-layer-norm transformer forward pass returning every layer output.
/// Attention logits at masked key positions are forced to -1e30 before the
/// softmax, so padded columns never influence real ones. Dropout draws from
/// `dropout_rng` and only in train mode (pass nullptr otherwise).
LayerStack encode(const EncoderParams& params, const TokenSequence& tokens, bool train_mode,
                  Rng* dropout_rng = nullptr);

struct NamedTensor {
    std::string group; // embeddings | blocks | fusion | head
    std::string name;
    Tensor tensor;
};

/// Parameters in a fixed, documented order (groups: embeddings, blocks).
std::vector<NamedTensor> encoder_named_parameters(const EncoderParams& params);

} // namespace comve
