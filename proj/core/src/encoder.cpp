#include "comve/encoder.hpp"

#include <cmath>

namespace comve {

void validate(const EncoderConfig& c) {
    if (c.vocab_size <= Vocab::kSpecialCount)
        throw ConfigError("encoder: vocab_size must exceed the special tokens, got " +
                          std::to_string(c.vocab_size));
    if (c.hidden_size == 0 || c.num_heads == 0 || c.hidden_size % c.num_heads != 0)
        throw ConfigError("encoder: hidden_size " + std::to_string(c.hidden_size) +
                          " not divisible by num_heads " + std::to_string(c.num_heads));
    if (c.embedding_size == 0 || c.embedding_size > c.hidden_size)
        throw ConfigError("encoder: embedding_size " + std::to_string(c.embedding_size) +
                          " must be in [1, hidden_size]");
    if (c.num_layers < 1) throw ConfigError("encoder: num_layers must be >= 1");
    if (c.ffn_size == 0) throw ConfigError("encoder: ffn_size must be >= 1");
    if (c.max_position == 0) throw ConfigError("encoder: max_position must be >= 1");
    if (c.dropout < 0.0 || c.dropout >= 1.0)
        throw ConfigError("encoder: dropout must be in [0, 1), got " + std::to_string(c.dropout));
}

namespace {

constexpr double kInitStd = 0.02;
constexpr double kMaskedLogit = -1e30;

Tensor init_weight(std::vector<size_t> shape, Rng& rng) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    std::vector<double> values(n);
    for (double& v : values) v = rng.truncated_normal(kInitStd);
    return Tensor::parameter(std::move(shape), std::move(values));
}

Tensor init_zeros(std::vector<size_t> shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return Tensor::parameter(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor init_ones(std::vector<size_t> shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return Tensor::parameter(std::move(shape), std::vector<double>(n, 1.0));
}

TransformerBlockParams init_block(const EncoderConfig& c, Rng& rng) {
    const size_t d = c.hidden_size, f = c.ffn_size;
    TransformerBlockParams b;
    b.attn_query_w = init_weight({d, d}, rng);
    b.attn_query_b = init_zeros({d});
    b.attn_key_w = init_weight({d, d}, rng);
    b.attn_key_b = init_zeros({d});
    b.attn_value_w = init_weight({d, d}, rng);
    b.attn_value_b = init_zeros({d});
    b.attn_out_w = init_weight({d, d}, rng);
    b.attn_out_b = init_zeros({d});
    b.attn_ln_gain = init_ones({d});
    b.attn_ln_bias = init_zeros({d});
    b.ffn_in_w = init_weight({f, d}, rng);
    b.ffn_in_b = init_zeros({f});
    b.ffn_out_w = init_weight({d, f}, rng);
    b.ffn_out_b = init_zeros({d});
    b.ffn_ln_gain = init_ones({d});
    b.ffn_ln_bias = init_zeros({d});
    return b;
}

} // namespace

EncoderParams init_encoder(const EncoderConfig& config, uint64_t seed) {
    validate(config);
    Rng rng(seed);
    EncoderParams p;
    p.config = config;
    p.token_embedding = init_weight({config.vocab_size, config.embedding_size}, rng);
    p.position_embedding = init_weight({config.max_position, config.embedding_size}, rng);
    p.segment_embedding = init_weight({3, config.embedding_size}, rng);
    if (config.embedding_size != config.hidden_size)
        p.embedding_projection = init_weight({config.hidden_size, config.embedding_size}, rng);
    p.embedding_ln_gain = init_ones({config.hidden_size});
    p.embedding_ln_bias = init_zeros({config.hidden_size});
    const size_t block_count = config.share_parameters ? 1 : config.num_layers;
    p.blocks.reserve(block_count);
    for (size_t i = 0; i < block_count; ++i) p.blocks.push_back(init_block(config, rng));
    return p;
}

namespace {

/// Constant [n x n] additive mask: column j is kMaskedLogit wherever key j is
/// padding. Returns an undefined tensor when nothing is masked.
Tensor key_mask_matrix(const TokenSequence& tokens) {
    const size_t n = tokens.length();
    bool any = false;
    for (int m : tokens.attention_mask)
        if (m == 0) any = true;
    if (!any) return Tensor();
    std::vector<double> mask(n * n, 0.0);
    for (size_t j = 0; j < n; ++j) {
        if (tokens.attention_mask[j] != 0) continue;
        for (size_t i = 0; i < n; ++i) mask[i * n + j] = kMaskedLogit;
    }
    return Tensor::from({n, n}, std::move(mask));
}

Tensor self_attention(const Tensor& x, const TransformerBlockParams& b, const Tensor& mask,
                      size_t num_heads) {
    const size_t d = x.shape()[0];
    const size_t head_dim = d / num_heads;
    const double logit_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

    Tensor q = add(matmul(b.attn_query_w, x), b.attn_query_b);
    Tensor k = add(matmul(b.attn_key_w, x), b.attn_key_b);
    Tensor v = add(matmul(b.attn_value_w, x), b.attn_value_b);

    std::vector<Tensor> contexts;
    contexts.reserve(num_heads);
    for (size_t h = 0; h < num_heads; ++h) {
        const size_t r0 = h * head_dim, r1 = (h + 1) * head_dim;
        Tensor qh = row_slice(q, r0, r1);
        Tensor kh = row_slice(k, r0, r1);
        Tensor vh = row_slice(v, r0, r1);
        Tensor logits = scale(matmul(transpose(qh), kh), logit_scale); // rows: queries
        if (mask.defined()) logits = add(logits, mask);
        Tensor weights = softmax(logits, 1);
        contexts.push_back(matmul(vh, transpose(weights)));
    }
    Tensor merged = concat_rows(contexts);
    return add(matmul(b.attn_out_w, merged), b.attn_out_b);
}

} // namespace

LayerStack encode(const EncoderParams& params, const TokenSequence& tokens, bool train_mode,
                  Rng* dropout_rng) {
    const EncoderConfig& c = params.config;
    const size_t n = tokens.length();
    if (n == 0) throw ContractError("encode: empty token sequence");
    if (n > c.max_position)
        throw CapacityError("encode: sequence length " + std::to_string(n) +
                            " exceeds max_position " + std::to_string(c.max_position));
    for (int id : tokens.ids)
        if (id < 0 || static_cast<size_t>(id) >= c.vocab_size)
            throw IndexError("encode: token id " + std::to_string(id) +
                             " outside vocabulary of " + std::to_string(c.vocab_size));
    const bool drop = train_mode && c.dropout > 0.0;
    if (drop && dropout_rng == nullptr)
        throw ContractError("encode: train mode with dropout needs an RNG");

    std::vector<int> positions(n);
    for (size_t i = 0; i < n; ++i) positions[i] = static_cast<int>(i);

    Tensor embedded = add(add(embedding_lookup(params.token_embedding, tokens.ids),
                              embedding_lookup(params.position_embedding, positions)),
                          embedding_lookup(params.segment_embedding, tokens.segment_ids));
    Tensor x = params.embedding_projection.defined()
                   ? matmul(params.embedding_projection, embedded)
                   : embedded;
    x = layer_norm(x, params.embedding_ln_gain, params.embedding_ln_bias);
    if (drop) x = dropout(x, c.dropout, *dropout_rng);

    LayerStack stack;
    stack.states.reserve(c.num_layers + 1);
    stack.states.push_back(x);

    const Tensor mask = key_mask_matrix(tokens);
    for (size_t layer = 0; layer < c.num_layers; ++layer) {
        const TransformerBlockParams& b = params.block(layer);
        Tensor attn = self_attention(x, b, mask, c.num_heads);
        if (drop) attn = dropout(attn, c.dropout, *dropout_rng);
        x = layer_norm(add(x, attn), b.attn_ln_gain, b.attn_ln_bias);

        Tensor hidden = gelu(add(matmul(b.ffn_in_w, x), b.ffn_in_b));
        Tensor ffn = add(matmul(b.ffn_out_w, hidden), b.ffn_out_b);
        if (drop) ffn = dropout(ffn, c.dropout, *dropout_rng);
        x = layer_norm(add(x, ffn), b.ffn_ln_gain, b.ffn_ln_bias);

        stack.states.push_back(x);
    }
    return stack;
}

std::vector<NamedTensor> encoder_named_parameters(const EncoderParams& params) {
    std::vector<NamedTensor> named;
    named.push_back({"embeddings", "token_embedding", params.token_embedding});
    named.push_back({"embeddings", "position_embedding", params.position_embedding});
    named.push_back({"embeddings", "segment_embedding", params.segment_embedding});
    if (params.embedding_projection.defined())
        named.push_back({"embeddings", "embedding_projection", params.embedding_projection});
    named.push_back({"embeddings", "embedding_ln_gain", params.embedding_ln_gain});
    named.push_back({"embeddings", "embedding_ln_bias", params.embedding_ln_bias});
    for (size_t i = 0; i < params.blocks.size(); ++i) {
        const TransformerBlockParams& b = params.blocks[i];
        const std::string prefix = "block" + std::to_string(i) + ".";
        named.push_back({"blocks", prefix + "attn_query_w", b.attn_query_w});
        named.push_back({"blocks", prefix + "attn_query_b", b.attn_query_b});
        named.push_back({"blocks", prefix + "attn_key_w", b.attn_key_w});
        named.push_back({"blocks", prefix + "attn_key_b", b.attn_key_b});
        named.push_back({"blocks", prefix + "attn_value_w", b.attn_value_w});
        named.push_back({"blocks", prefix + "attn_value_b", b.attn_value_b});
        named.push_back({"blocks", prefix + "attn_out_w", b.attn_out_w});
        named.push_back({"blocks", prefix + "attn_out_b", b.attn_out_b});
        named.push_back({"blocks", prefix + "attn_ln_gain", b.attn_ln_gain});
        named.push_back({"blocks", prefix + "attn_ln_bias", b.attn_ln_bias});
        named.push_back({"blocks", prefix + "ffn_in_w", b.ffn_in_w});
        named.push_back({"blocks", prefix + "ffn_in_b", b.ffn_in_b});
        named.push_back({"blocks", prefix + "ffn_out_w", b.ffn_out_w});
        named.push_back({"blocks", prefix + "ffn_out_b", b.ffn_out_b});
        named.push_back({"blocks", prefix + "ffn_ln_gain", b.ffn_ln_gain});
        named.push_back({"blocks", prefix + "ffn_ln_bias", b.ffn_ln_bias});
    }
    return named;
}

} // namespace comve
