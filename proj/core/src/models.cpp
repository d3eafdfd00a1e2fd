#include "comve/models.hpp"

#include <array>

namespace comve {

namespace {

constexpr uint64_t kEncoderStream = 0xE4C0DE;
constexpr uint64_t kHeadStream = 0x4EAD;

void validate_model_config(const ModelConfig& c) {
    validate(c.encoder);
    if (c.fusion_window < 1 || c.fusion_window > c.encoder.num_layers)
        throw ConfigError("model: fusion window " + std::to_string(c.fusion_window) +
                          " outside [1, " + std::to_string(c.encoder.num_layers) + "]");
    if (c.max_sequence_length > c.encoder.max_position)
        throw ConfigError("model: max_sequence_length " +
                          std::to_string(c.max_sequence_length) + " exceeds max_position " +
                          std::to_string(c.encoder.max_position));
}

} // namespace

Model init_model(const ModelConfig& config, std::shared_ptr<const Vocab> vocab, uint64_t seed) {
    validate_model_config(config);
    if (vocab && vocab->size() != config.encoder.vocab_size)
        throw ConfigError("model: vocab has " + std::to_string(vocab->size()) +
                          " entries, config says " + std::to_string(config.encoder.vocab_size));
    Model model;
    model.config = config;
    model.vocab = std::move(vocab);
    model.encoder = init_encoder(config.encoder, mix_seed(seed, kEncoderStream));
    init_fusion_head(model, seed);
    return model;
}

void init_fusion_head(Model& model, uint64_t seed) {
    const size_t k = model.config.fusion_window;
    const size_t d = model.config.encoder.hidden_size;
    // Zero logits: every layer in the window starts with equal weight.
    model.fusion.layer_logits = Tensor::parameter({k}, std::vector<double>(k, 0.0));
    Rng rng(mix_seed(seed, kHeadStream));
    std::vector<double> w(d);
    for (double& v : w) v = rng.truncated_normal(0.02);
    model.head.weight = Tensor::parameter({d}, std::move(w));
    model.head.bias = Tensor::parameter({1}, {0.0});
}

Tensor fuse(const LayerStack& stack, const FusionWeights& fusion) {
    const size_t layers = stack.layer_count();
    const size_t k = fusion.window();
    if (k > layers)
        throw ConfigError("fuse: window " + std::to_string(k) + " exceeds " +
                          std::to_string(layers) + " encoder layers");
    std::vector<Tensor> cls_columns;
    cls_columns.reserve(k);
    for (size_t j = 0; j < k; ++j)
        cls_columns.push_back(column(stack.states[layers - k + 1 + j], 0));
    Tensor weights = softmax(fusion.layer_logits, 0);
    Tensor stacked = concat_cols(cls_columns); // [d x K]
    return reshape(matmul(stacked, reshape(weights, {k, 1})), {stacked.shape()[0]});
}

namespace {

Tensor head_score(const Model& model, const LayerStack& stack) {
    Tensor fused = fuse(stack, model.fusion);
    return add(dot(model.head.weight, fused), model.head.bias);
}

Tensor score_of_sequence(const Model& model, const TokenSequence& seq, bool train_mode,
                         Rng* rng) {
    return head_score(model, encode(model.encoder, seq, train_mode, rng));
}

void check_statement(const char* op, const std::string& s) {
    if (normalize(s).empty())
        throw InputError(std::string(op) + ": empty statement");
}

} // namespace

std::array<Tensor, 2> senmaking_scores(const Model& model, const std::string& s1,
                                       const std::string& s2, bool train_mode,
                                       Rng* dropout_rng) {
    check_statement("senmaking_forward", s1);
    check_statement("senmaking_forward", s2);
    const size_t max_len = model.config.max_sequence_length;
    TokenSequence order_a = encode_pair(s1, s2, *model.vocab, max_len);
    TokenSequence order_b = encode_pair(s2, s1, *model.vocab, max_len);
    return {score_of_sequence(model, order_a, train_mode, dropout_rng),
            score_of_sequence(model, order_b, train_mode, dropout_rng)};
}

Tensor senmaking_forward(const Model& model, const std::string& s1, const std::string& s2,
                         bool train_mode, Rng* dropout_rng) {
    auto scores = senmaking_scores(model, s1, s2, train_mode, dropout_rng);
    return softmax(stack_scalars(scores), 0);
}

std::array<Tensor, 2> baseline_senmaking_scores(const Model& model, const std::string& s1,
                                                const std::string& s2, bool train_mode,
                                                Rng* dropout_rng) {
    check_statement("baseline_senmaking_forward", s1);
    check_statement("baseline_senmaking_forward", s2);
    const size_t max_len = model.config.max_sequence_length;
    TokenSequence alone_a = encode_single(s1, *model.vocab, max_len);
    TokenSequence alone_b = encode_single(s2, *model.vocab, max_len);
    return {score_of_sequence(model, alone_a, train_mode, dropout_rng),
            score_of_sequence(model, alone_b, train_mode, dropout_rng)};
}

Tensor baseline_senmaking_forward(const Model& model, const std::string& s1,
                                  const std::string& s2, bool train_mode, Rng* dropout_rng) {
    auto scores = baseline_senmaking_scores(model, s1, s2, train_mode, dropout_rng);
    return softmax(stack_scalars(scores), 0);
}

Tensor explanation_forward(const Model& model, const std::string& statement,
                           const std::string& hint, const std::vector<std::string>& options,
                           bool train_mode, Rng* dropout_rng) {
    if (options.size() != 3)
        throw InputError("explanation_forward: expected exactly 3 options, got " +
                         std::to_string(options.size()));
    check_statement("explanation_forward", statement);
    for (const std::string& option : options) check_statement("explanation_forward", option);

    const size_t max_len = model.config.max_sequence_length;
    std::array<Tensor, 3> scores;
    for (size_t i = 0; i < 3; ++i) {
        TokenSequence seq = encode_triple(statement, hint, options[i], *model.vocab, max_len);
        scores[i] = score_of_sequence(model, seq, train_mode, dropout_rng);
    }
    return softmax(stack_scalars(scores), 0);
}

std::vector<NamedTensor> named_parameters(const Model& model) {
    std::vector<NamedTensor> named = encoder_named_parameters(model.encoder);
    named.push_back({"fusion", "layer_logits", model.fusion.layer_logits});
    named.push_back({"head", "weight", model.head.weight});
    named.push_back({"head", "bias", model.head.bias});
    return named;
}

std::vector<Tensor> parameters(const Model& model) {
    std::vector<Tensor> flat;
    for (NamedTensor& named : named_parameters(model)) flat.push_back(named.tensor);
    return flat;
}

} // namespace comve
