#include <benchmark/benchmark.h>

#include "comve/data.hpp"
#include "comve/models.hpp"
#include "comve/train.hpp"

using namespace comve;

namespace {

struct PipelineFixture {
    DatasetSplit data = generate_synthetic(256, 11, 0, 0.3, "train");
    std::shared_ptr<Vocab> vocab;
    Model model;

    PipelineFixture() {
        vocab = std::make_shared<Vocab>(
            train_vocab(corpus_of(generate_synthetic(2000, 12, 0, 0.3)), 900));
        ModelConfig mc;
        mc.encoder.vocab_size = vocab->size();
        mc.fusion_window = 4;
        mc.max_sequence_length = 64;
        model = init_model(mc, vocab, 1);
    }
};

PipelineFixture& fixture() {
    static PipelineFixture fx;
    return fx;
}

void BM_tokenize_pair(benchmark::State& state) {
    PipelineFixture& fx = fixture();
    size_t i = 0;
    for (auto _ : state) {
        const ComveInstance& inst = fx.data.instances[i++ % fx.data.size()];
        TokenSequence seq = encode_pair(inst.s1, inst.s2, *fx.vocab, 64);
        benchmark::DoNotOptimize(seq.ids.data());
    }
}
BENCHMARK(BM_tokenize_pair);

void BM_senmaking_forward(benchmark::State& state) {
    PipelineFixture& fx = fixture();
    NoGradGuard guard;
    size_t i = 0;
    for (auto _ : state) {
        const ComveInstance& inst = fx.data.instances[i++ % fx.data.size()];
        Tensor p = senmaking_forward(fx.model, inst.s1, inst.s2);
        benchmark::DoNotOptimize(p.values().data());
    }
}
BENCHMARK(BM_senmaking_forward);

void BM_explanation_step(benchmark::State& state) {
    PipelineFixture& fx = fixture();
    std::vector<Tensor> params = parameters(fx.model);
    Rng rng(5);
    size_t i = 0;
    for (auto _ : state) {
        const ComveInstance& inst = fx.data.instances[i++ % fx.data.size()];
        Tensor p = explanation_forward(fx.model, inst.nonsense_statement(), hint_of(inst),
                                       inst.options, true, &rng);
        Tensor loss = cross_entropy(p, static_cast<size_t>(inst.reason_index));
        GradCollector collector(params);
        backward_into(loss, collector);
        benchmark::DoNotOptimize(collector.grads().data());
    }
}
BENCHMARK(BM_explanation_step);

void BM_generate_synthetic(benchmark::State& state) {
    for (auto _ : state) {
        DatasetSplit split = generate_synthetic(1000, 3, 0, 0.3, "train");
        benchmark::DoNotOptimize(split.instances.data());
    }
}
BENCHMARK(BM_generate_synthetic);

} // namespace

BENCHMARK_MAIN();
