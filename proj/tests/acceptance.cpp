// Acceptance suite: one check per numbered criterion, each printing a
// single [PASS]/[FAIL] line. Run all with no arguments or one with
// --criterion N. The process exits non-zero if any requested check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "comve/optimizer.hpp"
#include "comve/train.hpp"
#include "support/test_support.hpp"

using namespace comve;
using namespace comve::testing;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

size_t worker_threads() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// ---- shared fixtures ----

std::shared_ptr<Vocab> make_vocab(size_t corpus_instances, uint64_t seed, size_t target) {
    std::vector<std::string> corpus =
        corpus_of(generate_synthetic(corpus_instances, seed, 0, 0.3));
    return std::make_shared<Vocab>(train_vocab(corpus, target));
}

ModelConfig desk_config(size_t vocab_size) {
    ModelConfig mc;
    mc.encoder.vocab_size = vocab_size;
    mc.encoder.hidden_size = 64;
    mc.encoder.embedding_size = 32;
    mc.encoder.num_layers = 4;
    mc.encoder.num_heads = 4;
    mc.encoder.ffn_size = 256;
    mc.encoder.max_position = 64;
    mc.encoder.share_parameters = true;
    mc.encoder.dropout = 0.1;
    mc.fusion_window = 4;
    mc.max_sequence_length = 64;
    return mc;
}

/// Smaller encoder for the multi-run direction experiments.
ModelConfig lab_config(size_t vocab_size) {
    ModelConfig mc;
    mc.encoder.vocab_size = vocab_size;
    mc.encoder.hidden_size = 32;
    mc.encoder.embedding_size = 32;
    mc.encoder.num_layers = 3;
    mc.encoder.num_heads = 4;
    mc.encoder.ffn_size = 128;
    mc.encoder.max_position = 64;
    mc.encoder.share_parameters = true;
    mc.encoder.dropout = 0.1;
    mc.fusion_window = 3;
    mc.max_sequence_length = 64;
    return mc;
}

ModelConfig micro_config(size_t vocab_size) {
    ModelConfig mc;
    mc.encoder.vocab_size = vocab_size;
    mc.encoder.hidden_size = 16;
    mc.encoder.embedding_size = 8;
    mc.encoder.num_layers = 2;
    mc.encoder.num_heads = 2;
    mc.encoder.ffn_size = 32;
    mc.encoder.max_position = 64;
    mc.encoder.share_parameters = false;
    mc.encoder.dropout = 0.0;
    mc.fusion_window = 2;
    mc.max_sequence_length = 64;
    return mc;
}

// ---- criterion 1: gradient fidelity ----

Outcome criterion_gradient_fidelity() {
    const auto t0 = Clock::now();
    auto vocab = make_vocab(40, 2024, 320);
    Model model = init_model(micro_config(vocab->size()), vocab, 11);
    DatasetSplit batch = generate_synthetic(4, 12, 0, 1.0, "train");
    const ComveInstance& sen_a = batch.instances[0];
    const ComveInstance& sen_b = batch.instances[1];
    const ComveInstance& exp_a = batch.instances[2];
    const ComveInstance& exp_b = batch.instances[3];

    auto total_loss = [&]() {
        Tensor sen_loss =
            scale(add(cross_entropy(senmaking_forward(model, sen_a.s1, sen_a.s2),
                                    static_cast<size_t>(1 - sen_a.nonsense_index)),
                      cross_entropy(senmaking_forward(model, sen_b.s1, sen_b.s2),
                                    static_cast<size_t>(1 - sen_b.nonsense_index))),
                  0.5);
        Tensor exp_loss = scale(
            add(cross_entropy(
                    explanation_forward(model, exp_a.nonsense_statement(), hint_of(exp_a),
                                        exp_a.options),
                    static_cast<size_t>(exp_a.reason_index)),
                cross_entropy(
                    explanation_forward(model, exp_b.nonsense_statement(), hint_of(exp_b),
                                        exp_b.options),
                    static_cast<size_t>(exp_b.reason_index))),
            0.5);
        return add(sen_loss, exp_loss);
    };

    backward(total_loss());
    std::vector<Tensor> params = parameters(model);
    auto grads = captured_grads(params);
    auto report = fd_check(params, grads, [&]() {
        NoGradGuard guard;
        return total_loss().item();
    });
    const double elapsed = seconds_since(t0);

    std::ostringstream detail;
    detail << report.checked << " parameters, max rel err " << report.max_rel_err << ", "
           << elapsed << " s";
    return {report.max_rel_err < 1e-4 && elapsed < 60.0, detail.str()};
}

// ---- criterion 2: exact symmetries ----

Outcome criterion_exact_symmetries() {
    auto vocab = make_vocab(300, 2025, 700);
    ModelConfig mc = lab_config(vocab->size());
    Model model = init_model(mc, vocab, 21);
    DatasetSplit sample = generate_synthetic(100, 22, 0, 0.3, "dev");

    size_t failures = 0;
    NoGradGuard guard;
    for (const ComveInstance& inst : sample.instances) {
        Tensor fwd = senmaking_forward(model, inst.s1, inst.s2);
        Tensor swp = senmaking_forward(model, inst.s2, inst.s1);
        if (fwd.at(0) != swp.at(1) || fwd.at(1) != swp.at(0)) ++failures;

        Tensor same = senmaking_forward(model, inst.s1, inst.s1);
        if (same.at(0) != 0.5 || same.at(1) != 0.5) ++failures;

        Tensor base = explanation_forward(model, inst.nonsense_statement(), hint_of(inst),
                                          inst.options);
        const std::vector<std::array<size_t, 3>> perms = {{2, 1, 0}, {1, 2, 0}};
        for (const auto& perm : perms) {
            std::vector<std::string> shuffled = {inst.options[perm[0]], inst.options[perm[1]],
                                                 inst.options[perm[2]]};
            Tensor permuted = explanation_forward(model, inst.nonsense_statement(),
                                                  hint_of(inst), shuffled);
            for (size_t i = 0; i < 3; ++i)
                if (permuted.at(i) != base.at(perm[i])) ++failures;
        }

        std::vector<std::string> clones(3, inst.options[0]);
        Tensor uniform = explanation_forward(model, inst.nonsense_statement(), hint_of(inst),
                                             clones);
        for (size_t i = 0; i < 3; ++i)
            if (uniform.at(i) != 1.0 / 3.0) ++failures;
    }
    std::ostringstream detail;
    detail << "100 instances, " << failures << " bitwise violations";
    return {failures == 0, detail.str()};
}

// ---- criterion 3: fusion correctness ----

Outcome criterion_fusion_correctness() {
    auto vocab = make_vocab(60, 2026, 320);
    ModelConfig mc = desk_config(vocab->size());
    mc.encoder.dropout = 0.0;
    Model model = init_model(mc, vocab, 31);
    TokenSequence seq =
        encode_pair("tom rode the bus to the market", "tom rode the scarf to the market",
                    *vocab, 64);
    NoGradGuard guard;
    LayerStack stack = encode(model.encoder, seq, false);
    const size_t layers = stack.layer_count();
    size_t failures = 0;

    // K = 1 reduces to the last block's CLS column
    FusionWeights k1{Tensor::parameter({1}, {0.0})};
    Tensor f1 = fuse(stack, k1);
    Tensor cls = column(stack.states.back(), 0);
    if (!bitwise_equal(f1.values(), cls.values())) ++failures;

    // zero logits give the running mean of the last 4 CLS columns
    FusionWeights k4{Tensor::parameter({4}, std::vector<double>(4, 0.0))};
    Tensor f4 = fuse(stack, k4);
    for (size_t i = 0; i < f4.size(); ++i) {
        double acc = 0.0;
        for (size_t j = 0; j < 4; ++j) acc += 0.25 * stack.states[layers - 4 + 1 + j].at(i, 0);
        if (f4.at(i) != acc) ++failures;
    }

    // shift invariance, exact for exactly-representable sums
    FusionWeights base{Tensor::parameter({4}, {0.25, -0.5, 1.0, 0.75})};
    FusionWeights shifted{Tensor::parameter({4}, {0.25 + 2.0, -0.5 + 2.0, 1.0 + 2.0, 0.75 + 2.0})};
    if (!bitwise_equal(fuse(stack, base).values(), fuse(stack, shifted).values())) ++failures;

    std::ostringstream detail;
    detail << failures << " exactness violations";
    return {failures == 0, detail.str()};
}

// ---- criterion 4: random baselines ----

Outcome criterion_random_baselines() {
    auto vocab = make_vocab(600, 2027, 900);
    DatasetSplit dev = generate_synthetic(1000, 44, 0, 0.3, "dev");
    const size_t threads = worker_threads();

    Model task_a = init_model(desk_config(vocab->size()), vocab, 41);
    const double acc_a = evaluate(task_a, Task::sen_making, true, dev, threads).accuracy;

    Model task_b = init_model(desk_config(vocab->size()), vocab, 42);
    const double acc_b = evaluate(task_b, Task::explanation, true, dev, threads).accuracy;

    std::ostringstream detail;
    detail << "untrained accuracy task-a " << acc_a << " (want 0.50 +/- 0.05), task-b " << acc_b
           << " (want 0.333 +/- 0.05)";
    const bool pass = std::abs(acc_a - 0.5) <= 0.05 && std::abs(acc_b - 1.0 / 3.0) <= 0.05;
    return {pass, detail.str()};
}

// ---- criterion 5: learnability ----

Outcome criterion_learnability() {
    const auto t0 = Clock::now();
    const size_t threads = worker_threads();

    // part 1: overfit 32 instances within 300 steps
    auto small_vocab = make_vocab(400, 2028, 700);
    DatasetSplit tiny = generate_synthetic(32, 51, 0, 0.3, "train");
    TrainConfig overfit;
    overfit.task = Task::sen_making;
    overfit.learning_rate = 1e-3;
    overfit.batch_size = 8;
    overfit.epochs = 75; // 4 steps per epoch
    overfit.seed = 52;
    overfit.patience = 0;
    overfit.model = micro_config(small_vocab->size());
    TrainResult overfit_result =
        train(overfit, TrainData{tiny, tiny, std::nullopt}, small_vocab, threads);
    const bool overfit_ok =
        overfit_result.best.dev_accuracy == 1.0 && overfit_result.best.step <= 300;

    // part 2: 10000/1000/1000, both tasks to >= 0.90 dev within 10 epochs
    DatasetSplit train_split = generate_synthetic(10000, 42, 0, 0.3, "train");
    DatasetSplit dev_split = generate_synthetic(1000, 43, 0, 0.3, "dev");
    DatasetSplit test_split = generate_synthetic(1000, 45, 0, 0.3, "test");
    auto vocab = make_vocab(10000, 42, 1200);

    TrainConfig config_a;
    config_a.task = Task::sen_making;
    config_a.learning_rate = 3e-4;
    config_a.batch_size = 48;
    config_a.epochs = 10;
    config_a.seed = 53;
    config_a.eval_every = 0;
    config_a.patience = 2;
    config_a.model = desk_config(vocab->size());
    TrainResult run_a =
        train(config_a, TrainData{train_split, dev_split, test_split}, vocab, threads);

    TrainConfig config_b = config_a;
    config_b.task = Task::explanation;
    config_b.seed = 54;
    TrainResult run_b =
        train(config_b, TrainData{train_split, dev_split, test_split}, vocab, threads);

    const double elapsed = seconds_since(t0);
    std::ostringstream detail;
    detail << "overfit best " << overfit_result.best.dev_accuracy << " at step "
           << overfit_result.best.step << "; task-a dev " << run_a.best.dev_accuracy
           << ", task-b dev " << run_b.best.dev_accuracy << "; " << elapsed << " s";
    const bool pass = overfit_ok && run_a.best.dev_accuracy >= 0.90 &&
                      run_b.best.dev_accuracy >= 0.90 && elapsed < 1800.0;
    return {pass, detail.str()};
}

// ---- criterion 6: hint ablation direction ----

Outcome criterion_hint_direction() {
    DatasetSplit train_split = generate_synthetic(2500, 61, 0, 0.3, "train");
    DatasetSplit dev_split = generate_synthetic(600, 62, 0, 0.3, "dev");
    auto vocab = make_vocab(2500, 61, 900);
    const size_t threads = worker_threads();

    size_t hint_wins = 0;
    std::ostringstream detail;
    detail << "per-seed (with, without):";
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        TrainConfig config;
        config.task = Task::explanation;
        config.learning_rate = 1e-3;
        config.batch_size = 32;
        config.epochs = 4;
        config.seed = seed;
        config.patience = 0;
        config.model = lab_config(vocab->size());

        config.hint_enabled = true;
        TrainResult with_hint =
            train(config, TrainData{train_split, dev_split, std::nullopt}, vocab, threads);
        config.hint_enabled = false;
        TrainResult without_hint =
            train(config, TrainData{train_split, dev_split, std::nullopt}, vocab, threads);
        if (with_hint.best.dev_accuracy > without_hint.best.dev_accuracy) ++hint_wins;
        detail << " (" << with_hint.best.dev_accuracy << ", "
               << without_hint.best.dev_accuracy << ")";
    }
    detail << " -> " << hint_wins << "/5 wins";
    return {hint_wins >= 4, detail.str()};
}

// ---- criterion 7: transfer direction ----

Outcome criterion_transfer_direction() {
    DatasetSplit train_split = generate_synthetic(8000, 71, 0, 0.3, "train");
    DatasetSplit dev_split = generate_synthetic(800, 72, 0, 0.3, "dev");
    auto vocab = make_vocab(8000, 71, 900);
    const size_t threads = worker_threads();

    // source: sen-making on the full split
    TrainConfig source_config;
    source_config.task = Task::sen_making;
    source_config.learning_rate = 1e-3;
    source_config.batch_size = 32;
    source_config.epochs = 2;
    source_config.seed = 73;
    source_config.patience = 0;
    source_config.model = lab_config(vocab->size());
    TrainResult source =
        train(source_config, TrainData{train_split, dev_split, std::nullopt}, vocab, threads);

    TrainConfig target_config = source_config;
    target_config.task = Task::explanation;
    target_config.epochs = 6;

    auto rows = learning_curve(target_config, TrainData{train_split, dev_split, std::nullopt},
                               vocab, {0.1, 0.2}, {1, 2, 3, 4, 5}, source.best, threads);

    std::ostringstream detail;
    bool pass = true;
    for (double fraction : {0.1, 0.2}) {
        double fresh = 0.0, transfer = 0.0;
        for (const CurveRow& row : rows) {
            if (row.fraction != fraction) continue;
            (row.variant == "fresh" ? fresh : transfer) += row.dev_accuracy;
        }
        fresh /= 5.0;
        transfer /= 5.0;
        detail << " fraction " << fraction << ": transfer " << transfer << " vs fresh " << fresh
               << ";";
        if (!(transfer > fresh)) pass = false;
    }
    return {pass, detail.str()};
}

// ---- criterion 8: dual-order vs baseline direction ----

Outcome criterion_dual_order_direction() {
    DatasetSplit train_split = generate_synthetic(2500, 81, 0, 0.3, "train");
    DatasetSplit dev_split = generate_synthetic(600, 82, 0, 0.3, "dev");
    auto vocab = make_vocab(2500, 81, 900);
    const size_t threads = worker_threads();

    double dual_mean = 0.0, baseline_mean = 0.0;
    std::ostringstream detail;
    detail << "per-seed (dual, baseline):";
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        TrainConfig config;
        config.task = Task::sen_making;
        config.learning_rate = 1e-3;
        config.batch_size = 32;
        config.epochs = 3;
        config.seed = seed;
        config.patience = 0;
        config.model = lab_config(vocab->size());
        TrainResult dual =
            train(config, TrainData{train_split, dev_split, std::nullopt}, vocab, threads);

        config.task = Task::baseline_sen_making;
        TrainResult baseline =
            train(config, TrainData{train_split, dev_split, std::nullopt}, vocab, threads);
        dual_mean += dual.best.dev_accuracy;
        baseline_mean += baseline.best.dev_accuracy;
        detail << " (" << dual.best.dev_accuracy << ", " << baseline.best.dev_accuracy << ")";
    }
    dual_mean /= 5.0;
    baseline_mean /= 5.0;
    detail << " -> means " << dual_mean << " vs " << baseline_mean;
    return {dual_mean >= baseline_mean, detail.str()};
}

// ---- criterion 9: pipeline exactness ----

Outcome criterion_pipeline_exactness() {
    std::ostringstream detail;
    bool pass = true;

    // augmentation doubles the split with labels preserved
    DatasetSplit split = generate_synthetic(200, 91, 0, 0.3, "train");
    DatasetSplit doubled = augment(split, Augmenter::paraphrase, 7);
    if (doubled.size() != 2 * split.size()) {
        pass = false;
        detail << " augment size " << doubled.size() << ";";
    }
    for (size_t i = 0; i < split.size(); ++i) {
        const ComveInstance& src = doubled.instances[i];
        const ComveInstance& aug = doubled.instances[split.size() + i];
        if (aug.nonsense_index != src.nonsense_index || aug.reason_index != src.reason_index ||
            aug.options != src.options) {
            pass = false;
            detail << " label drift at " << src.id << ";";
            break;
        }
    }

    // small deterministic training pair
    auto vocab = make_vocab(300, 92, 700);
    DatasetSplit train_split = generate_synthetic(300, 93, 0, 0.3, "train");
    DatasetSplit dev_split = generate_synthetic(100, 94, 0, 0.3, "dev");
    TrainConfig config;
    config.task = Task::sen_making;
    config.learning_rate = 1e-3;
    config.batch_size = 16;
    config.epochs = 1;
    config.seed = 95;
    config.patience = 0;
    config.model = micro_config(vocab->size());

    TrainResult r1 = train(config, TrainData{train_split, dev_split, std::nullopt}, vocab, 2);
    TrainResult r2 = train(config, TrainData{train_split, dev_split, std::nullopt}, vocab, 1);

    fs::path dir = fs::temp_directory_path() / "comve_acceptance_c9";
    fs::create_directories(dir);
    auto bytes_of = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };
    save_checkpoint(r1.best, (dir / "a.ckpt").string());
    save_checkpoint(r2.best, (dir / "b.ckpt").string());
    if (bytes_of(dir / "a.ckpt") != bytes_of(dir / "b.ckpt")) {
        pass = false;
        detail << " twin runs differ;";
    }
    emit_metrics(r1.history, (dir / "m1.json").string(), (dir / "h1.csv").string());
    emit_metrics(r2.history, (dir / "m2.json").string(), (dir / "h2.csv").string());
    if (bytes_of(dir / "m1.json") != bytes_of(dir / "m2.json")) {
        pass = false;
        detail << " metrics differ;";
    }

    // checkpoint round trip is byte identical
    Checkpoint loaded = load_checkpoint((dir / "a.ckpt").string());
    save_checkpoint(loaded, (dir / "a2.ckpt").string());
    if (bytes_of(dir / "a.ckpt") != bytes_of(dir / "a2.ckpt")) {
        pass = false;
        detail << " checkpoint round trip differs;";
    }

    // ensemble of identical members equals the single model
    Evaluation eval = evaluate(r1.best, vocab, dev_split, 2);
    std::vector<std::vector<Prediction>> members(3, eval.predictions);
    std::vector<EnsembleVote> votes = ensemble_predict(members);
    for (size_t i = 0; i < votes.size(); ++i) {
        if (votes[i].id != eval.predictions[i].id ||
            votes[i].label != eval.predictions[i].predicted) {
            pass = false;
            detail << " ensemble of clones diverged;";
            break;
        }
    }

    fs::remove_all(dir);
    if (pass) detail << " all exactness checks held";
    return {pass, detail.str()};
}

// ---- driver ----

struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "gradient fidelity", criterion_gradient_fidelity},
    {2, "exact symmetries", criterion_exact_symmetries},
    {3, "fusion correctness", criterion_fusion_correctness},
    {4, "random baselines", criterion_random_baselines},
    {5, "learnability", criterion_learnability},
    {6, "hint ablation direction", criterion_hint_direction},
    {7, "transfer direction", criterion_transfer_direction},
    {8, "dual-order vs baseline direction", criterion_dual_order_direction},
    {9, "pipeline exactness", criterion_pipeline_exactness},
};

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            only = std::atoi(argv[i + 1]);
            ++i;
        } else {
            std::cerr << "usage: comve_acceptance [--criterion N]\n";
            return 1;
        }
    }

    bool all_pass = true;
    for (const Criterion& criterion : kCriteria) {
        if (only != 0 && criterion.id != only) continue;
        const auto t0 = Clock::now();
        Outcome outcome;
        try {
            outcome = criterion.run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double elapsed = seconds_since(t0);
        std::cout << (outcome.pass ? "[PASS]" : "[FAIL]") << " criterion " << criterion.id
                  << " (" << criterion.name << "): " << outcome.detail << " [" << elapsed
                  << " s]" << std::endl;
        all_pass = all_pass && outcome.pass;
    }
    return all_pass ? 0 : 1;
}
