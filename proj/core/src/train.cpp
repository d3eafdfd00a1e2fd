#include "comve/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "comve/optimizer.hpp"

namespace comve {

using nlohmann::json;

namespace {

constexpr uint64_t kShuffleStream = 0x5;
constexpr uint64_t kDropoutStream = 0xD20;

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Runs fn(begin, end) over contiguous chunks of [0, n) on `threads` threads.
void parallel_chunks(size_t n, size_t threads,
                     const std::function<void(size_t, size_t)>& fn) {
    if (n == 0) return;
    threads = std::max<size_t>(1, std::min(threads, n));
    if (threads == 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const size_t chunk = (n + threads - 1) / threads;
    for (size_t t = 0; t < threads; ++t) {
        const size_t begin = t * chunk;
        const size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, t, begin, end]() {
            try {
                fn(begin, end);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (std::thread& th : pool) th.join();
    for (std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);
}

int target_of(const ComveInstance& inst, Task task) {
    switch (task) {
        case Task::sen_making:
        case Task::baseline_sen_making:
            return 1 - inst.nonsense_index; // index of the sensible statement
        case Task::explanation:
            return inst.reason_index;
    }
    return 0;
}

Tensor instance_probabilities(const Model& model, const ComveInstance& inst, Task task,
                              bool hint_enabled, bool train_mode, Rng* rng) {
    switch (task) {
        case Task::sen_making:
            return senmaking_forward(model, inst.s1, inst.s2, train_mode, rng);
        case Task::baseline_sen_making:
            return baseline_senmaking_forward(model, inst.s1, inst.s2, train_mode, rng);
        case Task::explanation: {
            const std::string hint = hint_enabled ? hint_of(inst) : std::string();
            return explanation_forward(model, inst.nonsense_statement(), hint, inst.options,
                                       train_mode, rng);
        }
    }
    throw ConfigError("train: unknown task");
}

void check_task_data(const TrainConfig& config, const DatasetSplit& split,
                     const char* which) {
    if (config.task != Task::explanation) return;
    for (const ComveInstance& inst : split.instances)
        if (!inst.has_options())
            throw ConfigError(std::string("train: explanation task but ") + which +
                              " instance '" + inst.id + "' has no options");
}

struct BatchGradients {
    std::vector<std::vector<double>> grads; // aligned with parameters
    double mean_loss = 0.0;
};

/// Per-instance tapes run in parallel; gradients are reduced in instance
/// order afterwards, so results do not depend on the thread count.
BatchGradients batch_gradients(const Model& model, std::span<const size_t> batch,
                               const DatasetSplit& split, const TrainConfig& config,
                               uint64_t step, std::span<Tensor> params, size_t threads) {
    const size_t count = batch.size();
    std::vector<std::vector<std::vector<double>>> per_instance(count);
    std::vector<double> losses(count, 0.0);

    parallel_chunks(count, threads, [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            const ComveInstance& inst = split.instances[batch[i]];
            Rng rng(mix_seed(mix_seed(config.seed, kDropoutStream), step, i));
            Tensor probs =
                instance_probabilities(model, inst, config.task, config.hint_enabled, true, &rng);
            Tensor loss = cross_entropy(probs, static_cast<size_t>(target_of(inst, config.task)));
            losses[i] = loss.item();
            GradCollector collector(params);
            backward_into(loss, collector);
            per_instance[i] = std::move(collector.grads());
        }
    });

    BatchGradients out;
    out.grads.reserve(params.size());
    for (const Tensor& p : params) out.grads.emplace_back(p.size(), 0.0);
    const double inv = 1.0 / static_cast<double>(count);
    for (size_t i = 0; i < count; ++i) {
        for (size_t p = 0; p < params.size(); ++p) {
            const std::vector<double>& src = per_instance[i][p];
            double* dst = out.grads[p].data();
            for (size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
        }
        out.mean_loss += losses[i];
    }
    for (std::vector<double>& g : out.grads)
        for (double& v : g) v *= inv;
    out.mean_loss *= inv;
    return out;
}

} // namespace

Evaluation evaluate(const Model& model, Task task, bool hint_enabled,
                    const DatasetSplit& split, size_t threads) {
    if (split.instances.empty()) throw InputError("evaluate: empty split");
    if (task == Task::explanation)
        for (const ComveInstance& inst : split.instances)
            if (!inst.has_options())
                throw ConfigError("evaluate: explanation task but instance '" + inst.id +
                                  "' has no options");

    Evaluation eval;
    eval.predictions.resize(split.size());
    std::vector<int> correct(split.size(), 0);
    parallel_chunks(split.size(), threads, [&](size_t begin, size_t end) {
        NoGradGuard guard; // per worker thread
        for (size_t i = begin; i < end; ++i) {
            const ComveInstance& inst = split.instances[i];
            Tensor probs = instance_probabilities(model, inst, task, hint_enabled, false, nullptr);
            std::span<const double> p = probs.values();
            int predicted = 0;
            for (size_t c = 1; c < p.size(); ++c)
                if (p[c] > p[predicted]) predicted = static_cast<int>(c);
            eval.predictions[i] = {inst.id, predicted,
                                   std::vector<double>(p.begin(), p.end())};
            correct[i] = predicted == target_of(inst, task) ? 1 : 0;
        }
    });
    size_t hits = 0;
    for (int c : correct) hits += static_cast<size_t>(c);
    eval.accuracy = static_cast<double>(hits) / static_cast<double>(split.size());
    return eval;
}

Evaluation evaluate(const Checkpoint& checkpoint, std::shared_ptr<const Vocab> vocab,
                    const DatasetSplit& split, size_t threads) {
    Model model = model_from_checkpoint(checkpoint, std::move(vocab));
    return evaluate(model, checkpoint.task, checkpoint.hint_enabled, split, threads);
}

double mean_loss(const Model& model, Task task, bool hint_enabled, const DatasetSplit& split,
                 size_t threads) {
    if (split.instances.empty()) throw InputError("mean_loss: empty split");
    std::vector<double> losses(split.size(), 0.0);
    parallel_chunks(split.size(), threads, [&](size_t begin, size_t end) {
        NoGradGuard guard;
        for (size_t i = begin; i < end; ++i) {
            const ComveInstance& inst = split.instances[i];
            Tensor probs = instance_probabilities(model, inst, task, hint_enabled, false, nullptr);
            losses[i] = cross_entropy(probs, static_cast<size_t>(target_of(inst, task))).item();
        }
    });
    double total = 0.0;
    for (double l : losses) total += l;
    return total / static_cast<double>(split.size());
}

TrainResult train(const TrainConfig& config, const TrainData& data,
                  std::shared_ptr<const Vocab> vocab, size_t threads,
                  const std::optional<Checkpoint>& transfer_source) {
    if (data.train.instances.empty()) throw ConfigError("train: empty train split");
    if (data.dev.instances.empty()) throw ConfigError("train: empty dev split");
    if (config.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    check_task_data(config, data.train, "train");
    check_task_data(config, data.dev, "dev");
    if (data.test) check_task_data(config, *data.test, "test");

    Model model = init_model(config.model, vocab, config.seed);
    if (transfer_source) {
        transfer_init(model, *transfer_source);
    } else if (config.transfer_checkpoint) {
        Checkpoint source = load_checkpoint(*config.transfer_checkpoint);
        transfer_init(model, source);
    }

    std::vector<Tensor> params = parameters(model);
    AdamWConfig opt_config;
    opt_config.learning_rate = config.learning_rate;
    AdamWState opt = init_adamw(params, opt_config);

    TrainResult result;
    uint64_t step = 0;
    double best_accuracy = -1.0;
    double loss_since_eval = 0.0;
    size_t batches_since_eval = 0;
    size_t evals_since_best = 0;
    bool stop = false;

    auto run_eval = [&]() {
        const double accuracy =
            evaluate(model, config.task, config.hint_enabled, data.dev, threads).accuracy;
        const double train_loss =
            batches_since_eval == 0 ? 0.0
                                    : loss_since_eval / static_cast<double>(batches_since_eval);
        result.history.records.push_back({step, train_loss, accuracy});
        loss_since_eval = 0.0;
        batches_since_eval = 0;
        if (accuracy > best_accuracy) {
            best_accuracy = accuracy;
            result.best = snapshot(model, config.task, config.hint_enabled, config.seed, step,
                                   accuracy);
            evals_since_best = 0;
        } else {
            ++evals_since_best;
            if (config.patience > 0 && evals_since_best >= config.patience) stop = true;
        }
    };

    run_eval(); // step-0 baseline; also seeds the best checkpoint

    Rng shuffle_rng(mix_seed(config.seed, kShuffleStream));
    std::vector<size_t> order(data.train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (size_t epoch = 0; epoch < config.epochs && !stop; ++epoch) {
        shuffle_rng.shuffle(order);
        for (size_t start = 0; start < order.size() && !stop; start += config.batch_size) {
            const size_t end = std::min(order.size(), start + config.batch_size);
            std::span<const size_t> batch(order.data() + start, end - start);
            BatchGradients batch_grads =
                batch_gradients(model, batch, data.train, config, step, params, threads);
            adamw_step(params, batch_grads.grads, opt);
            ++step;
            loss_since_eval += batch_grads.mean_loss;
            ++batches_since_eval;
            if (config.eval_every > 0 && step % config.eval_every == 0) run_eval();
        }
        if (config.eval_every == 0 && !stop) run_eval();
    }
    if (batches_since_eval > 0) run_eval(); // trailing partial eval window

    if (data.test) {
        Evaluation test_eval = evaluate(result.best, vocab, *data.test, threads);
        result.history.final_test_accuracy = test_eval.accuracy;
    }
    return result;
}

std::vector<EnsembleVote> ensemble_predict(
    const std::vector<std::vector<Prediction>>& member_predictions) {
    if (member_predictions.empty()) throw InputError("ensemble: no members");
    const std::vector<Prediction>& first = member_predictions.front();

    std::vector<std::unordered_map<std::string, const Prediction*>> by_id;
    by_id.reserve(member_predictions.size());
    for (const auto& member : member_predictions) {
        std::unordered_map<std::string, const Prediction*> index;
        for (const Prediction& p : member) index[p.id] = &p;
        if (index.size() != member.size())
            throw InputError("ensemble: duplicate ids within a member");
        by_id.push_back(std::move(index));
    }
    for (size_t m = 1; m < by_id.size(); ++m) {
        if (by_id[m].size() != first.size())
            throw InputError("ensemble: member " + std::to_string(m) + " covers " +
                             std::to_string(by_id[m].size()) + " ids, member 0 covers " +
                             std::to_string(first.size()));
        for (const Prediction& p : first)
            if (!by_id[m].count(p.id))
                throw InputError("ensemble: member " + std::to_string(m) + " misses id '" +
                                 p.id + "'");
    }

    std::vector<EnsembleVote> votes;
    votes.reserve(first.size());
    for (const Prediction& lead : first) {
        size_t classes = lead.probabilities.size();
        std::vector<int> counts(classes, 0);
        std::vector<double> prob_sums(classes, 0.0);
        for (const auto& index : by_id) {
            const Prediction& p = *index.at(lead.id);
            classes = std::max(classes, p.probabilities.size());
            counts.resize(classes, 0);
            prob_sums.resize(classes, 0.0);
            counts[static_cast<size_t>(p.predicted)] += 1;
            for (size_t c = 0; c < p.probabilities.size(); ++c)
                prob_sums[c] += p.probabilities[c];
        }
        int best = 0;
        for (size_t c = 1; c < classes; ++c) {
            const bool more_votes = counts[c] > counts[static_cast<size_t>(best)];
            const bool tie = counts[c] == counts[static_cast<size_t>(best)];
            const bool better_prob = prob_sums[c] > prob_sums[static_cast<size_t>(best)];
            if (more_votes || (tie && better_prob)) best = static_cast<int>(c);
        }
        votes.push_back({lead.id, best});
    }
    return votes;
}

std::vector<CurveRow> learning_curve(const TrainConfig& base_config, const TrainData& data,
                                     std::shared_ptr<const Vocab> vocab,
                                     const std::vector<double>& fractions,
                                     const std::vector<uint64_t>& seeds,
                                     const std::optional<Checkpoint>& transfer_source,
                                     size_t jobs) {
    for (double f : fractions)
        if (!(f > 0.0) || f > 1.0)
            throw InputError("learning_curve: fraction " + std::to_string(f) +
                             " outside (0, 1]");
    std::vector<std::string> variants{"fresh"};
    if (transfer_source) variants.push_back("transfer");

    struct GridPoint {
        double fraction;
        uint64_t seed;
        std::string variant;
    };
    std::vector<GridPoint> grid;
    for (double fraction : fractions)
        for (uint64_t seed : seeds)
            for (const std::string& variant : variants) grid.push_back({fraction, seed, variant});

    std::vector<CurveRow> rows(grid.size());
    const size_t inner_threads = 1; // grid points are the unit of parallelism
    parallel_chunks(grid.size(), jobs, [&](size_t begin, size_t end) {
        for (size_t g = begin; g < end; ++g) {
            const GridPoint& point = grid[g];
            TrainConfig config = base_config;
            config.seed = point.seed;
            config.transfer_checkpoint.reset();
            TrainData point_data;
            point_data.train = subsample(data.train, point.fraction, point.seed);
            point_data.dev = data.dev;
            const std::optional<Checkpoint>& source =
                point.variant == "transfer" ? transfer_source : std::nullopt;
            TrainResult result = train(config, point_data, vocab, inner_threads, source);
            rows[g] = {point.fraction, point.seed, point.variant, result.best.dev_accuracy};
        }
    });
    return rows;
}

void write_curve_csv(const std::vector<CurveRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("curve: cannot write " + path);
    out << "fraction,seed,variant,dev_accuracy\n";
    for (const CurveRow& row : rows)
        out << format_double(row.fraction) << ',' << row.seed << ',' << row.variant << ','
            << format_double(row.dev_accuracy) << '\n';
}

void emit_metrics(const RunHistory& history, const std::string& json_path,
                  const std::string& csv_path) {
    if (history.records.empty()) throw InputError("emit_metrics: empty history");

    const EvalRecord* best = &history.records.front();
    for (const EvalRecord& r : history.records)
        if (r.dev_accuracy > best->dev_accuracy) best = &r; // ties keep the earlier step

    json j;
    j["evals"] = history.records.size();
    j["best_step"] = best->step;
    j["best_dev_accuracy"] = best->dev_accuracy;
    if (history.final_test_accuracy) j["final_test_accuracy"] = *history.final_test_accuracy;
    json recs = json::array();
    for (const EvalRecord& r : history.records) {
        json rec;
        rec["step"] = r.step;
        rec["train_loss"] = r.train_loss;
        rec["dev_accuracy"] = r.dev_accuracy;
        recs.push_back(std::move(rec));
    }
    j["history"] = std::move(recs);

    std::ofstream jf(json_path, std::ios::binary);
    if (!jf) throw IoError("metrics: cannot write " + json_path);
    jf << j.dump(2) << '\n';

    std::ofstream cf(csv_path, std::ios::binary);
    if (!cf) throw IoError("metrics: cannot write " + csv_path);
    cf << "step,train_loss,dev_accuracy\n";
    for (const EvalRecord& r : history.records)
        cf << r.step << ',' << format_double(r.train_loss) << ','
           << format_double(r.dev_accuracy) << '\n';
}

} // namespace comve
