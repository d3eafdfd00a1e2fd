// comve-lab: dataset preparation, training, transfer, evaluation, ensembling
// and learning-curve runs for the commonsense validation/explanation models.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "comve/checkpoint.hpp"
#include "comve/data.hpp"
#include "comve/tokenizer.hpp"
#include "comve/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace comve;

namespace {

constexpr const char* kSeedEnvVar = "COMVE_LAB_SEED";

std::optional<uint64_t> env_seed() {
    const char* raw = std::getenv(kSeedEnvVar);
    if (raw == nullptr || *raw == '\0') return std::nullopt;
    try {
        return std::stoull(raw);
    } catch (const std::exception&) {
        throw InputError(std::string(kSeedEnvVar) + " is not an integer: '" + raw + "'");
    }
}

void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const std::string& k : allowed) known = known || k == it.key();
        if (!known)
            throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
    }
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot read " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

struct RunSpec {
    TrainConfig train;
    std::string vocab_file, merges_file;
    std::string train_path, dev_path;
    std::optional<std::string> test_path;
    std::string out_dir;
};

/// Parses and validates the run-configuration JSON (the CLI's one structured
/// input). Unknown keys anywhere are rejected; the resolved values are
/// serialized next to the run's outputs.
RunSpec parse_run_spec(const json& j, bool seed_explicitly_set_by_env_allowed = true) {
    reject_unknown_keys(j, {"task", "learning_rate", "batch_size", "epochs", "seed",
                            "eval_every", "patience", "hint_enabled", "init", "encoder",
                            "fusion_window", "max_sequence_length", "vocab_file",
                            "merges_file", "data", "out", "members", "vote_split"},
                        "the top level");
    RunSpec spec;
    TrainConfig& c = spec.train;
    c.task = task_from_string(j.at("task").get<std::string>());
    if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<size_t>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<size_t>();
    if (j.contains("seed")) {
        c.seed = j.at("seed").get<uint64_t>();
    } else if (seed_explicitly_set_by_env_allowed) {
        c.seed = env_seed().value_or(c.seed);
    }
    if (j.contains("eval_every")) c.eval_every = j.at("eval_every").get<size_t>();
    if (j.contains("patience")) c.patience = j.at("patience").get<size_t>();
    if (j.contains("hint_enabled")) c.hint_enabled = j.at("hint_enabled").get<bool>();

    if (j.contains("init")) {
        const json& init = j.at("init");
        reject_unknown_keys(init, {"type", "checkpoint"}, "init");
        const std::string type = init.at("type").get<std::string>();
        if (type == "transfer") {
            c.transfer_checkpoint = init.at("checkpoint").get<std::string>();
        } else if (type != "fresh") {
            throw ConfigError("config: init.type must be 'fresh' or 'transfer', got '" + type +
                              "'");
        }
    }

    if (j.contains("encoder")) {
        const json& e = j.at("encoder");
        reject_unknown_keys(e,
                            {"hidden_size", "embedding_size", "num_layers", "num_heads",
                             "ffn_size", "max_position", "share_parameters", "dropout"},
                            "encoder");
        EncoderConfig& ec = c.model.encoder;
        if (e.contains("hidden_size")) ec.hidden_size = e.at("hidden_size").get<size_t>();
        if (e.contains("embedding_size"))
            ec.embedding_size = e.at("embedding_size").get<size_t>();
        if (e.contains("num_layers")) ec.num_layers = e.at("num_layers").get<size_t>();
        if (e.contains("num_heads")) ec.num_heads = e.at("num_heads").get<size_t>();
        if (e.contains("ffn_size")) ec.ffn_size = e.at("ffn_size").get<size_t>();
        if (e.contains("max_position")) ec.max_position = e.at("max_position").get<size_t>();
        if (e.contains("share_parameters"))
            ec.share_parameters = e.at("share_parameters").get<bool>();
        if (e.contains("dropout")) ec.dropout = e.at("dropout").get<double>();
    }
    if (j.contains("fusion_window"))
        c.model.fusion_window = j.at("fusion_window").get<size_t>();
    if (j.contains("max_sequence_length"))
        c.model.max_sequence_length = j.at("max_sequence_length").get<size_t>();

    spec.vocab_file = j.at("vocab_file").get<std::string>();
    spec.merges_file = j.at("merges_file").get<std::string>();

    const json& data = j.at("data");
    reject_unknown_keys(data, {"train", "dev", "test"}, "data");
    spec.train_path = data.at("train").get<std::string>();
    spec.dev_path = data.at("dev").get<std::string>();
    if (data.contains("test")) spec.test_path = data.at("test").get<std::string>();

    spec.out_dir = j.at("out").get<std::string>();
    return spec;
}

json resolved_spec_json(const RunSpec& spec) {
    const TrainConfig& c = spec.train;
    json j;
    j["task"] = to_string(c.task);
    j["learning_rate"] = c.learning_rate;
    j["batch_size"] = c.batch_size;
    j["epochs"] = c.epochs;
    j["seed"] = c.seed;
    j["eval_every"] = c.eval_every;
    j["patience"] = c.patience;
    j["hint_enabled"] = c.hint_enabled;
    if (c.transfer_checkpoint)
        j["init"] = {{"type", "transfer"}, {"checkpoint", *c.transfer_checkpoint}};
    else
        j["init"] = {{"type", "fresh"}};
    j["encoder"] = {{"hidden_size", c.model.encoder.hidden_size},
                    {"embedding_size", c.model.encoder.embedding_size},
                    {"num_layers", c.model.encoder.num_layers},
                    {"num_heads", c.model.encoder.num_heads},
                    {"ffn_size", c.model.encoder.ffn_size},
                    {"max_position", c.model.encoder.max_position},
                    {"share_parameters", c.model.encoder.share_parameters},
                    {"dropout", c.model.encoder.dropout}};
    j["fusion_window"] = c.model.fusion_window;
    j["max_sequence_length"] = c.model.max_sequence_length;
    j["vocab_file"] = spec.vocab_file;
    j["merges_file"] = spec.merges_file;
    json data;
    data["train"] = spec.train_path;
    data["dev"] = spec.dev_path;
    if (spec.test_path) data["test"] = *spec.test_path;
    j["data"] = data;
    j["out"] = spec.out_dir;
    return j;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
}

std::shared_ptr<Vocab> load_vocab_files(const std::string& vocab_file,
                                        const std::string& merges_file) {
    return std::make_shared<Vocab>(Vocab::load(vocab_file, merges_file));
}

TrainData load_train_data(const RunSpec& spec) {
    TrainData data;
    data.train = load_jsonl(spec.train_path, "train");
    data.dev = load_jsonl(spec.dev_path, "dev");
    if (spec.test_path) data.test = load_jsonl(*spec.test_path, "test");
    return data;
}

void write_predictions(const std::vector<Prediction>& predictions, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    for (const Prediction& p : predictions) {
        json j;
        j["id"] = p.id;
        j["predicted"] = p.predicted;
        j["probabilities"] = p.probabilities;
        out << j.dump() << '\n';
    }
}

size_t resolve_threads(int flag_value) {
    if (flag_value > 0) return static_cast<size_t>(flag_value);
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Shared body of `train` and `transfer-train`.
int run_training(const std::string& config_path, const std::optional<std::string>& from,
                 int threads_flag) {
    json config_json = load_json_file(config_path);
    RunSpec spec = parse_run_spec(config_json);
    if (from) spec.train.transfer_checkpoint = *from;

    fs::create_directories(spec.out_dir);
    auto vocab = load_vocab_files(spec.vocab_file, spec.merges_file);
    spec.train.model.encoder.vocab_size = vocab->size();
    TrainData data = load_train_data(spec);

    write_text_file((fs::path(spec.out_dir) / "config.json").string(),
                    resolved_spec_json(spec).dump(2) + "\n");

    TrainResult result = train(spec.train, data, vocab, resolve_threads(threads_flag));
    save_checkpoint(result.best, (fs::path(spec.out_dir) / "best.ckpt").string());
    emit_metrics(result.history, (fs::path(spec.out_dir) / "metrics.json").string(),
                 (fs::path(spec.out_dir) / "history.csv").string());

    json summary;
    summary["best_dev_accuracy"] = result.best.dev_accuracy;
    summary["best_step"] = result.best.step;
    if (result.history.final_test_accuracy)
        summary["final_test_accuracy"] = *result.history.final_test_accuracy;
    std::cout << summary.dump() << "\n";
    return 0;
}

int run_ensemble(const std::string& config_path, int jobs_flag) {
    json config_json = load_json_file(config_path);
    if (!config_json.contains("members") || !config_json.at("members").is_array() ||
        config_json.at("members").empty())
        throw ConfigError("config: ensemble needs a non-empty 'members' array");
    std::string vote_split = "dev";
    if (config_json.contains("vote_split"))
        vote_split = config_json.at("vote_split").get<std::string>();
    if (vote_split != "dev" && vote_split != "test")
        throw ConfigError("config: vote_split must be 'dev' or 'test'");

    json base_json = config_json;
    base_json.erase("members");
    base_json.erase("vote_split");
    RunSpec base = parse_run_spec(base_json);

    std::vector<RunSpec> members;
    for (const json& patch : config_json.at("members")) {
        reject_unknown_keys(patch,
                            {"seed", "learning_rate", "batch_size", "epochs", "fusion_window",
                             "hint_enabled"},
                            "members[]");
        json merged = base_json;
        for (auto it = patch.begin(); it != patch.end(); ++it) {
            if (it.key() == "fusion_window")
                merged["fusion_window"] = it.value();
            else
                merged[it.key()] = it.value();
        }
        members.push_back(parse_run_spec(merged));
    }

    fs::create_directories(base.out_dir);
    write_text_file((fs::path(base.out_dir) / "config.json").string(),
                    config_json.dump(2) + "\n");
    auto vocab = load_vocab_files(base.vocab_file, base.merges_file);
    TrainData data = load_train_data(base);
    if (vote_split == "test" && !data.test)
        throw ConfigError("config: vote_split 'test' but no test split given");
    const DatasetSplit& target = vote_split == "test" ? *data.test : data.dev;

    const size_t jobs = resolve_threads(jobs_flag);
    std::vector<std::vector<Prediction>> member_predictions(members.size());
    std::vector<double> member_accuracy(members.size(), 0.0);

    // Members are independent; run them as parallel single-threaded jobs.
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(members.size());
    std::atomic<size_t> next{0};
    const size_t workers = std::min(jobs, members.size());
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const size_t m = next.fetch_add(1);
                if (m >= members.size()) return;
                try {
                    RunSpec spec = members[m];
                    spec.train.model.encoder.vocab_size = vocab->size();
                    spec.out_dir =
                        (fs::path(base.out_dir) / ("member_" + std::to_string(m))).string();
                    fs::create_directories(spec.out_dir);
                    write_text_file((fs::path(spec.out_dir) / "config.json").string(),
                                    resolved_spec_json(spec).dump(2) + "\n");
                    TrainResult result = train(spec.train, data, vocab, 1);
                    save_checkpoint(result.best,
                                    (fs::path(spec.out_dir) / "best.ckpt").string());
                    emit_metrics(result.history,
                                 (fs::path(spec.out_dir) / "metrics.json").string(),
                                 (fs::path(spec.out_dir) / "history.csv").string());
                    Evaluation eval = evaluate(result.best, vocab, target, 1);
                    member_predictions[m] = std::move(eval.predictions);
                    member_accuracy[m] = eval.accuracy;
                } catch (...) {
                    errors[m] = std::current_exception();
                    return;
                }
            }
        });
    }
    for (std::thread& th : pool) th.join();
    for (std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<EnsembleVote> votes = ensemble_predict(member_predictions);
    std::unordered_map<std::string, int> truth;
    for (const ComveInstance& inst : target.instances)
        truth[inst.id] = base.train.task == Task::explanation ? inst.reason_index
                                                              : 1 - inst.nonsense_index;
    size_t hits = 0;
    for (const EnsembleVote& v : votes)
        if (truth.at(v.id) == v.label) ++hits;
    const double accuracy = static_cast<double>(hits) / static_cast<double>(votes.size());

    std::ofstream pred_out(fs::path(base.out_dir) / "ensemble_predictions.jsonl",
                           std::ios::binary);
    for (const EnsembleVote& v : votes) {
        json j;
        j["id"] = v.id;
        j["label"] = v.label;
        pred_out << j.dump() << '\n';
    }

    json summary;
    summary["members"] = members.size();
    summary["vote_split"] = vote_split;
    summary["ensemble_accuracy"] = accuracy;
    json per_member = json::array();
    for (double a : member_accuracy) per_member.push_back(a);
    summary["member_accuracy"] = per_member;
    write_text_file((fs::path(base.out_dir) / "ensemble.json").string(),
                    summary.dump(2) + "\n");
    std::cout << summary.dump() << "\n";
    return 0;
}

std::vector<double> parse_fraction_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(std::stod(item));
    if (out.empty()) throw InputError("empty fraction list");
    return out;
}

std::vector<uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<uint64_t> out;
    std::stringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(std::stoull(item));
    if (out.empty()) throw InputError("empty seed list");
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"comve-lab: desk-scale commonsense validation/explanation pipeline"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    size_t synth_n = 1000, synth_dev = 0, synth_test = 0, synth_words = 0;
    uint64_t synth_seed = 1;
    double synth_hint = 0.3;
    std::string synth_out;
    synth->add_option("--n", synth_n, "train instances")->required();
    auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--n-dev", synth_dev, "dev instances (0 = skip)");
    synth->add_option("--n-test", synth_test, "test instances (0 = skip)");
    synth->add_option("--vocab-words", synth_words, "noun pool size (0 = default world)");
    synth->add_option("--hint-signal", synth_hint,
                      "fraction of instances whose reason needs the hint");
    synth->add_option("--out", synth_out, "output directory")->required();

    // ---- ingest ----
    auto* ingest = app.add_subcommand("ingest", "Convert ComVE CSV files to JSONL");
    std::string ingest_a, ingest_b, ingest_split = "train", ingest_out;
    ingest->add_option("--task-a", ingest_a, "task-a CSV (id,sent0,sent1,label)")->required();
    ingest->add_option("--task-b", ingest_b, "task-b CSV (id,OptionA..C,label)");
    ingest->add_option("--split", ingest_split, "split name (also the output file name)");
    ingest->add_option("--out", ingest_out, "output directory")->required();

    // ---- vocab ----
    auto* vocab_cmd = app.add_subcommand("vocab", "Train a subword vocabulary");
    std::vector<std::string> vocab_data;
    size_t vocab_size = 1200;
    std::string vocab_out;
    vocab_cmd->add_option("--data", vocab_data, "JSONL file(s) to learn from")->required();
    vocab_cmd->add_option("--size", vocab_size, "target vocabulary size");
    vocab_cmd->add_option("--out", vocab_out, "output directory")->required();

    // ---- augment ----
    auto* augment_cmd = app.add_subcommand("augment", "Double a train split");
    std::string augment_data, augment_method = "paraphrase", augment_out;
    uint64_t augment_seed = 1;
    augment_cmd->add_option("--data", augment_data, "train JSONL")->required();
    augment_cmd->add_option("--method", augment_method, "paraphrase | roundtrip");
    auto* augment_seed_opt = augment_cmd->add_option("--seed", augment_seed, "rewriter seed");
    augment_cmd->add_option("--out", augment_out, "output directory")->required();

    // ---- export-mt / import-mt ----
    auto* export_mt = app.add_subcommand("export-mt", "Write the translation round-trip file");
    std::string export_data, export_out;
    export_mt->add_option("--data", export_data, "split JSONL")->required();
    export_mt->add_option("--out", export_out, "output JSONL path")->required();

    auto* import_mt = app.add_subcommand("import-mt", "Fold back-translations into a split");
    std::string import_data, import_translations_path, import_out;
    import_mt->add_option("--data", import_data, "split JSONL")->required();
    import_mt->add_option("--translations", import_translations_path,
                          "{id,field,text} JSONL")->required();
    import_mt->add_option("--out", import_out, "output directory")->required();

    // ---- train / transfer-train ----
    auto* train_cmd = app.add_subcommand("train", "Train from a JSON run configuration");
    std::string train_config;
    int train_threads = 0;
    train_cmd->add_option("--config", train_config, "run configuration JSON")->required();
    train_cmd->add_option("--threads", train_threads, "worker threads (0 = all cores)");

    auto* transfer_cmd =
        app.add_subcommand("transfer-train", "Train with an encoder warm start");
    std::string transfer_config, transfer_from;
    int transfer_threads = 0;
    transfer_cmd->add_option("--config", transfer_config, "run configuration JSON")->required();
    transfer_cmd->add_option("--from", transfer_from, "source checkpoint")->required();
    transfer_cmd->add_option("--threads", transfer_threads, "worker threads (0 = all cores)");

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
    std::string eval_ckpt, eval_vocab, eval_merges, eval_split, eval_out;
    int eval_threads = 0;
    eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--vocab", eval_vocab, "vocab.txt path")->required();
    eval_cmd->add_option("--merges", eval_merges, "merges.txt path")->required();
    eval_cmd->add_option("--split", eval_split, "JSONL split to grade")->required();
    eval_cmd->add_option("--out", eval_out, "directory for predictions.jsonl");
    eval_cmd->add_option("--threads", eval_threads, "worker threads (0 = all cores)");

    // ---- ensemble ----
    auto* ensemble_cmd = app.add_subcommand("ensemble", "Train members and majority-vote");
    std::string ensemble_config;
    int ensemble_jobs = 0;
    ensemble_cmd->add_option("--config", ensemble_config, "ensemble configuration JSON")
        ->required();
    ensemble_cmd->add_option("--jobs", ensemble_jobs, "parallel member runs (0 = all cores)");

    // ---- curve ----
    auto* curve_cmd = app.add_subcommand("curve", "Low-resource learning-curve grid");
    std::string curve_config, curve_fractions = "0.1,0.2,0.5,1.0", curve_seeds = "1,2,3,4,5";
    std::string curve_transfer_from, curve_out_override;
    int curve_jobs = 0;
    curve_cmd->add_option("--config", curve_config, "run configuration JSON")->required();
    curve_cmd->add_option("--fractions", curve_fractions, "comma-separated fractions");
    curve_cmd->add_option("--seeds", curve_seeds, "comma-separated seeds");
    curve_cmd->add_option("--transfer-from", curve_transfer_from,
                          "also run a transfer variant from this checkpoint");
    curve_cmd->add_option("--out", curve_out_override, "override the config's out directory");
    curve_cmd->add_option("--jobs", curve_jobs, "parallel grid points (0 = all cores)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) {
            if (synth_seed_opt->count() == 0) synth_seed = env_seed().value_or(synth_seed);
            fs::create_directories(synth_out);
            DatasetSplit train =
                generate_synthetic(synth_n, synth_seed, synth_words, synth_hint, "train");
            save_jsonl(train, (fs::path(synth_out) / "train.jsonl").string());
            if (synth_dev > 0) {
                DatasetSplit dev = generate_synthetic(synth_dev, mix_seed(synth_seed, 0xDE),
                                                      synth_words, synth_hint, "dev");
                save_jsonl(dev, (fs::path(synth_out) / "dev.jsonl").string());
            }
            if (synth_test > 0) {
                DatasetSplit test = generate_synthetic(synth_test, mix_seed(synth_seed, 0x7E57),
                                                       synth_words, synth_hint, "test");
                save_jsonl(test, (fs::path(synth_out) / "test.jsonl").string());
            }
            json summary;
            summary["train"] = synth_n;
            if (synth_dev > 0) summary["dev"] = synth_dev;
            if (synth_test > 0) summary["test"] = synth_test;
            std::cout << summary.dump() << "\n";
            return 0;
        }
        if (ingest->parsed()) {
            fs::create_directories(ingest_out);
            std::optional<std::string> task_b;
            if (!ingest_b.empty()) task_b = ingest_b;
            DatasetSplit split = load_comve(ingest_a, task_b, ingest_split);
            save_jsonl(split, (fs::path(ingest_out) / (ingest_split + ".jsonl")).string());
            json summary;
            summary["instances"] = split.size();
            std::cout << summary.dump() << "\n";
            return 0;
        }
        if (vocab_cmd->parsed()) {
            fs::create_directories(vocab_out);
            std::vector<std::string> corpus;
            for (const std::string& path : vocab_data) {
                DatasetSplit split = load_jsonl(path, "corpus");
                for (std::string& line : corpus_of(split)) corpus.push_back(std::move(line));
            }
            Vocab vocab = train_vocab(corpus, vocab_size);
            vocab.save((fs::path(vocab_out) / "vocab.txt").string(),
                       (fs::path(vocab_out) / "merges.txt").string());
            json summary;
            summary["vocab_size"] = vocab.size();
            std::cout << summary.dump() << "\n";
            return 0;
        }
        if (augment_cmd->parsed()) {
            if (augment_seed_opt->count() == 0)
                augment_seed = env_seed().value_or(augment_seed);
            Augmenter method;
            if (augment_method == "paraphrase")
                method = Augmenter::paraphrase;
            else if (augment_method == "roundtrip")
                method = Augmenter::roundtrip_files;
            else
                throw InputError("augment: method must be paraphrase or roundtrip");
            fs::create_directories(augment_out);
            DatasetSplit split = load_jsonl(augment_data, "train");
            DatasetSplit doubled = augment(split, method, augment_seed);
            save_jsonl(doubled, (fs::path(augment_out) / "augmented.jsonl").string());
            json summary;
            summary["instances"] = doubled.size();
            std::cout << summary.dump() << "\n";
            return 0;
        }
        if (export_mt->parsed()) {
            DatasetSplit split = load_jsonl(export_data, "train");
            if (fs::path(export_out).has_parent_path())
                fs::create_directories(fs::path(export_out).parent_path());
            write_mt_jsonl(export_for_translation(split), export_out);
            return 0;
        }
        if (import_mt->parsed()) {
            fs::create_directories(import_out);
            DatasetSplit split = load_jsonl(import_data, "train");
            DatasetSplit merged =
                import_translations(split, read_mt_jsonl(import_translations_path));
            save_jsonl(merged, (fs::path(import_out) / "augmented.jsonl").string());
            json summary;
            summary["instances"] = merged.size();
            std::cout << summary.dump() << "\n";
            return 0;
        }
        if (train_cmd->parsed()) return run_training(train_config, std::nullopt, train_threads);
        if (transfer_cmd->parsed())
            return run_training(transfer_config, transfer_from, transfer_threads);
        if (eval_cmd->parsed()) {
            Checkpoint ckpt = load_checkpoint(eval_ckpt);
            auto vocab = load_vocab_files(eval_vocab, eval_merges);
            DatasetSplit split = load_jsonl(eval_split, "eval");
            Evaluation eval = evaluate(ckpt, vocab, split, resolve_threads(eval_threads));
            if (!eval_out.empty()) {
                fs::create_directories(eval_out);
                write_predictions(eval.predictions,
                                  (fs::path(eval_out) / "predictions.jsonl").string());
            }
            json summary;
            summary["accuracy"] = eval.accuracy;
            std::cout << summary.dump() << "\n";
            return 0;
        }
        if (ensemble_cmd->parsed()) return run_ensemble(ensemble_config, ensemble_jobs);
        if (curve_cmd->parsed()) {
            json config_json = load_json_file(curve_config);
            RunSpec spec = parse_run_spec(config_json);
            if (!curve_out_override.empty()) spec.out_dir = curve_out_override;
            fs::create_directories(spec.out_dir);
            auto vocab = load_vocab_files(spec.vocab_file, spec.merges_file);
            spec.train.model.encoder.vocab_size = vocab->size();
            TrainData data = load_train_data(spec);
            std::optional<Checkpoint> source;
            if (!curve_transfer_from.empty()) source = load_checkpoint(curve_transfer_from);
            write_text_file((fs::path(spec.out_dir) / "config.json").string(),
                            resolved_spec_json(spec).dump(2) + "\n");
            auto rows = learning_curve(spec.train, data, vocab,
                                       parse_fraction_list(curve_fractions),
                                       parse_seed_list(curve_seeds), source,
                                       resolve_threads(curve_jobs));
            write_curve_csv(rows, (fs::path(spec.out_dir) / "curve.csv").string());
            json summary;
            summary["rows"] = rows.size();
            std::cout << summary.dump() << "\n";
            return 0;
        }
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
