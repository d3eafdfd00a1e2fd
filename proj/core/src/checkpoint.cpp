#include "comve/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace comve {

using nlohmann::json;

std::string to_string(Task task) {
    switch (task) {
        case Task::sen_making: return "sen_making";
        case Task::explanation: return "explanation";
        case Task::baseline_sen_making: return "baseline_sen_making";
    }
    return "sen_making";
}

Task task_from_string(const std::string& s) {
    if (s == "sen_making") return Task::sen_making;
    if (s == "explanation") return Task::explanation;
    if (s == "baseline_sen_making") return Task::baseline_sen_making;
    throw InputError("unknown task '" + s + "'");
}

namespace {

constexpr char kMagic[4] = {'C', 'V', 'L', 'B'};
constexpr uint32_t kVersion = 1;

json encoder_config_to_json(const EncoderConfig& c) {
    json j;
    j["vocab_size"] = c.vocab_size;
    j["hidden_size"] = c.hidden_size;
    j["embedding_size"] = c.embedding_size;
    j["num_layers"] = c.num_layers;
    j["num_heads"] = c.num_heads;
    j["ffn_size"] = c.ffn_size;
    j["max_position"] = c.max_position;
    j["share_parameters"] = c.share_parameters;
    j["dropout"] = c.dropout;
    return j;
}

EncoderConfig encoder_config_from_json(const json& j) {
    EncoderConfig c;
    c.vocab_size = j.at("vocab_size").get<size_t>();
    c.hidden_size = j.at("hidden_size").get<size_t>();
    c.embedding_size = j.at("embedding_size").get<size_t>();
    c.num_layers = j.at("num_layers").get<size_t>();
    c.num_heads = j.at("num_heads").get<size_t>();
    c.ffn_size = j.at("ffn_size").get<size_t>();
    c.max_position = j.at("max_position").get<size_t>();
    c.share_parameters = j.at("share_parameters").get<bool>();
    c.dropout = j.at("dropout").get<double>();
    return c;
}

} // namespace

Checkpoint snapshot(const Model& model, Task task, bool hint_enabled, uint64_t seed,
                    uint64_t step, double dev_accuracy) {
    Checkpoint ckpt;
    ckpt.model_config = model.config;
    ckpt.task = task;
    ckpt.hint_enabled = hint_enabled;
    ckpt.seed = seed;
    ckpt.step = step;
    ckpt.dev_accuracy = dev_accuracy;
    for (const NamedTensor& named : named_parameters(model)) {
        std::vector<double> copy(named.tensor.values().begin(), named.tensor.values().end());
        ckpt.tensors.push_back(
            {named.group, named.name, Tensor::from(named.tensor.shape(), std::move(copy))});
    }
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    json header;
    header["format_version"] = ckpt.format_version;
    header["task"] = to_string(ckpt.task);
    header["hint_enabled"] = ckpt.hint_enabled;
    header["seed"] = ckpt.seed;
    header["step"] = ckpt.step;
    header["dev_accuracy"] = ckpt.dev_accuracy;
    header["model_config"] = {
        {"encoder", encoder_config_to_json(ckpt.model_config.encoder)},
        {"fusion_window", ckpt.model_config.fusion_window},
        {"max_sequence_length", ckpt.model_config.max_sequence_length},
    };
    json manifest = json::array();
    uint64_t offset = 0; // in doubles
    for (const NamedTensor& named : ckpt.tensors) {
        json t;
        t["group"] = named.group;
        t["name"] = named.name;
        t["shape"] = named.tensor.shape();
        t["offset"] = offset;
        manifest.push_back(std::move(t));
        offset += named.tensor.size();
    }
    header["tensors"] = std::move(manifest);

    const std::string header_text = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("checkpoint: cannot write " + path);
    out.write(kMagic, 4);
    uint32_t version = kVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    uint64_t header_len = header_text.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const NamedTensor& named : ckpt.tensors) {
        std::span<const double> values = named.tensor.values();
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(double)));
    }
    if (!out) throw IoError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot read " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw ParseError("checkpoint: bad magic in " + path, 1);
    uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in || version != kVersion)
        throw ParseError("checkpoint: unsupported format version " + std::to_string(version), 1);
    uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw ParseError("checkpoint: truncated header in " + path, 1);

    json header;
    try {
        header = json::parse(header_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint: ") + e.what(), 1);
    }

    Checkpoint ckpt;
    try {
        ckpt.format_version = header.at("format_version").get<uint32_t>();
        ckpt.task = task_from_string(header.at("task").get<std::string>());
        ckpt.hint_enabled = header.at("hint_enabled").get<bool>();
        ckpt.seed = header.at("seed").get<uint64_t>();
        ckpt.step = header.at("step").get<uint64_t>();
        ckpt.dev_accuracy = header.at("dev_accuracy").get<double>();
        const json& mc = header.at("model_config");
        ckpt.model_config.encoder = encoder_config_from_json(mc.at("encoder"));
        ckpt.model_config.fusion_window = mc.at("fusion_window").get<size_t>();
        ckpt.model_config.max_sequence_length = mc.at("max_sequence_length").get<size_t>();

        for (const json& t : header.at("tensors")) {
            std::vector<size_t> shape = t.at("shape").get<std::vector<size_t>>();
            size_t count = 1;
            for (size_t d : shape) count *= d;
            std::vector<double> values(count);
            in.read(reinterpret_cast<char*>(values.data()),
                    static_cast<std::streamsize>(count * sizeof(double)));
            if (!in) throw IoError("checkpoint: truncated tensor data in " + path);
            ckpt.tensors.push_back({t.at("group").get<std::string>(),
                                    t.at("name").get<std::string>(),
                                    Tensor::from(std::move(shape), std::move(values))});
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint: ") + e.what(), 1);
    }
    return ckpt;
}

namespace {

const NamedTensor* find_tensor(const Checkpoint& ckpt, const std::string& group,
                               const std::string& name) {
    for (const NamedTensor& t : ckpt.tensors)
        if (t.group == group && t.name == name) return &t;
    return nullptr;
}

void copy_group(Model& model, const Checkpoint& ckpt, const std::vector<std::string>& groups) {
    std::vector<std::string> problems;
    for (NamedTensor& named : named_parameters(model)) {
        bool wanted = false;
        for (const std::string& g : groups) wanted = wanted || g == named.group;
        if (!wanted) continue;
        const NamedTensor* source = find_tensor(ckpt, named.group, named.name);
        if (source == nullptr) {
            problems.push_back(named.group + "/" + named.name + " missing");
            continue;
        }
        if (source->tensor.shape() != named.tensor.shape()) {
            problems.push_back(named.group + "/" + named.name + " shape " +
                               format_shape(source->tensor.shape()) + " vs " +
                               format_shape(named.tensor.shape()));
            continue;
        }
        std::span<double> dst = named.tensor.mutable_values();
        std::span<const double> src = source->tensor.values();
        std::copy(src.begin(), src.end(), dst.begin());
    }
    if (!problems.empty()) {
        std::string all;
        for (size_t i = 0; i < problems.size(); ++i) {
            if (i) all += "; ";
            all += problems[i];
        }
        throw DimensionError("checkpoint: incompatible parameter groups: " + all);
    }
}

} // namespace

Model model_from_checkpoint(const Checkpoint& ckpt, std::shared_ptr<const Vocab> vocab) {
    Model model = init_model(ckpt.model_config, std::move(vocab), 0);
    copy_group(model, ckpt, {"embeddings", "blocks", "fusion", "head"});
    return model;
}

void transfer_init(Model& target, const Checkpoint& source) {
    const EncoderConfig& a = source.model_config.encoder;
    const EncoderConfig& b = target.config.encoder;
    std::vector<std::string> mismatches;
    if (a.vocab_size != b.vocab_size) mismatches.push_back("vocab_size");
    if (a.hidden_size != b.hidden_size) mismatches.push_back("hidden_size");
    if (a.embedding_size != b.embedding_size) mismatches.push_back("embedding_size");
    if (a.num_layers != b.num_layers) mismatches.push_back("num_layers");
    if (a.num_heads != b.num_heads) mismatches.push_back("num_heads");
    if (a.ffn_size != b.ffn_size) mismatches.push_back("ffn_size");
    if (a.max_position != b.max_position) mismatches.push_back("max_position");
    if (a.share_parameters != b.share_parameters) mismatches.push_back("share_parameters");
    if (!mismatches.empty()) {
        std::string all;
        for (size_t i = 0; i < mismatches.size(); ++i) {
            if (i) all += ", ";
            all += mismatches[i];
        }
        throw DimensionError("transfer_init: encoder configs disagree on: " + all);
    }
    copy_group(target, source, {"embeddings", "blocks"});
}

} // namespace comve
