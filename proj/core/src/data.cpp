#include "comve/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "comve/tokenizer.hpp"

namespace comve {

using nlohmann::json;

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::original: return "original";
        case Provenance::augmented: return "augmented";
        case Provenance::synthetic: return "synthetic";
    }
    return "original";
}

Provenance provenance_from_string(const std::string& s) {
    if (s == "original") return Provenance::original;
    if (s == "augmented") return Provenance::augmented;
    if (s == "synthetic") return Provenance::synthetic;
    throw InputError("unknown provenance '" + s + "'");
}

const std::string& hint_of(const ComveInstance& instance) {
    return instance.statement(1 - instance.nonsense_index);
}

// ---- CSV ----

namespace {

struct CsvRow {
    std::vector<std::string> fields;
    size_t line; // 1-based line where the row starts
};

std::vector<CsvRow> parse_csv(std::istream& in) {
    std::vector<CsvRow> rows;
    std::string field;
    CsvRow row;
    row.line = 1;
    size_t line = 1;
    bool quoted = false;
    bool row_started = false;
    int c;
    while ((c = in.get()) != EOF) {
        char ch = static_cast<char>(c);
        if (quoted) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    quoted = false;
                }
            } else {
                if (ch == '\n') ++line;
                field.push_back(ch);
            }
            continue;
        }
        switch (ch) {
            case '"':
                quoted = true;
                row_started = true;
                break;
            case ',':
                row.fields.push_back(std::move(field));
                field.clear();
                row_started = true;
                break;
            case '\r':
                break;
            case '\n':
                ++line;
                if (row_started || !field.empty() || !row.fields.empty()) {
                    row.fields.push_back(std::move(field));
                    field.clear();
                    rows.push_back(std::move(row));
                    row = CsvRow{};
                    row.line = line;
                    row_started = false;
                }
                break;
            default:
                field.push_back(ch);
                row_started = true;
                break;
        }
    }
    if (quoted) throw ParseError("csv: unterminated quoted field", row.line);
    if (row_started || !field.empty() || !row.fields.empty()) {
        row.fields.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<CsvRow> read_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("csv: cannot read " + path);
    return parse_csv(in);
}

std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += '"';
    return out;
}

void check_header(const CsvRow& header, const std::vector<std::string>& expected,
                  const std::string& path) {
    if (header.fields != expected) {
        std::string want;
        for (size_t i = 0; i < expected.size(); ++i) {
            if (i) want += ',';
            want += expected[i];
        }
        throw ParseError("csv: " + path + " header must be '" + want + "'", header.line);
    }
}

int parse_binary_label(const std::string& text, size_t line) {
    if (text == "0") return 0;
    if (text == "1") return 1;
    throw ParseError("csv: label '" + text + "' is not 0 or 1", line);
}

int parse_reason_label(const std::string& text, size_t line) {
    if (text == "0" || text == "A") return 0;
    if (text == "1" || text == "B") return 1;
    if (text == "2" || text == "C") return 2;
    throw ParseError("csv: label '" + text + "' is not one of 0/1/2/A/B/C", line);
}

} // namespace

DatasetSplit load_comve(const std::string& task_a_path,
                        const std::optional<std::string>& task_b_path,
                        const std::string& split_name) {
    std::vector<CsvRow> a_rows = read_csv_file(task_a_path);
    if (a_rows.empty()) throw ParseError("csv: " + task_a_path + " is empty", 1);
    check_header(a_rows.front(), {"id", "sent0", "sent1", "label"}, task_a_path);

    DatasetSplit split;
    split.name = split_name;
    std::unordered_map<std::string, size_t> index_by_id;
    for (size_t r = 1; r < a_rows.size(); ++r) {
        const CsvRow& row = a_rows[r];
        if (row.fields.size() != 4)
            throw ParseError("csv: expected 4 fields, got " + std::to_string(row.fields.size()),
                             row.line);
        ComveInstance inst;
        inst.id = row.fields[0];
        inst.s1 = row.fields[1];
        inst.s2 = row.fields[2];
        if (inst.s1.empty() || inst.s2.empty())
            throw ParseError("csv: empty statement for id '" + inst.id + "'", row.line);
        inst.nonsense_index = parse_binary_label(row.fields[3], row.line);
        if (!index_by_id.emplace(inst.id, split.instances.size()).second)
            throw JoinError("csv: duplicate id '" + inst.id + "' in " + task_a_path);
        split.instances.push_back(std::move(inst));
    }

    if (task_b_path) {
        std::vector<CsvRow> b_rows = read_csv_file(*task_b_path);
        if (b_rows.empty()) throw ParseError("csv: " + *task_b_path + " is empty", 1);
        check_header(b_rows.front(), {"id", "OptionA", "OptionB", "OptionC", "label"},
                     *task_b_path);
        std::vector<std::string> unmatched;
        for (size_t r = 1; r < b_rows.size(); ++r) {
            const CsvRow& row = b_rows[r];
            if (row.fields.size() != 5)
                throw ParseError("csv: expected 5 fields, got " +
                                     std::to_string(row.fields.size()),
                                 row.line);
            auto it = index_by_id.find(row.fields[0]);
            if (it == index_by_id.end()) {
                unmatched.push_back(row.fields[0]);
                continue;
            }
            ComveInstance& inst = split.instances[it->second];
            inst.options = {row.fields[1], row.fields[2], row.fields[3]};
            inst.reason_index = parse_reason_label(row.fields[4], row.line);
        }
        if (!unmatched.empty()) {
            std::string ids;
            for (size_t i = 0; i < unmatched.size(); ++i) {
                if (i) ids += ", ";
                ids += unmatched[i];
            }
            throw JoinError("csv: task-b ids missing from task-a file: " + ids);
        }
    }
    return split;
}

void write_comve_csv(const DatasetSplit& split, const std::string& task_a_path,
                     const std::optional<std::string>& task_b_path) {
    std::ofstream a(task_a_path, std::ios::binary);
    if (!a) throw IoError("csv: cannot write " + task_a_path);
    a << "id,sent0,sent1,label\n";
    for (const ComveInstance& inst : split.instances)
        a << csv_quote(inst.id) << ',' << csv_quote(inst.s1) << ',' << csv_quote(inst.s2) << ','
          << inst.nonsense_index << '\n';

    if (!task_b_path) return;
    std::ofstream b(*task_b_path, std::ios::binary);
    if (!b) throw IoError("csv: cannot write " + *task_b_path);
    b << "id,OptionA,OptionB,OptionC,label\n";
    for (const ComveInstance& inst : split.instances) {
        if (!inst.has_options()) continue;
        b << csv_quote(inst.id) << ',' << csv_quote(inst.options[0]) << ','
          << csv_quote(inst.options[1]) << ',' << csv_quote(inst.options[2]) << ','
          << inst.reason_index << '\n';
    }
}

// ---- JSONL ----

namespace {

json instance_to_json(const ComveInstance& inst) {
    json j;
    j["id"] = inst.id;
    j["s1"] = inst.s1;
    j["s2"] = inst.s2;
    j["nonsense_index"] = inst.nonsense_index;
    if (inst.has_options()) {
        j["options"] = inst.options;
        j["reason_index"] = inst.reason_index;
    }
    j["provenance"] = to_string(inst.provenance);
    return j;
}

ComveInstance instance_from_json(const json& j, size_t line) {
    static const std::set<std::string> known = {"id",      "s1",           "s2",
                                                "options", "reason_index", "nonsense_index",
                                                "provenance"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw ParseError("jsonl: unknown key '" + it.key() + "'", line);
    try {
        ComveInstance inst;
        inst.id = j.at("id").get<std::string>();
        inst.s1 = j.at("s1").get<std::string>();
        inst.s2 = j.at("s2").get<std::string>();
        inst.nonsense_index = j.at("nonsense_index").get<int>();
        inst.provenance = provenance_from_string(j.at("provenance").get<std::string>());
        if (j.contains("options")) {
            inst.options = j.at("options").get<std::vector<std::string>>();
            inst.reason_index = j.at("reason_index").get<int>();
        }
        if (inst.s1.empty() || inst.s2.empty())
            throw InputError("empty statement");
        if (inst.nonsense_index != 0 && inst.nonsense_index != 1)
            throw InputError("nonsense_index outside {0,1}");
        if (inst.has_options()) {
            if (inst.options.size() != 3) throw InputError("options must have 3 entries");
            if (inst.reason_index < 0 || inst.reason_index > 2)
                throw InputError("reason_index outside {0,1,2}");
        }
        return inst;
    } catch (const json::exception& e) {
        throw ParseError(std::string("jsonl: ") + e.what(), line);
    } catch (const InputError& e) {
        throw ParseError(std::string("jsonl: ") + e.what(), line);
    }
}

} // namespace

void save_jsonl(const DatasetSplit& split, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("jsonl: cannot write " + path);
    for (const ComveInstance& inst : split.instances) out << instance_to_json(inst).dump() << '\n';
}

DatasetSplit load_jsonl(const std::string& path, const std::string& split_name) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("jsonl: cannot read " + path);
    DatasetSplit split;
    split.name = split_name;
    std::string line;
    size_t line_no = 0;
    std::unordered_set<std::string> ids;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(std::string("jsonl: ") + e.what(), line_no);
        }
        ComveInstance inst = instance_from_json(j, line_no);
        if (!ids.insert(inst.id).second)
            throw ParseError("jsonl: duplicate id '" + inst.id + "'", line_no);
        split.instances.push_back(std::move(inst));
    }
    return split;
}

// ---- augmentation ----

namespace {

const std::unordered_map<std::string, std::string>& synonym_lexicon() {
    static const std::unordered_map<std::string, std::string> lex = {
        {"put", "placed"},     {"kept", "stored"},    {"hid", "stashed"},
        {"ate", "finished"},   {"drank", "sipped"},   {"rode", "took"},
        {"wore", "had on"},    {"cup", "mug"},        {"glass", "tumbler"},
        {"yesterday", "last night"},                  {"today", "this afternoon"},
        {"home", "the house"}, {"warm", "cozy"},      {"big", "large"},
        {"small", "little"},   {"man", "gentleman"},  {"woman", "lady"},
        {"boy", "young boy"},  {"girl", "young girl"},{"bought", "purchased"},
        {"quickly", "fast"},   {"usually", "normally"},
        {"morning", "forenoon"},                      {"night", "evening"},
        {"nice", "pleasant"},  {"good", "fine"},      {"bad", "poor"},
        {"happy", "glad"},     {"sad", "unhappy"},    {"really", "truly"},
        {"very", "quite"},     {"house", "home"},     {"car", "automobile"},
        {"kids", "children"},  {"mom", "mother"},     {"dad", "father"},
        {"tv", "television"},  {"sofa", "couch"},     {"begin", "start"},
        {"street", "road"},    {"shop", "store"},
    };
    return lex;
}

const std::unordered_map<std::string, std::string>& contraction_lexicon() {
    static const std::unordered_map<std::string, std::string> lex = {
        {"don't", "do not"},         {"doesn't", "does not"},   {"didn't", "did not"},
        {"can't", "cannot"},         {"couldn't", "could not"}, {"won't", "will not"},
        {"wouldn't", "would not"},   {"shouldn't", "should not"},
        {"isn't", "is not"},         {"aren't", "are not"},     {"wasn't", "was not"},
        {"weren't", "were not"},     {"haven't", "have not"},   {"hasn't", "has not"},
        {"it's", "it is"},           {"that's", "that is"},     {"there's", "there is"},
        {"i'm", "i am"},             {"you're", "you are"},     {"they're", "they are"},
        {"we're", "we are"},         {"he's", "he is"},         {"she's", "she is"},
        {"i've", "i have"},          {"you've", "you have"},    {"let's", "let us"},
    };
    return lex;
}

std::vector<std::string> whitespace_tokens(const std::string& text) {
    std::vector<std::string> tokens;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

/// Seeded rewrite: expand contractions, normalize "an" to "a", swap listed
/// synonyms with probability 0.6 — skipping any word that occurs in an option.
std::string paraphrase_text(const std::string& text,
                            const std::unordered_set<std::string>& protected_words, Rng& rng) {
    std::vector<std::string> tokens = whitespace_tokens(text);
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const std::string& token : tokens) {
        std::string lowered = normalize(token);
        if (protected_words.count(lowered)) {
            out.push_back(token);
            continue;
        }
        auto contraction = contraction_lexicon().find(lowered);
        if (contraction != contraction_lexicon().end()) {
            out.push_back(contraction->second);
            continue;
        }
        if (lowered == "an") {
            out.push_back("a");
            continue;
        }
        auto synonym = synonym_lexicon().find(lowered);
        if (synonym != synonym_lexicon().end() && rng.bernoulli(0.6)) {
            out.push_back(synonym->second);
            continue;
        }
        out.push_back(token);
    }
    return join_tokens(out);
}

std::unordered_set<std::string> option_words(const ComveInstance& inst) {
    std::unordered_set<std::string> words;
    for (const std::string& option : inst.options)
        for (const std::string& w : whitespace_tokens(normalize(option))) words.insert(w);
    return words;
}

void check_train_split(const DatasetSplit& split, const char* op) {
    if (split.name != "train")
        throw InputError(std::string(op) + ": only the train split may be augmented, got '" +
                         split.name + "'");
}

} // namespace

DatasetSplit augment(const DatasetSplit& split, Augmenter augmenter, uint64_t seed) {
    check_train_split(split, "augment");
    if (augmenter == Augmenter::roundtrip_files) {
        // The file round-trip with unmodified text: a label-safe duplication.
        return import_translations(split, export_for_translation(split));
    }
    DatasetSplit out = split;
    Rng base(mix_seed(seed, 0xA06));
    for (size_t i = 0; i < split.instances.size(); ++i) {
        const ComveInstance& src = split.instances[i];
        Rng rng = base.fork(i);
        std::unordered_set<std::string> protect = option_words(src);
        ComveInstance copy = src;
        copy.id = src.id + "-aug";
        copy.s1 = paraphrase_text(src.s1, protect, rng);
        copy.s2 = paraphrase_text(src.s2, protect, rng);
        copy.provenance = Provenance::augmented;
        out.instances.push_back(std::move(copy));
    }
    return out;
}

std::vector<MtRecord> export_for_translation(const DatasetSplit& split) {
    std::vector<MtRecord> records;
    records.reserve(split.size() * 2);
    for (const ComveInstance& inst : split.instances) {
        records.push_back({inst.id, "s1", inst.s1});
        records.push_back({inst.id, "s2", inst.s2});
    }
    return records;
}

void write_mt_jsonl(const std::vector<MtRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("mt: cannot write " + path);
    for (const MtRecord& r : records) {
        json j;
        j["id"] = r.id;
        j["field"] = r.field;
        j["text"] = r.text;
        out << j.dump() << '\n';
    }
}

std::vector<MtRecord> read_mt_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("mt: cannot read " + path);
    std::vector<MtRecord> records;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            MtRecord r{j.at("id").get<std::string>(), j.at("field").get<std::string>(),
                       j.at("text").get<std::string>()};
            records.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw ParseError(std::string("mt: ") + e.what(), line_no);
        }
    }
    return records;
}

DatasetSplit import_translations(const DatasetSplit& split,
                                 const std::vector<MtRecord>& records) {
    std::map<std::pair<std::string, std::string>, std::string> by_key;
    for (const MtRecord& r : records) {
        if (r.field != "s1" && r.field != "s2")
            throw CoverageError("import: unknown field '" + r.field + "' for id '" + r.id + "'");
        if (!by_key.emplace(std::make_pair(r.id, r.field), r.text).second)
            throw CoverageError("import: duplicate record (" + r.id + ", " + r.field + ")");
    }
    std::unordered_set<std::string> split_ids;
    for (const ComveInstance& inst : split.instances) split_ids.insert(inst.id);
    for (const auto& [key, text] : by_key)
        if (!split_ids.count(key.first))
            throw CoverageError("import: record (" + key.first + ", " + key.second +
                                ") does not match any instance");

    DatasetSplit out = split;
    for (const ComveInstance& src : split.instances) {
        auto s1 = by_key.find({src.id, "s1"});
        auto s2 = by_key.find({src.id, "s2"});
        if (s1 == by_key.end())
            throw CoverageError("import: missing record (" + src.id + ", s1)");
        if (s2 == by_key.end())
            throw CoverageError("import: missing record (" + src.id + ", s2)");
        ComveInstance copy = src;
        copy.id = src.id + "-mt";
        copy.s1 = s1->second;
        copy.s2 = s2->second;
        copy.provenance = Provenance::augmented;
        out.instances.push_back(std::move(copy));
    }
    return out;
}

DatasetSplit subsample(const DatasetSplit& split, double fraction, uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw InputError("subsample: fraction must be in (0, 1], got " +
                         std::to_string(fraction));
    const size_t n = split.size();
    const size_t count = static_cast<size_t>(std::ceil(fraction * static_cast<double>(n)));
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(mix_seed(seed, 0x5AB5));
    rng.shuffle(order);
    order.resize(count);
    std::sort(order.begin(), order.end());
    DatasetSplit out;
    out.name = split.name;
    out.instances.reserve(count);
    for (size_t idx : order) out.instances.push_back(split.instances[idx]);
    return out;
}

std::vector<std::string> corpus_of(const DatasetSplit& split) {
    std::vector<std::string> corpus;
    corpus.reserve(split.size() * 5);
    for (const ComveInstance& inst : split.instances) {
        corpus.push_back(inst.s1);
        corpus.push_back(inst.s2);
        for (const std::string& option : inst.options) corpus.push_back(option);
    }
    return corpus;
}

} // namespace comve
