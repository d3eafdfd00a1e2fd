#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "comve/errors.hpp"
#include "comve/rng.hpp"

namespace comve {

enum class Provenance { original, augmented, synthetic };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

/// One ComVE record: the statement pair for the validation task plus,
/// optionally, the three candidate reasons for the explanation task.
/// nonsense_index marks the statement that is against common sense.
struct ComveInstance {
    std::string id;
    std::string s1, s2;
    int nonsense_index = 0;           // 0 | 1
    std::vector<std::string> options; // empty or exactly 3
    int reason_index = -1;            // 0..2 when options present, else -1
    Provenance provenance = Provenance::original;

    bool has_options() const { return !options.empty(); }
    const std::string& statement(int index) const { return index == 0 ? s1 : s2; }
    const std::string& nonsense_statement() const { return statement(nonsense_index); }
};

struct DatasetSplit {
    std::string name; // train | dev | test
    std::vector<ComveInstance> instances;

    size_t size() const { return instances.size(); }
};

/// The sensible statement of the pair, used as auxiliary context by the
/// explanation model.
const std::string& hint_of(const ComveInstance& instance);

// ---- ComVE CSV boundary ----

/// Loads the comma-separated task-a file (columns id,sent0,sent1,label) and
/// joins the optional task-b file (id,OptionA,OptionB,OptionC,label) by id.
/// Task-b labels accept 0/1/2 or A/B/C. Quoting follows RFC 4180.
DatasetSplit load_comve(const std::string& task_a_path,
                        const std::optional<std::string>& task_b_path,
                        const std::string& split_name);

/// Inverse of load_comve, mainly for round-trips and fixtures.
void write_comve_csv(const DatasetSplit& split, const std::string& task_a_path,
                     const std::optional<std::string>& task_b_path);

// ---- canonical JSONL interchange ----

void save_jsonl(const DatasetSplit& split, const std::string& path);
DatasetSplit load_jsonl(const std::string& path, const std::string& split_name);

// ---- augmentation ----

enum class Augmenter {
    paraphrase,      // built-in seeded synonym/contraction rewriter
    roundtrip_files, // export/import shape with unmodified text
};

/// One paraphrased copy per instance appended to the split (size doubles).
/// Options and labels are copied verbatim; words that occur in any option are
/// never rewritten. Train split only.
DatasetSplit augment(const DatasetSplit& split, Augmenter augmenter, uint64_t seed);

/// {id, field, text} record of the translation round-trip file interface.
struct MtRecord {
    std::string id;
    std::string field; // "s1" | "s2"
    std::string text;
};

std::vector<MtRecord> export_for_translation(const DatasetSplit& split);
void write_mt_jsonl(const std::vector<MtRecord>& records, const std::string& path);
std::vector<MtRecord> read_mt_jsonl(const std::string& path);

/// Builds the augmented split (originals + one copy per instance with s1/s2
/// replaced by the records). Every (id, field) of the split must appear
/// exactly once; anything missing, duplicated or unknown is a coverage error.
DatasetSplit import_translations(const DatasetSplit& split,
                                 const std::vector<MtRecord>& records);

// ---- sampling ----

/// ceil(fraction * N) instances chosen by a fixed seeded permutation prefix,
/// returned in original order. Prefixes nest: subsample(f1) is contained in
/// subsample(f2) for f1 < f2 under the same seed.
DatasetSplit subsample(const DatasetSplit& split, double fraction, uint64_t seed);

// ---- synthetic generator ----

/// Template-generated instances over a small world of objects with size,
/// edibility, drinkability, wearability and vehicle attributes. A planted
/// consistency rule decides which statement is sensible and which reason
/// template is correct. `hint_signal_strength` is the fraction of instances
/// whose correct reason can only be recovered by comparing the statement
/// with its hint sentence; `vocab_words` bounds the noun pool.
DatasetSplit generate_synthetic(size_t n, uint64_t seed, size_t vocab_words,
                                double hint_signal_strength,
                                const std::string& split_name = "train");

/// Every statement and option string of the split, for vocabulary training.
std::vector<std::string> corpus_of(const DatasetSplit& split);

} // namespace comve
