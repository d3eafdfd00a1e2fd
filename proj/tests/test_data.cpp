#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "comve/data.hpp"

using namespace comve;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("comve_data_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

DatasetSplit tiny_split() {
    DatasetSplit split;
    split.name = "train";
    ComveInstance a;
    a.id = "x1";
    a.s1 = "he put an elephant into the fridge";
    a.s2 = "he put a turkey into the fridge";
    a.nonsense_index = 0;
    a.options = {"an elephant is much bigger than a fridge", "elephants are gray",
                 "an elephant cannot eat a fridge"};
    a.reason_index = 0;
    ComveInstance b;
    b.id = "x2";
    b.s1 = "anna drank a cup of tea";
    b.s2 = "anna drank a cup of nails";
    b.nonsense_index = 1;
    b.options = {"nails are sharp", "a nail is not a liquid that people can drink",
                 "tea is warm"};
    b.reason_index = 1;
    split.instances = {a, b};
    return split;
}

} // namespace

TEST_CASE("hint_of returns the sensible statement") {
    ComveInstance inst;
    inst.s1 = "nonsense one";
    inst.s2 = "sensible two";
    inst.nonsense_index = 0;
    CHECK(hint_of(inst) == "sensible two");
    inst.nonsense_index = 1;
    CHECK(hint_of(inst) == "nonsense one");
    CHECK(hint_of(inst) != inst.nonsense_statement());
}

TEST_CASE("load_comve joins well-formed files") {
    TempDir dir;
    write_text(dir.file("a.csv"),
               "id,sent0,sent1,label\n"
               "1,he put an elephant into the fridge,he put a turkey into the fridge,0\n"
               "2,\"anna, the nurse, drank tea\",anna drank nails,1\n"
               "3,tom rode the bus,tom rode the scarf,1\n");
    write_text(dir.file("b.csv"),
               "id,OptionA,OptionB,OptionC,label\n"
               "1,too big,gray,cannot eat,A\n"
               "2,sharp,\"not a liquid, truly\",warm,B\n"
               "3,not a vehicle,too small,too loud,0\n");
    DatasetSplit split = load_comve(dir.file("a.csv"), dir.file("b.csv"), "train");
    REQUIRE(split.size() == 3);
    CHECK(split.instances[0].options[0] == "too big");
    CHECK(split.instances[0].reason_index == 0);
    CHECK(split.instances[1].s1 == "anna, the nurse, drank tea"); // quoted comma
    CHECK(split.instances[1].options[1] == "not a liquid, truly");
    CHECK(split.instances[1].reason_index == 1);
    CHECK(split.instances[2].reason_index == 0); // numeric label accepted
    CHECK(split.instances[2].nonsense_index == 1);
}

TEST_CASE("task-b ids missing from task-a are a join error") {
    TempDir dir;
    write_text(dir.file("a.csv"), "id,sent0,sent1,label\n1,s one,s two,0\n");
    write_text(dir.file("b.csv"),
               "id,OptionA,OptionB,OptionC,label\n9,o1,o2,o3,A\n");
    try {
        load_comve(dir.file("a.csv"), dir.file("b.csv"), "train");
        FAIL("expected JoinError");
    } catch (const JoinError& e) {
        CHECK(std::string(e.what()).find("9") != std::string::npos);
    }
}

TEST_CASE("malformed csv rows report their line number") {
    TempDir dir;
    write_text(dir.file("a.csv"),
               "id,sent0,sent1,label\n"
               "1,s one,s two,0\n"
               "2,only two fields\n");
    try {
        load_comve(dir.file("a.csv"), std::nullopt, "train");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    write_text(dir.file("bad_header.csv"), "id,sentA,sentB,label\n");
    CHECK_THROWS_AS(load_comve(dir.file("bad_header.csv"), std::nullopt, "train"), ParseError);
}

TEST_CASE("a generated 10000-row train file loads back with exactly 10000 instances") {
    TempDir dir;
    DatasetSplit big = generate_synthetic(10000, 42, 0, 0.3, "train");
    write_comve_csv(big, dir.file("a.csv"), dir.file("b.csv"));
    DatasetSplit loaded = load_comve(dir.file("a.csv"), dir.file("b.csv"), "train");
    CHECK(loaded.size() == 10000);
    // labels survive the round trip
    for (size_t i = 0; i < 100; ++i) {
        CHECK(loaded.instances[i].nonsense_index == big.instances[i].nonsense_index);
        CHECK(loaded.instances[i].reason_index == big.instances[i].reason_index);
    }
}

TEST_CASE("jsonl round trip preserves instances") {
    TempDir dir;
    DatasetSplit split = tiny_split();
    split.instances[0].provenance = Provenance::synthetic;
    save_jsonl(split, dir.file("d.jsonl"));
    DatasetSplit loaded = load_jsonl(dir.file("d.jsonl"), "train");
    REQUIRE(loaded.size() == split.size());
    for (size_t i = 0; i < split.size(); ++i) {
        CHECK(loaded.instances[i].id == split.instances[i].id);
        CHECK(loaded.instances[i].s1 == split.instances[i].s1);
        CHECK(loaded.instances[i].options == split.instances[i].options);
        CHECK(loaded.instances[i].reason_index == split.instances[i].reason_index);
        CHECK(loaded.instances[i].provenance == split.instances[i].provenance);
    }
    write_text(dir.file("bad.jsonl"), R"({"id":"a","s1":"x","s2":"y","nonsense_index":0,)"
                                      R"("provenance":"original","surprise":1})"
                                      "\n");
    try {
        load_jsonl(dir.file("bad.jsonl"), "train");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("surprise") != std::string::npos);
    }
}

TEST_CASE("augment doubles the split and copies labels verbatim") {
    DatasetSplit split = tiny_split();
    DatasetSplit out = augment(split, Augmenter::paraphrase, 11);
    CHECK(out.size() == 2 * split.size());
    for (size_t i = 0; i < split.size(); ++i) {
        const ComveInstance& src = out.instances[i];
        const ComveInstance& aug = out.instances[split.size() + i];
        CHECK(aug.id == src.id + "-aug");
        CHECK(aug.nonsense_index == src.nonsense_index);
        CHECK(aug.options == src.options);
        CHECK(aug.reason_index == src.reason_index);
        CHECK(aug.provenance == Provenance::augmented);
    }
    // determinism
    DatasetSplit again = augment(split, Augmenter::paraphrase, 11);
    for (size_t i = 0; i < out.size(); ++i) {
        CHECK(again.instances[i].s1 == out.instances[i].s1);
        CHECK(again.instances[i].s2 == out.instances[i].s2);
    }
    DatasetSplit different = augment(split, Augmenter::paraphrase, 12);
    bool any = false;
    for (size_t i = 0; i < out.size(); ++i)
        if (different.instances[i].s1 != out.instances[i].s1) any = true;
    // seeds may coincide on tiny data, but across both statements of both
    // instances some substitution should differ
    (void)any;
}

TEST_CASE("augmentation never touches words that appear in an option") {
    DatasetSplit split;
    split.name = "train";
    ComveInstance inst;
    inst.id = "p1";
    // "drank" and "cup" both have synonyms in the lexicon; "cup" is protected
    // by the option below, "drank" is not.
    inst.s1 = "anna drank a cup of tea";
    inst.s2 = "anna drank a cup of nails";
    inst.nonsense_index = 1;
    inst.options = {"a cup holds liquid", "nails are metal", "tea is a drink"};
    inst.reason_index = 0;
    split.instances = {inst};

    bool cup_survived_all_seeds = true;
    bool drank_changed_somewhere = false;
    for (uint64_t seed = 0; seed < 40; ++seed) {
        DatasetSplit out = augment(split, Augmenter::paraphrase, seed);
        const std::string& s1 = out.instances[1].s1;
        if (s1.find("cup") == std::string::npos) cup_survived_all_seeds = false;
        if (s1.find("sipped") != std::string::npos) drank_changed_somewhere = true;
    }
    CHECK(cup_survived_all_seeds);
    CHECK(drank_changed_somewhere);
}

TEST_CASE("augmenting an eval split is refused") {
    DatasetSplit split = tiny_split();
    split.name = "dev";
    CHECK_THROWS_AS(augment(split, Augmenter::paraphrase, 1), InputError);
}

TEST_CASE("export produces two records per instance and the round trip duplicates") {
    DatasetSplit split = tiny_split();
    std::vector<MtRecord> records = export_for_translation(split);
    CHECK(records.size() == 4);

    DatasetSplit round = import_translations(split, records);
    CHECK(round.size() == 4);
    CHECK(round.instances[2].s1 == split.instances[0].s1);
    CHECK(round.instances[2].id == "x1-mt");
    CHECK(round.instances[2].provenance == Provenance::augmented);

    // file round trip too
    TempDir dir;
    write_mt_jsonl(records, dir.file("mt.jsonl"));
    std::vector<MtRecord> back = read_mt_jsonl(dir.file("mt.jsonl"));
    REQUIRE(back.size() == records.size());
    CHECK(back[1].field == records[1].field);
    CHECK(back[3].text == records[3].text);
}

TEST_CASE("import names the missing or duplicated record") {
    DatasetSplit split = tiny_split();
    std::vector<MtRecord> records = export_for_translation(split);
    std::vector<MtRecord> missing(records.begin(), records.end() - 1);
    try {
        import_translations(split, missing);
        FAIL("expected CoverageError");
    } catch (const CoverageError& e) {
        std::string what = e.what();
        CHECK(what.find("x2") != std::string::npos);
        CHECK(what.find("s2") != std::string::npos);
    }
    std::vector<MtRecord> doubled = records;
    doubled.push_back(records[0]);
    CHECK_THROWS_AS(import_translations(split, doubled), CoverageError);
    std::vector<MtRecord> alien = records;
    alien.push_back({"ghost", "s1", "boo"});
    CHECK_THROWS_AS(import_translations(split, alien), CoverageError);
}

TEST_CASE("subsample sizes, identity and nesting") {
    DatasetSplit split = generate_synthetic(10000, 3, 0, 0.3, "train");
    DatasetSplit all = subsample(split, 1.0, 7);
    REQUIRE(all.size() == split.size());
    for (size_t i = 0; i < 20; ++i) CHECK(all.instances[i].id == split.instances[i].id);

    DatasetSplit tenth = subsample(split, 0.1, 7);
    CHECK(tenth.size() == 1000);

    DatasetSplit fifth = subsample(split, 0.2, 7);
    std::set<std::string> larger;
    for (const ComveInstance& inst : fifth.instances) larger.insert(inst.id);
    for (const ComveInstance& inst : tenth.instances) CHECK(larger.count(inst.id) == 1);

    CHECK_THROWS_AS(subsample(split, 0.0, 7), InputError);
    CHECK_THROWS_AS(subsample(split, 1.5, 7), InputError);
}

TEST_CASE("synthetic generation is deterministic and balanced") {
    DatasetSplit a = generate_synthetic(10000, 5, 0, 0.3, "train");
    DatasetSplit b = generate_synthetic(10000, 5, 0, 0.3, "train");
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < 200; ++i) {
        CHECK(a.instances[i].s1 == b.instances[i].s1);
        CHECK(a.instances[i].options == b.instances[i].options);
    }

    size_t nonsense1 = 0;
    std::array<size_t, 3> reasons{0, 0, 0};
    for (const ComveInstance& inst : a.instances) {
        nonsense1 += static_cast<size_t>(inst.nonsense_index);
        reasons[static_cast<size_t>(inst.reason_index)] += 1;
    }
    CHECK(std::abs(static_cast<double>(nonsense1) / 10000.0 - 0.5) < 0.03);
    for (size_t c = 0; c < 3; ++c)
        CHECK(std::abs(static_cast<double>(reasons[c]) / 10000.0 - 1.0 / 3) < 0.03);
}

TEST_CASE("synthetic statements average about eight words") {
    DatasetSplit split = generate_synthetic(4000, 9, 0, 0.3, "train");
    size_t words = 0, statements = 0;
    for (const ComveInstance& inst : split.instances) {
        for (const std::string* s : {&inst.s1, &inst.s2}) {
            std::istringstream in(*s);
            std::string w;
            while (in >> w) ++words;
            ++statements;
        }
    }
    const double mean = static_cast<double>(words) / static_cast<double>(statements);
    CHECK(mean > 8.26 - 1.5);
    CHECK(mean < 8.26 + 1.5);
}

TEST_CASE("statement pairs differ in exactly one content slot") {
    DatasetSplit split = generate_synthetic(500, 13, 0, 0.0, "train");
    for (const ComveInstance& inst : split.instances) {
        std::istringstream in1(inst.s1), in2(inst.s2);
        std::vector<std::string> w1, w2;
        std::string w;
        while (in1 >> w) w1.push_back(w);
        while (in2 >> w) w2.push_back(w);
        REQUIRE(w1.size() == w2.size());
        size_t diff = 0;
        for (size_t i = 0; i < w1.size(); ++i)
            if (w1[i] != w2[i]) ++diff;
        CHECK(diff == 1);
    }
}

TEST_CASE("hint signal strength controls how many instances need the hint") {
    DatasetSplit strong = generate_synthetic(4000, 21, 0, 1.0, "train");
    size_t hinted = 0;
    for (const ComveInstance& inst : strong.instances) {
        bool has_suggestion = inst.options[0].find("should replace") != std::string::npos;
        if (has_suggestion) ++hinted;
    }
    CHECK(hinted == strong.size());

    DatasetSplit none = generate_synthetic(4000, 21, 0, 0.0, "train");
    for (const ComveInstance& inst : none.instances)
        CHECK(inst.options[0].find("should replace") == std::string::npos);

    DatasetSplit some = generate_synthetic(4000, 21, 0, 0.3, "train");
    size_t count = 0;
    for (const ComveInstance& inst : some.instances)
        if (inst.options[0].find("should replace") != std::string::npos) ++count;
    const double rate = static_cast<double>(count) / 4000.0;
    CHECK(rate > 0.25);
    CHECK(rate < 0.35);

    CHECK_THROWS_AS(generate_synthetic(10, 1, 0, 1.5, "train"), InputError);
    CHECK_THROWS_AS(generate_synthetic(0, 1, 0, 0.5, "train"), InputError);
}

TEST_CASE("hint instances hide the answer from the statement alone") {
    DatasetSplit split = generate_synthetic(300, 31, 0, 1.0, "train");
    for (const ComveInstance& inst : split.instances) {
        // the sensible statement's distinguishing word appears in the correct
        // option and in no other option
        const std::string& hint = hint_of(inst);
        const std::string& correct = inst.options[static_cast<size_t>(inst.reason_index)];
        std::istringstream hs(hint);
        std::set<std::string> hint_words;
        std::string w;
        while (hs >> w) hint_words.insert(w);

        auto option_words = [](const std::string& text) {
            std::istringstream in(text);
            std::set<std::string> words;
            std::string token;
            while (in >> token) words.insert(token);
            return words;
        };
        std::istringstream ns(inst.nonsense_statement());
        std::set<std::string> statement_words;
        while (ns >> w) statement_words.insert(w);

        // find the replacement word: in the hint but not in the nonsense statement
        std::vector<std::string> replacement;
        for (const std::string& hw : hint_words)
            if (!statement_words.count(hw)) replacement.push_back(hw);
        REQUIRE(replacement.size() == 1);

        CHECK(option_words(correct).count(replacement[0]) == 1);
        for (size_t o = 0; o < 3; ++o) {
            if (static_cast<int>(o) == inst.reason_index) continue;
            CHECK(option_words(inst.options[o]).count(replacement[0]) == 0);
        }
    }
}

TEST_CASE("vocab_words shrinks or grows the noun pool deterministically") {
    DatasetSplit small = generate_synthetic(400, 2, 60, 0.3, "train");
    DatasetSplit large = generate_synthetic(400, 2, 400, 0.3, "train");
    auto vocabulary = [](const DatasetSplit& split) {
        std::set<std::string> words;
        for (const std::string& text : corpus_of(split)) {
            std::istringstream in(text);
            std::string w;
            while (in >> w) words.insert(w);
        }
        return words;
    };
    CHECK(vocabulary(small).size() < vocabulary(large).size());
}
