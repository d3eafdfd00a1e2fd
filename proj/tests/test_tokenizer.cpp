#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "comve/data.hpp"
#include "comve/rng.hpp"
#include "comve/tokenizer.hpp"
#include "support/test_support.hpp"

using namespace comve;

namespace {

Vocab small_vocab() {
    std::vector<std::string> corpus = {
        "he put an elephant into the fridge",
        "she put a turkey into the fridge",
        "the man ate the bread for lunch",
        "the woman drank a cup of tea",
        "tom rode the bus to the market",
        "anna wore a scarf to the park",
    };
    return train_vocab(corpus, 160);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return text;
}

} // namespace

TEST_CASE("normalize lowercases and keeps ascii") {
    CHECK(normalize("He put an Elephant into the fridge") ==
          "he put an elephant into the fridge");
}

TEST_CASE("normalize strips non-ascii and collapses the gap") {
    CHECK(normalize("H\xc3\xa9llo \xe2\x80\x94 w\xc3\xb6rld!") == "hllo wrld!");
}

TEST_CASE("normalize is idempotent over random bytes") {
    Rng rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        std::string s;
        const size_t len = rng.below(40);
        for (size_t i = 0; i < len; ++i) s.push_back(static_cast<char>(rng.below(256)));
        std::string once = normalize(s);
        CHECK(normalize(once) == once);
    }
}

TEST_CASE("normalize treats tabs and newlines as spaces") {
    CHECK(normalize("a\tb\nc") == "a b c");
    CHECK(normalize("  lots   of\t\tspace  ") == "lots of space");
}

TEST_CASE("a single repeated word collapses into one subword") {
    std::vector<std::string> corpus(50, "refrigerator");
    Vocab vocab = train_vocab(corpus, 300);
    std::vector<int> ids = vocab.segment_text("refrigerator");
    REQUIRE(ids.size() == 1);
    CHECK(vocab.subword_of(ids[0]) == "refrigerator</w>");
}

TEST_CASE("character fallback encodes unseen words without UNK") {
    Vocab vocab = small_vocab();
    std::vector<int> ids = vocab.segment_text("unseen dampener");
    for (int id : ids) CHECK(id != Vocab::kUnkId);
}

TEST_CASE("unseen characters become UNK") {
    std::vector<std::string> corpus = {"abc abc"};
    Vocab vocab = train_vocab(corpus, 20);
    std::vector<int> ids = vocab.segment_text("xyz");
    CHECK(std::count(ids.begin(), ids.end(), Vocab::kUnkId) > 0);
}

TEST_CASE("train_vocab rejects bad inputs") {
    CHECK_THROWS_AS(train_vocab(std::vector<std::string>{}, 100), InputError);
    std::vector<std::string> corpus = {"some words here"};
    CHECK_THROWS_AS(train_vocab(corpus, 5), InputError);
}

TEST_CASE("vocab trained on a synthetic train split keeps dev UNK rate under 1 percent") {
    DatasetSplit train = generate_synthetic(1200, 7, 0, 0.3, "train");
    DatasetSplit dev = generate_synthetic(400, 8, 0, 0.3, "dev");
    std::vector<std::string> corpus = corpus_of(train);
    Vocab vocab = train_vocab(corpus, 900);
    size_t total = 0, unk = 0;
    for (const std::string& text : corpus_of(dev)) {
        for (int id : vocab.segment_text(text)) {
            ++total;
            if (id == Vocab::kUnkId) ++unk;
        }
    }
    REQUIRE(total > 0);
    CHECK(static_cast<double>(unk) / static_cast<double>(total) < 0.01);
}

TEST_CASE("encode_pair produces the documented layout") {
    Vocab vocab = small_vocab();
    TokenSequence seq = encode_pair("he put an elephant into the fridge",
                                    "she put a turkey into the fridge", vocab, 64);
    CHECK(seq.ids[0] == Vocab::kClsId);
    CHECK(std::count(seq.ids.begin(), seq.ids.end(), Vocab::kSepId) == 2);
    CHECK(seq.ids.back() == Vocab::kSepId);
    CHECK(seq.ids.size() == seq.segment_ids.size());
    CHECK(seq.ids.size() == seq.attention_mask.size());

    // segment 0 covers CLS + first statement + first SEP, segment 1 the rest
    size_t first_sep = 0;
    for (size_t i = 0; i < seq.ids.size(); ++i)
        if (seq.ids[i] == Vocab::kSepId) {
            first_sep = i;
            break;
        }
    for (size_t i = 0; i <= first_sep; ++i) CHECK(seq.segment_ids[i] == 0);
    for (size_t i = first_sep + 1; i < seq.ids.size(); ++i) CHECK(seq.segment_ids[i] == 1);

    size_t mask_total = 0;
    for (int m : seq.attention_mask) mask_total += static_cast<size_t>(m);
    CHECK(mask_total == seq.ids.size()); // no padding yet
}

TEST_CASE("both orders carry the same multiset of content ids") {
    Vocab vocab = small_vocab();
    auto content = [](const TokenSequence& seq) {
        std::multiset<int> ids;
        for (int id : seq.ids)
            if (id >= static_cast<int>(Vocab::kSpecialCount)) ids.insert(id);
        return ids;
    };
    TokenSequence ab = encode_pair("tom rode the bus", "anna wore a scarf", vocab, 64);
    TokenSequence ba = encode_pair("anna wore a scarf", "tom rode the bus", vocab, 64);
    CHECK(content(ab) == content(ba));
}

TEST_CASE("pair truncation trims the longest segment and never exceeds max_len") {
    Vocab vocab = small_vocab();
    std::string lhs = "tom rode the bus to the market and the park and the fridge";
    std::string rhs = "a cup";
    TokenSequence seq = encode_pair(lhs, rhs, vocab, 16);
    CHECK(seq.ids.size() <= 16);
    CHECK(std::count(seq.ids.begin(), seq.ids.end(), Vocab::kSepId) == 2);
    // the short side survives intact: segment 1 still holds all rhs tokens + SEP
    const size_t rhs_tokens = vocab.segment_text(rhs).size();
    const size_t seg1 =
        static_cast<size_t>(std::count(seq.segment_ids.begin(), seq.segment_ids.end(), 1));
    CHECK(seg1 == rhs_tokens + 1);
    CHECK_THROWS_AS(encode_pair(lhs, rhs, vocab, 7), CapacityError);
}

TEST_CASE("encode_triple layout, empty hint and segment multiset") {
    Vocab vocab = small_vocab();
    const std::string s = "he put an elephant into the fridge";
    const std::string h = "she put a turkey into the fridge";
    const std::string o = "an elephant is bigger";
    TokenSequence seq = encode_triple(s, h, o, vocab, 64);
    CHECK(std::count(seq.ids.begin(), seq.ids.end(), Vocab::kSepId) == 3);

    const size_t s_tokens = vocab.segment_text(s).size();
    const size_t h_tokens = vocab.segment_text(h).size();
    const size_t o_tokens = vocab.segment_text(o).size();
    std::map<int, size_t> seg_counts;
    for (int seg : seq.segment_ids) seg_counts[seg] += 1;
    CHECK(seg_counts[0] == s_tokens + 2);
    CHECK(seg_counts[1] == h_tokens + 1);
    CHECK(seg_counts[2] == o_tokens + 1);

    TokenSequence empty_hint = encode_triple(s, "", o, vocab, 64);
    CHECK(std::count(empty_hint.ids.begin(), empty_hint.ids.end(), Vocab::kSepId) == 3);
    // degenerate but legal: [CLS] s [SEP] [SEP] o [SEP]
    bool adjacent_seps = false;
    for (size_t i = 0; i + 1 < empty_hint.ids.size(); ++i)
        if (empty_hint.ids[i] == Vocab::kSepId && empty_hint.ids[i + 1] == Vocab::kSepId)
            adjacent_seps = true;
    CHECK(adjacent_seps);
    CHECK_THROWS_AS(encode_triple(s, h, o, vocab, 11), CapacityError);
}

TEST_CASE("decode inverts encode for UNK-free text") {
    Vocab vocab = small_vocab();
    DatasetSplit sample = generate_synthetic(60, 21, 0, 0.3);
    std::vector<std::string> corpus = corpus_of(sample);
    Vocab wide = train_vocab(corpus, 700);
    for (const std::string& text : corpus) {
        std::string norm = normalize(text);
        CHECK(wide.decode(wide.segment_text(norm)) == norm);
    }
}

TEST_CASE("encoding is deterministic") {
    Vocab vocab = small_vocab();
    TokenSequence a = encode_pair("tom rode the bus", "anna wore a scarf", vocab, 32);
    TokenSequence b = encode_pair("tom rode the bus", "anna wore a scarf", vocab, 32);
    CHECK(a.ids == b.ids);
    CHECK(a.segment_ids == b.segment_ids);
}

TEST_CASE("segmentation never emits layout specials, even for bracket text") {
    // UNK is the designated fallback and may appear; CLS/SEP/PAD must not.
    Vocab vocab = small_vocab();
    for (const std::string& text :
         {std::string("[cls] tricks [sep]"), std::string("[pad][unk]"), std::string("plain")}) {
        for (int id : vocab.segment_text(text)) {
            CHECK(id != Vocab::kClsId);
            CHECK(id != Vocab::kSepId);
            CHECK(id != Vocab::kPadId);
        }
    }
    // with brackets in the corpus, "[cls]" becomes ordinary subwords
    std::vector<std::string> corpus = {"[cls] [sep] [pad] word [cls]"};
    Vocab bracketed = train_vocab(corpus, 80);
    for (int id : bracketed.segment_text("[cls] [sep] [pad]")) {
        CHECK(id != Vocab::kClsId);
        CHECK(id != Vocab::kSepId);
        CHECK(id != Vocab::kPadId);
        CHECK(id != Vocab::kUnkId); // all characters seen in training
    }
}

TEST_CASE("vocab files round trip byte for byte") {
    namespace fs = std::filesystem;
    Vocab vocab = small_vocab();
    fs::path dir = fs::temp_directory_path() / "comve_vocab_test";
    fs::create_directories(dir);
    const std::string v1 = (dir / "vocab.txt").string();
    const std::string m1 = (dir / "merges.txt").string();
    vocab.save(v1, m1);
    Vocab loaded = Vocab::load(v1, m1);
    const std::string v2 = (dir / "vocab2.txt").string();
    const std::string m2 = (dir / "merges2.txt").string();
    loaded.save(v2, m2);
    CHECK(read_file(v1) == read_file(v2));
    CHECK(read_file(m1) == read_file(m2));
    CHECK(loaded.size() == vocab.size());
    CHECK(loaded.segment_text("he put an elephant into the fridge") ==
          vocab.segment_text("he put an elephant into the fridge"));
    fs::remove_all(dir);
}

TEST_CASE("padding extends ids with PAD and zero mask") {
    Vocab vocab = small_vocab();
    TokenSequence seq = encode_single("tom rode the bus", vocab, 32);
    TokenSequence padded = pad_to(seq, seq.length() + 8);
    CHECK(padded.length() == seq.length() + 8);
    for (size_t i = seq.length(); i < padded.length(); ++i) {
        CHECK(padded.ids[i] == Vocab::kPadId);
        CHECK(padded.attention_mask[i] == 0);
    }
    CHECK_THROWS_AS(pad_to(seq, 2), CapacityError);
}
