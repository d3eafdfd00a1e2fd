#include "comve/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace comve {

namespace {

constexpr const char* kWordEnd = "</w>";

bool is_kept(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == ' ' ||
           (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
           (c >= '{' && c <= '~');
}

std::vector<std::string> split_words(const std::string& normalized) {
    std::vector<std::string> words;
    std::string current;
    for (char c : normalized) {
        if (c == ' ') {
            if (!current.empty()) words.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

std::string merge_key(const std::string& left, const std::string& right) {
    return left + '\x1f' + right;
}

} // namespace

std::string normalize(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char raw : text) {
        char c = raw;
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        if (c == '\t' || c == '\n' || c == '\v' || c == '\f' || c == '\r') c = ' ';
        if (!is_kept(c)) continue;
        if (c == ' ') {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    return out;
}

// ---- Vocab ----

const std::array<std::string, Vocab::kSpecialCount>& Vocab::special_names() {
    static const std::array<std::string, kSpecialCount> names = {"[PAD]", "[UNK]", "[CLS]",
                                                                 "[SEP]"};
    return names;
}

int Vocab::id_of(const std::string& subword) const {
    auto it = subword_to_id_.find(subword);
    return it == subword_to_id_.end() ? -1 : it->second;
}

const std::string& Vocab::subword_of(int id) const {
    if (id < 0 || static_cast<size_t>(id) >= id_to_subword_.size())
        throw IndexError("vocab: id " + std::to_string(id) + " out of range");
    return id_to_subword_[static_cast<size_t>(id)];
}

void Vocab::rebuild_indexes() {
    subword_to_id_.clear();
    for (size_t i = 0; i < id_to_subword_.size(); ++i)
        subword_to_id_.emplace(id_to_subword_[i], static_cast<int>(i));
    merge_rank_.clear();
    for (size_t r = 0; r < merges_.size(); ++r)
        merge_rank_.emplace(merge_key(merges_[r].first, merges_[r].second), r);
}

std::vector<std::string> Vocab::segment_word(const std::string& word) const {
    std::vector<std::string> symbols;
    symbols.reserve(word.size());
    for (size_t i = 0; i < word.size(); ++i) {
        std::string s(1, word[i]);
        if (i + 1 == word.size()) s += kWordEnd;
        symbols.push_back(std::move(s));
    }
    while (symbols.size() > 1) {
        size_t best_rank = merges_.size();
        size_t best_pos = 0;
        for (size_t i = 0; i + 1 < symbols.size(); ++i) {
            auto it = merge_rank_.find(merge_key(symbols[i], symbols[i + 1]));
            if (it != merge_rank_.end() && it->second < best_rank) {
                best_rank = it->second;
                best_pos = i;
            }
        }
        if (best_rank == merges_.size()) break;
        symbols[best_pos] += symbols[best_pos + 1];
        symbols.erase(symbols.begin() + static_cast<long>(best_pos) + 1);
    }
    return symbols;
}

std::vector<int> Vocab::segment_text(const std::string& text) const {
    std::vector<int> ids;
    for (const std::string& word : split_words(normalize(text))) {
        for (const std::string& symbol : segment_word(word)) {
            int id = id_of(symbol);
            ids.push_back(id < 0 ? kUnkId : id);
        }
    }
    return ids;
}

std::string Vocab::decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) {
        if (id >= 0 && static_cast<size_t>(id) < kSpecialCount) continue;
        std::string piece = subword_of(id);
        if (piece.size() >= 4 && piece.compare(piece.size() - 4, 4, kWordEnd) == 0) {
            out += piece.substr(0, piece.size() - 4);
            out += ' ';
        } else {
            out += piece;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

void Vocab::save(const std::string& vocab_path, const std::string& merges_path) const {
    std::ofstream vf(vocab_path, std::ios::binary);
    if (!vf) throw IoError("vocab: cannot write " + vocab_path);
    for (const std::string& s : id_to_subword_) vf << s << '\n';
    std::ofstream mf(merges_path, std::ios::binary);
    if (!mf) throw IoError("vocab: cannot write " + merges_path);
    for (const auto& [left, right] : merges_) mf << left << ' ' << right << '\n';
}

Vocab Vocab::load(const std::string& vocab_path, const std::string& merges_path) {
    std::ifstream vf(vocab_path, std::ios::binary);
    if (!vf) throw IoError("vocab: cannot read " + vocab_path);
    Vocab vocab;
    std::string line;
    while (std::getline(vf, line)) vocab.id_to_subword_.push_back(line);
    if (vocab.id_to_subword_.size() < kSpecialCount)
        throw ParseError("vocab: fewer entries than special tokens in " + vocab_path,
                         vocab.id_to_subword_.size() + 1);
    for (size_t i = 0; i < kSpecialCount; ++i)
        if (vocab.id_to_subword_[i] != special_names()[i])
            throw ParseError("vocab: entry '" + vocab.id_to_subword_[i] +
                                 "' where special '" + special_names()[i] + "' expected",
                             i + 1);

    std::ifstream mf(merges_path, std::ios::binary);
    if (!mf) throw IoError("vocab: cannot read " + merges_path);
    size_t line_no = 0;
    while (std::getline(mf, line)) {
        ++line_no;
        size_t space = line.find(' ');
        if (space == std::string::npos || space == 0 || space + 1 == line.size())
            throw ParseError("vocab: malformed merge '" + line + "'", line_no);
        vocab.merges_.emplace_back(line.substr(0, space), line.substr(space + 1));
    }
    vocab.rebuild_indexes();
    return vocab;
}

Vocab train_vocab(std::span<const std::string> corpus, size_t target_size) {
    if (corpus.empty()) throw InputError("train_vocab: empty corpus");

    // Word frequency over the normalized corpus; std::map keeps everything
    // deterministic.
    std::map<std::string, int64_t> word_freq;
    for (const std::string& text : corpus)
        for (const std::string& word : split_words(normalize(text))) word_freq[word] += 1;
    if (word_freq.empty()) throw InputError("train_vocab: corpus contains no words");

    // Base alphabet: both plain and word-final forms of every character, so
    // the character fallback always works.
    std::map<std::string, bool> base_symbols;
    for (const auto& [word, freq] : word_freq) {
        for (char c : word) {
            base_symbols[std::string(1, c)] = true;
            base_symbols[std::string(1, c) + kWordEnd] = true;
        }
    }

    Vocab vocab;
    for (const std::string& s : Vocab::special_names()) vocab.id_to_subword_.push_back(s);
    if (target_size <= Vocab::kSpecialCount + base_symbols.size())
        throw InputError("train_vocab: target size " + std::to_string(target_size) +
                         " does not exceed " +
                         std::to_string(Vocab::kSpecialCount + base_symbols.size()) +
                         " (special tokens + distinct characters)");
    for (const auto& [symbol, unused] : base_symbols) vocab.id_to_subword_.push_back(symbol);
    vocab.rebuild_indexes();

    // Word types as symbol sequences.
    std::vector<std::vector<std::string>> types;
    std::vector<int64_t> freqs;
    types.reserve(word_freq.size());
    for (const auto& [word, freq] : word_freq) {
        std::vector<std::string> symbols;
        for (size_t i = 0; i < word.size(); ++i) {
            std::string s(1, word[i]);
            if (i + 1 == word.size()) s += kWordEnd;
            symbols.push_back(std::move(s));
        }
        types.push_back(std::move(symbols));
        freqs.push_back(freq);
    }

    while (vocab.id_to_subword_.size() < target_size) {
        std::map<std::pair<std::string, std::string>, int64_t> pair_freq;
        for (size_t t = 0; t < types.size(); ++t)
            for (size_t i = 0; i + 1 < types[t].size(); ++i)
                pair_freq[{types[t][i], types[t][i + 1]}] += freqs[t];

        std::pair<std::string, std::string> best;
        int64_t best_freq = 0;
        for (const auto& [pair, freq] : pair_freq) {
            if (freq > best_freq) { // ties keep the lexicographically smallest
                best_freq = freq;
                best = pair;
            }
        }
        if (best_freq < 2) break; // nothing left worth merging

        const std::string merged = best.first + best.second;
        for (auto& symbols : types) {
            for (size_t i = 0; i + 1 < symbols.size();) {
                if (symbols[i] == best.first && symbols[i + 1] == best.second) {
                    symbols[i] = merged;
                    symbols.erase(symbols.begin() + static_cast<long>(i) + 1);
                } else {
                    ++i;
                }
            }
        }
        vocab.merges_.push_back(best);
        if (vocab.id_of(merged) < 0) vocab.id_to_subword_.push_back(merged);
        vocab.rebuild_indexes(); // keep id_of queries valid while training
    }
    vocab.rebuild_indexes();
    return vocab;
}

// ---- special-token layouts ----

namespace {

/// Drops tokens one at a time from the tail of the longest segment (ties:
/// the later segment) until the total fits the budget.
void truncate_segments(std::vector<std::vector<int>*> segments, size_t budget,
                       size_t max_len) {
    size_t total = 0;
    for (auto* s : segments) total += s->size();
    while (total > budget) {
        size_t longest = 0;
        for (size_t i = 1; i < segments.size(); ++i)
            if (segments[i]->size() >= segments[longest]->size()) longest = i;
        if (segments[longest]->size() <= 1)
            throw CapacityError("encode: cannot fit one token per segment within max_len " +
                                std::to_string(max_len));
        segments[longest]->pop_back();
        --total;
    }
}

TokenSequence assemble(const std::vector<std::vector<int>>& segments) {
    TokenSequence seq;
    seq.ids.push_back(Vocab::kClsId);
    seq.segment_ids.push_back(0);
    for (size_t s = 0; s < segments.size(); ++s) {
        for (int id : segments[s]) {
            seq.ids.push_back(id);
            seq.segment_ids.push_back(static_cast<int>(s));
        }
        seq.ids.push_back(Vocab::kSepId);
        seq.segment_ids.push_back(static_cast<int>(s));
    }
    seq.attention_mask.assign(seq.ids.size(), 1);
    return seq;
}

} // namespace

TokenSequence encode_single(const std::string& text, const Vocab& vocab, size_t max_len) {
    if (max_len < 4)
        throw CapacityError("encode_single: max_len " + std::to_string(max_len) + " < 4");
    std::vector<std::vector<int>> segments{vocab.segment_text(text)};
    truncate_segments({&segments[0]}, max_len - 2, max_len);
    return assemble(segments);
}

TokenSequence encode_pair(const std::string& first, const std::string& second,
                          const Vocab& vocab, size_t max_len) {
    if (max_len < 8)
        throw CapacityError("encode_pair: max_len " + std::to_string(max_len) + " < 8");
    std::vector<std::vector<int>> segments{vocab.segment_text(first),
                                           vocab.segment_text(second)};
    truncate_segments({&segments[0], &segments[1]}, max_len - 3, max_len);
    return assemble(segments);
}

TokenSequence encode_triple(const std::string& statement, const std::string& hint,
                            const std::string& option, const Vocab& vocab, size_t max_len) {
    if (max_len < 12)
        throw CapacityError("encode_triple: max_len " + std::to_string(max_len) + " < 12");
    std::vector<std::vector<int>> segments{vocab.segment_text(statement),
                                           vocab.segment_text(hint),
                                           vocab.segment_text(option)};
    truncate_segments({&segments[0], &segments[1], &segments[2]}, max_len - 4, max_len);
    return assemble(segments);
}

TokenSequence pad_to(const TokenSequence& seq, size_t len) {
    if (len < seq.length())
        throw CapacityError("pad_to: length " + std::to_string(len) + " below sequence length " +
                            std::to_string(seq.length()));
    TokenSequence out = seq;
    out.ids.resize(len, Vocab::kPadId);
    out.segment_ids.resize(len, 0);
    out.attention_mask.resize(len, 0);
    return out;
}

} // namespace comve
