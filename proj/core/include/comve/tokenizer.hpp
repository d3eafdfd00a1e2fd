#pragma once

#include <array>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "comve/errors.hpp"

namespace comve {

/// Token ids plus per-position segment ids and attention mask. All three
/// vectors always share the same length; mask is 1 on real tokens, 0 on
/// padding appended by pad_to().
struct TokenSequence {
    std::vector<int> ids;
    std::vector<int> segment_ids;
    std::vector<int> attention_mask;

    size_t length() const { return ids.size(); }
};

/// Lowercases ASCII letters, maps ASCII whitespace to plain spaces, drops
/// every byte outside {a-z, 0-9, ASCII punctuation, space} (all non-ASCII
/// bytes included), collapses space runs and trims the ends. Idempotent.
std::string normalize(const std::string& text);

/// Subword vocabulary learned by greedy byte-pair merges over a normalized
/// corpus. Word-final symbols carry a "</w>" marker so decoding can restore
/// word boundaries. Immutable after training; all queries are thread-safe.
class Vocab {
public:
    static constexpr int kPadId = 0;
    static constexpr int kUnkId = 1;
    static constexpr int kClsId = 2;
    static constexpr int kSepId = 3;
    static constexpr size_t kSpecialCount = 4;
    // Uppercase on purpose: normalized text is lowercase, so plain
    // segmentation can never emit one of these strings.
    static const std::array<std::string, kSpecialCount>& special_names();

    size_t size() const { return id_to_subword_.size(); }
    /// Id for a subword, or -1 when absent.
    int id_of(const std::string& subword) const;
    const std::string& subword_of(int id) const;

    /// BPE segmentation of already-normalized text (normalize() is applied
    /// defensively; it is idempotent). Unknown characters become [UNK].
    std::vector<int> segment_text(const std::string& text) const;
    /// Inverse of segment_text for UNK-free input: strips special ids,
    /// joins subwords, turns "</w>" markers back into single spaces.
    std::string decode(std::span<const int> ids) const;

    /// One subword per line (specials first, id order) plus a companion
    /// merges file, "left right" per line in rank order. Round-trips
    /// byte-for-byte.
    void save(const std::string& vocab_path, const std::string& merges_path) const;
    static Vocab load(const std::string& vocab_path, const std::string& merges_path);

private:
    std::vector<std::string> id_to_subword_;
    std::unordered_map<std::string, int> subword_to_id_;
    std::vector<std::pair<std::string, std::string>> merges_;
    std::unordered_map<std::string, size_t> merge_rank_; // key: left + '\x1f' + right

    void rebuild_indexes();
    std::vector<std::string> segment_word(const std::string& word) const;

    friend Vocab train_vocab(std::span<const std::string> corpus, size_t target_size);
};

/// Greedy pair-merge vocabulary of at most `target_size` entries. Both plain
/// and word-final forms of every corpus character enter the base alphabet, so
/// any string over seen characters encodes without UNK.
Vocab train_vocab(std::span<const std::string> corpus, size_t target_size);

/// [CLS] text [SEP]; single segment 0. max_len >= 4.
TokenSequence encode_single(const std::string& text, const Vocab& vocab, size_t max_len);

/// [CLS] first [SEP] second [SEP]; segments 0 over CLS+first+SEP, 1 over
/// second+SEP. Truncates one token at a time from the longest segment (ties
/// trim the later segment), preserving both SEPs. max_len >= 8.
TokenSequence encode_pair(const std::string& first, const std::string& second,
                          const Vocab& vocab, size_t max_len);

/// [CLS] statement [SEP] hint [SEP] option [SEP]; segments 0/1/2 over the
/// three spans. The hint may be empty. max_len >= 12.
TokenSequence encode_triple(const std::string& statement, const std::string& hint,
                            const std::string& option, const Vocab& vocab, size_t max_len);

/// Copy extended with [PAD] ids (segment 0, mask 0) up to `len`.
TokenSequence pad_to(const TokenSequence& seq, size_t len);

} // namespace comve
