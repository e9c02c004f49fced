#pragma once

// Uncased WordPiece tokenization compatible with BERT-style vocabulary files
// (one token per line, id = zero-based line number), plus a deterministic
// small-vocabulary builder for desk-scale corpora.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sbae/unicode.hpp"

namespace sbae {

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kMaskToken = "[MASK]";

inline constexpr std::size_t kMaxWordChars = 100;

class Vocab {
  public:
    Vocab() = default;

    explicit Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
        for (std::size_t i = 0; i < tokens_.size(); ++i) {
            if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
                throw std::runtime_error("duplicate vocab token: " + tokens_[i]);
            }
        }
        pad_id_ = require(kPadToken);
        unk_id_ = require(kUnkToken);
        cls_id_ = require(kClsToken);
        sep_id_ = require(kSepToken);
        mask_id_ = require(kMaskToken);
    }

    static Vocab load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open vocab file: " + path);
        std::vector<std::string> tokens;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            tokens.push_back(line);
        }
        return Vocab(std::move(tokens));
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write vocab file: " + path);
        for (const auto& t : tokens_) out << t << '\n';
        if (!out) throw std::runtime_error("failed writing vocab file: " + path);
    }

    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    int lookup(std::string_view token) const {
        auto it = index_.find(std::string(token));
        return it == index_.end() ? -1 : it->second;
    }

    const std::string& token(int id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
            throw std::out_of_range("token id out of range");
        }
        return tokens_[static_cast<std::size_t>(id)];
    }

    int pad_id() const { return pad_id_; }
    int unk_id() const { return unk_id_; }
    int cls_id() const { return cls_id_; }
    int sep_id() const { return sep_id_; }
    int mask_id() const { return mask_id_; }

  private:
    int require(std::string_view t) const {
        const int id = lookup(t);
        if (id < 0) throw std::runtime_error("vocab missing special token " + std::string(t));
        return id;
    }

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
    int pad_id_ = -1, unk_id_ = -1, cls_id_ = -1, sep_id_ = -1, mask_id_ = -1;
};

struct TokenSequence {
    std::vector<int> ids;  // [CLS] content... [SEP]
    std::size_t n_content = 0;
};

// Lowercase, strip accents (NFD + mark removal over the covered Latin
// ranges), drop control characters, collapse whitespace runs.
inline std::string normalize(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    const auto emit = [&](char32_t cp) {
        if (pending_space && !out.empty()) out.push_back(' ');
        pending_space = false;
        uni::encode(cp, out);
    };
    std::size_t i = 0;
    while (i < text.size()) {
        char32_t cp = uni::decode_next(text, i);
        if (cp == 0 || cp == uni::kReplacement || uni::is_control(cp)) continue;
        if (uni::is_whitespace(cp)) {
            pending_space = true;
            continue;
        }
        if (uni::is_combining_mark(cp)) continue;
        if (cp >= U'A' && cp <= U'Z') {
            emit(cp + 32);
            continue;
        }
        if (const char* folded = uni::accent_fold(cp)) {
            for (const char* q = folded; *q; ++q) emit(static_cast<char32_t>(*q));
            continue;
        }
        emit(cp);
    }
    return out;
}

// Splits normalized text into words; punctuation characters are standalone
// words.
inline std::vector<std::string> pretokenize(std::string_view normalized) {
    std::vector<std::string> words;
    std::string cur;
    std::size_t i = 0;
    while (i < normalized.size()) {
        const char32_t cp = uni::decode_next(normalized, i);
        if (uni::is_whitespace(cp)) {
            if (!cur.empty()) words.push_back(std::exchange(cur, {}));
        } else if (uni::is_punct(cp)) {
            if (!cur.empty()) words.push_back(std::exchange(cur, {}));
            std::string p;
            uni::encode(cp, p);
            words.push_back(std::move(p));
        } else {
            uni::encode(cp, cur);
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

// Greedy longest-match-first decomposition of one word. Returns false when
// no full decomposition exists (caller substitutes [UNK]).
inline bool wordpiece_split(const std::string& word, const Vocab& vocab,
                            std::vector<int>& out_ids) {
    const std::vector<char32_t> cps = uni::decode(word);
    if (cps.size() > kMaxWordChars) return false;
    std::vector<int> pieces;
    std::size_t start = 0;
    while (start < cps.size()) {
        int match = -1;
        std::size_t match_end = start;
        for (std::size_t end = cps.size(); end > start; --end) {
            std::string sub = start > 0 ? "##" : "";
            for (std::size_t k = start; k < end; ++k) uni::encode(cps[k], sub);
            const int id = vocab.lookup(sub);
            if (id >= 0) {
                match = id;
                match_end = end;
                break;
            }
        }
        if (match < 0) return false;
        pieces.push_back(match);
        start = match_end;
    }
    out_ids.insert(out_ids.end(), pieces.begin(), pieces.end());
    return true;
}

inline TokenSequence tokenize(std::string_view text, const Vocab& vocab) {
    TokenSequence seq;
    seq.ids.push_back(vocab.cls_id());
    for (const std::string& word : pretokenize(normalize(text))) {
        if (!wordpiece_split(word, vocab, seq.ids)) seq.ids.push_back(vocab.unk_id());
    }
    seq.ids.push_back(vocab.sep_id());
    seq.n_content = seq.ids.size() - 2;
    return seq;
}

// Keeps [SEP]; drops content tokens from the end until the sequence fits.
// Returns true when truncation happened.
inline bool truncate(TokenSequence& seq, std::size_t max_seq_len, int sep_id) {
    if (max_seq_len < 2) throw std::invalid_argument("truncate: max_seq_len must be >= 2");
    if (seq.ids.size() <= max_seq_len) return false;
    seq.ids.resize(max_seq_len);
    seq.ids[max_seq_len - 1] = sep_id;
    seq.n_content = max_seq_len - 2;
    return true;
}

inline std::string detokenize(const std::vector<int>& ids, const Vocab& vocab) {
    std::string out;
    for (const int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= vocab.size()) {
            throw std::out_of_range("token id out of range");
        }
        const std::string& tok = vocab.token(id);
        if (tok == kPadToken || tok == kUnkToken || tok == kClsToken || tok == kSepToken ||
            tok == kMaskToken) {
            continue;
        }
        if (tok.rfind("##", 0) == 0) {
            out += tok.substr(2);
        } else {
            if (!out.empty()) out.push_back(' ');
            out += tok;
        }
    }
    return out;
}

// Builds a vocabulary from raw sentence texts: the five specials, whole
// words by descending frequency up to `target_size`, then every single
// character (plain and "##"-prefixed) seen in the corpus so that each word
// decomposes without [UNK]. Character pieces are always included, so the
// result may exceed `target_size` for very small targets.
inline Vocab build_vocab(const std::vector<std::string>& texts, std::size_t target_size) {
    if (target_size < 6) throw std::invalid_argument("build_vocab: target_size must be >= 6");
    std::map<std::string, std::uint64_t> freq;  // ordered map: lexicographic tie-break for free
    std::map<std::string, bool> chars_seen;
    for (const auto& text : texts) {
        for (const std::string& w : pretokenize(normalize(text))) {
            ++freq[w];
            for (const char32_t cp : uni::decode(w)) {
                std::string c;
                uni::encode(cp, c);
                chars_seen[c] = true;
            }
        }
    }
    std::vector<std::pair<std::string, std::uint64_t>> by_freq(freq.begin(), freq.end());
    std::stable_sort(by_freq.begin(), by_freq.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    std::vector<std::string> char_pieces;
    for (const auto& [c, _] : chars_seen) {
        char_pieces.push_back(c);
        char_pieces.push_back("##" + c);
    }

    std::vector<std::string> tokens = {std::string(kPadToken), std::string(kUnkToken),
                                       std::string(kClsToken), std::string(kSepToken),
                                       std::string(kMaskToken)};
    std::unordered_map<std::string, bool> present;
    for (const auto& t : tokens) present[t] = true;
    const auto push = [&](const std::string& t) {
        if (!present.count(t)) {
            present[t] = true;
            tokens.push_back(t);
        }
    };
    const std::size_t reserved = tokens.size() + char_pieces.size();
    std::size_t word_budget = target_size > reserved ? target_size - reserved : 0;
    for (const auto& [w, _] : by_freq) {
        if (word_budget == 0) break;
        if (!present.count(w)) {
            push(w);
            --word_budget;
        }
    }
    for (const auto& c : char_pieces) push(c);
    return Vocab(std::move(tokens));
}

}  // namespace sbae
