#pragma once

// Corpus ingestion: rule-based sentence segmentation, length filtering,
// seeded train/test splitting, summary statistics and length histograms.
// Persistence is line-delimited JSON, one sentence per line.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sbae/tensor.hpp"  // Rng
#include "sbae/tokenizer.hpp"
#include "sbae/unicode.hpp"

namespace sbae {

enum class Split : std::uint8_t { kUnassigned, kTrain, kTest };

inline std::string_view split_name(Split s) {
    switch (s) {
        case Split::kTrain: return "train";
        case Split::kTest: return "test";
        default: return "unassigned";
    }
}

inline Split split_from_name(std::string_view s) {
    if (s == "train") return Split::kTrain;
    if (s == "test") return Split::kTest;
    if (s == "unassigned") return Split::kUnassigned;
    throw std::runtime_error("unknown split name: " + std::string(s));
}

struct SentenceRecord {
    std::string text;
    std::size_t char_len = 0;   // Unicode scalar values
    std::size_t word_len = 0;   // rule-based word count
    std::size_t token_len = 0;  // WordPiece tokens, 0 = unknown
    std::size_t doc_id = 0;
    Split split = Split::kUnassigned;
};

// Words are maximal runs of non-space non-punctuation characters; each
// punctuation run counts as one word. Approximates NLTK word counts.
inline std::size_t count_words(std::string_view text) {
    std::size_t words = 0;
    int state = 0;  // 0 = gap, 1 = in word, 2 = in punctuation run
    std::size_t i = 0;
    while (i < text.size()) {
        const char32_t cp = uni::decode_next(text, i);
        if (uni::is_whitespace(cp)) {
            state = 0;
        } else if (uni::is_punct(cp)) {
            if (state != 2) ++words;
            state = 2;
        } else {
            if (state != 1) ++words;
            state = 1;
        }
    }
    return words;
}

namespace detail {

inline const std::set<std::string>& abbreviations() {
    static const std::set<std::string> abbr = {"Mr.", "Dr.",  "Mrs.", "Ms.", "Prof.",
                                               "e.g.", "i.e.", "etc.", "vs.", "No.",
                                               "St.",  "cf."};
    return abbr;
}

inline bool is_abbreviation(const std::vector<char32_t>& cps, std::size_t dot_pos) {
    // token from the previous whitespace through the period at dot_pos
    std::size_t start = dot_pos;
    while (start > 0 && !uni::is_whitespace(cps[start - 1])) --start;
    // strip leading opening quotes/brackets
    while (start < dot_pos) {
        const char32_t c = cps[start];
        if (c == U'"' || c == U'\'' || c == U'(' || c == U'[' || c == 0x201C || c == 0x2018) {
            ++start;
        } else {
            break;
        }
    }
    std::string word;
    for (std::size_t k = start; k <= dot_pos; ++k) uni::encode(cps[k], word);
    if (abbreviations().count(word)) return true;
    // single capital letter initial, e.g. "J."
    if (dot_pos == start + 1 && uni::is_ascii_upper(cps[start])) return true;
    return false;
}

inline bool starts_new_sentence(char32_t cp) {
    return uni::is_ascii_upper(cp) || uni::is_ascii_digit(cp) || cp == U'"' || cp == U'\'' ||
           cp == 0x201C || cp == 0x2018;
}

inline bool is_closing_mark(char32_t cp) {
    return cp == U'"' || cp == U'\'' || cp == U')' || cp == U']' || cp == 0x201D ||
           cp == 0x2019;
}

}  // namespace detail

// Deterministic rule-based segmentation: a sentence ends at [.?!] (plus any
// trailing closing quotes/brackets) when followed by whitespace and a
// capital, digit or opening quote, unless the terminator belongs to a known
// abbreviation. Internal whitespace runs collapse to single spaces.
inline std::vector<SentenceRecord> split_sentences(std::string_view document) {
    const std::vector<char32_t> cps = uni::decode(document);
    std::vector<SentenceRecord> out;
    std::string cur;
    std::size_t cur_chars = 0;
    bool pending_space = false;

    const auto emit = [&](char32_t cp) {
        if (pending_space && !cur.empty()) {
            cur.push_back(' ');
            ++cur_chars;
        }
        pending_space = false;
        uni::encode(cp, cur);
        ++cur_chars;
    };
    const auto flush = [&]() {
        if (!cur.empty()) {
            SentenceRecord rec;
            rec.text = std::move(cur);
            rec.char_len = cur_chars;
            rec.word_len = count_words(rec.text);
            out.push_back(std::move(rec));
            cur.clear();
            cur_chars = 0;
        }
        pending_space = false;
    };

    for (std::size_t i = 0; i < cps.size(); ++i) {
        const char32_t cp = cps[i];
        if (uni::is_whitespace(cp)) {
            pending_space = true;
            continue;
        }
        emit(cp);
        if (cp != U'.' && cp != U'?' && cp != U'!') continue;

        // absorb the rest of a terminator run (e.g. "?!", "...")
        std::size_t j = i;
        while (j + 1 < cps.size() &&
               (cps[j + 1] == U'.' || cps[j + 1] == U'?' || cps[j + 1] == U'!')) {
            ++j;
            emit(cps[j]);
        }
        if (cp == U'.' && j == i && detail::is_abbreviation(cps, i)) {
            i = j;
            continue;
        }
        // closing quote attaches to this sentence
        while (j + 1 < cps.size() && detail::is_closing_mark(cps[j + 1])) {
            ++j;
            emit(cps[j]);
        }
        // split only before whitespace + sentence-initial character
        std::size_t k = j + 1;
        bool saw_ws = false;
        while (k < cps.size() && uni::is_whitespace(cps[k])) {
            saw_ws = true;
            ++k;
        }
        if (saw_ws && k < cps.size() && detail::starts_new_sentence(cps[k])) {
            flush();
        }
        i = j;
    }
    flush();
    return out;
}

// Keeps records with char_len strictly below max_chars, order preserved.
inline std::vector<SentenceRecord> filter_sentences(const std::vector<SentenceRecord>& records,
                                                    std::size_t max_chars) {
    if (max_chars < 1) throw std::invalid_argument("filter_sentences: max_chars must be >= 1");
    std::vector<SentenceRecord> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        if (r.char_len < max_chars) out.push_back(r);
    }
    return out;
}

// Marks exactly n_test records as test via a seeded pseudo-random
// permutation; the rest become train.
inline void assign_splits(std::vector<SentenceRecord>& records, std::size_t n_test,
                          std::uint64_t seed) {
    if (n_test > records.size()) throw std::runtime_error("test split larger than corpus");
    for (auto& r : records) r.split = Split::kTrain;
    Rng rng(seed);
    const auto perm = rng.permutation(records.size());
    for (std::size_t i = 0; i < n_test; ++i) records[perm[i]].split = Split::kTest;
}

struct DimensionSummary {
    double mean = 0, stddev = 0;
    double median = 0, q25 = 0, q75 = 0, iqr = 0, q95 = 0, q99 = 0;
};

struct CorpusStats {
    std::size_t n_documents = 0;
    std::size_t n_sentences = 0;
    std::uint64_t n_characters = 0;
    std::uint64_t n_words = 0;
    std::uint64_t n_tokens = 0;
    double chars_per_word = 0;
    double chars_per_token = 0;
    double tokens_per_word = 0;
    DimensionSummary chars;
    DimensionSummary words;
    DimensionSummary tokens;
};

namespace detail {

// Nearest-rank quantile on a sorted sample: the ceil(p*N)-th smallest.
inline double nearest_rank(const std::vector<std::size_t>& sorted, double p) {
    const std::size_t n = sorted.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
    if (rank < 1) rank = 1;
    if (rank > n) rank = n;
    return static_cast<double>(sorted[rank - 1]);
}

inline DimensionSummary summarize(std::vector<std::size_t> lengths) {
    DimensionSummary s;
    const double n = static_cast<double>(lengths.size());
    double total = 0;
    for (const auto v : lengths) total += static_cast<double>(v);
    s.mean = total / n;
    double ss = 0;
    for (const auto v : lengths) {
        const double c = static_cast<double>(v) - s.mean;
        ss += c * c;
    }
    s.stddev = std::sqrt(ss / n);  // population convention
    std::sort(lengths.begin(), lengths.end());
    s.median = nearest_rank(lengths, 0.50);
    s.q25 = nearest_rank(lengths, 0.25);
    s.q75 = nearest_rank(lengths, 0.75);
    s.iqr = s.q75 - s.q25;
    s.q95 = nearest_rank(lengths, 0.95);
    s.q99 = nearest_rank(lengths, 0.99);
    return s;
}

}  // namespace detail

// Populates token_len on the records as a side effect.
inline CorpusStats compute_stats(std::vector<SentenceRecord>& records, const Vocab& vocab) {
    if (records.empty()) throw std::runtime_error("empty corpus");
    CorpusStats st;
    std::set<std::size_t> docs;
    std::vector<std::size_t> chars, words, tokens;
    chars.reserve(records.size());
    words.reserve(records.size());
    tokens.reserve(records.size());
    for (auto& r : records) {
        if (r.token_len == 0) r.token_len = tokenize(r.text, vocab).n_content;
        docs.insert(r.doc_id);
        chars.push_back(r.char_len);
        words.push_back(r.word_len);
        tokens.push_back(r.token_len);
        st.n_characters += r.char_len;
        st.n_words += r.word_len;
        st.n_tokens += r.token_len;
    }
    st.n_documents = docs.size();
    st.n_sentences = records.size();
    st.chars_per_word = static_cast<double>(st.n_characters) / static_cast<double>(st.n_words);
    st.chars_per_token = static_cast<double>(st.n_characters) / static_cast<double>(st.n_tokens);
    st.tokens_per_word = static_cast<double>(st.n_tokens) / static_cast<double>(st.n_words);
    st.chars = detail::summarize(std::move(chars));
    st.words = detail::summarize(std::move(words));
    st.tokens = detail::summarize(std::move(tokens));
    return st;
}

enum class LengthDimension { kChars, kWords, kTokens };

// Contiguous histogram over [0, max length]; empty interior bins appear
// with count 0.
inline std::vector<std::pair<std::size_t, std::size_t>> length_histogram(
    const std::vector<SentenceRecord>& records, LengthDimension dim, std::size_t bin_width) {
    if (bin_width < 1) throw std::invalid_argument("length_histogram: bin_width must be >= 1");
    std::vector<std::pair<std::size_t, std::size_t>> bins;
    if (records.empty()) return bins;
    const auto length_of = [&](const SentenceRecord& r) {
        switch (dim) {
            case LengthDimension::kChars: return r.char_len;
            case LengthDimension::kWords: return r.word_len;
            default: return r.token_len;
        }
    };
    std::size_t max_len = 0;
    for (const auto& r : records) max_len = std::max(max_len, length_of(r));
    bins.resize(max_len / bin_width + 1);
    for (std::size_t i = 0; i < bins.size(); ++i) bins[i] = {i * bin_width, 0};
    for (const auto& r : records) ++bins[length_of(r) / bin_width].second;
    return bins;
}

inline std::string histogram_csv(const std::vector<std::pair<std::size_t, std::size_t>>& bins) {
    std::ostringstream os;
    os << "bin_start,count\n";
    for (const auto& [start, count] : bins) os << start << "," << count << "\n";
    return os.str();
}

// -------------------------------------------------------------------------
// persistence
// -------------------------------------------------------------------------

inline nlohmann::json record_to_json(const SentenceRecord& r) {
    return nlohmann::json{{"text", r.text},           {"char_len", r.char_len},
                          {"word_len", r.word_len},   {"token_len", r.token_len},
                          {"doc_id", r.doc_id},       {"split", split_name(r.split)}};
}

inline SentenceRecord record_from_json(const nlohmann::json& j) {
    SentenceRecord r;
    r.text = j.at("text").get<std::string>();
    r.char_len = j.at("char_len").get<std::size_t>();
    r.word_len = j.at("word_len").get<std::size_t>();
    r.token_len = j.at("token_len").get<std::size_t>();
    r.doc_id = j.at("doc_id").get<std::size_t>();
    r.split = split_from_name(j.at("split").get<std::string>());
    return r;
}

inline void write_corpus_jsonl(const std::vector<SentenceRecord>& records,
                               const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write corpus file: " + path);
    for (const auto& r : records) out << record_to_json(r).dump() << '\n';
    if (!out) throw std::runtime_error("failed writing corpus file: " + path);
}

inline std::vector<SentenceRecord> read_corpus_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path);
    std::vector<SentenceRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(record_from_json(nlohmann::json::parse(line)));
    }
    return records;
}

inline nlohmann::json summary_to_json(const DimensionSummary& s) {
    return nlohmann::json{{"mean", s.mean}, {"stddev", s.stddev}, {"median", s.median},
                          {"q25", s.q25},   {"q75", s.q75},       {"iqr", s.iqr},
                          {"q95", s.q95},   {"q99", s.q99}};
}

inline nlohmann::json stats_to_json(const CorpusStats& st) {
    return nlohmann::json{{"n_documents", st.n_documents},
                          {"n_sentences", st.n_sentences},
                          {"n_characters", st.n_characters},
                          {"n_words", st.n_words},
                          {"n_tokens", st.n_tokens},
                          {"chars_per_word", st.chars_per_word},
                          {"chars_per_token", st.chars_per_token},
                          {"tokens_per_word", st.tokens_per_word},
                          {"chars", summary_to_json(st.chars)},
                          {"words", summary_to_json(st.words)},
                          {"tokens", summary_to_json(st.tokens)}};
}

// Splits a plain-text file into documents on blank lines; a file without
// blank lines is one document.
inline std::vector<std::string> read_documents(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open input file: " + path);
    std::vector<std::string> docs;
    std::string doc, line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        bool blank = true;
        for (const char c : line) {
            if (!std::isspace(static_cast<unsigned char>(c))) {
                blank = false;
                break;
            }
        }
        if (blank) {
            if (!doc.empty()) docs.push_back(std::exchange(doc, {}));
        } else {
            if (!doc.empty()) doc.push_back('\n');
            doc += line;
        }
    }
    if (!doc.empty()) docs.push_back(std::move(doc));
    return docs;
}

}  // namespace sbae
