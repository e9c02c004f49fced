#pragma once

// Reconstruction evaluation: macro ("mean") and micro ("weighted") token
// accuracy over content positions, accuracy binned by token length, and
// qualitative original-vs-reconstruction diffs.

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbae/corpus.hpp"
#include "sbae/model.hpp"
#include "sbae/tensor.hpp"
#include "sbae/tokenizer.hpp"

namespace sbae {

struct ReconDiff {
    std::vector<std::string> original;
    std::vector<std::string> reconstructed;
    std::vector<bool> match;
};

struct LengthBin {
    std::size_t bin_start = 0;
    double mean_accuracy = 0;  // macro over sentences in the bin
    std::size_t count = 0;     // sentences
    std::size_t n_tokens = 0;  // evaluation positions
    std::size_t n_correct = 0;
};

struct EvalReport {
    double mean_acc = 0;      // macro: mean over sentences
    double weighted_acc = 0;  // micro: total correct / total tokens
    std::size_t n_sentences = 0;
    std::size_t n_tokens = 0;
    std::size_t n_correct = 0;
    std::vector<LengthBin> by_length;
    std::vector<ReconDiff> samples;
};

struct EvalOptions {
    std::size_t bin_width = 5;
    std::size_t n_samples = 8;
    std::size_t sample_min_len = 10;  // token-length window for sampled diffs
    std::size_t sample_max_len = 30;
    std::uint64_t sample_seed = 0;
};

// Fraction of content positions (specials excluded) where the prediction
// matches the gold token at its exact position.
inline double sentence_accuracy(const std::vector<int>& gold, const std::vector<int>& predicted) {
    if (gold.size() != predicted.size()) {
        throw std::invalid_argument("sentence_accuracy: length mismatch " +
                                    std::to_string(gold.size()) + " vs " +
                                    std::to_string(predicted.size()));
    }
    if (gold.size() < 2) throw std::invalid_argument("sentence_accuracy: sequence too short");
    const std::size_t n = gold.size() - 2;  // content positions 1 .. len-2
    if (n == 0) return 1.0;
    std::size_t correct = 0;
    for (std::size_t i = 1; i + 1 < gold.size(); ++i) {
        if (gold[i] == predicted[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

// Model needs config().max_seq_len and reconstruct(ids); inference must be
// deterministic (dropout off).
template <typename Model>
inline EvalReport evaluate(Model& model, const std::vector<SentenceRecord>& records,
                           const Vocab& vocab, const EvalOptions& opts = {}) {
    if (records.empty()) throw std::runtime_error("evaluate: empty test set");
    if (opts.bin_width < 1) throw std::invalid_argument("evaluate: bin_width must be >= 1");

    EvalReport rep;
    std::map<std::size_t, LengthBin> bins;
    double acc_sum = 0;
    std::vector<ReconDiff> candidates;

    for (const auto& rec : records) {
        TokenSequence seq = tokenize(rec.text, vocab);
        truncate(seq, model.config().max_seq_len, vocab.sep_id());
        if (seq.n_content == 0) continue;
        const std::vector<int> pred = model.reconstruct(seq.ids);

        std::size_t correct = 0;
        ReconDiff diff;
        for (std::size_t i = 1; i + 1 < seq.ids.size(); ++i) {
            const bool ok = pred[i] == seq.ids[i];
            if (ok) ++correct;
            diff.original.push_back(vocab.token(seq.ids[i]));
            diff.reconstructed.push_back(vocab.token(pred[i]));
            diff.match.push_back(ok);
        }
        const std::size_t n = seq.n_content;
        const double acc = static_cast<double>(correct) / static_cast<double>(n);
        acc_sum += acc;
        ++rep.n_sentences;
        rep.n_tokens += n;
        rep.n_correct += correct;

        const std::size_t len = seq.ids.size();
        LengthBin& bin = bins[(len / opts.bin_width) * opts.bin_width];
        bin.bin_start = (len / opts.bin_width) * opts.bin_width;
        bin.mean_accuracy += acc;  // sum for now, divided below
        ++bin.count;
        bin.n_tokens += n;
        bin.n_correct += correct;

        if (correct < n && len >= opts.sample_min_len && len <= opts.sample_max_len) {
            candidates.push_back(std::move(diff));
        }
    }
    if (rep.n_sentences == 0) throw std::runtime_error("evaluate: no scorable sentences");
    rep.mean_acc = acc_sum / static_cast<double>(rep.n_sentences);
    rep.weighted_acc = static_cast<double>(rep.n_correct) / static_cast<double>(rep.n_tokens);
    for (auto& [start, bin] : bins) {
        bin.mean_accuracy /= static_cast<double>(bin.count);
        rep.by_length.push_back(bin);
    }
    if (!candidates.empty() && opts.n_samples > 0) {
        Rng rng(opts.sample_seed);
        const auto perm = rng.permutation(candidates.size());
        for (std::size_t i = 0; i < std::min(opts.n_samples, candidates.size()); ++i) {
            rep.samples.push_back(std::move(candidates[perm[i]]));
        }
    }
    return rep;
}

// Two lines, "O:" original and "R:" reconstruction, with every mismatched
// predicted token wrapped in » «.
inline std::string render_diff(const ReconDiff& diff) {
    if (diff.original.size() != diff.reconstructed.size() ||
        diff.original.size() != diff.match.size()) {
        throw std::invalid_argument("render_diff: field lengths differ");
    }
    std::ostringstream os;
    os << "O:";
    for (const auto& tok : diff.original) os << ' ' << tok;
    os << "\nR:";
    for (std::size_t i = 0; i < diff.reconstructed.size(); ++i) {
        if (diff.match[i]) {
            os << ' ' << diff.reconstructed[i];
        } else {
            os << " »" << diff.reconstructed[i] << "«";
        }
    }
    os << '\n';
    return os.str();
}

// "length_bin,mean_accuracy,count", rows ascending by bin start.
inline std::string accuracy_by_length_csv(const EvalReport& rep) {
    std::ostringstream os;
    os << "length_bin,mean_accuracy,count\n";
    for (const auto& bin : rep.by_length) {
        os << bin.bin_start << ',' << bin.mean_accuracy << ',' << bin.count << '\n';
    }
    return os.str();
}

inline nlohmann::json report_to_json(const EvalReport& rep) {
    nlohmann::json by_length = nlohmann::json::array();
    for (const auto& bin : rep.by_length) {
        by_length.push_back({{"bin_start", bin.bin_start},
                             {"mean_accuracy", bin.mean_accuracy},
                             {"count", bin.count},
                             {"n_tokens", bin.n_tokens},
                             {"n_correct", bin.n_correct}});
    }
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : rep.samples) samples.push_back(render_diff(s));
    return nlohmann::json{{"mean_acc", rep.mean_acc},
                          {"weighted_acc", rep.weighted_acc},
                          {"n_sentences", rep.n_sentences},
                          {"n_tokens", rep.n_tokens},
                          {"n_correct", rep.n_correct},
                          {"by_length", by_length},
                          {"samples", samples}};
}

}  // namespace sbae
