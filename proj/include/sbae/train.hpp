#pragma once

// Training loop: seeded shuffling into micro-batches, per-sentence
// reconstruction loss, gradient accumulation to an effective batch, Adam
// updates, metrics logging and checkpointing.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbae/corpus.hpp"
#include "sbae/model.hpp"
#include "sbae/tensor.hpp"
#include "sbae/tokenizer.hpp"

namespace sbae {

inline constexpr std::size_t kNoStepLimit = std::numeric_limits<std::size_t>::max();

struct TrainConfig {
    std::size_t micro_batch = 16;
    std::size_t accum_steps = 8;
    double lr = 0;  // 0: derive from d
    std::size_t epochs = 1;
    std::uint64_t seed = 0;
    std::size_t checkpoint_every = 0;  // optimizer steps; 0 disables periodic checkpoints
    std::size_t max_steps = kNoStepLimit;

    void validate() const {
        if (micro_batch < 1 || accum_steps < 1 || epochs < 1) {
            throw std::invalid_argument("train config: micro_batch, accum_steps, epochs >= 1");
        }
        if (lr < 0) throw std::invalid_argument("train config: lr must be positive");
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"micro_batch", micro_batch},
                              {"accum_steps", accum_steps},
                              {"lr", lr},
                              {"epochs", epochs},
                              {"seed", seed},
                              {"checkpoint_every", checkpoint_every},
                              {"max_steps", max_steps == kNoStepLimit ? nlohmann::json(nullptr)
                                                                      : nlohmann::json(max_steps)}};
    }
};

// Learning-rate rule: 1e-4 below d = 1024, 5e-5 from 1024 up.
inline double lr_for(std::size_t d) {
    if (d == 0) throw std::invalid_argument("lr_for: d must be positive");
    return d < 1024 ? 1e-4 : 5e-5;
}

struct Batch {
    std::vector<int> ids;             // [b, n_max], right-padded with pad_id
    std::vector<std::size_t> lengths;
    std::vector<std::uint8_t> loss_mask;  // [b, n_max]; content + [SEP] positions
    std::size_t n_max = 0;

    std::size_t size() const { return lengths.size(); }
};

struct BatchPlan {
    std::vector<Batch> batches;
    std::size_t n_truncated = 0;  // sentences cut to max_seq_len
};

// One epoch's micro-batches: a seeded shuffle of the records, tokenized,
// truncated to max_seq_len and padded per batch.
inline BatchPlan make_batches(const std::vector<SentenceRecord>& records, const Vocab& vocab,
                              std::size_t micro_batch, std::uint64_t seed,
                              std::size_t max_seq_len) {
    if (records.empty()) throw std::runtime_error("make_batches: empty corpus");
    if (micro_batch < 1) throw std::invalid_argument("make_batches: micro_batch must be >= 1");
    Rng rng(seed);
    const auto perm = rng.permutation(records.size());

    BatchPlan plan;
    std::vector<TokenSequence> pending;
    pending.reserve(micro_batch);
    const auto flush = [&]() {
        if (pending.empty()) return;
        Batch b;
        b.n_max = 0;
        for (const auto& s : pending) b.n_max = std::max(b.n_max, s.ids.size());
        for (const auto& s : pending) {
            b.lengths.push_back(s.ids.size());
            for (std::size_t i = 0; i < b.n_max; ++i) {
                const bool in_range = i < s.ids.size();
                b.ids.push_back(in_range ? s.ids[i] : vocab.pad_id());
                b.loss_mask.push_back(in_range && i > 0 ? 1 : 0);  // exclude [CLS] and pads
            }
        }
        plan.batches.push_back(std::move(b));
        pending.clear();
    };
    for (const auto pi : perm) {
        TokenSequence seq = tokenize(records[pi].text, vocab);
        if (truncate(seq, max_seq_len, vocab.sep_id())) ++plan.n_truncated;
        pending.push_back(std::move(seq));
        if (pending.size() == micro_batch) flush();
    }
    flush();
    return plan;
}

struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainResult {
    std::size_t optimizer_steps = 0;
    std::size_t micro_batches = 0;
    std::size_t sentences_seen = 0;
    std::size_t n_truncated = 0;
    double last_loss = 0;
};

// Owns the optimizer state of one training run. Gradients accumulate over
// accum_steps micro-batches and are averaged over the sentences of that
// window before each Adam update.
template <typename T>
class Trainer {
  public:
    Trainer(Autoencoder<T>& model, TrainConfig cfg)
        : model_(model),
          cfg_(cfg),
          dropout_rng_(cfg.seed ^ 0x9E3779B97F4A7C15ULL),
          params_(model.parameters()) {
        cfg_.validate();
        if (cfg_.lr == 0) cfg_.lr = lr_for(model.config().d);
    }

    const TrainConfig& config() const { return cfg_; }
    std::size_t optimizer_steps() const { return optimizer_steps_; }
    std::size_t micro_batches_seen() const { return micro_batches_seen_; }

    // Forward/backward over one micro-batch; applies Adam every
    // accum_steps micro-batches. Returns the batch's mean sentence loss.
    double train_step(const Batch& batch) {
        const std::size_t b = batch.size();
        double total = 0;
        for (std::size_t s = 0; s < b; ++s) {
            const std::size_t n = batch.lengths[s];
            std::vector<int> ids(batch.ids.begin() +
                                     static_cast<std::ptrdiff_t>(s * batch.n_max),
                                 batch.ids.begin() +
                                     static_cast<std::ptrdiff_t>(s * batch.n_max + n));
            std::vector<int> targets(n, kIgnoreTarget);
            for (std::size_t i = 0; i < n; ++i) {
                if (batch.loss_mask[s * batch.n_max + i]) targets[i] = ids[i];
            }
            Tensor<T> e = model_.encode(ids, true, &dropout_rng_);
            Tensor<T> logits = model_.decode(e, n, true, &dropout_rng_);
            Tensor<T> loss = cross_entropy(logits, targets);
            const double lv = static_cast<double>(loss.item());
            if (!std::isfinite(lv)) {
                throw DivergenceError("divergence: non-finite loss at micro-batch " +
                                      std::to_string(micro_batches_seen_) + ", sentence " +
                                      std::to_string(s) + ", optimizer step " +
                                      std::to_string(optimizer_steps_));
            }
            total += lv;
            backward(loss);
        }
        window_sentences_ += b;
        ++micro_batches_seen_;
        if (micro_batches_seen_ % cfg_.accum_steps == 0) apply_update();
        return total / static_cast<double>(b);
    }

    // Flushes a partial accumulation window (end of training).
    void finish_window() {
        if (window_sentences_ > 0) apply_update();
    }

  private:
    void apply_update() {
        const T inv = static_cast<T>(1.0 / static_cast<double>(window_sentences_));
        for (auto* p : params_) {
            for (auto& g : p->grad()) g *= inv;
        }
        adam_step(params_, cfg_.lr);
        window_sentences_ = 0;
        ++optimizer_steps_;
    }

    Autoencoder<T>& model_;
    TrainConfig cfg_;
    Rng dropout_rng_;
    std::vector<Parameter<T>*> params_;
    std::size_t micro_batches_seen_ = 0;
    std::size_t optimizer_steps_ = 0;
    std::size_t window_sentences_ = 0;
};

// Full training run. Writes "step,loss,sentences_per_sec,elapsed_s" rows to
// `metrics` when given, and checkpoints to `checkpoint_path` at
// checkpoint_every steps and at the end.
template <typename T>
inline TrainResult train(Autoencoder<T>& model, const std::vector<SentenceRecord>& records,
                         const Vocab& vocab, const TrainConfig& cfg,
                         std::ostream* metrics = nullptr,
                         const std::string& checkpoint_path = "") {
    cfg.validate();
    Trainer<T> trainer(model, cfg);
    TrainResult res;
    if (metrics) *metrics << "step,loss,sentences_per_sec,elapsed_s\n";
    const auto t0 = std::chrono::steady_clock::now();
    const auto save = [&]() {
        if (!checkpoint_path.empty()) save_checkpoint(model, checkpoint_path);
    };
    bool done = cfg.max_steps == 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
        const BatchPlan plan =
            make_batches(records, vocab, cfg.micro_batch, cfg.seed + epoch, model.config().max_seq_len);
        res.n_truncated += plan.n_truncated;
        for (const Batch& batch : plan.batches) {
            const std::size_t steps_before = trainer.optimizer_steps();
            res.last_loss = trainer.train_step(batch);
            ++res.micro_batches;
            res.sentences_seen += batch.size();
            if (trainer.optimizer_steps() > steps_before) {
                const double elapsed =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                if (metrics) {
                    *metrics << trainer.optimizer_steps() << ',' << res.last_loss << ','
                             << (elapsed > 0 ? static_cast<double>(res.sentences_seen) / elapsed
                                             : 0.0)
                             << ',' << elapsed << '\n';
                }
                if (cfg.checkpoint_every > 0 &&
                    trainer.optimizer_steps() % cfg.checkpoint_every == 0) {
                    save();
                }
                if (trainer.optimizer_steps() >= cfg.max_steps) {
                    done = true;
                    break;
                }
            }
        }
    }
    if (!done) trainer.finish_window();  // partial window at natural end of training
    res.optimizer_steps = trainer.optimizer_steps();
    save();
    return res;
}

}  // namespace sbae
