// Command-line surface for the sentence-bottleneck autoencoder: corpus
// ingestion and statistics, train/test splitting, training, evaluation,
// single-sentence reconstruction and parameter-count reports.
//
// Exit codes: 0 success, 1 usage error, 2 I/O error, 3 numeric divergence.

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sbae/corpus.hpp"
#include "sbae/eval.hpp"
#include "sbae/manifest.hpp"
#include "sbae/model.hpp"
#include "sbae/tensor.hpp"
#include "sbae/tokenizer.hpp"
#include "sbae/train.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitDivergence = 3;

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::size_t parse_multiplier(const std::string& s) {
    if (s == "inf") return sbae::kMultiplierInf;
    try {
        const long long v = std::stoll(s);
        if (v < 1) throw std::invalid_argument("");
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw CLI::ValidationError("--m", "expected a positive integer or 'inf'");
    }
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Model/train settings merged from an optional JSON config file and flags;
// flags always win. The merged JSON is what gets digested into manifests.
struct RunSettings {
    sbae::ModelConfig model;
    sbae::TrainConfig train;
    nlohmann::json merged;

    void finalize() {
        merged = model.to_json();
        const nlohmann::json tj = train.to_json();
        for (const auto& [k, v] : tj.items()) merged[k] = v;
    }
};

// Applies JSON config values, but only for fields whose flag was not given
// on the command line (flags override file values).
void apply_config_file(RunSettings& s, const std::string& path, CLI::App* cmd) {
    const nlohmann::json j = nlohmann::json::parse(read_text_file(path));
    const auto flag_given = [&](const std::string& name) {
        auto* opt = cmd->get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    };
    const auto use = [&](const char* key, const char* flag) {
        return j.contains(key) && !j[key].is_null() && !flag_given(flag);
    };
    if (use("d", "--d")) s.model.d = j["d"].get<std::size_t>();
    if (use("ell", "--ell")) s.model.ell = j["ell"].get<std::size_t>();
    if (use("m", "--m")) {
        s.model.m = j["m"].is_string() ? parse_multiplier(j["m"].get<std::string>())
                                       : j["m"].get<std::size_t>();
    }
    if (use("n_heads", "--heads")) s.model.n_heads = j["n_heads"].get<std::size_t>();
    if (use("ffn_dim", "--ffn-dim")) s.model.ffn_dim = j["ffn_dim"].get<std::size_t>();
    if (use("dropout_p", "--dropout")) s.model.dropout_p = j["dropout_p"].get<double>();
    if (use("max_seq_len", "--max-seq-len")) {
        s.model.max_seq_len = j["max_seq_len"].get<std::size_t>();
    }
    if (use("micro_batch", "--micro-batch")) s.train.micro_batch = j["micro_batch"].get<std::size_t>();
    if (use("accum_steps", "--accum")) s.train.accum_steps = j["accum_steps"].get<std::size_t>();
    if (use("lr", "--lr")) s.train.lr = j["lr"].get<double>();
    if (use("epochs", "--epochs")) s.train.epochs = j["epochs"].get<std::size_t>();
    if (use("seed", "--seed")) s.train.seed = j["seed"].get<std::uint64_t>();
    if (use("checkpoint_every", "--checkpoint-every")) {
        s.train.checkpoint_every = j["checkpoint_every"].get<std::size_t>();
    }
    if (use("max_steps", "--max-steps")) s.train.max_steps = j["max_steps"].get<std::size_t>();
}

sbae::RunManifest start_manifest(const std::string& command, const nlohmann::json& flags,
                                 std::uint64_t seed) {
    sbae::RunManifest m;
    m.command = command;
    m.flags = flags;
    m.seed = seed;
    m.started_at = sbae::iso8601_now();
    return m;
}

void finish_manifest(sbae::RunManifest& m, const std::string& primary_artifact) {
    m.finished_at = sbae::iso8601_now();
    m.write(primary_artifact + ".manifest.json");
}

int cmd_ingest(const std::vector<std::string>& inputs, const std::string& output,
               std::size_t max_chars) {
    auto manifest = start_manifest("ingest", {{"input", inputs}, {"max_chars", max_chars}}, 0);
    std::vector<sbae::SentenceRecord> kept;
    std::size_t total = 0;
    std::size_t doc_id = 0;
    for (const auto& path : inputs) {
        for (const auto& doc : sbae::read_documents(path)) {
            auto records = sbae::split_sentences(doc);
            for (auto& r : records) r.doc_id = doc_id;
            total += records.size();
            auto filtered = sbae::filter_sentences(records, max_chars);
            kept.insert(kept.end(), filtered.begin(), filtered.end());
            ++doc_id;
        }
    }
    sbae::write_corpus_jsonl(kept, output);
    manifest.corpus_digest = sbae::digest_file(output);
    manifest.artifacts = {output};
    finish_manifest(manifest, output);
    std::cout << "ingested " << doc_id << " documents: kept " << kept.size() << " sentences, dropped "
              << (total - kept.size()) << "\n";
    return kExitOk;
}

int cmd_stats(const std::string& corpus, const std::string& vocab_path, const std::string& stats_out,
              const std::string& hist_prefix, std::size_t bin_width) {
    auto manifest =
        start_manifest("stats", {{"corpus", corpus}, {"vocab", vocab_path}, {"bin_width", bin_width}}, 0);
    manifest.corpus_digest = sbae::digest_file(corpus);
    auto records = sbae::read_corpus_jsonl(corpus);
    const sbae::Vocab vocab = sbae::Vocab::load(vocab_path);
    const sbae::CorpusStats stats = sbae::compute_stats(records, vocab);
    sbae::write_file_atomic(stats_out, sbae::stats_to_json(stats).dump(2) + "\n");
    manifest.artifacts = {stats_out};
    if (!hist_prefix.empty()) {
        const std::pair<sbae::LengthDimension, const char*> dims[] = {
            {sbae::LengthDimension::kChars, "chars"},
            {sbae::LengthDimension::kWords, "words"},
            {sbae::LengthDimension::kTokens, "tokens"}};
        for (const auto& [dim, name] : dims) {
            const std::string path = hist_prefix + "_" + name + ".csv";
            sbae::write_file_atomic(path,
                                    sbae::histogram_csv(sbae::length_histogram(records, dim, bin_width)));
            manifest.artifacts.push_back(path);
        }
    }
    finish_manifest(manifest, stats_out);
    std::cout << "stats for " << stats.n_sentences << " sentences written to " << stats_out << "\n";
    return kExitOk;
}

int cmd_split(const std::string& corpus, const std::string& output, std::size_t n_test,
              std::uint64_t seed) {
    auto manifest = start_manifest("split", {{"corpus", corpus}, {"n_test", n_test}}, seed);
    manifest.corpus_digest = sbae::digest_file(corpus);
    auto records = sbae::read_corpus_jsonl(corpus);
    sbae::assign_splits(records, n_test, seed);
    sbae::write_corpus_jsonl(records, output);
    manifest.artifacts = {output};
    finish_manifest(manifest, output);
    std::cout << "split " << records.size() << " sentences: " << n_test << " test, "
              << (records.size() - n_test) << " train\n";
    return kExitOk;
}

int cmd_build_vocab(const std::string& corpus, const std::string& output, std::size_t target_size) {
    auto manifest =
        start_manifest("build-vocab", {{"corpus", corpus}, {"target_size", target_size}}, 0);
    manifest.corpus_digest = sbae::digest_file(corpus);
    const auto records = sbae::read_corpus_jsonl(corpus);
    std::vector<std::string> texts;
    texts.reserve(records.size());
    for (const auto& r : records) texts.push_back(r.text);
    const sbae::Vocab vocab = sbae::build_vocab(texts, target_size);
    vocab.save(output);
    manifest.artifacts = {output};
    finish_manifest(manifest, output);
    std::cout << "vocabulary of " << vocab.size() << " tokens written to " << output << "\n";
    return kExitOk;
}

int cmd_train(RunSettings settings, const std::string& corpus, const std::string& vocab_path,
              const std::string& ckpt, const std::string& metrics_path) {
    const sbae::Vocab vocab = sbae::Vocab::load(vocab_path);
    settings.model.vocab_size = vocab.size();
    settings.finalize();
    auto manifest = start_manifest("train", settings.merged, settings.train.seed);
    manifest.config_digest = sbae::fnv1a64_hex(settings.merged.dump());
    manifest.corpus_digest = sbae::digest_file(corpus);

    auto all = sbae::read_corpus_jsonl(corpus);
    std::vector<sbae::SentenceRecord> train_set;
    for (auto& r : all) {
        if (r.split != sbae::Split::kTest) train_set.push_back(std::move(r));
    }
    if (train_set.empty()) throw std::runtime_error("no training sentences in corpus");

    sbae::Autoencoder<float> model(settings.model, settings.train.seed);
    std::ofstream metrics;
    if (!metrics_path.empty()) {
        metrics.open(metrics_path, std::ios::binary | std::ios::trunc);
        if (!metrics) throw IoError("cannot write metrics file: " + metrics_path);
    }
    const sbae::TrainResult res = sbae::train(model, train_set, vocab, settings.train,
                                              metrics.is_open() ? &metrics : nullptr, ckpt);
    manifest.artifacts = {ckpt};
    if (!metrics_path.empty()) manifest.artifacts.push_back(metrics_path);
    finish_manifest(manifest, ckpt);
    std::cout << "trained " << res.optimizer_steps << " optimizer steps over " << res.sentences_seen
              << " sentences (" << res.n_truncated << " truncated), final loss " << res.last_loss
              << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& corpus, const std::string& vocab_path, const std::string& ckpt,
             const std::string& report_path, const std::string& by_length_csv,
             std::size_t bin_width, std::size_t n_samples, std::uint64_t seed) {
    auto manifest = start_manifest(
        "eval", {{"corpus", corpus}, {"ckpt", ckpt}, {"bin_width", bin_width}}, seed);
    manifest.corpus_digest = sbae::digest_file(corpus);
    const sbae::Vocab vocab = sbae::Vocab::load(vocab_path);
    auto model = sbae::load_checkpoint<float>(ckpt);
    manifest.config_digest = sbae::fnv1a64_hex(model.config().to_json().dump());

    auto all = sbae::read_corpus_jsonl(corpus);
    std::vector<sbae::SentenceRecord> test_set;
    for (auto& r : all) {
        if (r.split == sbae::Split::kTest) test_set.push_back(r);
    }
    if (test_set.empty()) {
        std::cout << "note: corpus has no test split, evaluating all sentences\n";
        test_set = std::move(all);
    }
    sbae::EvalOptions opts;
    opts.bin_width = bin_width;
    opts.n_samples = n_samples;
    opts.sample_seed = seed;
    const sbae::EvalReport rep = sbae::evaluate(model, test_set, vocab, opts);
    sbae::write_file_atomic(report_path, sbae::report_to_json(rep).dump(2) + "\n");
    manifest.artifacts = {report_path};
    if (!by_length_csv.empty()) {
        sbae::write_file_atomic(by_length_csv, sbae::accuracy_by_length_csv(rep));
        manifest.artifacts.push_back(by_length_csv);
    }
    finish_manifest(manifest, report_path);
    std::cout << "mean accuracy " << rep.mean_acc << ", weighted accuracy " << rep.weighted_acc
              << " over " << rep.n_sentences << " sentences\n";
    return kExitOk;
}

int cmd_reconstruct(const std::string& ckpt, const std::string& vocab_path,
                    const std::string& sentence) {
    const sbae::Vocab vocab = sbae::Vocab::load(vocab_path);
    auto model = sbae::load_checkpoint<float>(ckpt);
    sbae::TokenSequence seq = sbae::tokenize(sentence, vocab);
    sbae::truncate(seq, model.config().max_seq_len, vocab.sep_id());
    const std::vector<int> pred = model.reconstruct(seq.ids);
    sbae::ReconDiff diff;
    for (std::size_t i = 1; i + 1 < seq.ids.size(); ++i) {
        diff.original.push_back(vocab.token(seq.ids[i]));
        diff.reconstructed.push_back(vocab.token(pred[i]));
        diff.match.push_back(pred[i] == seq.ids[i]);
    }
    std::cout << sbae::render_diff(diff);
    std::cout << "text: " << sbae::detokenize(pred, vocab) << "\n";
    return kExitOk;
}

int cmd_params(RunSettings settings, std::size_t vocab_size) {
    settings.model.vocab_size = vocab_size;
    const sbae::ModelConfig cfg = settings.model.resolved();
    const sbae::ParamCountReport rep = sbae::count_params(cfg);
    const auto row = [](const char* name, std::size_t n) {
        std::printf("%-24s %12zu  %8.2fM\n", name, n, static_cast<double>(n) / 1e6);
    };
    std::printf("d=%zu ell=%zu heads=%zu vocab=%zu\n", cfg.d, cfg.ell, cfg.n_heads,
                cfg.vocab_size);
    row("token embedding table", rep.token_embedding);
    row("position table", rep.position_table);
    row("body per group", rep.body_per_group);
    row("lm head", rep.lm_head_matrix);
    row("lm head bias", rep.lm_head_bias);
    row("total", rep.total);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sentence-bottleneck transformer autoencoder"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "segment documents into a sentence corpus");
    std::vector<std::string> in_inputs;
    std::string in_output = "corpus.jsonl";
    std::size_t in_max_chars = 512;
    ingest->add_option("--input", in_inputs, "input text files")->required()->expected(-1);
    ingest->add_option("--output", in_output, "output corpus JSONL");
    ingest->add_option("--max-chars", in_max_chars, "keep sentences shorter than this");

    // stats
    auto* stats = app.add_subcommand("stats", "corpus statistics and length histograms");
    std::string st_corpus, st_vocab, st_out = "stats.json", st_hist;
    std::size_t st_bin_width = 8;
    stats->add_option("--corpus", st_corpus)->required();
    stats->add_option("--vocab", st_vocab)->required();
    stats->add_option("--stats-out", st_out);
    stats->add_option("--hist-prefix", st_hist, "write <prefix>_{chars,words,tokens}.csv");
    stats->add_option("--bin-width", st_bin_width);

    // split
    auto* split = app.add_subcommand("split", "assign train/test splits");
    std::string sp_corpus, sp_output;
    std::size_t sp_n_test = 0;
    std::uint64_t sp_seed = 0;
    split->add_option("--corpus", sp_corpus)->required();
    split->add_option("--output", sp_output)->required();
    split->add_option("--n-test", sp_n_test)->required();
    split->add_option("--seed", sp_seed);

    // build-vocab
    auto* bv = app.add_subcommand("build-vocab", "build a WordPiece vocabulary from a corpus");
    std::string bv_corpus, bv_output = "vocab.txt";
    std::size_t bv_target = 4096;
    bv->add_option("--corpus", bv_corpus)->required();
    bv->add_option("--output", bv_output);
    bv->add_option("--target-size", bv_target);

    // shared model/train flags
    RunSettings settings;
    settings.model.vocab_size = 1;  // replaced before use
    std::string flag_m = "1", config_file;
    const auto add_model_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_file, "JSON config file (flags override)");
        cmd->add_option("--d", settings.model.d, "embedding dimension");
        cmd->add_option("--ell", settings.model.ell, "layers per encoder/decoder group");
        cmd->add_option("--m", flag_m, "bottleneck multiplier (positive integer or 'inf')");
        cmd->add_option("--heads", settings.model.n_heads, "attention heads (0 = rule)");
        cmd->add_option("--dropout", settings.model.dropout_p);
        cmd->add_option("--max-seq-len", settings.model.max_seq_len);
    };

    // train
    auto* tr = app.add_subcommand("train", "train an autoencoder");
    std::string tr_corpus, tr_vocab, tr_ckpt = "model.ckpt", tr_metrics;
    add_model_flags(tr);
    tr->add_option("--corpus", tr_corpus)->required();
    tr->add_option("--vocab", tr_vocab)->required();
    tr->add_option("--ckpt", tr_ckpt, "output checkpoint");
    tr->add_option("--metrics", tr_metrics, "metrics CSV");
    tr->add_option("--seed", settings.train.seed);
    tr->add_option("--lr", settings.train.lr, "learning rate (0 = rule from d)");
    tr->add_option("--micro-batch", settings.train.micro_batch);
    tr->add_option("--accum", settings.train.accum_steps);
    tr->add_option("--epochs", settings.train.epochs);
    tr->add_option("--max-steps", settings.train.max_steps);
    tr->add_option("--checkpoint-every", settings.train.checkpoint_every);

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate reconstruction accuracy");
    std::string ev_corpus, ev_vocab, ev_ckpt, ev_report = "eval.json", ev_csv;
    std::size_t ev_bin_width = 5, ev_samples = 8;
    std::uint64_t ev_seed = 0;
    ev->add_option("--corpus", ev_corpus)->required();
    ev->add_option("--vocab", ev_vocab)->required();
    ev->add_option("--ckpt", ev_ckpt)->required();
    ev->add_option("--report", ev_report);
    ev->add_option("--by-length-csv", ev_csv);
    ev->add_option("--bin-width", ev_bin_width);
    ev->add_option("--samples", ev_samples);
    ev->add_option("--seed", ev_seed);

    // reconstruct
    auto* rc = app.add_subcommand("reconstruct", "round-trip one sentence and show the diff");
    std::string rc_ckpt, rc_vocab, rc_text;
    rc->add_option("--ckpt", rc_ckpt)->required();
    rc->add_option("--vocab", rc_vocab)->required();
    rc->add_option("--text", rc_text)->required();

    // params
    auto* pr = app.add_subcommand("params", "parameter-count report for a configuration");
    std::size_t pr_vocab_size = 30522;
    add_model_flags(pr);
    pr->add_option("--vocab-size", pr_vocab_size);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    CLI::App* active = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
    try {
        // --m needs explicit parsing ("inf" sentinel); config may still
        // override it below when the flag was not given
        settings.model.m = parse_multiplier(flag_m);
        if (!config_file.empty() && active != nullptr) {
            apply_config_file(settings, config_file, active);
        }
        if (*ingest) return cmd_ingest(in_inputs, in_output, in_max_chars);
        if (*stats) return cmd_stats(st_corpus, st_vocab, st_out, st_hist, st_bin_width);
        if (*split) return cmd_split(sp_corpus, sp_output, sp_n_test, sp_seed);
        if (*bv) return cmd_build_vocab(bv_corpus, bv_output, bv_target);
        if (*tr) return cmd_train(settings, tr_corpus, tr_vocab, tr_ckpt, tr_metrics);
        if (*ev) {
            return cmd_eval(ev_corpus, ev_vocab, ev_ckpt, ev_report, ev_csv, ev_bin_width,
                            ev_samples, ev_seed);
        }
        if (*rc) return cmd_reconstruct(rc_ckpt, rc_vocab, rc_text);
        if (*pr) return cmd_params(settings, pr_vocab_size);
        std::cerr << "no subcommand given\n";
        return kExitUsage;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const sbae::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
}
