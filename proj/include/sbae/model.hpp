#pragma once

// The autoencoder: token/position embeddings, a group of encoder layers, a
// single-vector bottleneck expanded with multiplier m and constant-1
// padding, a group of decoder layers, and an untied language modelling
// head. Layers follow the BERT post-layernorm form.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbae/tensor.hpp"

namespace sbae {

// m == kMultiplierInf repeats the bottleneck vector to the full sentence
// length (no constant padding).
inline constexpr std::size_t kMultiplierInf = std::numeric_limits<std::size_t>::max();

struct ModelConfig {
    std::size_t d = 768;
    std::size_t ell = 1;                // layers per group
    std::size_t m = 1;                  // bottleneck multiplier
    std::size_t n_heads = 0;            // 0: derive from d
    std::size_t ffn_dim = 0;            // 0: 4 * d
    double dropout_p = 0.1;
    std::size_t max_seq_len = 128;
    std::size_t vocab_size = 0;

    static std::size_t default_heads(std::size_t d) { return d % 12 == 0 ? 12 : 16; }

    ModelConfig resolved() const {
        ModelConfig c = *this;
        if (c.n_heads == 0) c.n_heads = default_heads(c.d);
        if (c.ffn_dim == 0) c.ffn_dim = 4 * c.d;
        c.validate();
        return c;
    }

    void validate() const {
        if (d == 0 || ell < 1 || vocab_size == 0 || max_seq_len < 2) {
            throw std::invalid_argument("model config: d, ell, vocab_size, max_seq_len invalid");
        }
        if (m < 1) throw std::invalid_argument("model config: m must be >= 1 or inf");
        if (n_heads != 0 && d % n_heads != 0) {
            throw std::invalid_argument("model config: d = " + std::to_string(d) +
                                        " not divisible by n_heads = " + std::to_string(n_heads));
        }
        if (dropout_p < 0.0 || dropout_p >= 1.0) {
            throw std::invalid_argument("model config: dropout_p must be in [0, 1)");
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"d", d},
                         {"ell", ell},
                         {"n_heads", n_heads},
                         {"ffn_dim", ffn_dim},
                         {"dropout_p", dropout_p},
                         {"max_seq_len", max_seq_len},
                         {"vocab_size", vocab_size}};
        if (m == kMultiplierInf) {
            j["m"] = "inf";
        } else {
            j["m"] = m;
        }
        return j;
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.d = j.at("d").get<std::size_t>();
        c.ell = j.at("ell").get<std::size_t>();
        if (j.at("m").is_string()) {
            if (j.at("m").get<std::string>() != "inf") {
                throw std::runtime_error("model config: bad multiplier string");
            }
            c.m = kMultiplierInf;
        } else {
            c.m = j.at("m").get<std::size_t>();
        }
        c.n_heads = j.value("n_heads", std::size_t{0});
        c.ffn_dim = j.value("ffn_dim", std::size_t{0});
        c.dropout_p = j.value("dropout_p", 0.1);
        c.max_seq_len = j.value("max_seq_len", std::size_t{128});
        c.vocab_size = j.at("vocab_size").get<std::size_t>();
        return c;
    }
};

// Fixed parameter enumeration; model construction, counting and the
// checkpoint format all follow this order.
inline std::vector<std::pair<std::string, Shape>> enumerate_param_shapes(const ModelConfig& raw) {
    const ModelConfig cfg = raw.resolved();
    std::vector<std::pair<std::string, Shape>> out;
    out.emplace_back("token_embedding", Shape{cfg.vocab_size, cfg.d});
    out.emplace_back("position_embedding", Shape{cfg.max_seq_len, cfg.d});
    for (const char* group : {"enc", "dec"}) {
        for (std::size_t l = 0; l < cfg.ell; ++l) {
            const std::string p = std::string(group) + "." + std::to_string(l) + ".";
            out.emplace_back(p + "attn.wq", Shape{cfg.d, cfg.d});
            out.emplace_back(p + "attn.bq", Shape{cfg.d});
            out.emplace_back(p + "attn.wk", Shape{cfg.d, cfg.d});
            out.emplace_back(p + "attn.bk", Shape{cfg.d});
            out.emplace_back(p + "attn.wv", Shape{cfg.d, cfg.d});
            out.emplace_back(p + "attn.bv", Shape{cfg.d});
            out.emplace_back(p + "attn.wo", Shape{cfg.d, cfg.d});
            out.emplace_back(p + "attn.bo", Shape{cfg.d});
            out.emplace_back(p + "ln1.gain", Shape{cfg.d});
            out.emplace_back(p + "ln1.bias", Shape{cfg.d});
            out.emplace_back(p + "ffn.w1", Shape{cfg.d, cfg.ffn_dim});
            out.emplace_back(p + "ffn.b1", Shape{cfg.ffn_dim});
            out.emplace_back(p + "ffn.w2", Shape{cfg.ffn_dim, cfg.d});
            out.emplace_back(p + "ffn.b2", Shape{cfg.d});
            out.emplace_back(p + "ln2.gain", Shape{cfg.d});
            out.emplace_back(p + "ln2.bias", Shape{cfg.d});
        }
    }
    out.emplace_back("lm_head.weight", Shape{cfg.d, cfg.vocab_size});
    out.emplace_back("lm_head.bias", Shape{cfg.vocab_size});
    return out;
}

struct ParamCountReport {
    std::size_t token_embedding = 0;
    std::size_t position_table = 0;
    std::size_t body_per_group = 0;  // one group of ell layers
    std::size_t lm_head_matrix = 0;
    std::size_t lm_head_bias = 0;
    std::size_t total = 0;
};

// Counts derived from the same enumeration the model is built from.
inline ParamCountReport count_params(const ModelConfig& cfg) {
    ParamCountReport r;
    for (const auto& [name, shape] : enumerate_param_shapes(cfg)) {
        const std::size_t n = shape_numel(shape);
        r.total += n;
        if (name == "token_embedding") {
            r.token_embedding = n;
        } else if (name == "position_embedding") {
            r.position_table = n;
        } else if (name == "lm_head.weight") {
            r.lm_head_matrix = n;
        } else if (name == "lm_head.bias") {
            r.lm_head_bias = n;
        } else if (name.rfind("enc.", 0) == 0) {
            r.body_per_group += n;
        }
    }
    return r;
}

namespace detail {

template <typename T>
struct TransformerLayer {
    Parameter<T> wq, bq, wk, bk, wv, bv, wo, bo;
    Parameter<T> ln1_gain, ln1_bias;
    Parameter<T> w1, b1, w2, b2;
    Parameter<T> ln2_gain, ln2_bias;

    std::vector<Parameter<T>*> params() {
        return {&wq, &bq, &wk, &bk, &wv, &bv, &wo, &bo, &ln1_gain, &ln1_bias,
                &w1, &b1, &w2, &b2, &ln2_gain, &ln2_bias};
    }
};

}  // namespace detail

inline constexpr double kLayerNormEps = 1e-12;
inline constexpr double kInitStddev = 0.02;

template <typename T>
class Autoencoder {
  public:
    explicit Autoencoder(const ModelConfig& config, std::uint64_t init_seed = 0)
        : cfg_(config.resolved()) {
        const auto shapes = enumerate_param_shapes(cfg_);
        std::size_t idx = 0;
        const auto next = [&](Parameter<T>& p) {
            p = Parameter<T>(shapes[idx].first, Tensor<T>::zeros(shapes[idx].second));
            ++idx;
        };
        next(token_embedding_);
        next(position_embedding_);
        encoder_.resize(cfg_.ell);
        decoder_.resize(cfg_.ell);
        for (auto* group : {&encoder_, &decoder_}) {
            for (auto& layer : *group) {
                for (auto* p : layer.params()) next(*p);
            }
        }
        next(lm_head_w_);
        next(lm_head_b_);
        init_weights(init_seed);
    }

    const ModelConfig& config() const { return cfg_; }

    std::vector<Parameter<T>*> parameters() {
        std::vector<Parameter<T>*> out = {&token_embedding_, &position_embedding_};
        for (auto* group : {&encoder_, &decoder_}) {
            for (auto& layer : *group) {
                for (auto* p : layer.params()) out.push_back(p);
            }
        }
        out.push_back(&lm_head_w_);
        out.push_back(&lm_head_b_);
        return out;
    }

    // Bottleneck embedding: the encoder output hidden state at position 0.
    Tensor<T> encode(const std::vector<int>& ids, bool training = false, Rng* rng = nullptr) {
        const std::size_t n = ids.size();
        if (n > cfg_.max_seq_len) {
            throw std::runtime_error("sequence length " + std::to_string(n) +
                                     " exceeds max_seq_len " + std::to_string(cfg_.max_seq_len));
        }
        if (n == 0) throw std::runtime_error("encode: empty sequence");
        Tensor<T> x = add(embedding(token_embedding_.value, ids),
                          slice_rows(position_embedding_.value, 0, n));
        for (auto& layer : encoder_) x = layer_forward(x, layer, training, rng);
        return select_row(x, 0);
    }

    // First min(m, n) decoder input rows repeat e; the rest are all ones.
    Tensor<T> expand_bottleneck(const Tensor<T>& e, std::size_t n) const {
        if (n < 1) throw std::invalid_argument("expand_bottleneck: n must be >= 1");
        return repeat_pad_ones(e, n, std::min(cfg_.m, n));
    }

    Tensor<T> decode(const Tensor<T>& e, std::size_t n, bool training = false,
                     Rng* rng = nullptr) {
        if (n > cfg_.max_seq_len) {
            throw std::runtime_error("target length " + std::to_string(n) +
                                     " exceeds max_seq_len " + std::to_string(cfg_.max_seq_len));
        }
        Tensor<T> x = add(expand_bottleneck(e, n), slice_rows(position_embedding_.value, 0, n));
        for (auto& layer : decoder_) x = layer_forward(x, layer, training, rng);
        return add(matmul(x, lm_head_w_.value), lm_head_b_.value);
    }

    // Argmax decode of a full round trip; ties resolve to the lowest id.
    std::vector<int> reconstruct(const std::vector<int>& ids) {
        const Tensor<T> logits = decode(encode(ids), ids.size());
        const std::size_t v = cfg_.vocab_size;
        std::vector<int> out(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const T* row = logits.data().data() + i * v;
            std::size_t best = 0;
            for (std::size_t j = 1; j < v; ++j) {
                if (row[j] > row[best]) best = j;
            }
            out[i] = static_cast<int>(best);
        }
        return out;
    }

    Parameter<T>& token_embedding() { return token_embedding_; }
    Parameter<T>& position_embedding() { return position_embedding_; }
    Parameter<T>& lm_head_weight() { return lm_head_w_; }
    Parameter<T>& lm_head_bias() { return lm_head_b_; }

  private:
    void init_weights(std::uint64_t seed) {
        Rng rng(seed);
        for (auto* p : parameters()) {
            auto& v = p->value.mutable_data();
            const std::string& name = p->name;
            const bool is_gain = name.find("ln") != std::string::npos &&
                                 name.find("gain") != std::string::npos;
            const bool is_bias_like = p->value.shape().size() == 1;
            if (is_gain) {
                std::fill(v.begin(), v.end(), T(1));
            } else if (is_bias_like) {
                std::fill(v.begin(), v.end(), T(0));
            } else {
                for (auto& x : v) x = static_cast<T>(rng.normal(0.0, kInitStddev));
            }
        }
    }

    Tensor<T> layer_forward(const Tensor<T>& input, detail::TransformerLayer<T>& layer,
                            bool training, Rng* rng) {
        if (training && rng == nullptr) {
            throw std::runtime_error("training forward pass requires an rng");
        }
        const std::size_t h = cfg_.n_heads;
        const std::size_t dh = cfg_.d / h;
        const T att_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

        Tensor<T> q = split_heads(add(matmul(input, layer.wq.value), layer.bq.value), h);
        Tensor<T> k = split_heads(add(matmul(input, layer.wk.value), layer.bk.value), h);
        Tensor<T> v = split_heads(add(matmul(input, layer.wv.value), layer.bv.value), h);
        Tensor<T> scores = scale(matmul(q, transpose_last2(k)), att_scale);
        Tensor<T> probs = softmax(scores, scores.shape().size() - 1);
        if (training) probs = dropout(probs, cfg_.dropout_p, true, *rng);
        Tensor<T> context = merge_heads(matmul(probs, v));
        Tensor<T> attn_out = add(matmul(context, layer.wo.value), layer.bo.value);
        Tensor<T> x = layernorm(add(input, attn_out), layer.ln1_gain.value, layer.ln1_bias.value,
                                static_cast<T>(kLayerNormEps));

        Tensor<T> hidden = gelu(add(matmul(x, layer.w1.value), layer.b1.value));
        Tensor<T> ffn_out = add(matmul(hidden, layer.w2.value), layer.b2.value);
        if (training) ffn_out = dropout(ffn_out, cfg_.dropout_p, true, *rng);
        return layernorm(add(x, ffn_out), layer.ln2_gain.value, layer.ln2_bias.value,
                         static_cast<T>(kLayerNormEps));
    }

    ModelConfig cfg_;
    Parameter<T> token_embedding_;
    Parameter<T> position_embedding_;
    std::vector<detail::TransformerLayer<T>> encoder_;
    std::vector<detail::TransformerLayer<T>> decoder_;
    Parameter<T> lm_head_w_;
    Parameter<T> lm_head_b_;
};

// -------------------------------------------------------------------------
// checkpoint format
//
// magic "SBAE" | u32 LE version | u64 LE config length | config JSON (UTF-8)
// then for each parameter in enumerate_param_shapes() order:
//   u16 LE name length | name bytes | u8 rank | rank x u64 LE dims |
//   row-major f32 LE IEEE-754 data
// -------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}
inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

struct ByteReader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("truncated checkpoint");
    }
    std::uint64_t get_uint(std::size_t bytes) {
        need(bytes);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < bytes; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        }
        pos += bytes;
        return v;
    }
    std::string get_bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace detail

template <typename T>
inline void save_checkpoint(Autoencoder<T>& model, const std::string& path) {
    std::string out;
    out += "SBAE";
    detail::put_u32(out, kCheckpointVersion);
    const std::string cfg = model.config().to_json().dump();
    detail::put_u64(out, cfg.size());
    out += cfg;
    for (auto* p : model.parameters()) {
        detail::put_u16(out, static_cast<std::uint16_t>(p->name.size()));
        out += p->name;
        const Shape& s = p->value.shape();
        out.push_back(static_cast<char>(s.size()));
        for (const auto dim : s) detail::put_u64(out, dim);
        for (const T x : p->value.data()) {
            detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
        }
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f || !f.write(out.data(), static_cast<std::streamsize>(out.size()))) {
            std::remove(tmp.c_str());
            throw std::runtime_error("cannot write checkpoint: " + path);
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw std::runtime_error("cannot finalize checkpoint: " + path);
    }
}

template <typename T>
inline Autoencoder<T> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    detail::ByteReader r{buf};
    if (r.get_bytes(4) != "SBAE") throw std::runtime_error("bad checkpoint magic: " + path);
    const auto version = r.get_uint(4);
    if (version != kCheckpointVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    const auto cfg_len = r.get_uint(8);
    const ModelConfig cfg = ModelConfig::from_json(nlohmann::json::parse(r.get_bytes(cfg_len)));
    Autoencoder<T> model(cfg);
    for (auto* p : model.parameters()) {
        const auto name_len = r.get_uint(2);
        const std::string name = r.get_bytes(name_len);
        if (name != p->name) {
            throw std::runtime_error("checkpoint tensor order mismatch: expected " + p->name +
                                     ", found " + name);
        }
        const auto rank = r.get_uint(1);
        Shape s(rank);
        for (auto& dim : s) dim = r.get_uint(8);
        if (s != p->value.shape()) {
            throw std::runtime_error("checkpoint shape mismatch for " + name + ": " +
                                     shape_str(s) + " vs " + shape_str(p->value.shape()));
        }
        auto& v = p->value.mutable_data();
        for (auto& x : v) {
            x = static_cast<T>(std::bit_cast<float>(static_cast<std::uint32_t>(r.get_uint(4))));
        }
    }
    if (r.pos != buf.size()) throw std::runtime_error("trailing bytes in checkpoint: " + path);
    return model;
}

}  // namespace sbae
