#pragma once

#include <string>
#include <vector>

#include "seqcl/data.hpp"
#include "seqcl/tape.hpp"

namespace seqcl::model {

struct BackboneConfig {
    int num_items = 0;  // |V|; the embedding table has num_items + 1 rows
    int d = 64;
    int n = 20;
    int layers = 2;
    int heads = 2;
    double dropout = 0.5;
    double ln_eps = 1e-5;
};

// Analytic parameter count for a configuration (embeddings + per-layer
// attention/FFN/layernorm weights + final layernorm).
int64_t parameter_count(const BackboneConfig& cfg);

template <class T>
struct LayerParams {
    nn::Mat<T> wq, wk, wv, wo;            // d x d
    nn::Mat<T> ln1_g, ln1_b, ln2_g, ln2_b;  // 1 x d
    nn::Mat<T> w1, b1;                    // d x 4d, 1 x 4d
    nn::Mat<T> w2, b2;                    // 4d x d, 1 x d
};

template <class T>
struct ModelParams {
    BackboneConfig config;
    nn::Mat<T> item_emb;  // (|V|+1) x d, row 0 is the padding row
    nn::Mat<T> pos_emb;   // n x d
    std::vector<LayerParams<T>> layers;
    nn::Mat<T> ln_f_g, ln_f_b;  // 1 x d

    std::vector<std::pair<std::string, nn::Mat<T>*>> named();
    std::vector<std::pair<std::string, const nn::Mat<T>*>> named() const;
    int64_t parameter_count() const { return model::parameter_count(config); }

    template <class U>
    ModelParams<U> cast() const;
};

// Truncated normal (sigma 0.02) for embeddings and projections, zeros for
// biases and the padding row, ones for layernorm gains. Each tensor draws
// from its own named seed stream, so init is order-independent.
template <class T>
ModelParams<T> init_params(const BackboneConfig& cfg, uint64_t seed);

// Per-step tape handles for every parameter tensor (creation order matches
// named()); forwards that share one ParamNodes accumulate gradients jointly.
struct LayerNodes {
    int wq, wk, wv, wo;
    int ln1_g, ln1_b, ln2_g, ln2_b;
    int w1, b1, w2, b2;
};

struct ParamNodes {
    int item_emb = -1, pos_emb = -1;
    std::vector<LayerNodes> layers;
    int ln_f_g = -1, ln_f_b = -1;

    std::vector<int> all() const;
};

template <class T>
ParamNodes make_param_nodes(nn::Tape<T>& tape, const ModelParams<T>& params);

// Builds a SeqBatch for left-padded rows (real tokens end at position n-1).
nn::SeqBatch seq_batch_from_ids(const std::vector<ItemId>& flat_ids, int size, int n);

struct EncodeResult {
    int states = -1;  // (size*n) x d node
    int last_h = -1;  // size x d node, one row per sequence at its last real position
};

// Embedding lookup + position embeddings + dropout, then `layers`
// pre-layernorm transformer blocks with causal attention, then a final
// layernorm. h_u is the state at the last real position.
template <class T>
EncodeResult encode(nn::Tape<T>& tape, const ParamNodes& nodes, const BackboneConfig& cfg,
                    const std::vector<ItemId>& flat_ids, const nn::SeqBatch& sb,
                    bool training, DetRng* dropout_rng);

// Logits h M^T over item rows 1..|V| (padding row excluded). Weight-tied to
// the embedding table.
template <class T>
int score_items(nn::Tape<T>& tape, const ParamNodes& nodes, int h, int num_items);

// ---- implementation ----

inline int64_t parameter_count(const BackboneConfig& cfg) {
    int64_t d = cfg.d;
    int64_t per_layer = 4 * d * d            // q, k, v, o
                        + 2 * 2 * d          // two layernorms, gain + bias each
                        + d * 4 * d + 4 * d  // ffn in + bias
                        + 4 * d * d + d;     // ffn out + bias
    return (static_cast<int64_t>(cfg.num_items) + 1) * d  // item table (incl. padding row)
           + static_cast<int64_t>(cfg.n) * d              // positions
           + cfg.layers * per_layer + 2 * d;              // final layernorm
}

template <class T>
std::vector<std::pair<std::string, nn::Mat<T>*>> ModelParams<T>::named() {
    std::vector<std::pair<std::string, nn::Mat<T>*>> out;
    out.emplace_back("item_emb", &item_emb);
    out.emplace_back("pos_emb", &pos_emb);
    for (size_t l = 0; l < layers.size(); ++l) {
        std::string p = "layer" + std::to_string(l) + ".";
        auto& lay = layers[l];
        out.emplace_back(p + "wq", &lay.wq);
        out.emplace_back(p + "wk", &lay.wk);
        out.emplace_back(p + "wv", &lay.wv);
        out.emplace_back(p + "wo", &lay.wo);
        out.emplace_back(p + "ln1_g", &lay.ln1_g);
        out.emplace_back(p + "ln1_b", &lay.ln1_b);
        out.emplace_back(p + "ln2_g", &lay.ln2_g);
        out.emplace_back(p + "ln2_b", &lay.ln2_b);
        out.emplace_back(p + "w1", &lay.w1);
        out.emplace_back(p + "b1", &lay.b1);
        out.emplace_back(p + "w2", &lay.w2);
        out.emplace_back(p + "b2", &lay.b2);
    }
    out.emplace_back("ln_f_g", &ln_f_g);
    out.emplace_back("ln_f_b", &ln_f_b);
    return out;
}

template <class T>
std::vector<std::pair<std::string, const nn::Mat<T>*>> ModelParams<T>::named() const {
    auto mut = const_cast<ModelParams<T>*>(this)->named();
    std::vector<std::pair<std::string, const nn::Mat<T>*>> out;
    out.reserve(mut.size());
    for (auto& [name, ptr] : mut) out.emplace_back(name, ptr);
    return out;
}

template <class T>
template <class U>
ModelParams<U> ModelParams<T>::cast() const {
    ModelParams<U> out;
    out.config = config;
    out.item_emb = item_emb.template cast<U>();
    out.pos_emb = pos_emb.template cast<U>();
    out.layers.resize(layers.size());
    for (size_t l = 0; l < layers.size(); ++l) {
        const auto& src = layers[l];
        auto& dst = out.layers[l];
        dst.wq = src.wq.template cast<U>();
        dst.wk = src.wk.template cast<U>();
        dst.wv = src.wv.template cast<U>();
        dst.wo = src.wo.template cast<U>();
        dst.ln1_g = src.ln1_g.template cast<U>();
        dst.ln1_b = src.ln1_b.template cast<U>();
        dst.ln2_g = src.ln2_g.template cast<U>();
        dst.ln2_b = src.ln2_b.template cast<U>();
        dst.w1 = src.w1.template cast<U>();
        dst.b1 = src.b1.template cast<U>();
        dst.w2 = src.w2.template cast<U>();
        dst.b2 = src.b2.template cast<U>();
    }
    out.ln_f_g = ln_f_g.template cast<U>();
    out.ln_f_b = ln_f_b.template cast<U>();
    return out;
}

namespace detail {

template <class T>
nn::Mat<T> trunc_normal(Eigen::Index rows, Eigen::Index cols, uint64_t seed,
                        const std::string& name) {
    DetRng rng(derive_seed(seed, {hash_string("init"), hash_string(name)}));
    nn::Mat<T> m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            m(i, j) = static_cast<T>(rng.truncated_normal(0.02));
    return m;
}

}  // namespace detail

template <class T>
ModelParams<T> init_params(const BackboneConfig& cfg, uint64_t seed) {
    require(cfg.num_items >= 1, "init_params: num_items must be >= 1");
    require(cfg.d >= 1 && cfg.d % cfg.heads == 0, "init_params: d must be divisible by heads");
    ModelParams<T> p;
    p.config = cfg;
    p.item_emb = detail::trunc_normal<T>(cfg.num_items + 1, cfg.d, seed, "item_emb");
    p.item_emb.row(0).setZero();  // padding row
    p.pos_emb = detail::trunc_normal<T>(cfg.n, cfg.d, seed, "pos_emb");
    p.layers.resize(static_cast<size_t>(cfg.layers));
    for (int l = 0; l < cfg.layers; ++l) {
        std::string pre = "layer" + std::to_string(l) + ".";
        auto& lay = p.layers[static_cast<size_t>(l)];
        lay.wq = detail::trunc_normal<T>(cfg.d, cfg.d, seed, pre + "wq");
        lay.wk = detail::trunc_normal<T>(cfg.d, cfg.d, seed, pre + "wk");
        lay.wv = detail::trunc_normal<T>(cfg.d, cfg.d, seed, pre + "wv");
        lay.wo = detail::trunc_normal<T>(cfg.d, cfg.d, seed, pre + "wo");
        lay.ln1_g = nn::Mat<T>::Ones(1, cfg.d);
        lay.ln1_b = nn::Mat<T>::Zero(1, cfg.d);
        lay.ln2_g = nn::Mat<T>::Ones(1, cfg.d);
        lay.ln2_b = nn::Mat<T>::Zero(1, cfg.d);
        lay.w1 = detail::trunc_normal<T>(cfg.d, 4 * cfg.d, seed, pre + "w1");
        lay.b1 = nn::Mat<T>::Zero(1, 4 * cfg.d);
        lay.w2 = detail::trunc_normal<T>(4 * cfg.d, cfg.d, seed, pre + "w2");
        lay.b2 = nn::Mat<T>::Zero(1, cfg.d);
    }
    p.ln_f_g = nn::Mat<T>::Ones(1, cfg.d);
    p.ln_f_b = nn::Mat<T>::Zero(1, cfg.d);
    return p;
}

inline std::vector<int> ParamNodes::all() const {
    std::vector<int> out{item_emb, pos_emb};
    for (const auto& l : layers) {
        out.insert(out.end(), {l.wq, l.wk, l.wv, l.wo, l.ln1_g, l.ln1_b, l.ln2_g, l.ln2_b,
                               l.w1, l.b1, l.w2, l.b2});
    }
    out.push_back(ln_f_g);
    out.push_back(ln_f_b);
    return out;
}

template <class T>
ParamNodes make_param_nodes(nn::Tape<T>& tape, const ModelParams<T>& params) {
    ParamNodes nodes;
    nodes.item_emb = tape.input(params.item_emb);
    nodes.pos_emb = tape.input(params.pos_emb);
    nodes.layers.reserve(params.layers.size());
    for (const auto& lay : params.layers) {
        LayerNodes ln;
        ln.wq = tape.input(lay.wq);
        ln.wk = tape.input(lay.wk);
        ln.wv = tape.input(lay.wv);
        ln.wo = tape.input(lay.wo);
        ln.ln1_g = tape.input(lay.ln1_g);
        ln.ln1_b = tape.input(lay.ln1_b);
        ln.ln2_g = tape.input(lay.ln2_g);
        ln.ln2_b = tape.input(lay.ln2_b);
        ln.w1 = tape.input(lay.w1);
        ln.b1 = tape.input(lay.b1);
        ln.w2 = tape.input(lay.w2);
        ln.b2 = tape.input(lay.b2);
        nodes.layers.push_back(ln);
    }
    nodes.ln_f_g = tape.input(params.ln_f_g);
    nodes.ln_f_b = tape.input(params.ln_f_b);
    return nodes;
}

inline nn::SeqBatch seq_batch_from_ids(const std::vector<ItemId>& flat_ids, int size, int n) {
    require(static_cast<int>(flat_ids.size()) == size * n, "seq_batch_from_ids: size mismatch");
    nn::SeqBatch sb;
    sb.size = size;
    sb.n = n;
    sb.first.resize(static_cast<size_t>(size));
    sb.last.resize(static_cast<size_t>(size));
    for (int i = 0; i < size; ++i) {
        int first = -1, last = -1;
        for (int t = 0; t < n; ++t) {
            bool real = flat_ids[static_cast<size_t>(i * n + t)] != kPaddingId;
            if (real) {
                if (first < 0) first = t;
                require(last < 0 || last == t - 1,
                        "seq_batch_from_ids: real tokens must be contiguous");
                last = t;
            }
        }
        require(first >= 0, "seq_batch_from_ids: sequence ", i, " has no real tokens");
        sb.first[static_cast<size_t>(i)] = first;
        sb.last[static_cast<size_t>(i)] = last;
    }
    return sb;
}

template <class T>
EncodeResult encode(nn::Tape<T>& tape, const ParamNodes& nodes, const BackboneConfig& cfg,
                    const std::vector<ItemId>& flat_ids, const nn::SeqBatch& sb,
                    bool training, DetRng* dropout_rng) {
    require(sb.size * sb.n == static_cast<int>(flat_ids.size()), "encode: shape mismatch");
    std::vector<int> id_idx(flat_ids.size());
    std::vector<int> pos_idx(flat_ids.size());
    for (size_t r = 0; r < flat_ids.size(); ++r) {
        ItemId v = flat_ids[r];
        require(v >= 0 && v <= cfg.num_items, "encode: item id out of range: ", v);
        id_idx[r] = v;
        pos_idx[r] = static_cast<int>(r) % sb.n;
    }
    T drop = static_cast<T>(cfg.dropout);
    T eps = static_cast<T>(cfg.ln_eps);

    int h = tape.add(tape.rows(nodes.item_emb, std::move(id_idx)),
                     tape.rows(nodes.pos_emb, std::move(pos_idx)));
    h = tape.dropout(h, drop, dropout_rng, training);
    for (const auto& lay : nodes.layers) {
        int a_in = tape.layernorm(h, lay.ln1_g, lay.ln1_b, eps);
        int att = tape.causal_attention(tape.matmul(a_in, lay.wq), tape.matmul(a_in, lay.wk),
                                        tape.matmul(a_in, lay.wv), sb, cfg.heads);
        int att_o = tape.matmul(att, lay.wo);
        h = tape.add(h, tape.dropout(att_o, drop, dropout_rng, training));
        int f_in = tape.layernorm(h, lay.ln2_g, lay.ln2_b, eps);
        int f1 = tape.relu(tape.add_row_broadcast(tape.matmul(f_in, lay.w1), lay.b1));
        int f2 = tape.add_row_broadcast(tape.matmul(f1, lay.w2), lay.b2);
        h = tape.add(h, tape.dropout(f2, drop, dropout_rng, training));
    }
    h = tape.layernorm(h, nodes.ln_f_g, nodes.ln_f_b, eps);

    std::vector<int> last_idx(static_cast<size_t>(sb.size));
    for (int i = 0; i < sb.size; ++i)
        last_idx[static_cast<size_t>(i)] = sb.row(i, sb.last[static_cast<size_t>(i)]);
    EncodeResult res;
    res.states = h;
    res.last_h = tape.rows(h, std::move(last_idx));
    return res;
}

template <class T>
int score_items(nn::Tape<T>& tape, const ParamNodes& nodes, int h, int num_items) {
    int item_rows = tape.slice_rows(nodes.item_emb, 1, num_items);
    return tape.matmul_nt(h, item_rows);
}

}  // namespace seqcl::model
