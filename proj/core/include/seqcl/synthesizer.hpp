#pragma once

#include <string>
#include <vector>

#include "seqcl/tape.hpp"

namespace seqcl::cl {

struct SynthesizerConfig {
    int d = 64;        // backbone dimension
    int sem_dim = 64;  // semantic embedding dimension
    double leaky_slope = 0.01;
};

// Learnable sample synthesizer: a shared adapter W maps semantic vectors
// into the model space, and a single-layer scorer a turns concatenated
// (anchor, candidate) projections into attention logits.
template <class T>
struct SynthesizerParams {
    nn::Mat<T> w;  // d x sem_dim
    nn::Mat<T> a;  // 2d x 1

    std::vector<std::pair<std::string, nn::Mat<T>*>> named() {
        return {{"synth.w", &w}, {"synth.a", &a}};
    }
    std::vector<std::pair<std::string, const nn::Mat<T>*>> named() const {
        return {{"synth.w", &w}, {"synth.a", &a}};
    }

    template <class U>
    SynthesizerParams<U> cast() const {
        SynthesizerParams<U> out;
        out.w = w.template cast<U>();
        out.a = a.template cast<U>();
        return out;
    }
};

template <class T>
SynthesizerParams<T> init_synthesizer(const SynthesizerConfig& cfg, uint64_t seed) {
    SynthesizerParams<T> p;
    DetRng rng_w(derive_seed(seed, {hash_string("init"), hash_string("synth.w")}));
    DetRng rng_a(derive_seed(seed, {hash_string("init"), hash_string("synth.a")}));
    p.w.resize(cfg.d, cfg.sem_dim);
    for (Eigen::Index i = 0; i < p.w.rows(); ++i)
        for (Eigen::Index j = 0; j < p.w.cols(); ++j)
            p.w(i, j) = static_cast<T>(rng_w.truncated_normal(0.02));
    p.a.resize(2 * cfg.d, 1);
    for (Eigen::Index i = 0; i < p.a.rows(); ++i)
        p.a(i, 0) = static_cast<T>(rng_a.truncated_normal(0.02));
    return p;
}

struct SynthNodes {
    int w = -1;
    int a = -1;
};

template <class T>
SynthNodes make_synth_nodes(nn::Tape<T>& tape, const SynthesizerParams<T>& params) {
    return {tape.input(params.w), tape.input(params.a)};
}

// Attention probabilities over each anchor's candidate pool:
//   score(u, u') = LeakyReLU(a^T [W s_u || W s_u']),  p = softmax over the pool.
// sem_anchor is N x sem_dim, sem_cand is C x sem_dim (both constants);
// pools[i] holds row indices into sem_cand. Returns an N x kmax node of
// probabilities, differentiable w.r.t. W and a.
template <class T>
int synth_scores_node(nn::Tape<T>& tape, const SynthNodes& synth, int sem_anchor, int sem_cand,
                      std::vector<std::vector<int>> pools, T slope) {
    int d = static_cast<int>(tape.value(synth.w).rows());
    int wa = tape.matmul_nt(sem_anchor, synth.w);  // N x d
    int wc = tape.matmul_nt(sem_cand, synth.w);    // C x d
    int a_top = tape.slice_rows(synth.a, 0, d);    // d x 1
    int a_bot = tape.slice_rows(synth.a, d, d);
    int qa = tape.matmul(wa, a_top);  // N x 1
    int qc = tape.matmul(wc, a_bot);  // C x 1
    return tape.pool_softmax(qa, qc, std::move(pools), slope);
}

// Composite positive sample: h_u+ = sum_{u' in pool} p(u,u') h_{u'}.
template <class T>
int synthesize_positive_node(nn::Tape<T>& tape, int probs, int h_cand,
                             std::vector<std::vector<int>> pools) {
    return tape.pool_mix(probs, h_cand, std::move(pools));
}

// Inter-user InfoNCE: anchors are backbone outputs, the positive is the
// anchor's own synthesized sample, the other N-1 synthesized samples are
// negatives. Raw inner products (temperature 1 reproduces the loss as
// written; other values are for ablation only).
template <class T>
int inter_user_loss_node(nn::Tape<T>& tape, int h_anchors, int h_positives, T temperature) {
    require(tape.value(h_anchors).rows() >= 2, "inter_user_loss: need N >= 2 (no negatives)");
    int sim = tape.matmul_nt(h_anchors, h_positives);
    if (temperature != T(1)) sim = tape.scale(sim, T(1) / temperature);
    return tape.cross_entropy_diag(sim);
}

// Intra-user InfoNCE over the 2N pooled augmented views; each view's
// counterpart is its positive and the other 2(N-1) views are negatives.
template <class T>
int intra_user_loss_node(nn::Tape<T>& tape, int h_first, int h_second, T temperature) {
    require(tape.value(h_first).rows() >= 2, "intra_user_loss: need N >= 2 (no negatives)");
    int pooled = tape.vstack(h_first, h_second);
    int sim = tape.matmul_nt(pooled, pooled);
    if (temperature != T(1)) sim = tape.scale(sim, T(1) / temperature);
    return tape.nt_xent_paired(sim);
}

// Forward-only conveniences sharing the tape implementation.

template <class T>
std::vector<T> synth_scores(const SynthesizerParams<T>& params,
                            const std::vector<T>& anchor_sem,
                            const std::vector<std::vector<T>>& candidate_sems, T slope) {
    require(!candidate_sems.empty(), "synth_scores: empty candidate pool");
    nn::Tape<T> tape;
    SynthNodes synth = make_synth_nodes(tape, params);
    nn::Mat<T> sa(1, static_cast<Eigen::Index>(anchor_sem.size()));
    for (size_t j = 0; j < anchor_sem.size(); ++j)
        sa(0, static_cast<Eigen::Index>(j)) = anchor_sem[j];
    nn::Mat<T> sc(static_cast<Eigen::Index>(candidate_sems.size()),
                  static_cast<Eigen::Index>(anchor_sem.size()));
    std::vector<int> pool;
    for (size_t i = 0; i < candidate_sems.size(); ++i) {
        require(candidate_sems[i].size() == anchor_sem.size(),
                "synth_scores: semantic dimension mismatch");
        for (size_t j = 0; j < candidate_sems[i].size(); ++j)
            sc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = candidate_sems[i][j];
        pool.push_back(static_cast<int>(i));
    }
    int p = synth_scores_node(tape, synth, tape.input(sa), tape.input(sc), {pool}, slope);
    const auto& pv = tape.value(p);
    std::vector<T> out(candidate_sems.size());
    for (size_t j = 0; j < out.size(); ++j) out[j] = pv(0, static_cast<Eigen::Index>(j));
    return out;
}

template <class T>
T inter_user_loss(const nn::Mat<T>& anchors, const nn::Mat<T>& positives, T temperature = T(1)) {
    nn::Tape<T> tape;
    int loss = inter_user_loss_node(tape, tape.input(anchors), tape.input(positives), temperature);
    return tape.scalar(loss);
}

template <class T>
T intra_user_loss(const nn::Mat<T>& first, const nn::Mat<T>& second, T temperature = T(1)) {
    nn::Tape<T> tape;
    int loss = intra_user_loss_node(tape, tape.input(first), tape.input(second), temperature);
    return tape.scalar(loss);
}

}  // namespace seqcl::cl
