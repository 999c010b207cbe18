#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "seqcl/common.hpp"
#include "seqcl/rng.hpp"

namespace seqcl::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

// Flattened (batch*n) x d layout metadata. Real tokens of sequence i occupy
// the contiguous positions [first[i], last[i]]; everything else is padding.
// The pipeline left-pads (last[i] == n-1 always); the encoder itself only
// assumes contiguity.
struct SeqBatch {
    int size = 0;
    int n = 0;
    std::vector<int> first;  // inclusive
    std::vector<int> last;   // inclusive, >= first

    int row(int seq, int pos) const { return seq * n + pos; }
};

// Reverse-mode autodiff over dense matrices. Nodes are created eagerly;
// backward() walks the recording in reverse. Templated so the float
// training path and the double gradient-check path share one implementation.
template <class T>
class Tape {
public:
    using M = Mat<T>;

    int input(M v) { return push(std::move(v), {}); }

    const M& value(int id) const { return node(id).value; }

    M grad_of(int id) const {
        const Node& nd = node(id);
        if (nd.grad.size() == 0) return M::Zero(nd.value.rows(), nd.value.cols());
        return nd.grad;
    }

    T scalar(int id) const {
        const M& v = value(id);
        require(v.rows() == 1 && v.cols() == 1, "tape: node is not a scalar");
        return v(0, 0);
    }

    void backward(int loss_id) {
        Node& loss = node_mut(loss_id);
        require(loss.value.rows() == 1 && loss.value.cols() == 1,
                "backward: loss must be a scalar node");
        loss.grad = M::Ones(1, 1);
        for (int id = loss_id; id >= 0; --id) {
            Node& nd = node_mut(id);
            if (nd.back && nd.grad.size() != 0) nd.back(*this, nd.value, nd.grad);
        }
    }

    void accum(int id, const M& g) {
        Node& nd = node_mut(id);
        require(g.rows() == nd.value.rows() && g.cols() == nd.value.cols(),
                "tape: gradient shape mismatch");
        if (nd.grad.size() == 0) {
            nd.grad = g;
        } else {
            nd.grad += g;
        }
    }

    // ---- ops ----

    int matmul(int a, int b) {
        const M& av = value(a);
        const M& bv = value(b);
        require(av.cols() == bv.rows(), "matmul: shape mismatch");
        return push(av * bv, [a, b](Tape& t, const M&, const M& g) {
            t.accum(a, M(g * t.value(b).transpose()));
            t.accum(b, M(t.value(a).transpose() * g));
        });
    }

    int matmul_nt(int a, int b) {  // A * B^T
        const M& av = value(a);
        const M& bv = value(b);
        require(av.cols() == bv.cols(), "matmul_nt: shape mismatch");
        return push(av * bv.transpose(), [a, b](Tape& t, const M&, const M& g) {
            t.accum(a, M(g * t.value(b)));
            t.accum(b, M(g.transpose() * t.value(a)));
        });
    }

    int add(int a, int b) {
        require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
                "add: shape mismatch");
        return push(value(a) + value(b), [a, b](Tape& t, const M&, const M& g) {
            t.accum(a, g);
            t.accum(b, g);
        });
    }

    int add_scaled(int a, int b, T s) {  // A + s*B
        require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
                "add_scaled: shape mismatch");
        return push(value(a) + s * value(b), [a, b, s](Tape& t, const M&, const M& g) {
            t.accum(a, g);
            t.accum(b, M(s * g));
        });
    }

    int scale(int a, T s) {
        return push(s * value(a),
                    [a, s](Tape& t, const M&, const M& g) { t.accum(a, M(s * g)); });
    }

    int add_row_broadcast(int x, int bias) {  // X + ones * b, bias is 1 x cols
        const M& xv = value(x);
        const M& bv = value(bias);
        require(bv.rows() == 1 && bv.cols() == xv.cols(), "add_row_broadcast: bad bias shape");
        M out = xv;
        out.rowwise() += bv.row(0);
        return push(std::move(out), [x, bias](Tape& t, const M&, const M& g) {
            t.accum(x, g);
            t.accum(bias, M(g.colwise().sum()));
        });
    }

    int relu(int x) {
        M out = value(x).cwiseMax(T(0));
        return push(std::move(out), [x](Tape& t, const M&, const M& g) {
            M dx = ((t.value(x).array() > T(0)).template cast<T>() * g.array()).matrix();
            t.accum(x, dx);
        });
    }

    int leaky_relu(int x, T slope) {
        const M& xv = value(x);
        M out = xv.unaryExpr([slope](T v) { return v > T(0) ? v : slope * v; });
        return push(std::move(out), [x, slope](Tape& t, const M&, const M& g) {
            const M& xv2 = t.value(x);
            M dx = g;
            for (Eigen::Index i = 0; i < dx.rows(); ++i)
                for (Eigen::Index j = 0; j < dx.cols(); ++j)
                    if (xv2(i, j) <= T(0)) dx(i, j) *= slope;
            t.accum(x, dx);
        });
    }

    int slice_rows(int x, int start, int count) {
        const M& xv = value(x);
        require(start >= 0 && start + count <= xv.rows(), "slice_rows: out of range");
        return push(M(xv.middleRows(start, count)),
                    [x, start, count](Tape& t, const M&, const M& g) {
                        M dx = M::Zero(t.value(x).rows(), t.value(x).cols());
                        dx.middleRows(start, count) = g;
                        t.accum(x, dx);
                    });
    }

    int vstack(int a, int b) {
        const M& av = value(a);
        const M& bv = value(b);
        require(av.cols() == bv.cols(), "vstack: column mismatch");
        M out(av.rows() + bv.rows(), av.cols());
        out.topRows(av.rows()) = av;
        out.bottomRows(bv.rows()) = bv;
        return push(std::move(out), [a, b](Tape& t, const M&, const M& g) {
            t.accum(a, M(g.topRows(t.value(a).rows())));
            t.accum(b, M(g.bottomRows(t.value(b).rows())));
        });
    }

    int stop_grad(int x) { return push(value(x), {}); }

    int rows(int x, std::vector<int> idx) {
        const M& xv = value(x);
        M out(static_cast<Eigen::Index>(idx.size()), xv.cols());
        for (size_t r = 0; r < idx.size(); ++r) {
            require(idx[r] >= 0 && idx[r] < xv.rows(), "rows: index out of range");
            out.row(static_cast<Eigen::Index>(r)) = xv.row(idx[r]);
        }
        return push(std::move(out), [x, idx = std::move(idx)](Tape& t, const M&, const M& g) {
            M dx = M::Zero(t.value(x).rows(), t.value(x).cols());
            for (size_t r = 0; r < idx.size(); ++r)
                dx.row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
            t.accum(x, dx);
        });
    }

    // Inverted dropout; identity when not training or p == 0. Mask drawn
    // row-major from the given stream so replays are exact.
    int dropout(int x, T p, DetRng* rng, bool training) {
        if (!training || p <= T(0)) {
            return push(value(x), [x](Tape& t, const M&, const M& g) { t.accum(x, g); });
        }
        require(rng != nullptr, "dropout: rng required in training mode");
        require(p < T(1), "dropout: p must be < 1");
        const M& xv = value(x);
        M mask(xv.rows(), xv.cols());
        T keep_scale = T(1) / (T(1) - p);
        for (Eigen::Index i = 0; i < xv.rows(); ++i)
            for (Eigen::Index j = 0; j < xv.cols(); ++j)
                mask(i, j) = rng->uniform() < static_cast<double>(p) ? T(0) : keep_scale;
        M out = xv.cwiseProduct(mask);
        return push(std::move(out), [x, mask = std::move(mask)](Tape& t, const M&, const M& g) {
            t.accum(x, M(g.cwiseProduct(mask)));
        });
    }

    // Row-wise layer normalization with learnable gain/bias (1 x cols each).
    int layernorm(int x, int gain, int bias, T eps) {
        const M& xv = value(x);
        const M& gv = value(gain);
        const M& bv = value(bias);
        require(gv.rows() == 1 && gv.cols() == xv.cols(), "layernorm: bad gain shape");
        require(bv.rows() == 1 && bv.cols() == xv.cols(), "layernorm: bad bias shape");
        Eigen::Index nrows = xv.rows(), ncols = xv.cols();
        M xhat(nrows, ncols);
        M inv_sigma(nrows, 1);
        for (Eigen::Index i = 0; i < nrows; ++i) {
            T mu = xv.row(i).mean();
            T var = (xv.row(i).array() - mu).square().mean();
            T inv = T(1) / std::sqrt(var + eps);
            inv_sigma(i, 0) = inv;
            xhat.row(i) = ((xv.row(i).array() - mu) * inv).matrix();
        }
        M out(nrows, ncols);
        for (Eigen::Index i = 0; i < nrows; ++i)
            out.row(i) = xhat.row(i).cwiseProduct(gv.row(0)) + bv.row(0);
        return push(std::move(out),
                    [x, gain, bias, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](
                        Tape& t, const M&, const M& g) {
                        const M& gv2 = t.value(gain);
                        Eigen::Index r2 = g.rows(), c2 = g.cols();
                        M dx(r2, c2);
                        M dgain = M::Zero(1, c2);
                        M dbias = M::Zero(1, c2);
                        for (Eigen::Index i = 0; i < r2; ++i) {
                            auto r = (g.row(i).cwiseProduct(gv2.row(0))).eval();
                            T mean_r = r.mean();
                            T mean_rx = r.cwiseProduct(xhat.row(i)).mean();
                            dx.row(i) = ((r.array() - mean_r -
                                          xhat.row(i).array() * mean_rx) *
                                         inv_sigma(i, 0))
                                            .matrix();
                            dgain += g.row(i).cwiseProduct(xhat.row(i));
                            dbias += g.row(i);
                        }
                        t.accum(x, dx);
                        t.accum(gain, dgain);
                        t.accum(bias, dbias);
                    });
    }

    // Multi-head causal self-attention over a left-padded flattened batch.
    // Position t attends to real positions s <= t; padded rows output zero.
    // Scores are scaled by 1/sqrt(head_dim).
    int causal_attention(int q, int k, int v, const SeqBatch& sb, int heads) {
        const M& qv = value(q);
        require(qv.rows() == static_cast<Eigen::Index>(sb.size) * sb.n,
                "causal_attention: row count mismatch");
        Eigen::Index d = qv.cols();
        require(heads >= 1 && d % heads == 0, "causal_attention: d must be divisible by heads");
        Eigen::Index dh = d / heads;
        T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));

        const M& kv = value(k);
        const M& vv = value(v);
        M out = M::Zero(qv.rows(), d);
        // probs[seq*heads + h](t, s) over absolute positions; zero elsewhere
        std::vector<M> probs(static_cast<size_t>(sb.size) * static_cast<size_t>(heads));
        for (int i = 0; i < sb.size; ++i) {
            int f = sb.first[static_cast<size_t>(i)];
            int lst = sb.last[static_cast<size_t>(i)];
            for (int h = 0; h < heads; ++h) {
                M& pm = probs[static_cast<size_t>(i) * static_cast<size_t>(heads) +
                              static_cast<size_t>(h)];
                pm = M::Zero(sb.n, sb.n);
                Eigen::Index c0 = static_cast<Eigen::Index>(h) * dh;
                for (int tpos = f; tpos <= lst; ++tpos) {
                    int row_t = sb.row(i, tpos);
                    int span = tpos - f + 1;
                    Eigen::Matrix<T, 1, Eigen::Dynamic> scores(span);
                    for (int s = f; s <= tpos; ++s) {
                        scores(s - f) = qv.row(row_t).segment(c0, dh).dot(
                                            kv.row(sb.row(i, s)).segment(c0, dh)) *
                                        inv_sqrt;
                    }
                    T mx = scores.maxCoeff();
                    Eigen::Matrix<T, 1, Eigen::Dynamic> e = (scores.array() - mx).exp();
                    e /= e.sum();
                    for (int s = f; s <= tpos; ++s) {
                        pm(tpos, s) = e(s - f);
                        out.row(row_t).segment(c0, dh) +=
                            e(s - f) * vv.row(sb.row(i, s)).segment(c0, dh);
                    }
                }
            }
        }
        return push(std::move(out), [q, k, v, sb, heads, inv_sqrt, probs = std::move(probs)](
                                        Tape& t, const M&, const M& g) {
            const M& qv2 = t.value(q);
            const M& kv2 = t.value(k);
            const M& vv2 = t.value(v);
            Eigen::Index d2 = qv2.cols();
            Eigen::Index dh2 = d2 / heads;
            M dq = M::Zero(qv2.rows(), d2);
            M dk = M::Zero(qv2.rows(), d2);
            M dv = M::Zero(qv2.rows(), d2);
            for (int i = 0; i < sb.size; ++i) {
                int f = sb.first[static_cast<size_t>(i)];
                int lst = sb.last[static_cast<size_t>(i)];
                for (int h = 0; h < heads; ++h) {
                    const M& pm = probs[static_cast<size_t>(i) * static_cast<size_t>(heads) +
                                        static_cast<size_t>(h)];
                    Eigen::Index c0 = static_cast<Eigen::Index>(h) * dh2;
                    for (int tpos = f; tpos <= lst; ++tpos) {
                        int row_t = sb.row(i, tpos);
                        auto gout = g.row(row_t).segment(c0, dh2);
                        Eigen::Matrix<T, 1, Eigen::Dynamic> dp(tpos - f + 1);
                        T dot_sum = T(0);
                        for (int s = f; s <= tpos; ++s) {
                            dp(s - f) = gout.dot(vv2.row(sb.row(i, s)).segment(c0, dh2));
                            dot_sum += pm(tpos, s) * dp(s - f);
                        }
                        for (int s = f; s <= tpos; ++s) {
                            T dscore = pm(tpos, s) * (dp(s - f) - dot_sum) * inv_sqrt;
                            dq.row(row_t).segment(c0, dh2) +=
                                dscore * kv2.row(sb.row(i, s)).segment(c0, dh2);
                            dk.row(sb.row(i, s)).segment(c0, dh2) +=
                                dscore * qv2.row(row_t).segment(c0, dh2);
                            dv.row(sb.row(i, s)).segment(c0, dh2) += pm(tpos, s) * gout;
                        }
                    }
                }
            }
            t.accum(q, dq);
            t.accum(k, dk);
            t.accum(v, dv);
        });
    }

    // Mean cross-entropy over rows whose label is >= 0 (labels are column
    // indices). Log-sum-exp is max-shifted.
    int softmax_xent(int logits, std::vector<int> labels) {
        const M& lv = value(logits);
        require(static_cast<Eigen::Index>(labels.size()) == lv.rows(),
                "softmax_xent: one label per row required");
        int counted = 0;
        T loss = T(0);
        for (Eigen::Index i = 0; i < lv.rows(); ++i) {
            int lbl = labels[static_cast<size_t>(i)];
            if (lbl < 0) continue;
            require(lbl < lv.cols(), "softmax_xent: label out of range");
            ++counted;
            T mx = lv.row(i).maxCoeff();
            T lse = mx + std::log((lv.row(i).array() - mx).exp().sum());
            loss += lse - lv(i, lbl);
        }
        require(counted > 0, "softmax_xent: no labeled rows");
        M out(1, 1);
        out(0, 0) = loss / static_cast<T>(counted);
        return push(std::move(out), [logits, labels = std::move(labels), counted](
                                        Tape& t, const M&, const M& g) {
            const M& lv2 = t.value(logits);
            M dl = M::Zero(lv2.rows(), lv2.cols());
            T sc = g(0, 0) / static_cast<T>(counted);
            for (Eigen::Index i = 0; i < lv2.rows(); ++i) {
                int lbl = labels[static_cast<size_t>(i)];
                if (lbl < 0) continue;
                T mx = lv2.row(i).maxCoeff();
                auto e = (lv2.row(i).array() - mx).exp().eval();
                dl.row(i) = (e / e.sum()).matrix() * sc;
                dl(i, lbl) -= sc;
            }
            t.accum(logits, dl);
        });
    }

    // InfoNCE with positives on the diagonal of an N x N similarity matrix:
    // mean_i [ logsumexp_j(sim_ij) - sim_ii ].
    int cross_entropy_diag(int sim) {
        const M& sv = value(sim);
        require(sv.rows() == sv.cols() && sv.rows() >= 2,
                "cross_entropy_diag: need a square matrix with N >= 2");
        Eigen::Index n = sv.rows();
        T loss = T(0);
        for (Eigen::Index i = 0; i < n; ++i) {
            T mx = sv.row(i).maxCoeff();
            T lse = mx + std::log((sv.row(i).array() - mx).exp().sum());
            loss += lse - sv(i, i);
        }
        M out(1, 1);
        out(0, 0) = loss / static_cast<T>(n);
        return push(std::move(out), [sim, n](Tape& t, const M&, const M& g) {
            const M& sv2 = t.value(sim);
            M ds(n, n);
            T sc = g(0, 0) / static_cast<T>(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                T mx = sv2.row(i).maxCoeff();
                auto e = (sv2.row(i).array() - mx).exp().eval();
                ds.row(i) = (e / e.sum()).matrix() * sc;
                ds(i, i) -= sc;
            }
            t.accum(sim, ds);
        });
    }

    // Paired InfoNCE over 2N pooled views: the positive of view i is view
    // (i+N) mod 2N, the anchor itself is excluded from the denominator, and
    // the loss is the mean over all 2N anchors.
    int nt_xent_paired(int sim) {
        const M& sv = value(sim);
        require(sv.rows() == sv.cols(), "nt_xent_paired: need a square matrix");
        Eigen::Index two_n = sv.rows();
        require(two_n >= 4 && two_n % 2 == 0, "nt_xent_paired: need 2N rows with N >= 2");
        Eigen::Index half = two_n / 2;
        T loss = T(0);
        for (Eigen::Index i = 0; i < two_n; ++i) {
            Eigen::Index partner = (i + half) % two_n;
            T mx = -std::numeric_limits<T>::infinity();
            for (Eigen::Index j = 0; j < two_n; ++j)
                if (j != i) mx = std::max(mx, sv(i, j));
            T sum = T(0);
            for (Eigen::Index j = 0; j < two_n; ++j)
                if (j != i) sum += std::exp(sv(i, j) - mx);
            loss += mx + std::log(sum) - sv(i, partner);
        }
        M out(1, 1);
        out(0, 0) = loss / static_cast<T>(two_n);
        return push(std::move(out), [sim, two_n, half](Tape& t, const M&, const M& g) {
            const M& sv2 = t.value(sim);
            M ds = M::Zero(two_n, two_n);
            T sc = g(0, 0) / static_cast<T>(two_n);
            for (Eigen::Index i = 0; i < two_n; ++i) {
                Eigen::Index partner = (i + half) % two_n;
                T mx = -std::numeric_limits<T>::infinity();
                for (Eigen::Index j = 0; j < two_n; ++j)
                    if (j != i) mx = std::max(mx, sv2(i, j));
                T sum = T(0);
                for (Eigen::Index j = 0; j < two_n; ++j)
                    if (j != i) sum += std::exp(sv2(i, j) - mx);
                for (Eigen::Index j = 0; j < two_n; ++j) {
                    if (j == i) continue;
                    ds(i, j) += std::exp(sv2(i, j) - mx) / sum * sc;
                }
                ds(i, partner) -= sc;
            }
            t.accum(sim, ds);
        });
    }

    // Attention scores over candidate pools: row i holds softmax_j over
    // LeakyReLU(qa_i + qc_{pool[i][j]}), zero-padded past the pool size.
    // qa is N x 1 (anchor-side score), qc is C x 1 (candidate-side score).
    int pool_softmax(int qa, int qc, std::vector<std::vector<int>> pools, T slope) {
        const M& qav = value(qa);
        const M& qcv = value(qc);
        require(qav.cols() == 1 && qcv.cols() == 1, "pool_softmax: qa/qc must be column vectors");
        require(static_cast<Eigen::Index>(pools.size()) == qav.rows(),
                "pool_softmax: one pool per anchor required");
        size_t kmax = 0;
        for (const auto& p : pools) {
            require(!p.empty(), "pool_softmax: empty candidate pool");
            kmax = std::max(kmax, p.size());
        }
        Eigen::Index n = qav.rows();
        M pre = M::Zero(n, static_cast<Eigen::Index>(kmax));  // pre-activation scores
        M out = M::Zero(n, static_cast<Eigen::Index>(kmax));
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& pool = pools[static_cast<size_t>(i)];
            T mx = -std::numeric_limits<T>::infinity();
            for (size_t j = 0; j < pool.size(); ++j) {
                require(pool[j] >= 0 && pool[j] < qcv.rows(), "pool_softmax: bad pool index");
                T s = qav(i, 0) + qcv(pool[j], 0);
                pre(i, static_cast<Eigen::Index>(j)) = s;
                out(i, static_cast<Eigen::Index>(j)) = s > T(0) ? s : slope * s;
                mx = std::max(mx, out(i, static_cast<Eigen::Index>(j)));
            }
            T sum = T(0);
            for (size_t j = 0; j < pool.size(); ++j) {
                T e = std::exp(out(i, static_cast<Eigen::Index>(j)) - mx);
                out(i, static_cast<Eigen::Index>(j)) = e;
                sum += e;
            }
            for (size_t j = 0; j < pool.size(); ++j)
                out(i, static_cast<Eigen::Index>(j)) /= sum;
        }
        return push(std::move(out), [qa, qc, pools = std::move(pools), slope,
                                     pre = std::move(pre)](Tape& t, const M& p, const M& g) {
            const M& qcv2 = t.value(qc);
            Eigen::Index n2 = p.rows();
            M dqa = M::Zero(n2, 1);
            M dqc = M::Zero(qcv2.rows(), 1);
            for (Eigen::Index i = 0; i < n2; ++i) {
                const auto& pool = pools[static_cast<size_t>(i)];
                T dot_sum = T(0);
                for (size_t j = 0; j < pool.size(); ++j)
                    dot_sum += p(i, static_cast<Eigen::Index>(j)) *
                               g(i, static_cast<Eigen::Index>(j));
                for (size_t j = 0; j < pool.size(); ++j) {
                    Eigen::Index jj = static_cast<Eigen::Index>(j);
                    T dw = p(i, jj) * (g(i, jj) - dot_sum);
                    T ds = pre(i, jj) > T(0) ? dw : slope * dw;
                    dqa(i, 0) += ds;
                    dqc(pool[j], 0) += ds;
                }
            }
            t.accum(qa, dqa);
            t.accum(qc, dqc);
        });
    }

    // Convex mixture of candidate rows: out_i = sum_j p(i,j) * H_{pool[i][j]}.
    // Gradients flow into both the mixture weights and the candidate rows.
    int pool_mix(int p, int h_cand, std::vector<std::vector<int>> pools) {
        const M& pv = value(p);
        const M& hv = value(h_cand);
        require(static_cast<Eigen::Index>(pools.size()) == pv.rows(),
                "pool_mix: one pool per anchor required");
        M out = M::Zero(pv.rows(), hv.cols());
        for (Eigen::Index i = 0; i < pv.rows(); ++i) {
            const auto& pool = pools[static_cast<size_t>(i)];
            require(static_cast<Eigen::Index>(pool.size()) <= pv.cols(),
                    "pool_mix: pool larger than weight row");
            for (size_t j = 0; j < pool.size(); ++j) {
                require(pool[j] >= 0 && pool[j] < hv.rows(), "pool_mix: bad pool index");
                out.row(i) += pv(i, static_cast<Eigen::Index>(j)) * hv.row(pool[j]);
            }
        }
        return push(std::move(out), [p, h_cand, pools = std::move(pools)](Tape& t, const M&,
                                                                          const M& g) {
            const M& pv2 = t.value(p);
            const M& hv2 = t.value(h_cand);
            M dp = M::Zero(pv2.rows(), pv2.cols());
            M dh = M::Zero(hv2.rows(), hv2.cols());
            for (Eigen::Index i = 0; i < pv2.rows(); ++i) {
                const auto& pool = pools[static_cast<size_t>(i)];
                for (size_t j = 0; j < pool.size(); ++j) {
                    Eigen::Index jj = static_cast<Eigen::Index>(j);
                    dp(i, jj) = g.row(i).dot(hv2.row(pool[j]));
                    dh.row(pool[j]) += pv2(i, jj) * g.row(i);
                }
            }
            t.accum(p, dp);
            t.accum(h_cand, dh);
        });
    }

private:
    struct Node {
        M value;
        M grad;
        std::function<void(Tape&, const M&, const M&)> back;  // (self value, self grad)
    };

    const Node& node(int id) const {
        require(id >= 0 && id < static_cast<int>(nodes_.size()), "tape: bad node id");
        return nodes_[static_cast<size_t>(id)];
    }
    Node& node_mut(int id) {
        require(id >= 0 && id < static_cast<int>(nodes_.size()), "tape: bad node id");
        return nodes_[static_cast<size_t>(id)];
    }

    int push(M v, std::function<void(Tape&, const M&, const M&)> back) {
        nodes_.push_back(Node{std::move(v), M(), std::move(back)});
        return static_cast<int>(nodes_.size()) - 1;
    }

    std::vector<Node> nodes_;
};

}  // namespace seqcl::nn
