#include <doctest.h>

#include <cmath>
#include <set>

#include "helpers.hpp"
#include "seqcl/augment.hpp"
#include "seqcl/backbone.hpp"
#include "seqcl/synthesizer.hpp"

using namespace seqcl;
using namespace seqcl::cl;
using nn::Mat;
using nn::Tape;

namespace {

retrieval::PoolMap pools_for(const std::vector<std::pair<ItemId, std::vector<ItemId>>>& spec) {
    retrieval::PoolMap pools;
    for (const auto& [anchor, neighbors] : spec) {
        retrieval::CandidatePool pool;
        pool.anchor_id = anchor;
        double score = 1.0;
        for (ItemId id : neighbors) pool.neighbors.push_back({id, score -= 0.01});
        pools.emplace(anchor, std::move(pool));
    }
    return pools;
}

Mat<double> random_mat(Eigen::Index r, Eigen::Index c, DetRng& rng) {
    Mat<double> m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.gaussian();
    return m;
}

// long-double brute force of the inter-user loss, no stabilization
long double inter_oracle(const Mat<double>& anchors, const Mat<double>& pos) {
    long double total = 0.0L;
    Eigen::Index n = anchors.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        long double denom = 0.0L;
        for (Eigen::Index j = 0; j < n; ++j) {
            long double dot = 0.0L;
            for (Eigen::Index c = 0; c < anchors.cols(); ++c)
                dot += static_cast<long double>(anchors(i, c)) * pos(j, c);
            denom += expl(dot);
        }
        long double dot_ii = 0.0L;
        for (Eigen::Index c = 0; c < anchors.cols(); ++c)
            dot_ii += static_cast<long double>(anchors(i, c)) * pos(i, c);
        total += logl(denom) - dot_ii;
    }
    return total / n;
}

long double intra_oracle(const Mat<double>& h1, const Mat<double>& h2) {
    Eigen::Index n = h1.rows();
    Mat<double> pooled(2 * n, h1.cols());
    pooled.topRows(n) = h1;
    pooled.bottomRows(n) = h2;
    long double total = 0.0L;
    for (Eigen::Index i = 0; i < 2 * n; ++i) {
        Eigen::Index partner = (i + n) % (2 * n);
        long double denom = 0.0L;
        long double pos = 0.0L;
        for (Eigen::Index j = 0; j < 2 * n; ++j) {
            if (j == i) continue;
            long double dot = 0.0L;
            for (Eigen::Index c = 0; c < pooled.cols(); ++c)
                dot += static_cast<long double>(pooled(i, c)) * pooled(j, c);
            denom += expl(dot);
            if (j == partner) pos = dot;
        }
        total += logl(denom) - pos;
    }
    return total / (2 * n);
}

}  // namespace

TEST_SUITE("contrastive") {

TEST_CASE("synth scores: singleton pool gives probability one") {
    SynthesizerConfig cfg{3, 4, 0.01};
    auto params = init_synthesizer<double>(cfg, 1);
    auto p = synth_scores<double>(params, {0.1, 0.2, 0.3, 0.4}, {{0.5, 0.1, 0.0, 0.2}}, 0.01);
    REQUIRE(p.size() == 1);
    CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("synth scores: zero scorer vector gives the uniform distribution") {
    SynthesizerConfig cfg{3, 4, 0.01};
    auto params = init_synthesizer<double>(cfg, 2);
    params.a.setZero();
    std::vector<std::vector<double>> cands{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}};
    auto p = synth_scores<double>(params, {0.3, 0.3, 0.2, 0.1}, cands, 0.01);
    REQUIRE(p.size() == 3);
    for (double x : p) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("synth scores match a hand-computed softmax (d=2, d~=2, slope 0.01)") {
    SynthesizerConfig cfg{2, 2, 0.01};
    auto params = init_synthesizer<double>(cfg, 3);
    params.w << 0.5, -1.0, 0.25, 0.75;      // 2x2
    params.a << 1.0, -2.0, 0.5, 1.5;        // 4x1: top half anchors, bottom candidates
    std::vector<double> anchor{0.2, -0.4};
    std::vector<std::vector<double>> cands{{1.0, 0.3}, {-0.6, 0.8}};

    auto lrelu = [](double v) { return v > 0 ? v : 0.01 * v; };
    // hand arithmetic, scalar by scalar
    double wa0 = 0.5 * 0.2 + (-1.0) * (-0.4);   // (W s_u)[0]
    double wa1 = 0.25 * 0.2 + 0.75 * (-0.4);    // (W s_u)[1]
    double qa = 1.0 * wa0 + (-2.0) * wa1;
    double scores[2];
    const double cand_raw[2][2] = {{1.0, 0.3}, {-0.6, 0.8}};
    for (int j = 0; j < 2; ++j) {
        double wc0 = 0.5 * cand_raw[j][0] - 1.0 * cand_raw[j][1];
        double wc1 = 0.25 * cand_raw[j][0] + 0.75 * cand_raw[j][1];
        scores[j] = lrelu(qa + 0.5 * wc0 + 1.5 * wc1);
    }
    double z = std::exp(scores[0]) + std::exp(scores[1]);
    double expected0 = std::exp(scores[0]) / z;

    auto p = synth_scores<double>(params, anchor, cands, 0.01);
    REQUIRE(p.size() == 2);
    CHECK(p[0] == doctest::Approx(expected0).epsilon(1e-9));
    CHECK(p[1] == doctest::Approx(1.0 - expected0).epsilon(1e-9));
}

TEST_CASE("synth scores sum to one, are non-negative, and are shift-invariant") {
    SynthesizerConfig cfg{4, 6, 0.01};
    auto params = init_synthesizer<double>(cfg, 5);
    DetRng rng(6);
    Mat<double> sem_anchor = random_mat(3, 6, rng);
    Mat<double> sem_cand = random_mat(7, 6, rng);
    std::vector<std::vector<int>> pools{{0, 1, 2}, {3, 4}, {5, 6, 0, 1}};

    Tape<double> tape;
    SynthNodes sn = make_synth_nodes(tape, params);
    int qa_probe, qc_probe;
    {
        int d = 4;
        int wa = tape.matmul_nt(tape.input(sem_anchor), sn.w);
        int wc = tape.matmul_nt(tape.input(sem_cand), sn.w);
        qa_probe = tape.matmul(wa, tape.slice_rows(sn.a, 0, d));
        qc_probe = tape.matmul(wc, tape.slice_rows(sn.a, d, d));
    }
    int p = tape.pool_softmax(qa_probe, qc_probe, pools, 0.01);
    const auto& pv = tape.value(p);
    for (size_t i = 0; i < pools.size(); ++i) {
        double sum = 0.0;
        for (size_t j = 0; j < pools[i].size(); ++j) {
            double x = pv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            CHECK(x >= 0.0);
            sum += x;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }

    // adding a constant to every raw score leaves p unchanged: shift qa.
    // LeakyReLU is not shift-equivariant in general, so shift within the
    // positive regime where it is the identity.
    Tape<double> t2;
    Mat<double> qa_pos = Mat<double>::Constant(3, 1, 2.0);
    Mat<double> qc_pos(7, 1);
    for (int i = 0; i < 7; ++i) qc_pos(i, 0) = 1.0 + 0.2 * i;
    int p_base = t2.pool_softmax(t2.input(qa_pos), t2.input(qc_pos), pools, 0.01);
    int p_shift = t2.pool_softmax(t2.input(Mat<double>(qa_pos.array() + 3.0)),
                                  t2.input(qc_pos), pools, 0.01);
    for (size_t i = 0; i < pools.size(); ++i)
        for (size_t j = 0; j < pools[i].size(); ++j)
            CHECK(t2.value(p_base)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) ==
                  doctest::Approx(t2.value(p_shift)(static_cast<Eigen::Index>(i),
                                                    static_cast<Eigen::Index>(j)))
                      .epsilon(1e-9));
}

TEST_CASE("synthesized positive: convex combinations of candidate rows") {
    Tape<double> tape;
    Mat<double> reps(3, 2);
    reps << 1.0, 0.0, 0.0, 1.0, 2.0, 2.0;
    int h_cand = tape.input(reps);

    // p = [1.0] picks the candidate exactly
    Mat<double> p1(1, 1);
    p1 << 1.0;
    int out1 = tape.pool_mix(tape.input(p1), h_cand, {{2}});
    CHECK(tape.value(out1)(0, 0) == 2.0);
    CHECK(tape.value(out1)(0, 1) == 2.0);

    // uniform over two candidates averages them
    Mat<double> p2(1, 2);
    p2 << 0.5, 0.5;
    int out2 = tape.pool_mix(tape.input(p2), h_cand, {{0, 1}});
    CHECK(tape.value(out2)(0, 0) == doctest::Approx(0.5));
    CHECK(tape.value(out2)(0, 1) == doctest::Approx(0.5));

    // three candidates, hand weights
    Mat<double> p3(1, 3);
    p3 << 0.2, 0.3, 0.5;
    int out3 = tape.pool_mix(tape.input(p3), h_cand, {{0, 1, 2}});
    CHECK(tape.value(out3)(0, 0) == doctest::Approx(0.2 * 1.0 + 0.5 * 2.0).epsilon(1e-12));
    CHECK(tape.value(out3)(0, 1) == doctest::Approx(0.3 * 1.0 + 0.5 * 2.0).epsilon(1e-12));
}

TEST_CASE("inter-user loss: orthonormal N=2 case hits the closed form") {
    Mat<double> anchors(2, 2), positives(2, 2);
    anchors << 1, 0, 0, 1;
    positives << 1, 0, 0, 1;
    double loss = inter_user_loss<double>(anchors, positives);
    CHECK(loss == doctest::Approx(std::log(std::exp(1.0) + 1.0) - 1.0).epsilon(1e-12));
    CHECK(loss == doctest::Approx(0.31326168751822286).epsilon(1e-9));
}

TEST_CASE("inter-user loss: identical representations give ln N") {
    for (int n : {2, 4, 8}) {
        Mat<double> h = Mat<double>::Constant(n, 3, 0.7);
        CHECK(inter_user_loss<double>(h, h) ==
              doctest::Approx(std::log(static_cast<double>(n))).epsilon(1e-9));
    }
}

TEST_CASE("inter-user loss matches the brute-force oracle") {
    DetRng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        Mat<double> anchors = random_mat(4, 3, rng);
        Mat<double> positives = random_mat(4, 3, rng);
        double got = inter_user_loss<double>(anchors, positives);
        long double expected = inter_oracle(anchors, positives);
        long double rel = fabsl(got - expected) / fabsl(expected);
        CHECK(static_cast<double>(rel) < 1e-10);
    }
}

TEST_CASE("inter-user loss requires N >= 2") {
    Mat<double> one = Mat<double>::Ones(1, 3);
    CHECK_THROWS_AS(inter_user_loss<double>(one, one), Error);
}

TEST_CASE("intra-user loss: identical views give ln(2N-1)") {
    for (int n : {2, 3, 5}) {
        Mat<double> h = Mat<double>::Constant(n, 4, -0.3);
        CHECK(intra_user_loss<double>(h, h) ==
              doctest::Approx(std::log(2.0 * n - 1.0)).epsilon(1e-9));
    }
}

TEST_CASE("intra-user loss: orthonormal paired structure closed form") {
    // h'_i = h''_i = e_i: positives align (dot 1), all cross terms 0
    Mat<double> h = Mat<double>::Identity(2, 2);
    double loss = intra_user_loss<double>(h, h);
    // per anchor: -log(e / (e + 2)); 2N-2 = 2 unit negatives... all negatives
    // here have dot 0 except the partner (dot 1): denominator = e + 2.
    CHECK(loss == doctest::Approx(std::log(std::exp(1.0) + 2.0) - 1.0).epsilon(1e-12));
}

TEST_CASE("intra-user loss matches the brute-force oracle") {
    DetRng rng(10);
    for (int trial = 0; trial < 50; ++trial) {
        Mat<double> h1 = random_mat(3, 4, rng);
        Mat<double> h2 = random_mat(3, 4, rng);
        double got = intra_user_loss<double>(h1, h2);
        long double expected = intra_oracle(h1, h2);
        long double rel = fabsl(got - expected) / fabsl(expected);
        CHECK(static_cast<double>(rel) < 1e-10);
    }
}

TEST_CASE("losses are strictly positive and permutation-invariant") {
    DetRng rng(11);
    Mat<double> anchors = random_mat(5, 3, rng);
    Mat<double> positives = random_mat(5, 3, rng);
    double base = inter_user_loss<double>(anchors, positives);
    CHECK(base > 0.0);
    // permute users consistently
    std::vector<int> perm{3, 0, 4, 1, 2};
    Mat<double> pa(5, 3), pp(5, 3);
    for (int i = 0; i < 5; ++i) {
        pa.row(i) = anchors.row(perm[static_cast<size_t>(i)]);
        pp.row(i) = positives.row(perm[static_cast<size_t>(i)]);
    }
    CHECK(inter_user_loss<double>(pa, pp) == doctest::Approx(base).epsilon(1e-9));

    Mat<double> h1 = random_mat(4, 3, rng);
    Mat<double> h2 = random_mat(4, 3, rng);
    double intra_base = intra_user_loss<double>(h1, h2);
    CHECK(intra_base > 0.0);
    Mat<double> q1(4, 3), q2(4, 3);
    std::vector<int> perm2{2, 3, 1, 0};
    for (int i = 0; i < 4; ++i) {
        q1.row(i) = h1.row(perm2[static_cast<size_t>(i)]);
        q2.row(i) = h2.row(perm2[static_cast<size_t>(i)]);
    }
    CHECK(intra_user_loss<double>(q1, q2) == doctest::Approx(intra_base).epsilon(1e-9));
}

TEST_CASE("augment: substitution count follows max(1, round(ratio*len))") {
    auto pools = pools_for({{1, {11, 12}}, {2, {13}}, {3, {14}}, {4, {15}}, {5, {16}},
                            {6, {11}}, {7, {12}}, {8, {13}}, {9, {14}}, {10, {15}}});
    DetRng rng(12);
    AugmentedView v5 = augment({1, 2, 3, 4, 5}, pools, 0.2, rng);
    CHECK(v5.log.size() == 1);  // round(1.0) = 1
    AugmentedView v10 = augment({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, pools, 0.2, rng);
    CHECK(v10.log.size() == 2);  // the 20% rule
    AugmentedView v2 = augment({1, 2}, pools, 0.2, rng);
    CHECK(v2.log.size() == 1);  // max(1, round(0.4)) = 1
}

TEST_CASE("augment: substitutes come from the old item's pool, rest untouched") {
    auto pools = pools_for({{1, {11, 12}}, {2, {13, 14}}, {3, {15}}});
    DetRng rng(13);
    std::vector<ItemId> seq{1, 2, 3, 1, 2};
    for (int trial = 0; trial < 200; ++trial) {
        AugmentedView view = augment(seq, pools, 0.4, rng);
        REQUIRE(view.items.size() == seq.size());
        std::set<int> touched;
        for (const auto& entry : view.log) {
            touched.insert(entry.position);
            CHECK(entry.old_id == seq[static_cast<size_t>(entry.position)]);
            CHECK(view.items[static_cast<size_t>(entry.position)] == entry.new_id);
            CHECK(entry.new_id != kPaddingId);
            bool in_pool = false;
            for (const auto& nb : pools.at(entry.old_id).neighbors)
                if (nb.id == entry.new_id) in_pool = true;
            CHECK(in_pool);
        }
        for (size_t pos = 0; pos < seq.size(); ++pos) {
            if (!touched.count(static_cast<int>(pos))) CHECK(view.items[pos] == seq[pos]);
        }
    }
}

TEST_CASE("augment: items with empty pools are skipped, degenerate copy counted") {
    retrieval::PoolMap pools = pools_for({{2, {13}}});
    // item 1 has no pool at all; only position with item 2 can change
    DetRng rng(14);
    AugmentedView view = augment({1, 1, 2, 1}, pools, 0.5, rng);
    CHECK(view.log.size() == 1);
    CHECK(view.log[0].old_id == 2);

    AugmentedView untouched = augment({1, 1, 1}, pools, 0.2, rng);
    CHECK(untouched.log.empty());
    CHECK(untouched.items == std::vector<ItemId>{1, 1, 1});
}

TEST_CASE("make_pair: reproducible under the same stream, same length") {
    auto pools = pools_for({{1, {11, 12}}, {2, {13, 14}}, {3, {15, 16}}});
    std::vector<ItemId> seq{1, 2, 3, 2, 1, 3};
    DetRng r1 = make_stream(42, "augment", {7, 1});
    DetRng r2 = make_stream(42, "augment", {7, 1});
    AugmentedPair a = make_pair(seq, pools, 0.2, r1);
    AugmentedPair b = make_pair(seq, pools, 0.2, r2);
    CHECK(a.first.items == b.first.items);
    CHECK(a.second.items == b.second.items);
    CHECK(a.first.items.size() == seq.size());
    CHECK(a.second.items.size() == seq.size());
}

TEST_CASE("make_pair: over 1000 trials a length-10 sequence changes in exactly 2 positions") {
    std::vector<std::pair<ItemId, std::vector<ItemId>>> spec;
    for (ItemId v = 1; v <= 10; ++v) spec.push_back({v, {static_cast<ItemId>(v + 100)}});
    auto pools = pools_for(spec);
    std::vector<ItemId> seq{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    DetRng rng(15);
    for (int trial = 0; trial < 1000; ++trial) {
        AugmentedPair pair = make_pair(seq, pools, 0.2, rng);
        for (const auto* view : {&pair.first, &pair.second}) {
            int diff = 0;
            for (size_t i = 0; i < seq.size(); ++i)
                if (view->items[i] != seq[i]) ++diff;
            CHECK(diff == 2);
        }
    }
}

TEST_CASE("synthesizer gradients: W and a match finite differences") {
    // d=4, d~=6, N=3 toy instance; anchors/candidates are fixed vectors so
    // the check isolates the synthesizer path through the loss
    SynthesizerConfig cfg{4, 6, 0.01};
    auto synth = init_synthesizer<double>(cfg, 31);
    DetRng rng(32);
    Mat<double> sem_anchor = random_mat(3, 6, rng);
    Mat<double> sem_cand = random_mat(5, 6, rng);
    Mat<double> h_cand = random_mat(5, 4, rng);
    Mat<double> h_anchor = random_mat(3, 4, rng);
    std::vector<std::vector<int>> pools{{0, 1, 2}, {1, 3, 4}, {0, 2, 4}};

    auto build = [&](Tape<double>& tape) {
        SynthNodes sn = make_synth_nodes(tape, synth);
        int p = synth_scores_node(tape, sn, tape.input(sem_anchor), tape.input(sem_cand),
                                  pools, 0.01);
        int h_plus = synthesize_positive_node(tape, p, tape.input(h_cand), pools);
        int loss = inter_user_loss_node(tape, tape.input(h_anchor), h_plus, 1.0);
        return std::make_pair(sn, loss);
    };

    Tape<double> tape;
    auto [sn, loss] = build(tape);
    tape.backward(loss);
    std::vector<std::pair<std::string, Mat<double>*>> params{{"synth.w", &synth.w},
                                                             {"synth.a", &synth.a}};
    std::vector<Mat<double>> grads{tape.grad_of(sn.w), tape.grad_of(sn.a)};

    auto loss_value = [&]() {
        Tape<double> t;
        auto [sn2, l] = build(t);
        (void)sn2;
        return t.scalar(l);
    };
    auto result = test_helpers::finite_diff_check(params, grads, loss_value, 1e-4);
    INFO("worst: " << result.worst);
    CHECK(result.max_rel_err < 1e-4);
}

TEST_CASE("stop_grad detaches the candidate side of the synthesized positive") {
    DetRng rng(33);
    Mat<double> h_anchor = random_mat(3, 4, rng);
    Mat<double> h_cand = random_mat(5, 4, rng);
    Mat<double> p = Mat<double>::Constant(3, 2, 0.5);
    std::vector<std::vector<int>> pools{{0, 1}, {2, 3}, {1, 4}};

    auto run = [&](bool detach) {
        Tape<double> tape;
        int anchors = tape.input(h_anchor);
        int cand = tape.input(h_cand);
        int cand_used = detach ? tape.stop_grad(cand) : cand;
        int h_plus = synthesize_positive_node(tape, tape.input(p), cand_used, pools);
        int loss = inter_user_loss_node(tape, anchors, h_plus, 1.0);
        tape.backward(loss);
        return std::make_pair(tape.grad_of(anchors).norm(), tape.grad_of(cand).norm());
    };
    auto [anchor_grad, cand_grad] = run(false);
    CHECK(anchor_grad > 0.0);
    CHECK(cand_grad > 0.0);
    auto [anchor_grad_detached, cand_grad_detached] = run(true);
    CHECK(anchor_grad_detached > 0.0);
    CHECK(cand_grad_detached == 0.0);
}

TEST_CASE("cl_temperature divides the similarities") {
    DetRng rng(34);
    Mat<double> anchors = random_mat(4, 3, rng);
    Mat<double> positives = random_mat(4, 3, rng);
    double tau = 0.5;
    double tempered = inter_user_loss<double>(anchors, positives, tau);
    double manual = inter_user_loss<double>(Mat<double>(anchors / tau), positives, 1.0);
    CHECK(tempered == doctest::Approx(manual).epsilon(1e-12));

    Mat<double> h1 = random_mat(3, 4, rng);
    Mat<double> h2 = random_mat(3, 4, rng);
    // scaling both views by 1/sqrt(tau) divides every pairwise dot by tau
    double s = 1.0 / std::sqrt(tau);
    double tempered_intra = intra_user_loss<double>(h1, h2, tau);
    double manual_intra =
        intra_user_loss<double>(Mat<double>(s * h1), Mat<double>(s * h2), 1.0);
    CHECK(tempered_intra == doctest::Approx(manual_intra).epsilon(1e-12));
}

TEST_CASE("uniform pool draw is uniform (chi-square, df=9, p>0.01)") {
    retrieval::CandidatePool pool;
    for (ItemId v = 1; v <= 10; ++v) pool.neighbors.push_back({v, 1.0 - 0.01 * v});
    DetRng rng(16);
    std::vector<int> counts(11, 0);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) ++counts[static_cast<size_t>(uniform_pool_draw(rng, pool))];
    double expected = draws / 10.0;
    double chi_sq = 0.0;
    for (ItemId v = 1; v <= 10; ++v) {
        double diff = counts[static_cast<size_t>(v)] - expected;
        chi_sq += diff * diff / expected;
    }
    CHECK(chi_sq < 21.666);  // critical value at p = 0.01 with 9 dof
}

}  // TEST_SUITE
