#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "skel/error.hpp"
#include "skel/graph.hpp"
#include "skel/optim.hpp"
#include "skel/rng.hpp"

using namespace skel;

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.shape == b.shape);
    double m = 0;
    for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

// forward+backward once, then central differences over one tensor
oracle::FdReport fd_against_graph(Graph& g, int loss, int tensor_id) {
    g.forward();
    g.backward(loss);
    Tensor& p = g.val(tensor_id);
    std::vector<double> analytic = p.grad;
    auto eval = [&]() {
        g.forward();
        return g.val(loss).data[0];
    };
    return oracle::fd_check(p, analytic, eval);
}

}  // namespace

TEST_CASE("conv2d: 1x1 identity kernel passes input through") {
    Rng rng(7);
    Graph g;
    int x = g.add_input({1, 1, 4, 5});
    g.val(x) = oracle::random_tensor(rng, {1, 1, 4, 5});
    Tensor k({1, 1, 1, 1});
    k.data[0] = 1.0;
    int w = g.add_param("w", k);
    int b = g.add_param("b", Tensor({1}));
    int y = g.conv2d(x, w, b, 1, 0);
    g.forward();
    CHECK(max_abs_diff(g.val(y), g.val(x)) == 0.0);
}

TEST_CASE("conv2d: all-ones 3x3 on all-ones 3x3 input counts the overlap") {
    Graph g;
    int x = g.add_input({1, 1, 3, 3});
    g.val(x).fill(1.0);
    int w = g.add_param("w", Tensor({1, 1, 3, 3}, 1.0));
    int y = g.conv2d(x, w, -1, 1, 1);
    g.forward();
    CHECK(g.val(y).at(0, 0, 1, 1) == doctest::Approx(9.0));
    CHECK(g.val(y).at(0, 0, 0, 0) == doctest::Approx(4.0));
    CHECK(g.val(y).at(0, 0, 2, 2) == doctest::Approx(4.0));
}

TEST_CASE("conv2d: matches the nested-loop oracle") {
    for (uint64_t seed : {1u, 2u, 3u}) {
        Rng rng(seed);
        Graph g;
        int x = g.add_input({1, 2, 5, 5});
        g.val(x) = oracle::random_tensor(rng, {1, 2, 5, 5});
        Tensor kw = oracle::random_tensor(rng, {3, 2, 3, 3});
        Tensor kb = oracle::random_tensor(rng, {3});
        int w = g.add_param("w", kw);
        int b = g.add_param("b", kb);
        for (auto [stride, pad] : {std::pair{1, 0}, {1, 1}, {2, 1}}) {
            Graph gg;
            int xx = gg.add_input({1, 2, 5, 5});
            gg.val(xx) = g.val(x);
            int ww = gg.add_param("w", kw);
            int bb = gg.add_param("b", kb);
            int yy = gg.conv2d(xx, ww, bb, stride, pad);
            gg.forward();
            Tensor ref = oracle::conv2d(gg.val(xx), kw, kb.data, stride, pad);
            CHECK(max_abs_diff(gg.val(yy), ref) < 1e-12);
        }
        (void)w;
        (void)b;
    }
}

TEST_CASE("conv2d: channel mismatch names the offending axis") {
    Graph g;
    int x = g.add_input({1, 3, 4, 4});
    int w = g.add_param("w", Tensor({2, 4, 3, 3}));
    int y = g.conv2d(x, w, -1, 1, 1);
    CHECK_THROWS_WITH_AS(g.forward(), doctest::Contains("channel axis"), DimError);
    (void)y;
    CHECK_THROWS_AS(Graph().conv2d(0, 0, -1, 0, 0), ArgError);  // stride 0
}

TEST_CASE("conv2d is linear in its input (bias disabled)") {
    Rng rng(11);
    Tensor X = oracle::random_tensor(rng, {1, 2, 6, 6});
    Tensor Y = oracle::random_tensor(rng, {1, 2, 6, 6});
    Tensor K = oracle::random_tensor(rng, {2, 2, 3, 3});
    double a = 1.7, b = -0.6;
    auto run = [&](const Tensor& in) {
        Graph g;
        int x = g.add_input({1, 2, 6, 6});
        g.val(x) = in;
        int w = g.add_param("w", K);
        int y = g.conv2d(x, w, -1, 1, 1);
        g.forward();
        return g.val(y);
    };
    Tensor mix({1, 2, 6, 6});
    for (size_t i = 0; i < mix.data.size(); ++i) mix.data[i] = a * X.data[i] + b * Y.data[i];
    Tensor lhs = run(mix), rx = run(X), ry = run(Y);
    double m = 0;
    for (size_t i = 0; i < lhs.data.size(); ++i)
        m = std::max(m, std::abs(lhs.data[i] - (a * rx.data[i] + b * ry.data[i])));
    CHECK(m < 1e-10);
}

TEST_CASE("maxpool2: examples and oracle") {
    Graph g;
    int x = g.add_input({1, 1, 2, 2});
    g.val(x).data = {1, 2, 3, 4};
    int y = g.maxpool2(x);
    g.forward();
    CHECK(g.val(y).shape == std::vector<int>{1, 1, 1, 1});
    CHECK(g.val(y).data[0] == 4.0);

    Graph gc;
    int xc = gc.add_input({1, 1, 6, 6});
    gc.val(xc).fill(3.25);
    int yc = gc.maxpool2(xc);
    gc.forward();
    CHECK(gc.val(yc).shape == std::vector<int>{1, 1, 3, 3});
    for (double v : gc.val(yc).data) CHECK(v == 3.25);

    for (uint64_t seed : {4u, 5u}) {
        Rng rng(seed);
        Graph gr;
        int xr = gr.add_input({1, 2, 8, 8});
        gr.val(xr) = oracle::random_tensor(rng, {1, 2, 8, 8});
        int yr = gr.maxpool2(xr);
        gr.forward();
        CHECK(max_abs_diff(gr.val(yr), oracle::maxpool2(gr.val(xr))) == 0.0);
    }

    // odd dims replicate-pad the last row/column
    Graph go;
    int xo = go.add_input({1, 1, 3, 3});
    go.val(xo).data = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    int yo = go.maxpool2(xo);
    go.forward();
    CHECK(go.val(yo).shape == std::vector<int>{1, 1, 2, 2});
    CHECK(go.val(yo).data == std::vector<double>{5, 6, 8, 9});

    CHECK_THROWS_AS(Tensor({1, 1, 0, 4}), DimError);  // empty spatial extents are unrepresentable
}

TEST_CASE("upsample: constants, 1x1 case, oracle, bad factor") {
    Graph g;
    int x = g.add_input({1, 1, 3, 4});
    g.val(x).fill(0.7);
    for (int f : {2, 4}) {
        Graph gg;
        int xx = gg.add_input({1, 1, 3, 4});
        gg.val(xx).fill(0.7);
        int yy = gg.upsample_bilinear(xx, f);
        gg.forward();
        for (double v : gg.val(yy).data) CHECK(v == doctest::Approx(0.7).epsilon(1e-9));
    }
    (void)x;

    Graph g1;
    int x1 = g1.add_input({1, 1, 1, 1});
    g1.val(x1).data[0] = -2.5;
    int y1 = g1.upsample_bilinear(x1, 2);
    g1.forward();
    CHECK(g1.val(y1).shape == std::vector<int>{1, 1, 2, 2});
    for (double v : g1.val(y1).data) CHECK(v == doctest::Approx(-2.5));

    for (uint64_t seed : {6u, 7u}) {
        Rng rng(seed);
        for (auto [h, w, f] : {std::tuple{2, 2, 2}, {3, 5, 2}, {2, 3, 4}}) {
            Graph gr;
            int xr = gr.add_input({1, 2, h, w});
            gr.val(xr) = oracle::random_tensor(rng, {1, 2, h, w});
            int yr = gr.upsample_bilinear(xr, f);
            gr.forward();
            Tensor ref = oracle::upsample_bilinear(gr.val(xr), f, f * h, f * w);
            CHECK(max_abs_diff(gr.val(yr), ref) < 1e-12);
        }
    }

    CHECK_THROWS_AS(Graph().upsample_bilinear(0, 1), ArgError);
}

TEST_CASE("eltwise_sum: identity, cancellation, fan-out gradient") {
    Rng rng(9);
    Graph g;
    Tensor A = oracle::random_tensor(rng, {1, 2, 3, 3});
    int a = g.add_input({1, 2, 3, 3});
    g.val(a) = A;
    int only = g.eltwise_sum({a});
    g.forward();
    CHECK(max_abs_diff(g.val(only), A) == 0.0);

    Graph g2;
    int a2 = g2.add_input({1, 2, 3, 3});
    g2.val(a2) = A;
    Tensor negA = A;
    for (auto& v : negA.data) v = -v;
    int b2 = g2.add_input({1, 2, 3, 3});
    g2.val(b2) = negA;
    int z = g2.eltwise_sum({a2, b2});
    g2.forward();
    for (double v : g2.val(z).data) CHECK(v == 0.0);

    // all-ones downstream grad fans out as all-ones to each input
    Graph g3;
    int a3 = g3.add_param("a", A);
    int b3 = g3.add_param("b", negA);
    int s3 = g3.eltwise_sum({a3, b3});
    int loss = g3.reduce_sum(s3);
    g3.forward();
    g3.backward(loss);
    for (double v : g3.val(a3).grad) CHECK(v == 1.0);
    for (double v : g3.val(b3).grad) CHECK(v == 1.0);

    Graph g4;
    int a4 = g4.add_input({1, 2, 3, 3});
    int b4 = g4.add_input({1, 2, 4, 3});
    int s4 = g4.eltwise_sum({a4, b4});
    CHECK_THROWS_WITH_AS(g4.forward(), doctest::Contains("[1,2,3,3] vs [1,2,4,3]"), DimError);
    (void)s4;
}

TEST_CASE("softmax: uniform logits, overflow guard, oracle, shift invariance") {
    Graph g;
    int x = g.add_input({1, 4, 2, 2});
    g.val(x).fill(3.0);
    int y = g.softmax_channels(x);
    g.forward();
    for (double v : g.val(y).data) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

    Graph gb;
    int xb = gb.add_input({1, 2, 1, 1});
    gb.val(xb).data = {1000.0, 0.0};
    int yb = gb.softmax_channels(xb);
    gb.forward();
    CHECK(gb.val(yb).data[0] == doctest::Approx(1.0));
    CHECK(gb.val(yb).data[1] == doctest::Approx(0.0));
    CHECK(gb.val(yb).all_finite());

    Rng rng(13);
    Graph gr;
    int xr = gr.add_input({1, 5, 3, 4});
    gr.val(xr) = oracle::random_tensor(rng, {1, 5, 3, 4}, -4, 4);
    int yr = gr.softmax_channels(xr);
    gr.forward();
    CHECK(max_abs_diff(gr.val(yr), oracle::softmax_channels(gr.val(xr))) < 1e-12);

    // per-pixel sums and invariance to adding a per-pixel constant
    Tensor probs = gr.val(yr);
    for (int yy = 0; yy < 3; ++yy)
        for (int xx = 0; xx < 4; ++xx) {
            double s = 0;
            for (int c = 0; c < 5; ++c) s += probs.at(0, c, yy, xx);
            CHECK(std::abs(s - 1.0) < 1e-12);
        }
    Graph gs;
    int xs = gs.add_input({1, 5, 3, 4});
    gs.val(xs) = gr.val(xr);
    for (int yy = 0; yy < 3; ++yy)
        for (int xx = 0; xx < 4; ++xx)
            for (int c = 0; c < 5; ++c) gs.val(xs).at(0, c, yy, xx) += 0.37 * (yy + 1) * (xx + 2);
    int ys = gs.softmax_channels(xs);
    gs.forward();
    CHECK(max_abs_diff(gs.val(ys), probs) < 1e-12);

    CHECK_THROWS_AS(
        [] {
            Graph bad;
            int xbad = bad.add_input({1, 1, 2, 2});
            bad.softmax_channels(xbad);
            bad.forward();
        }(),
        DimError);
}

TEST_CASE("backward: sum(w*x) gives grad w == x; accumulation over shared nodes") {
    Rng rng(17);
    Graph g;
    Tensor X = oracle::random_tensor(rng, {1, 1, 3, 3});
    Tensor W = oracle::random_tensor(rng, {1, 1, 3, 3});
    int x = g.add_input({1, 1, 3, 3});
    g.val(x) = X;
    int w = g.add_param("w", W);
    int prod = g.eltwise_mul(w, x);
    int loss = g.reduce_sum(prod);
    g.forward();
    g.backward(loss);
    for (size_t i = 0; i < X.data.size(); ++i)
        CHECK(g.val(w).grad[i] == doctest::Approx(X.data[i]).epsilon(1e-15));

    // x feeds two branches: grad x == a + b
    Graph g2;
    Tensor A = oracle::random_tensor(rng, {1, 1, 2, 2});
    Tensor B = oracle::random_tensor(rng, {1, 1, 2, 2});
    int x2 = g2.add_param("x", X);
    int a2 = g2.add_input({1, 1, 2, 2});
    int b2 = g2.add_input({1, 1, 2, 2});
    (void)a2;
    (void)b2;
    Graph g3;
    int x3 = g3.add_param("x", A);
    int ia = g3.add_input({1, 1, 2, 2});
    g3.val(ia) = A;
    int ib = g3.add_input({1, 1, 2, 2});
    g3.val(ib) = B;
    int m1 = g3.eltwise_mul(x3, ia);
    int m2 = g3.eltwise_mul(x3, ib);
    int tot = g3.reduce_sum(g3.eltwise_sum({m1, m2}));
    g3.forward();
    g3.backward(tot);
    for (size_t i = 0; i < A.data.size(); ++i)
        CHECK(g3.val(x3).grad[i] == doctest::Approx(A.data[i] + B.data[i]).epsilon(1e-15));
    (void)x2;

    // non-scalar loss is rejected
    Graph g4;
    int x4 = g4.add_param("x", X);
    int y4 = g4.relu(x4);
    g4.forward();
    CHECK_THROWS_AS(g4.backward(y4), ArgError);
}

TEST_CASE("finite differences: every op matches analytic gradients") {
    const double kTol = 1e-4;
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed * 101);

        {  // conv2d w.r.t. kernel, bias and input
            Graph g;
            int x = g.add_param("x", oracle::random_tensor(rng, {1, 2, 5, 5}));
            int w = g.add_param("w", oracle::random_tensor(rng, {3, 2, 3, 3}));
            int b = g.add_param("b", oracle::random_tensor(rng, {3}));
            int r = g.add_input({1, 3, 5, 5});
            g.val(r) = oracle::random_tensor(rng, {1, 3, 5, 5});
            int loss = g.reduce_sum(g.eltwise_mul(g.conv2d(x, w, b, 1, 1), r));
            for (int t : {x, w, b}) CHECK(fd_against_graph(g, loss, t).max_rel_err < kTol);
        }
        {  // maxpool
            Graph g;
            int x = g.add_param("x", oracle::random_tensor(rng, {1, 2, 6, 6}));
            int r = g.add_input({1, 2, 3, 3});
            g.val(r) = oracle::random_tensor(rng, {1, 2, 3, 3});
            int loss = g.reduce_sum(g.eltwise_mul(g.maxpool2(x), r));
            CHECK(fd_against_graph(g, loss, x).max_rel_err < kTol);
        }
        {  // upsample
            Graph g;
            int x = g.add_param("x", oracle::random_tensor(rng, {1, 2, 3, 4}));
            int r = g.add_input({1, 2, 6, 8});
            g.val(r) = oracle::random_tensor(rng, {1, 2, 6, 8});
            int loss = g.reduce_sum(g.eltwise_mul(g.upsample_bilinear(x, 2), r));
            CHECK(fd_against_graph(g, loss, x).max_rel_err < kTol);
        }
        {  // upsample cropped to an odd-sized reference node
            Graph g;
            int x = g.add_param("x", oracle::random_tensor(rng, {1, 2, 3, 4}));
            int ref = g.add_input({1, 2, 5, 7});
            g.val(ref) = oracle::random_tensor(rng, {1, 2, 5, 7});
            int up = g.upsample_bilinear(x, 2, ref);
            int loss = g.reduce_sum(g.eltwise_mul(up, ref));
            g.forward();
            CHECK(g.val(up).shape == std::vector<int>{1, 2, 5, 7});
            CHECK(fd_against_graph(g, loss, x).max_rel_err < kTol);
        }
        {  // relu (inputs kept away from the kink)
            Graph g;
            int x = g.add_param("x", oracle::random_tensor(rng, {1, 2, 4, 4}, -1, 1, 1e-3));
            int r = g.add_input({1, 2, 4, 4});
            g.val(r) = oracle::random_tensor(rng, {1, 2, 4, 4});
            int loss = g.reduce_sum(g.eltwise_mul(g.relu(x), r));
            CHECK(fd_against_graph(g, loss, x).max_rel_err < kTol);
        }
        {  // softmax -> balanced loss, both conventions
            for (auto conv : {BetaConvention::kHed, BetaConvention::kPaperLiteral}) {
                Graph g;
                int x = g.add_param("x", oracle::random_tensor(rng, {1, 3, 4, 4}, -2, 2));
                int t = g.add_input({1, 1, 4, 4});
                Tensor target({1, 1, 4, 4});
                for (auto& v : target.data) v = rng.uniform_int(0, 2);
                g.val(t) = target;
                int loss = g.balanced_softmax_loss(g.softmax_channels(x), t, conv);
                CHECK(fd_against_graph(g, loss, x).max_rel_err < kTol);
            }
        }
        {  // fuse weights and inputs through the fused softmax
            Graph g;
            int l1 = g.add_param("l1", oracle::random_tensor(rng, {1, 2, 4, 4}, -2, 2));
            int l2 = g.add_param("l2", oracle::random_tensor(rng, {1, 3, 4, 4}, -2, 2));
            int w = g.add_param("w", oracle::random_tensor(rng, {2, 3}, 0.1, 1.0));
            int p1 = g.softmax_channels(l1);
            int p2 = g.softmax_channels(l2);
            int fused = g.fuse_classes({p1, p2}, {1, 2}, w);
            int t = g.add_input({1, 1, 4, 4});
            Tensor target({1, 1, 4, 4});
            for (auto& v : target.data) v = rng.uniform_int(0, 2);
            g.val(t) = target;
            int loss = g.balanced_softmax_loss(g.softmax_channels(fused), t, BetaConvention::kHed);
            for (int tn : {w, l1, l2}) CHECK(fd_against_graph(g, loss, tn).max_rel_err < kTol);
        }
    }
}

TEST_CASE("sgd: plain step, momentum, stepped decay") {
    {
        Graph g;
        Tensor w = Tensor::scalar(1.0);
        int wp = g.add_param("w", w);
        g.val(wp).ensure_grad();
        g.val(wp).grad[0] = 1.0;
        SgdState sgd;
        sgd.learning_rate = 0.1;
        sgd.momentum = 0.0;
        sgd.step(g);
        CHECK(g.val(wp).data[0] == doctest::Approx(0.9).epsilon(1e-15));
    }
    {
        Graph g;
        int wp = g.add_param("w", Tensor::scalar(1.0));
        SgdState sgd;
        sgd.learning_rate = 0.1;
        sgd.momentum = 0.9;
        g.val(wp).ensure_grad();
        g.val(wp).grad[0] = 1.0;
        sgd.step(g);
        CHECK(sgd.velocity["w"][0] == doctest::Approx(1.0));
        CHECK(g.val(wp).data[0] == doctest::Approx(0.9).epsilon(1e-15));
        g.val(wp).grad[0] = 1.0;
        sgd.step(g);
        CHECK(sgd.velocity["w"][0] == doctest::Approx(1.9));
        CHECK(g.val(wp).data[0] == doctest::Approx(0.71).epsilon(1e-12));
    }
    {
        Graph g;
        int wp = g.add_param("w", Tensor::scalar(1.0));
        SgdState sgd;
        sgd.learning_rate = 0.5;
        sgd.momentum = 0.0;
        sgd.lr_decay_every = 10;
        sgd.lr_decay_factor = 0.1;
        for (int i = 0; i < 10; ++i) {
            g.val(wp).ensure_grad();
            g.val(wp).grad[0] = 0.0;
            sgd.step(g);
        }
        CHECK(sgd.iteration == 10);
        CHECK(sgd.learning_rate == doctest::Approx(0.05).epsilon(1e-15));
    }
}

TEST_CASE("determinism: forward+backward is bit-identical for a fixed seed") {
    auto run = [](uint64_t seed) {
        Rng rng(seed);
        Graph g;
        int x = g.add_input({1, 1, 6, 6});
        g.val(x) = oracle::random_tensor(rng, {1, 1, 6, 6});
        int w = g.add_param("w", oracle::random_tensor(rng, {4, 1, 3, 3}));
        int b = g.add_param("b", oracle::random_tensor(rng, {4}));
        int conv = g.conv2d(x, w, b, 1, 1);
        int pool = g.maxpool2(g.relu(conv));
        int up = g.upsample_bilinear(pool, 2);
        int r = g.add_input({1, 4, 6, 6});
        g.val(r) = oracle::random_tensor(rng, {1, 4, 6, 6});
        int loss = g.reduce_sum(g.eltwise_mul(up, r));
        g.forward();
        g.backward(loss);
        std::vector<double> out = g.val(loss).data;
        out.insert(out.end(), g.val(w).grad.begin(), g.val(w).grad.end());
        return out;
    };
    auto a = run(42), b = run(42), c = run(43);
    CHECK(a == b);
    CHECK(a != c);
}
