#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mpag/nn.hpp"
#include "support/finite_diff.hpp"

using namespace mpag;

namespace {

// Plain-double LSTM cell, evaluated independently of the graph path.
struct ScalarLstm {
    // 1-dim cell: each gate has an input weight, a recurrent weight and a bias.
    double wi, ui, bi, wf, uf, bf, wc, uc, bc, wo, uo, bo;
    std::pair<double, double> step(double h, double c, double x) const {
        auto sg = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
        double i = sg(wi * x + ui * h + bi);
        double f = sg(wf * x + uf * h + bf);
        double cand = std::tanh(wc * x + uc * h + bc);
        double o = sg(wo * x + uo * h + bo);
        double c_new = f * c + i * cand;
        return {o * std::tanh(c_new), c_new};
    }
};

void set_scalar_lstm(ParamStore& ps, const std::string& prefix, const ScalarLstm& m) {
    ps.at(prefix + ".W").value = Tensor::matrix(4, 1, {m.wi, m.wf, m.wc, m.wo});
    ps.at(prefix + ".U").value = Tensor::matrix(4, 1, {m.ui, m.uf, m.uc, m.uo});
    ps.at(prefix + ".b").value = Tensor::vector({m.bi, m.bf, m.bc, m.bo});
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(-scale, scale);
    return t;
}

} // namespace

TEST_CASE("lstm_step zero parameters give zero state") {
    ParamStore ps;
    Rng rng(1);
    register_lstm(ps, "cell", 3, 2, rng);
    ps.at("cell.W").value = Tensor::zeros({8, 3});
    ps.at("cell.U").value = Tensor::zeros({8, 2});

    Graph g;
    auto s = lstm_step(g, ps, "cell", lstm_zero_state(g, 2), g.constant(Tensor::vector({5, -2, 1})));
    CHECK(s.h.val().data == std::vector<double>{0, 0});
    CHECK(s.c.val().data == std::vector<double>{0, 0});
}

TEST_CASE("lstm_step matches hand-evaluated gate arithmetic") {
    ScalarLstm m{0.5, -0.3, 0.1, 0.2, 0.4, -0.2, 1.0, -0.5, 0.3, -0.7, 0.6, 0.05};
    ParamStore ps;
    Rng rng(1);
    register_lstm(ps, "cell", 1, 1, rng);
    set_scalar_lstm(ps, "cell", m);

    double h = 0.37, c = -0.81, x = 1.25;
    auto [eh, ec] = m.step(h, c, x);

    Graph g;
    LstmState st{g.constant(Tensor::scalar(h)), g.constant(Tensor::scalar(c))};
    auto out = lstm_step(g, ps, "cell", st, g.constant(Tensor::scalar(x)));
    CHECK(std::abs(out.h.scalar() - eh) < 1e-12);
    CHECK(std::abs(out.c.scalar() - ec) < 1e-12);
}

TEST_CASE("lstm_step saturated gates copy the cell state") {
    // forget bias +20 and input bias -20: c' = c up to 1e-6.
    ParamStore ps;
    Rng rng(5);
    register_lstm(ps, "cell", 2, 2, rng);
    ps.at("cell.b").value = Tensor::vector({-20, -20, 20, 20, 0, 0, 0, 0});

    Graph g;
    Value c0 = g.constant(Tensor::vector({0.4, -0.9}));
    LstmState st{g.constant(Tensor::vector({0.1, 0.2})), c0};
    auto out = lstm_step(g, ps, "cell", st, g.constant(Tensor::vector({0.3, -0.5})));
    CHECK(std::abs(out.c.val().data[0] - 0.4) < 1e-6);
    CHECK(std::abs(out.c.val().data[1] + 0.9) < 1e-6);
}

TEST_CASE("bi_rnn length-1 per-step state equals final state") {
    ParamStore ps;
    Rng rng(11);
    register_birnn(ps, "rnn", 3, 4, rng);
    Graph g;
    auto out = bi_rnn(g, ps, "rnn", {g.constant(Tensor::vector({1, 2, 3}))});
    REQUIRE(out.states.size() == 1);
    CHECK(out.states[0].val().data == out.final_state.val().data);
}

TEST_CASE("bi_rnn empty sequence throws") {
    ParamStore ps;
    Rng rng(11);
    register_birnn(ps, "rnn", 3, 4, rng);
    Graph g;
    CHECK_THROWS_AS(bi_rnn(g, ps, "rnn", {}), ShapeError);
}

TEST_CASE("bi_rnn reversal swaps direction halves read in reverse") {
    ParamStore ps;
    Rng rng(12);
    register_birnn(ps, "rnn", 2, 4, rng);
    // Tie the two directions so reversal symmetry is exact.
    ps.at("rnn.bwd.W").value = ps.at("rnn.fwd.W").value;
    ps.at("rnn.bwd.U").value = ps.at("rnn.fwd.U").value;
    ps.at("rnn.bwd.b").value = ps.at("rnn.fwd.b").value;

    std::vector<Tensor> xs = {random_tensor({2}, rng), random_tensor({2}, rng),
                              random_tensor({2}, rng)};
    Graph g;
    std::vector<Value> fwd_in, rev_in;
    for (const Tensor& t : xs) fwd_in.push_back(g.constant(t));
    for (std::size_t i = xs.size(); i-- > 0;) rev_in.push_back(g.constant(xs[i]));
    auto a = bi_rnn(g, ps, "rnn", fwd_in);
    auto b = bi_rnn(g, ps, "rnn", rev_in);

    for (std::size_t t = 0; t < xs.size(); ++t) {
        const auto& sa = a.states[t].val().data;
        const auto& sb = b.states[xs.size() - 1 - t].val().data;
        // forward half of a at t == backward half of b at mirrored position
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(std::abs(sa[j] - sb[2 + j]) < 1e-12);
            CHECK(std::abs(sa[2 + j] - sb[j]) < 1e-12);
        }
    }
}

TEST_CASE("bi_rnn length-3 one-dim case matches manual unroll") {
    ScalarLstm fwd{0.3, 0.2, -0.1, 0.5, -0.4, 0.2, 0.9, 0.1, 0.0, -0.2, 0.3, 0.1};
    ScalarLstm bwd{-0.6, 0.15, 0.05, 0.25, 0.35, -0.15, 0.45, -0.55, 0.2, 0.65, -0.05, 0.0};
    ParamStore ps;
    Rng rng(1);
    register_birnn(ps, "rnn", 1, 2, rng);
    set_scalar_lstm(ps, "rnn.fwd", fwd);
    set_scalar_lstm(ps, "rnn.bwd", bwd);

    std::vector<double> xs = {0.8, -0.3, 1.1};
    double h = 0, c = 0;
    std::vector<double> fh;
    for (double x : xs) {
        std::tie(h, c) = fwd.step(h, c, x);
        fh.push_back(h);
    }
    double bh_last = 0;
    std::vector<double> bh(3);
    h = 0;
    c = 0;
    for (std::size_t i = xs.size(); i-- > 0;) {
        std::tie(h, c) = bwd.step(h, c, xs[i]);
        bh[i] = h;
    }
    bh_last = bh[0];

    Graph g;
    std::vector<Value> in;
    for (double x : xs) in.push_back(g.constant(Tensor::scalar(x)));
    auto out = bi_rnn(g, ps, "rnn", in);
    for (std::size_t t = 0; t < 3; ++t) {
        CHECK(std::abs(out.states[t].val().data[0] - fh[t]) < 1e-12);
        CHECK(std::abs(out.states[t].val().data[1] - bh[t]) < 1e-12);
    }
    CHECK(std::abs(out.final_state.val().data[0] - fh[2]) < 1e-12);
    CHECK(std::abs(out.final_state.val().data[1] - bh_last) < 1e-12);
}

TEST_CASE("conv_maxpool width-1 single-position equals affine of the embedding") {
    ParamStore ps;
    Rng rng(21);
    register_conv(ps, "cnn", 3, 4, {1}, rng);

    Tensor x = random_tensor({3}, rng);
    Graph g;
    Value out = conv_maxpool(g, ps, "cnn", {g.constant(x)}, {1});
    Value direct = affine(g.param(ps, "cnn.w1.K"), g.constant(x), g.param(ps, "cnn.w1.b"));
    CHECK(out.val().data == direct.val().data);
}

TEST_CASE("conv_maxpool constant sequence: pool equals interior position output") {
    ParamStore ps;
    Rng rng(22);
    register_conv(ps, "cnn", 2, 4, {1, 2}, rng);
    Tensor x = random_tensor({2}, rng);

    Graph g;
    std::vector<Value> seq(5, g.constant(x));
    Value pooled = conv_maxpool(g, ps, "cnn", seq, {1, 2});

    // width 1: every position identical, so max equals the single-position conv.
    Value w1 = affine(g.param(ps, "cnn.w1.K"), g.constant(x), g.param(ps, "cnn.w1.b"));
    // width 2: interior windows are [x;x]; boundary windows include zero pad,
    // so the max must be >= the interior output.
    Value w2 = affine(g.param(ps, "cnn.w2.K"), concat({g.constant(x), g.constant(x)}),
                      g.param(ps, "cnn.w2.b"));
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(pooled.val().data[i] == w1.val().data[i]);
        CHECK(pooled.val().data[2 + i] >= w2.val().data[i] - 1e-15);
    }
}

TEST_CASE("conv_maxpool matches a sliding-window hand oracle") {
    // T=3, widths {1,2}, 1 channel per width, 2-dim embeddings.
    ParamStore ps;
    Rng rng(23);
    register_conv(ps, "cnn", 2, 2, {1, 2}, rng);
    ps.at("cnn.w1.K").value = Tensor::matrix(1, 2, {0.5, -1.0});
    ps.at("cnn.w1.b").value = Tensor::vector({0.1});
    ps.at("cnn.w2.K").value = Tensor::matrix(1, 4, {1.0, 0.0, -0.5, 0.25});
    ps.at("cnn.w2.b").value = Tensor::vector({-0.2});

    std::vector<std::vector<double>> e = {{1.0, 2.0}, {-1.0, 0.5}, {0.0, 3.0}};

    // width 1: out_t = 0.5*e[t][0] - 1.0*e[t][1] + 0.1
    double best1 = -1e30;
    for (auto& v : e) best1 = std::max(best1, 0.5 * v[0] - 1.0 * v[1] + 0.1);
    // width 2: window [t-0, t+1] with left pad 0 (floor((2-1)/2)=0), right pad 1.
    double best2 = -1e30;
    for (int t = 0; t < 3; ++t) {
        std::vector<double> a = e[static_cast<std::size_t>(t)];
        std::vector<double> b = t + 1 < 3 ? e[static_cast<std::size_t>(t) + 1]
                                          : std::vector<double>{0.0, 0.0};
        best2 = std::max(best2, 1.0 * a[0] + 0.0 * a[1] - 0.5 * b[0] + 0.25 * b[1] - 0.2);
    }

    Graph g;
    std::vector<Value> seq;
    for (auto& v : e) seq.push_back(g.constant(Tensor::vector({v[0], v[1]})));
    Value out = conv_maxpool(g, ps, "cnn", seq, {1, 2});
    REQUIRE(out.size() == 2);
    CHECK(std::abs(out.val().data[0] - best1) < 1e-12);
    CHECK(std::abs(out.val().data[1] - best2) < 1e-12);
}

TEST_CASE("conv registration rejects indivisible channel counts") {
    ParamStore ps;
    Rng rng(2);
    CHECK_THROWS_AS(register_conv(ps, "cnn", 4, 10, {1, 2, 3}, rng), ConfigError);
}

TEST_CASE("recurrent and conv blocks pass the finite-difference oracle") {
    Rng seeds(77);
    for (int trial = 0; trial < 5; ++trial) {
        Rng rng(seeds.next_u64());
        ParamStore ps;
        register_lstm(ps, "cell", 2, 3, rng);
        register_birnn(ps, "rnn", 2, 4, rng);
        register_conv(ps, "cnn", 2, 4, {1, 2}, rng);
        Tensor x1 = random_tensor({2}, rng), x2 = random_tensor({2}, rng),
               x3 = random_tensor({2}, rng);
        Tensor probe3 = random_tensor({3}, rng), probe4 = random_tensor({4}, rng);

        auto build = [&](Graph& g, ParamStore& p) {
            auto st = lstm_step(g, p, "cell", lstm_zero_state(g, 3), g.constant(x1));
            st = lstm_step(g, p, "cell", st, g.constant(x2));
            Value l1 = dot(st.h, g.constant(probe3));
            auto rnn =
                bi_rnn(g, p, "rnn", {g.constant(x1), g.constant(x2), g.constant(x3)});
            Value l2 = dot(rnn.final_state, g.constant(probe4));
            Value conv = conv_maxpool(g, p, "cnn", {g.constant(x1), g.constant(x2), g.constant(x3)},
                                      {1, 2});
            Value l3 = dot(conv, g.constant(probe4));
            return add(add(l1, l2), l3);
        };
        auto loss = [&](ParamStore& p) {
            Graph g;
            return build(g, p).scalar();
        };
        ps.zero_grads();
        {
            Graph g;
            g.backward(build(g, ps));
        }
        auto rep = testsupport::compare_grads(loss, ps);
        INFO("trial " << trial << " worst " << rep.worst);
        CHECK(rep.max_rel_err < 1e-4);
    }
}
