#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "primix/model_io.hpp"
#include "primix/train.hpp"

using namespace primix;

namespace {

Vec random_vec(Index n, Rng& rng, double scale = 1.0) {
    return Vec::NullaryExpr(n, [&](Index) { return rng.uniform(-scale, scale); });
}

// Straight-line re-implementation of the forward pass with plain loops.
std::vector<double> naive_mlp_forward(const MlpParams& p, const std::vector<double>& x) {
    std::vector<double> act = x;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        std::vector<double> next(static_cast<std::size_t>(p.weights[l].rows()), 0.0);
        for (std::size_t i = 0; i < next.size(); ++i) {
            double z = p.biases[l][static_cast<Index>(i)];
            for (std::size_t j = 0; j < act.size(); ++j)
                z += p.weights[l](static_cast<Index>(i), static_cast<Index>(j)) * act[j];
            next[i] = (l + 1 < p.weights.size()) ? std::tanh(z) : z;
        }
        act = std::move(next);
    }
    return act;
}

// Scalar-by-scalar LSTM reference for a single layer of 2 units.
struct NaiveLstm {
    const LstmParams& p;
    std::vector<double> h, c;

    explicit NaiveLstm(const LstmParams& params)
        : p(params), h(static_cast<std::size_t>(params.hidden_size), 0.0),
          c(static_cast<std::size_t>(params.hidden_size), 0.0) {}

    static double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

    std::vector<double> step(const std::vector<double>& x) {
        const int hs = p.hidden_size;
        const auto& cell = p.cells[0];
        std::vector<double> hn(hs), cn(hs);
        for (int u = 0; u < hs; ++u) {
            double zi = cell.b[u], zf = cell.b[hs + u], zg = cell.b[2 * hs + u],
                   zo = cell.b[3 * hs + u];
            for (std::size_t j = 0; j < x.size(); ++j) {
                zi += cell.w_x(u, static_cast<Index>(j)) * x[j];
                zf += cell.w_x(hs + u, static_cast<Index>(j)) * x[j];
                zg += cell.w_x(2 * hs + u, static_cast<Index>(j)) * x[j];
                zo += cell.w_x(3 * hs + u, static_cast<Index>(j)) * x[j];
            }
            for (int j = 0; j < hs; ++j) {
                zi += cell.w_h(u, j) * h[j];
                zf += cell.w_h(hs + u, j) * h[j];
                zg += cell.w_h(2 * hs + u, j) * h[j];
                zo += cell.w_h(3 * hs + u, j) * h[j];
            }
            cn[u] = sigmoid(zf) * c[u] + sigmoid(zi) * std::tanh(zg);
            hn[u] = sigmoid(zo) * std::tanh(cn[u]);
        }
        h = hn;
        c = cn;
        std::vector<double> y(static_cast<std::size_t>(p.output_size), 0.0);
        for (int i = 0; i < p.output_size; ++i) {
            y[i] = p.b_out[i];
            for (int j = 0; j < hs; ++j) y[i] += p.w_out(i, j) * h[j];
        }
        return y;
    }
};

}  // namespace

TEST_CASE("mlp zero weights give zero output") {
    Rng rng(1);
    MlpParams p = MlpParams::init({4, 8, 3}, rng);
    for (auto& w : p.weights) w.setZero();
    const Vec y = mlp_forward(p, random_vec(4, rng));
    CHECK(y.norm() == 0.0);
}

TEST_CASE("single identity layer passes input through") {
    Rng rng(2);
    MlpParams p = MlpParams::init({3, 3}, rng);
    p.weights[0] = Mat::Identity(3, 3);
    p.biases[0].setZero();
    const Vec x = random_vec(3, rng);
    CHECK((mlp_forward(p, x) - x).norm() == 0.0);
    CHECK_THROWS(mlp_forward(p, Vec::Zero(5)));
}

TEST_CASE("mlp forward matches a straight-line reimplementation") {
    Rng rng(3);
    MlpParams p = MlpParams::init({5, 11, 7, 2}, rng);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec x = random_vec(5, rng, 2.0);
        const Vec y = mlp_forward(p, x);
        const auto ref = naive_mlp_forward(p, std::vector<double>(x.data(), x.data() + 5));
        for (Index i = 0; i < y.size(); ++i)
            CHECK(y[i] == doctest::Approx(ref[static_cast<std::size_t>(i)]).epsilon(1e-12));
    }
}

TEST_CASE("lstm with zero weights emits the output bias") {
    Rng rng(4);
    LstmParams p = LstmParams::init(3, 4, 2, 2, rng);
    for (auto& cell : p.cells) {
        cell.w_x.setZero();
        cell.w_h.setZero();
        cell.b.setZero();
    }
    p.w_out.setZero();
    p.b_out << 0.7, -0.3;
    LstmState state;
    const Vec y = lstm_step(p, state, Vec::Zero(3));
    CHECK(y[0] == 0.7);
    CHECK(y[1] == -0.3);
    CHECK_THROWS(lstm_step(p, state, Vec::Zero(5)));
}

TEST_CASE("saturated gates freeze the cell state") {
    Rng rng(5);
    LstmParams p = LstmParams::init(2, 3, 1, 1, rng);
    p.cells[0].w_x.setZero();
    p.cells[0].w_h.setZero();
    p.cells[0].b.setZero();
    p.cells[0].b.segment(0, 3).array() = -20.0;  // input gate shut
    p.cells[0].b.segment(3, 3).array() = +20.0;  // forget gate open

    LstmState state = LstmState::zeros(p);
    state.c[0] << 0.4, -0.2, 0.9;
    const Vec c0 = state.c[0];
    for (int t = 0; t < 10; ++t) lstm_step(p, state, random_vec(2, rng));
    CHECK((state.c[0] - c0).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("lstm step matches a scalar reference implementation") {
    Rng rng(6);
    LstmParams p = LstmParams::init(3, 2, 1, 2, rng);
    for (auto& cell : p.cells)
        for (Index i = 0; i < cell.b.size(); ++i) cell.b[i] = rng.uniform(-0.5, 0.5);

    LstmState state;
    NaiveLstm ref(p);
    for (int t = 0; t < 15; ++t) {
        const Vec x = random_vec(3, rng);
        const Vec y = lstm_step(p, state, x);
        const auto yr = ref.step(std::vector<double>(x.data(), x.data() + 3));
        for (Index i = 0; i < y.size(); ++i)
            CHECK(y[i] == doctest::Approx(yr[static_cast<std::size_t>(i)]).epsilon(1e-12));
    }
}

TEST_CASE("training fits a constant dataset to below 1e-6") {
    Rng rng(7);
    MlpParams p = MlpParams::init({3, 16, 2}, rng);
    PairDataset data;
    data.inputs = Mat::Zero(32, 3);
    data.targets = Mat::Zero(32, 2);
    for (Index i = 0; i < 32; ++i) {
        data.inputs.row(i) << 0.3, -0.5, 0.8;
        data.targets.row(i) << 0.25, -0.75;
    }
    TrainConfig cfg;
    cfg.epochs = 2000;
    cfg.learning_rate = 5e-4;
    const auto history = train_mlp(p, data, cfg);
    CHECK(history.back() < 1e-6);
}

TEST_CASE("zero learning rate leaves parameters untouched") {
    Rng rng(8);
    MlpParams p = MlpParams::init({3, 8, 2}, rng);
    const MlpParams before = p;
    PairDataset data;
    data.inputs = Mat::Random(10, 3);
    data.targets = Mat::Random(10, 2);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 20;
    const auto history = train_mlp(p, data, cfg);
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        CHECK(p.weights[l] == before.weights[l]);
        CHECK(p.biases[l] == before.biases[l]);
    }
    // shuffling reorders the per-batch summation, so allow rounding ulps
    for (double v : history)
        CHECK(v == doctest::Approx(history.front()).epsilon(1e-12));
}

TEST_CASE("a linear mlp recovers a linear operator") {
    Rng rng(9);
    Mat a(2, 3);
    a << 0.5, -1.2, 0.3, 0.8, 0.1, -0.7;
    PairDataset data;
    data.inputs = Mat(200, 3);
    data.targets = Mat(200, 2);
    for (Index i = 0; i < 200; ++i) {
        const Vec x = random_vec(3, rng);
        data.inputs.row(i) = x.transpose();
        data.targets.row(i) = (a * x).transpose();
    }
    MlpParams p = MlpParams::init({3, 2}, rng);
    TrainConfig cfg;
    cfg.learning_rate = 5e-3;
    cfg.epochs = 600;
    train_mlp(p, data, cfg);
    CHECK((p.weights[0] - a).cwiseAbs().maxCoeff() < 1e-3);
    CHECK(p.biases[0].cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("training is bit-deterministic given the seed") {
    auto fit = [] {
        Rng rng(10);
        MlpParams p = MlpParams::init({4, 12, 3}, rng);
        PairDataset data;
        data.inputs = Mat(40, 4);
        data.targets = Mat(40, 3);
        Rng drng(11);
        for (Index i = 0; i < 40; ++i) {
            data.inputs.row(i) = random_vec(4, drng).transpose();
            data.targets.row(i) = random_vec(3, drng).transpose();
        }
        TrainConfig cfg;
        cfg.epochs = 50;
        cfg.seed = 1234;
        const auto history = train_mlp(p, data, cfg);
        return std::make_pair(p, history);
    };
    const auto [p1, h1] = fit();
    const auto [p2, h2] = fit();
    CHECK(h1 == h2);
    for (std::size_t l = 0; l < p1.weights.size(); ++l)
        CHECK(p1.weights[l] == p2.weights[l]);
}

TEST_CASE("lstm training reduces loss on a short sequence task") {
    Rng rng(12);
    LstmParams p = LstmParams::init(2, 8, 1, 1, rng);
    // target: running mean of the first input channel
    std::vector<SeqSample> data;
    Rng drng(13);
    for (int s = 0; s < 4; ++s) {
        SeqSample seq;
        double acc = 0;
        for (int t = 0; t < 12; ++t) {
            const Vec x = random_vec(2, drng);
            acc += x[0];
            seq.inputs.push_back(x);
            seq.targets.push_back(Vec::Constant(1, acc / (t + 1)));
        }
        data.push_back(std::move(seq));
    }
    TrainConfig cfg;
    cfg.epochs = 400;
    cfg.learning_rate = 5e-3;
    const auto history = train_lstm(p, data, cfg);
    CHECK(history.back() < 0.25 * history.front());
}

TEST_CASE("gradient check is near-exact for a linear model") {
    Rng rng(14);
    MlpParams p = MlpParams::init({4, 2}, rng);
    // offset targets keep every gradient O(1), so the quadratic loss is
    // probed far from the cancellation-dominated regime
    PairDataset data;
    data.inputs = Mat(12, 4);
    data.targets = Mat(12, 2);
    for (Index i = 0; i < 12; ++i) {
        const Vec x = Vec::NullaryExpr(4, [&](Index) { return rng.uniform(0.5, 1.5); });
        data.inputs.row(i) = x.transpose();
        data.targets.row(i) = (mlp_forward(p, x) + Vec::Ones(2)).transpose();
    }
    CHECK(mlp_gradient_check(p, data, 60, 99) < 1e-9);
}

TEST_CASE("gradient check passes for a 3-layer tanh mlp") {
    Rng rng(15);
    MlpParams p = MlpParams::init({5, 10, 8, 3}, rng);
    PairDataset data;
    data.inputs = Mat::Random(16, 5);
    data.targets = Mat::Random(16, 3);
    CHECK(mlp_gradient_check(p, data, 80, 100) < 1e-4);
}

TEST_CASE("gradient check passes for an lstm over a 5-step sequence") {
    Rng rng(16);
    LstmParams p = LstmParams::init(3, 6, 1, 2, rng);
    SeqSample seq;
    Rng drng(17);
    for (int t = 0; t < 5; ++t) {
        seq.inputs.push_back(random_vec(3, drng));
        seq.targets.push_back(random_vec(2, drng));
    }
    CHECK(lstm_gradient_check(p, seq, 80, 101) < 1e-4);
}

TEST_CASE("stacked lstm gradients also pass the check") {
    Rng rng(18);
    LstmParams p = LstmParams::init(2, 5, 2, 2, rng);
    SeqSample seq;
    Rng drng(19);
    for (int t = 0; t < 8; ++t) {
        seq.inputs.push_back(random_vec(2, drng));
        seq.targets.push_back(random_vec(2, drng, 0.3));
    }
    CHECK(lstm_gradient_check(p, seq, 80, 102) < 1e-4);
}

TEST_CASE("model files round-trip bit-exactly") {
    Rng rng(20);
    const ArtifactMeta meta{"deadbeefdeadbeef", 42, "primix-0.1"};

    MlpParams mlp = MlpParams::init({4, 9, 3}, rng);
    save_mlp("nn_roundtrip_mlp.json", mlp, meta);
    ArtifactMeta meta_back;
    const MlpParams mlp_back = load_mlp("nn_roundtrip_mlp.json", &meta_back);
    CHECK(meta_back.seed == 42);
    CHECK(meta_back.config_hash == "deadbeefdeadbeef");
    REQUIRE(mlp_back.layer_sizes == mlp.layer_sizes);
    for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
        CHECK(mlp_back.weights[l] == mlp.weights[l]);
        CHECK(mlp_back.biases[l] == mlp.biases[l]);
    }

    LstmParams lstm = LstmParams::init(3, 5, 2, 4, rng);
    save_lstm("nn_roundtrip_lstm.json", lstm, meta);
    const LstmParams lstm_back = load_lstm("nn_roundtrip_lstm.json");
    REQUIRE(lstm_back.layer_count() == lstm.layer_count());
    for (Index l = 0; l < lstm.layer_count(); ++l) {
        CHECK(lstm_back.cells[l].w_x == lstm.cells[l].w_x);
        CHECK(lstm_back.cells[l].w_h == lstm.cells[l].w_h);
        CHECK(lstm_back.cells[l].b == lstm.cells[l].b);
    }
    CHECK(lstm_back.w_out == lstm.w_out);
    CHECK(lstm_back.b_out == lstm.b_out);

    CHECK_THROWS(load_lstm("nn_roundtrip_mlp.json"));  // wrong kind tag
    std::filesystem::remove("nn_roundtrip_mlp.json");
    std::filesystem::remove("nn_roundtrip_lstm.json");
}

TEST_CASE("training aborts on divergence") {
    Rng rng(21);
    MlpParams p = MlpParams::init({2, 1}, rng);
    PairDataset data;
    data.inputs = Mat::Constant(4, 2, 1e200);
    data.targets = Mat::Constant(4, 1, -1e200);
    TrainConfig cfg;
    cfg.epochs = 5;
    CHECK_THROWS_WITH(train_mlp(p, data, cfg), "training diverged");
}
