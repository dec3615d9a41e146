#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "primix/controllers.hpp"
#include "primix/rng.hpp"

using namespace primix;

namespace {

constexpr Index kDim = 9;  // 3 joints x 3 channels

NormStats identity_stats() {
    return NormStats{Vec::Zero(kDim), Vec::Ones(kDim)};
}

// Single linear layer emitting a constant vector regardless of input.
MlpParams constant_mlp(const Vec& value) {
    MlpParams p;
    p.layer_sizes = {static_cast<int>(2 * kDim), static_cast<int>(kDim)};
    p.weights.push_back(Mat::Zero(kDim, 2 * kDim));
    p.biases.push_back(value);
    return p;
}

LToFModel identity_ltof() {
    LToFModel m;
    m.stats = identity_stats();
    m.mlp.layer_sizes = {static_cast<int>(kDim), static_cast<int>(kDim)};
    m.mlp.weights.push_back(Mat::Identity(kDim, kDim));
    m.mlp.biases.push_back(Vec::Zero(kDim));
    return m;
}

LowerBank random_bank(Index count, Rng& rng, int horizon = 5) {
    LowerBank bank;
    bank.stats = identity_stats();
    bank.horizon = horizon;
    for (Index p = 0; p < count; ++p) {
        bank.primitives.push_back(
            MlpParams::init({static_cast<int>(2 * kDim), 16, static_cast<int>(kDim)}, rng));
        bank.tags.push_back({"demo", static_cast<int>(p)});
    }
    return bank;
}

std::vector<Vec> random_window(int n, Rng& rng) {
    std::vector<Vec> window;
    for (int i = 0; i < n; ++i)
        window.push_back(Vec::NullaryExpr(kDim, [&](Index) { return rng.uniform(-1, 1); }));
    return window;
}

RobotState random_follower(Rng& rng) {
    RobotState s(3);
    for (int j = 0; j < 3; ++j) {
        s.theta[j] = rng.uniform(-1, 1);
        s.omega[j] = rng.uniform(-1, 1);
        s.tau[j] = rng.uniform(-1, 1);
    }
    return s;
}

}  // namespace

TEST_CASE("planted candidate wins the fusion with a cold temperature") {
    const Vec target = Vec::LinSpaced(kDim, -0.4, 0.4);
    LowerBank bank;
    bank.stats = identity_stats();
    bank.horizon = 5;
    bank.primitives.push_back(constant_mlp(target));  // maps to the reference exactly
    bank.tags.push_back({"planted", 0});
    for (int p = 1; p < 6; ++p) {
        bank.primitives.push_back(constant_mlp(Vec::Constant(kDim, 2.0 + p)));
        bank.tags.push_back({"off", p});
    }

    CEConfig ce;
    ce.rho = 1e-4;
    ce.top_m = 6;
    ce.samples_per_primitive = 1;  // noise off

    std::vector<Vec> window(5, target);  // reference equals the planted output
    const auto res = proportion_fusion_step(bank, identity_ltof(), Vec::Zero(kDim), window,
                                            CostWeights{}, ce, 0);
    CHECK((flatten(res.command) - target).cwiseAbs().maxCoeff() < 1e-3);
    CHECK(res.min_cost == doctest::Approx(0.0));
    CHECK(res.weights[0] > 0.999);
}

TEST_CASE("identical primitives collapse to a single prediction") {
    Rng rng(1);
    const MlpParams shared =
        MlpParams::init({static_cast<int>(2 * kDim), 12, static_cast<int>(kDim)}, rng);
    LowerBank bank;
    bank.stats = identity_stats();
    bank.horizon = 4;
    for (int p = 0; p < 5; ++p) {
        bank.primitives.push_back(shared);
        bank.tags.push_back({"same", p});
    }
    CEConfig ce;
    ce.samples_per_primitive = 1;  // noise off
    ce.top_m = 5;
    const auto window = random_window(4, rng);
    const Vec context = normalize(random_follower(rng), bank.stats);

    const auto res = proportion_fusion_step(bank, identity_ltof(), context, window,
                                            CostWeights{}, ce, 3);
    Vec in(2 * kDim);
    in << context, window.back();
    const Vec single = mlp_forward(shared, in);
    CHECK((flatten(res.command) - single).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("fusion output stays inside the candidate envelope") {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        LowerBank bank = random_bank(4, rng);
        CEConfig ce;
        ce.samples_per_primitive = 3;
        ce.top_m = 6;
        ce.seed = trial;
        const auto window = random_window(5, rng);
        const Vec context = normalize(random_follower(rng), bank.stats);
        const auto res = proportion_fusion_step(bank, identity_ltof(), context,
                                                window, CostWeights{}, ce, trial);
        const Vec fused = normalize(res.command, bank.stats);
        for (Index j = 0; j < kDim; ++j) {
            const double lo = res.first_elements.col(j).minCoeff();
            const double hi = res.first_elements.col(j).maxCoeff();
            const double slack = 1e-12 * std::max(1.0, std::abs(hi));
            CHECK(fused[j] >= lo - slack);
            CHECK(fused[j] <= hi + slack);
        }
    }
}

TEST_CASE("fusion is identical for any thread count") {
    Rng rng(3);
    LowerBank bank = random_bank(6, rng);
    const auto window = random_window(6, rng);
    const Vec context = normalize(random_follower(rng), bank.stats);

    auto run = [&](int threads) {
        CEConfig ce;
        ce.samples_per_primitive = 4;
        ce.top_m = 8;
        ce.seed = 42;
        ce.threads = threads;
        return proportion_fusion_step(bank, identity_ltof(), context, window, CostWeights{},
                                      ce, 17);
    };
    const auto a = run(1);
    const auto b = run(3);
    CHECK(flatten(a.command) == flatten(b.command));
    CHECK(a.batch.costs == b.batch.costs);
    CHECK(a.weights == b.weights);
}

TEST_CASE("fusion is reproducible for the same tick and seed") {
    Rng rng(4);
    LowerBank bank = random_bank(3, rng);
    const auto window = random_window(4, rng);
    const Vec context = normalize(random_follower(rng), bank.stats);
    CEConfig ce;
    ce.samples_per_primitive = 5;
    ce.top_m = 5;
    ce.seed = 7;
    const auto a =
        proportion_fusion_step(bank, identity_ltof(), context, window, CostWeights{}, ce, 5);
    const auto b =
        proportion_fusion_step(bank, identity_ltof(), context, window, CostWeights{}, ce, 5);
    CHECK(flatten(a.command) == flatten(b.command));
    // a different tick draws different noise
    const auto c =
        proportion_fusion_step(bank, identity_ltof(), context, window, CostWeights{}, ce, 6);
    CHECK(flatten(a.command) != flatten(c.command));
}

TEST_CASE("playback controller equals the raw fusion step on its window") {
    Rng rng(5);
    LowerBank bank = random_bank(4, rng, 3);
    const LToFModel ltof = identity_ltof();
    CEConfig ce;
    ce.samples_per_primitive = 2;
    ce.top_m = 4;
    ce.seed = 9;

    Trajectory playback;
    playback.dt = 0.01;
    for (int k = 0; k < 12; ++k) playback.states.push_back(random_follower(rng));

    PlaybackProportionController controller(playback, bank, ltof, CostWeights{}, ce);
    const RobotState via_controller = controller.step(random_follower(rng));

    // pre-substituted window and context: playback states k..k+n, normalized
    std::vector<Vec> window;
    for (int i = 1; i <= 3; ++i)
        window.push_back(normalize(playback.states[i], bank.stats));
    const Vec context = normalize(playback.states[0], bank.stats);
    const auto direct =
        proportion_fusion_step(bank, ltof, context, window, CostWeights{}, ce, 0);
    CHECK(flatten(via_controller) == flatten(direct.command));
}

TEST_CASE("playback reference holds the final state past the end") {
    Rng rng(6);
    LowerBank bank = random_bank(2, rng, 4);
    CEConfig ce;
    ce.samples_per_primitive = 1;
    ce.top_m = 2;

    Trajectory playback;
    playback.dt = 0.01;
    for (int k = 0; k < 3; ++k) playback.states.push_back(random_follower(rng));

    PlaybackProportionController controller(playback, bank, identity_ltof(), CostWeights{}, ce);
    const RobotState follower = random_follower(rng);
    // step far past the playback end: window should be the constant final state
    RobotState last;
    for (int k = 0; k < 6; ++k) last = controller.step(follower);

    const Vec final_state = normalize(playback.states.back(), bank.stats);
    std::vector<Vec> window(4, final_state);
    const auto direct = proportion_fusion_step(bank, identity_ltof(), final_state, window,
                                               CostWeights{}, ce, 5);
    CHECK(flatten(last) == flatten(direct.command));
}

TEST_CASE("learning controller blends with softmax proportions") {
    Rng rng(7);
    const NormStats stats = identity_stats();

    // upper with zero everything but the head bias: fixed reference and logits
    LearningUpperModel upper;
    upper.stats = stats;
    upper.horizon = 4;
    upper.proportion_count = 3;
    upper.lstm = LstmParams::init(static_cast<int>(kDim), 4, 1,
                                  static_cast<int>(kDim) + 3, rng);
    upper.lstm.cells[0].w_x.setZero();
    upper.lstm.cells[0].w_h.setZero();
    upper.lstm.cells[0].b.setZero();
    upper.lstm.w_out.setZero();
    upper.lstm.b_out.setZero();

    LowerBank bank;
    bank.stats = stats;
    bank.horizon = 4;
    const Vec v0 = Vec::Constant(kDim, 1.0);
    const Vec v1 = Vec::Constant(kDim, 2.0);
    const Vec v2 = Vec::Constant(kDim, 4.0);
    for (const Vec& v : {v0, v1, v2}) {
        bank.primitives.push_back(constant_mlp(v));
        bank.tags.push_back({"c", static_cast<int>(bank.primitives.size())});
    }

    SUBCASE("equal logits average the candidates") {
        LearningProportionController controller(upper, bank);
        const RobotState out = controller.step(RobotState(3));
        const double expect = (1.0 + 2.0 + 4.0) / 3.0;
        CHECK((flatten(out) - Vec::Constant(kDim, expect)).cwiseAbs().maxCoeff() < 1e-12);
    }

    SUBCASE("a dominant logit selects its primitive") {
        upper.lstm.b_out[kDim + 1] = 1000.0;  // one-hot on primitive 1
        LearningProportionController controller(upper, bank);
        const RobotState out = controller.step(RobotState(3));
        CHECK((flatten(out) - v1).cwiseAbs().maxCoeff() < 1e-6);
    }

    SUBCASE("bank size must match the proportion head") {
        bank.primitives.pop_back();
        bank.tags.pop_back();
        CHECK_THROWS(LearningProportionController(upper, bank));
    }
}

TEST_CASE("baseline controller caches the upper reference for n-1 steps") {
    Rng rng(8);
    BaselineModel model;
    model.stats = identity_stats();
    model.horizon = 5;
    model.upper = LstmParams::init(static_cast<int>(kDim), 6, 1, static_cast<int>(kDim), rng);
    model.lower = MlpParams::init({static_cast<int>(2 * kDim), 8, static_cast<int>(kDim)}, rng);

    BaselineController controller(model);
    RobotState follower(3);  // constant nonzero input isolates the cache behavior
    follower.theta << 0.3, -0.2, 0.5;
    follower.omega << 0.1, 0.0, -0.1;
    std::vector<Vec> outputs;
    for (int k = 0; k < 11; ++k) outputs.push_back(flatten(controller.step(follower)));

    for (int k = 1; k < 5; ++k) CHECK(outputs[k] == outputs[0]);
    CHECK(outputs[5] != outputs[0]);  // refresh advanced the recurrent state
    for (int k = 6; k < 10; ++k) CHECK(outputs[k] == outputs[5]);
    CHECK(outputs[10] != outputs[5]);
}

TEST_CASE("select_primitives strides the bank evenly") {
    Rng rng(9);
    LowerBank bank = random_bank(10, rng);
    const LowerBank subset = select_primitives(bank, 4);
    REQUIRE(subset.size() == 4);
    CHECK(subset.tags[0].segment_index == 0);
    CHECK(subset.tags[1].segment_index == 2);
    CHECK(subset.tags[2].segment_index == 5);
    CHECK(subset.tags[3].segment_index == 7);
    // a small enough bank is returned unchanged
    CHECK(select_primitives(bank, 20).size() == 10);
}

TEST_CASE("learning upper trains toward a planted oracle primitive") {
    // constant demo: every normalized state is 0, so the planted primitive
    // (constant 0) is exact and the decoys are far off
    Demonstration demo;
    demo.id = "const";
    demo.leader.dt = demo.follower.dt = 0.01;
    RobotState s(3);
    s.theta << 0.2, 0.4, 0.6;
    for (int k = 0; k < 60; ++k) {
        demo.leader.states.push_back(s);
        demo.follower.states.push_back(s);
    }
    const NormStats stats = compute_norm_stats({demo.leader, demo.follower});

    LowerBank bank;
    bank.stats = stats;
    bank.horizon = 5;
    bank.primitives.push_back(constant_mlp(Vec::Zero(kDim)));  // the oracle
    bank.primitives.push_back(constant_mlp(Vec::Constant(kDim, 5.0)));
    bank.primitives.push_back(constant_mlp(Vec::Constant(kDim, 3.0)));
    for (int p = 0; p < 3; ++p) bank.tags.push_back({"bank", p});

    LearningUpperModel upper = init_learning_upper(stats, 8, 1, 5, 3, 11);

    SUBCASE("zero epochs leave the upper untouched") {
        const Mat before = upper.lstm.w_out;
        TrainConfig cfg;
        cfg.epochs = 0;
        const auto history = train_learning_upper(upper, bank, {demo}, cfg);
        CHECK(history.empty());
        CHECK(upper.lstm.w_out == before);
    }

    SUBCASE("training concentrates proportions on the oracle") {
        TrainConfig cfg;
        cfg.epochs = 800;
        cfg.learning_rate = 2e-2;
        cfg.seed = 3;
        const auto history = train_learning_upper(upper, bank, {demo}, cfg);
        CHECK(history.back() < history.front());

        LearningProportionController controller(upper, bank);
        controller.step(demo.follower.states[0]);
        controller.step(demo.follower.states[1]);
        CHECK(controller.last_weights()[0] > 0.9);
    }
}

TEST_CASE("learning upper loss history trends down") {
    Rng rng(12);
    Demonstration demo;
    demo.id = "wave";
    demo.leader.dt = demo.follower.dt = 0.01;
    for (int k = 0; k < 80; ++k) {
        RobotState l(3), f(3);
        for (int j = 0; j < 3; ++j) {
            l.theta[j] = std::sin(0.06 * k + j);
            f.theta[j] = std::sin(0.06 * k + j - 0.05);
            l.omega[j] = 0.06 * std::cos(0.06 * k + j);
            f.omega[j] = 0.06 * std::cos(0.06 * k + j - 0.05);
        }
        demo.leader.states.push_back(l);
        demo.follower.states.push_back(f);
    }
    const NormStats stats = compute_norm_stats({demo.leader, demo.follower});
    LowerBank bank = random_bank(4, rng, 6);
    bank.stats = stats;

    LearningUpperModel upper = init_learning_upper(stats, 10, 1, 6, 4, 21);
    TrainConfig cfg;
    cfg.epochs = 60;
    cfg.learning_rate = 2e-3;
    const auto history = train_learning_upper(upper, bank, {demo}, cfg);

    // allow transient bumps of up to 5%, require an overall decrease
    int bumps = 0;
    for (std::size_t i = 1; i < history.size(); ++i)
        if (history[i] > history[i - 1] * 1.05) ++bumps;
    CHECK(bumps < static_cast<int>(history.size()) / 10);
    CHECK(history.back() < 0.7 * history.front());
}
