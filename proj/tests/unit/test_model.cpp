#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "lidarharm/error.hpp"
#include "lidarharm/network.hpp"
#include "lidarharm/optim.hpp"
#include "lidarharm/train.hpp"
#include "oracles.hpp"

using namespace lidarharm;

TEST(Layout, BlockShapes)
{
    const auto layout = model_layout();
    ASSERT_EQ(layout.size(), 13u);
    EXPECT_EQ(layout[0], (BlockSpec{"pointnet.w1", 64, 4}));
    EXPECT_EQ(layout[2], (BlockSpec{"pointnet.w2", 128, 64}));
    EXPECT_EQ(layout[8], (BlockSpec{"embedding", 45, 3}));
    EXPECT_EQ(layout[9], (BlockSpec{"head.w1", 100, 4}));
    EXPECT_EQ(layout[12], (BlockSpec{"head.b2", 1, 0}));
}

TEST(Forward, SameSensorGivesZeroEmbeddingInput)
{
    const ParamSet p = oracle::random_params(1);
    Rng rng = make_rng(2, {});
    const auto nb = oracle::random_neighbors(rng, 6);
    ForwardTrace t;
    forward(p, nb, 7, 7, {}, t);
    for (Eigen::Index j = 1; j < t.head.input.size(); ++j)
        EXPECT_EQ(t.head.input[j], 0.0);
    EXPECT_EQ(t.head.input[0], t.interp);
}

TEST(Forward, PermutationInvariantBitExact)
{
    const ParamSet p = oracle::random_params(3);
    Rng rng = make_rng(4, {});
    for (int trial = 0; trial < 20; ++trial) {
        auto nb = oracle::random_neighbors(rng, 2 + uniform_index(rng, 30));
        const Prediction a = predict(p, nb, 1, 2);
        std::shuffle(nb.begin(), nb.end(), rng);
        const Prediction b = predict(p, nb, 1, 2);
        EXPECT_EQ(a.interp, b.interp);
        EXPECT_EQ(a.harmonized, b.harmonized);
    }
}

TEST(Forward, MatchesScalarReference)
{
    Rng rng = make_rng(5, {});
    for (int trial = 0; trial < 25; ++trial) {
        const ParamSet p = oracle::random_params(100 + trial);
        const Example ex = oracle::random_example(rng, 1, 40);
        const Prediction got = predict(p, ex.neighbors, ex.source_id, ex.target_id);
        const auto ref = oracle::forward(p, ex.neighbors, ex.source_id, ex.target_id);
        EXPECT_NEAR(got.interp, ref.interp, 1e-12);
        EXPECT_NEAR(got.harmonized, ref.harmonized, 1e-12);
    }
}

TEST(Forward, EvalModeDeterministicAndOutputsInUnitInterval)
{
    const ParamSet p = oracle::random_params(6);
    Rng rng = make_rng(7, {});
    const auto nb = oracle::random_neighbors(rng, 10);
    const Prediction a = predict(p, nb, 0, 1), b = predict(p, nb, 0, 1);
    EXPECT_EQ(a.interp, b.interp);
    EXPECT_EQ(a.harmonized, b.harmonized);
    EXPECT_GT(a.interp, 0.0);
    EXPECT_LT(a.interp, 1.0);
}

TEST(Forward, RejectsBadInput)
{
    const ParamSet p = oracle::random_params(1);
    EXPECT_THROW(predict(p, {}, 0, 1), DomainError);
    Rng rng = make_rng(1, {});
    const auto nb = oracle::random_neighbors(rng, 3);
    EXPECT_THROW(predict(p, nb, 45, 1), DomainError);
}

TEST(Loss, Examples)
{
    const LossTerms l1 = loss(0.4, 0.6, 0.5, 0.5, LossKind::l1);
    EXPECT_NEAR(l1.interp, 0.1, 1e-12);
    EXPECT_NEAR(l1.harmonized, 0.1, 1e-12);
    EXPECT_NEAR(l1.total, 0.2, 1e-12);
    const LossTerms l2 = loss(0.4, 0.6, 0.5, 0.5, LossKind::l2);
    EXPECT_NEAR(l2.total, 0.02, 1e-12);
    EXPECT_EQ(rho_grad(0.5, 0.5, LossKind::l1), 0.0);
    EXPECT_EQ(rho_grad(0.7, 0.5, LossKind::l1), 1.0);
    EXPECT_EQ(rho_grad(0.3, 0.5, LossKind::l1), -1.0);
}

TEST(Backward, ZeroLossGivesZeroGradient)
{
    const ParamSet p = oracle::random_params(8);
    Rng rng = make_rng(9, {});
    Example ex = oracle::random_example(rng, 4, 4);
    const Prediction pr = predict(p, ex.neighbors, ex.source_id, ex.target_id);
    ex.gt_interp = static_cast<float>(pr.interp);
    ex.gt_harm = static_cast<float>(pr.harmonized);
    ParamSet grad(p.layout());
    ForwardTrace t;
    forward(p, ex, {}, t);
    backward(p, t, rho_grad(t.interp, t.interp, LossKind::l2), rho_grad(t.head.output, t.head.output, LossKind::l2),
             grad);
    for (double g : grad.values())
        ASSERT_EQ(g, 0.0);
}

TEST(Backward, OnlyUsedEmbeddingRowsGetGradient)
{
    const ParamSet p = oracle::random_params(10);
    Rng rng = make_rng(11, {});
    Example ex = oracle::random_example(rng, 5, 5);
    ex.source_id = 3;
    ex.target_id = 9;
    ParamSet grad(p.layout());
    example_objective(p, ex, LossKind::l1, {}, &grad);
    const auto emb = grad.matrix(grad.block_index("embedding"));
    for (Eigen::Index r = 0; r < emb.rows(); ++r) {
        const double n = emb.row(r).norm();
        if (r == 3 || r == 9)
            EXPECT_GT(n, 0.0);
        else
            EXPECT_EQ(n, 0.0) << "row " << r;
    }
}

TEST(Backward, MatchesFiniteDifferences)
{
    Rng rng = make_rng(12, {});
    for (int trial = 0; trial < 4; ++trial) {
        const ParamSet p = oracle::random_params(200 + trial);
        const Example ex = oracle::random_example(rng, 2, 8);
        const auto r = oracle::check_gradient(p, ex);
        EXPECT_EQ(r.failures, 0u) << "worst " << r.worst_rel;
        EXPECT_GT(r.checked, p.size() * 9 / 10);
    }
}

TEST(Checkpoint, RoundTripBitExact)
{
    const ParamSet p = oracle::random_params(13);
    const auto bytes = encode_checkpoint(p);
    EXPECT_EQ(decode_checkpoint(bytes, model_layout()), p);
}

TEST(Checkpoint, TruncatedAndMismatchedRejected)
{
    const ParamSet p = oracle::random_params(13);
    auto bytes = encode_checkpoint(p);
    auto cut = bytes;
    cut.resize(cut.size() / 2);
    EXPECT_THROW(decode_checkpoint(cut, model_layout()), FormatError);

    ModelShape big;
    big.dictionary = 46;
    const ParamSet q(model_layout(big));
    try {
        decode_checkpoint(encode_checkpoint(q), model_layout());
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("embedding"), std::string::npos) << e.what();
    }
}

TEST(Adam, HandComputedFirstSteps)
{
    ParamSet p({{"w", 2, 0}});
    p.values()[0] = 1.0;
    p.values()[1] = -1.0;
    AdamState s(p.size());
    const std::vector<double> g = {0.5, -2.0};
    adam_step(p, g, 0.1, s);
    // bias-corrected first step moves each coordinate by about lr * sign(g)
    EXPECT_NEAR(p.values()[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
    EXPECT_NEAR(p.values()[1], -1.0 + 0.1 * 2.0 / (2.0 + 1e-8), 1e-15);
    EXPECT_NEAR(s.m[0], 0.05, 1e-15);
    EXPECT_NEAR(s.v[0], 0.00025, 1e-15);

    adam_step(p, g, 0.1, s);
    const double m = 0.9 * 0.05 + 0.1 * 0.5, v = 0.999 * 0.00025 + 0.001 * 0.25;
    const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
    EXPECT_NEAR(p.values()[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8) - 0.1 * mh / (std::sqrt(vh) + 1e-8), 1e-15);
}

TEST(Adam, ZeroGradientWithZeroMomentumKeepsParams)
{
    ParamSet p({{"w", 3, 0}});
    p.values()[0] = 0.25;
    AdamState s(p.size());
    s.v = {1.0, 1.0, 1.0};
    const std::vector<double> g(3, 0.0);
    adam_step(p, g, 0.1, s);
    EXPECT_EQ(p.values()[0], 0.25);
    EXPECT_NEAR(s.v[0], 0.999, 1e-15);
}

TEST(Adam, SymmetricBlocksStaySymmetric)
{
    ParamSet p({{"w", 2, 2}});
    for (double& x : p.values())
        x = 0.3;
    AdamState s(p.size());
    const std::vector<double> g = {0.2, 0.2, 0.2, 0.2};
    for (int i = 0; i < 5; ++i)
        adam_step(p, g, 0.01, s);
    for (double x : p.values())
        EXPECT_EQ(x, p.values()[0]);
}

TEST(Adam, NonFiniteGradientAborts)
{
    ParamSet p({{"w", 2, 0}});
    AdamState s(p.size());
    const std::vector<double> g = {0.0, std::numeric_limits<double>::quiet_NaN()};
    try {
        adam_step(p, g, 0.1, s);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("w"), std::string::npos);
    }
    EXPECT_EQ(s.step, 0u);
    EXPECT_EQ(p.values()[0], 0.0);
}

TEST(Schedule, CyclicalValues)
{
    const ScheduleConfig c;
    EXPECT_DOUBLE_EQ(cyclical_lr(0, 0, 100, c), 1e-7);
    EXPECT_DOUBLE_EQ(cyclical_lr(0, 50, 100, c), 1e-3);
    EXPECT_DOUBLE_EQ(cyclical_lr(1, 50, 100, c), 8e-4);
    EXPECT_DOUBLE_EQ(cyclical_peak(200, c), 1e-7);
    EXPECT_THROW(cyclical_lr(0, 100, 100, c), DomainError);
}

namespace {

std::vector<Example> toy_examples(std::size_t n, std::uint64_t seed)
{
    Rng rng = make_rng(seed, {});
    std::vector<Example> out;
    for (std::size_t i = 0; i < n; ++i) {
        Example e = oracle::random_example(rng, 3, 6);
        e.source_id = static_cast<std::uint16_t>(uniform_index(rng, 3));
        e.target_id = 1;
        double mean = 0;
        for (const auto& f : e.neighbors)
            mean += f.intensity;
        mean /= static_cast<double>(e.neighbors.size());
        e.gt_interp = static_cast<float>(mean);
        e.gt_harm = static_cast<float>(std::sqrt(mean));
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace

TEST(Training, DeterministicAcrossThreadCounts)
{
    const auto train_set = toy_examples(120, 1), val_set = toy_examples(20, 2);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch = 16;
    cfg.seed = 5;
    const TrainResult a = train(train_set, val_set, cfg, {}, 1);
    const TrainResult b = train(train_set, val_set, cfg, {}, 3);
    EXPECT_EQ(a.params, b.params);
    EXPECT_EQ(history_csv(a.history), history_csv(b.history));
    EXPECT_FALSE(a.diverged);
}

TEST(Training, HistoryFollowsSchedule)
{
    const auto train_set = toy_examples(100, 3), val_set = toy_examples(10, 4);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch = 20;
    const TrainResult r = train(train_set, val_set, cfg);
    std::size_t train_rows = 0;
    for (const HistoryRow& row : r.history) {
        if (row.split != Split::train)
            continue;
        ++train_rows;
        EXPECT_DOUBLE_EQ(row.lr, cyclical_lr(row.epoch, row.step, 5, cfg.schedule));
    }
    EXPECT_EQ(train_rows, 15u);
    EXPECT_EQ(history_csv(r.history).substr(0, 42), "epoch,step,lr,loss_I,loss_H,loss_total,spl");
}

TEST(Training, LossDecreasesOnToyProblem)
{
    const auto train_set = toy_examples(400, 5), val_set = toy_examples(40, 6);
    TrainConfig cfg;
    cfg.epochs = 8;
    cfg.batch = 20;
    cfg.schedule.lr_max = 3e-3;
    const TrainResult r = train(train_set, val_set, cfg);
    double first = -1, best = 1e9;
    for (const HistoryRow& row : r.history)
        if (row.split == Split::val) {
            if (first < 0)
                first = row.loss_total;
            best = std::min(best, row.loss_total);
        }
    EXPECT_LT(best, first);
    EXPECT_DOUBLE_EQ(best, r.best_val_loss);
}

TEST(Training, InvalidConfigRejected)
{
    TrainConfig cfg;
    cfg.batch = 0;
    EXPECT_THROW(validate(cfg), DomainError);
}
