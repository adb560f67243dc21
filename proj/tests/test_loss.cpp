#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "dsnet/gradcheck.hpp"
#include "dsnet/loss.hpp"
#include "dsnet/rng.hpp"

using namespace dsnet;

namespace {

Tensor binary_tensor(Shape s, const std::vector<int>& ones) {
    Tensor t(s, 0.0f);
    for (int i : ones) t.data[static_cast<std::size_t>(i)] = 1.0f;
    return t;
}

std::vector<int> range_vec(int lo, int hi) {
    std::vector<int> v;
    for (int i = lo; i < hi; ++i) v.push_back(i);
    return v;
}

}  // namespace

TEST_CASE("dice_binary identity, disjoint, and half-overlap") {
    const Shape s{1, 1, 2, 2};
    Tensor a = binary_tensor(s, {0, 1});
    REQUIRE(dice_binary(a, a) == 1.0);

    Tensor b = binary_tensor(s, {2, 3});
    REQUIRE(dice_binary(a, b) == 0.0);

    Tensor p = binary_tensor(s, {0, 1});
    Tensor q = binary_tensor(s, {0, 2});
    REQUIRE(dice_binary(p, q) == 0.5);  // 2*1/(2+2)
}

TEST_CASE("dice_binary defines empty-vs-empty as 1 and rejects non-binary") {
    const Shape s{1, 1, 2, 2};
    Tensor empty1(s, 0.0f), empty2(s, 0.0f);
    REQUIRE(dice_binary(empty1, empty2) == 1.0);

    Tensor soft(s, 0.5f);
    Tensor bin = binary_tensor(s, {0});
    REQUIRE_THROWS_AS(dice_binary(soft, bin), ContractError);
    REQUIRE_THROWS_AS(dice_binary(bin, soft), ContractError);
}

TEST_CASE("soft dice of a perfect binary prediction is ~0") {
    const Shape s{1, 1, 4, 4};
    Tensor q = binary_tensor(s, {0, 5, 10, 15});
    REQUIRE(soft_dice_loss_value(q, q) < 1e-5);
    REQUIRE(soft_dice_loss_value(q, q) >= 0.0);
}

TEST_CASE("soft dice hand value: uniform 0.5 against half-ones") {
    Tensor p(Shape{1, 1, 2, 2}, 0.5f);
    Tensor q = binary_tensor(Shape{1, 1, 2, 2}, {0, 1});
    // 2*1.0 / (1.0 + 2.0) = 2/3, loss = 1/3
    REQUIRE_THAT(soft_dice_loss_value(p, q), Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-6));

    Tape<float> tape;
    Value loss = soft_dice_loss(tape, tape.leaf(p), q);
    REQUIRE_THAT(tape.scalar_value(loss), Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-6));
}

TEST_CASE("soft dice rejects shape mismatch") {
    Tensor p(Shape{1, 1, 2, 2}, 0.5f);
    Tensor q(Shape{1, 1, 2, 3}, 0.0f);
    Tape<float> tape;
    REQUIRE_THROWS_AS(soft_dice_loss(tape, tape.leaf(p), q), DimensionError);
}

TEST_CASE("soft dice gradient matches finite differences") {
    Rng rng(21);
    Tensor prob(Shape{1, 1, 4, 4});
    for (float& v : prob.data) v = static_cast<float>(rng.uniform(0.1, 0.9));
    Tensor truth(prob.shape);
    for (float& v : truth.data) v = rng.below(2) ? 1.0f : 0.0f;

    prob.zero_grad();
    {
        Tape<float> tape;
        tape.backward(soft_dice_loss(tape, tape.param(prob), truth));
    }
    BasicTensor<double> prob64 = prob.cast<double>();
    const BasicTensor<double> truth64 = truth.cast<double>();
    auto eval64 = [&] {
        Tape<double> tape;
        return tape.scalar_value(soft_dice_loss(tape, tape.leaf(prob64), truth64));
    };
    std::vector<GradCheckParamView> views;
    views.push_back({"prob", &prob64, {prob.grad.begin(), prob.grad.end()}});
    GradCheckOptions opts;
    opts.tol = 1e-3;
    const GradCheckReport report = finite_diff_check_core(std::move(views), eval64, opts);
    INFO(report.summary());
    REQUIRE(report.pass);
}

TEST_CASE("1 - soft dice agrees with dice_binary on binary inputs") {
    Rng rng(22);
    for (int iter = 0; iter < 200; ++iter) {
        const int h = 1 + static_cast<int>(rng.below(8));
        const int w = 1 + static_cast<int>(rng.below(8));
        Tensor a(Shape{1, 1, h, w}), b(Shape{1, 1, h, w});
        for (float& v : a.data) v = rng.below(2) ? 1.0f : 0.0f;
        for (float& v : b.data) v = rng.below(2) ? 1.0f : 0.0f;
        const double set_form = dice_binary(a, b);
        const double soft_form = 1.0 - soft_dice_loss_value(a, b);
        REQUIRE_THAT(soft_form, Catch::Matchers::WithinAbs(set_form, 1e-5));
    }
}

TEST_CASE("soft dice is symmetric for binary inputs") {
    Rng rng(23);
    for (int iter = 0; iter < 50; ++iter) {
        Tensor a(Shape{1, 1, 4, 4}), b(Shape{1, 1, 4, 4});
        for (float& v : a.data) v = rng.below(2) ? 1.0f : 0.0f;
        for (float& v : b.data) v = rng.below(2) ? 1.0f : 0.0f;
        REQUIRE(soft_dice_loss_value(a, b) == soft_dice_loss_value(b, a));
    }
}

TEST_CASE("raising probability on a true-foreground pixel never increases the loss") {
    Rng rng(24);
    for (int iter = 0; iter < 30; ++iter) {
        Tensor prob(Shape{1, 1, 4, 4});
        for (float& v : prob.data) v = static_cast<float>(rng.uniform(0.05, 0.95));
        Tensor truth(prob.shape);
        for (float& v : truth.data) v = rng.below(2) ? 1.0f : 0.0f;
        // pick a true-foreground pixel
        int idx = -1;
        for (std::size_t i = 0; i < truth.data.size(); ++i)
            if (truth.data[i] == 1.0f) idx = static_cast<int>(i);
        if (idx < 0) continue;
        double prev = soft_dice_loss_value(prob, truth);
        for (float p = prob.data[idx]; p <= 1.0f; p += 0.05f) {
            prob.data[idx] = p;
            const double cur = soft_dice_loss_value(prob, truth);
            REQUIRE(cur <= prev + 1e-12);
            prev = cur;
        }
    }
}

TEST_CASE("supervised loss weighting") {
    const Shape s{1, 1, 4, 5};
    // head with soft-dice loss 0.3: overlap 7, |p|=9, |q|=11 -> 14/20
    Tensor q1 = binary_tensor(s, {0, 1, 2, 3, 4, 5, 6, 9, 10, 11, 12});
    Tensor p1 = binary_tensor(s, range_vec(0, 9));
    REQUIRE_THAT(soft_dice_loss_value(p1, q1), Catch::Matchers::WithinAbs(0.3, 1e-6));

    Tape<float> tape;
    Value truth = tape.leaf(q1);
    std::vector<Value> heads{tape.leaf(p1), truth};

    SECTION("all-zero alphas give zero regardless of head losses") {
        SupervisionWeights<float> w;
        w.alpha = {0.0f, 0.0f};
        w.main_weight = 1.0f;
        Value sup = supervised_loss(tape, heads, truth, w);
        REQUIRE(tape.scalar_value(sup) == 0.0);
    }
    SECTION("alpha = [2, 0] doubles the first head loss") {
        SupervisionWeights<float> w;
        w.alpha = {2.0f, 0.0f};
        Value sup = supervised_loss(tape, heads, truth, w);
        REQUIRE_THAT(tape.scalar_value(sup), Catch::Matchers::WithinAbs(0.6, 1e-6));
    }
    SECTION("unit alphas sum the losses") {
        // losses 0.3 and 0.0 -> 0.3; then a second pair with 0.2 + 0.4 analogue
        SupervisionWeights<float> w;
        w.alpha = {1.0f, 1.0f};
        Value sup = supervised_loss(tape, heads, truth, w);
        REQUIRE_THAT(tape.scalar_value(sup), Catch::Matchers::WithinAbs(0.3, 1e-6));
    }
    SECTION("count mismatch is rejected") {
        SupervisionWeights<float> w;
        w.alpha = {1.0f, 1.0f, 1.0f};
        REQUIRE_THROWS_AS(supervised_loss(tape, heads, truth, w), ContractError);
    }
}

TEST_CASE("weighted sum of scalar losses 0.2 + 0.4") {
    Tape<float> tape;
    std::vector<Value> losses{tape.leaf(Tensor(Shape{1, 1, 1, 1}, 0.2f)),
                              tape.leaf(Tensor(Shape{1, 1, 1, 1}, 0.4f))};
    SupervisionWeights<float> w;
    w.alpha = {1.0f, 1.0f};
    REQUIRE_THAT(tape.scalar_value(weighted_loss_sum(tape, losses, w)),
                 Catch::Matchers::WithinAbs(0.6, 1e-7));
}

TEST_CASE("total objective composes supervised and main terms") {
    const Shape s{1, 1, 4, 5};
    Tensor q_heads = binary_tensor(s, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10});  // |q|=11
    Tensor p_heads = binary_tensor(s, range_vec(0, 9));  // 9 ones inside q -> 18/20, loss 0.1

    SECTION("hand sum: 8 heads at 0.1 plus main 0.2 gives 1.0") {
        // main loss 0.2: overlap 8, |p|=8, |q|=12 -> 16/20
        Tensor q_main = binary_tensor(s, range_vec(0, 12));
        Tensor p_main = binary_tensor(s, range_vec(0, 8));
        REQUIRE_THAT(soft_dice_loss_value(p_heads, q_heads),
                     Catch::Matchers::WithinAbs(0.1, 1e-6));
        REQUIRE_THAT(soft_dice_loss_value(p_main, q_main),
                     Catch::Matchers::WithinAbs(0.2, 1e-6));

        // same truth must serve heads and main; rebuild via two objectives is
        // unfaithful, so check the composed report against the hand sum using
        // head probs that hit 0.1 against q_heads and a main prob hitting 0.2.
        // p with overlap 8 of q_heads (|q|=11): |p|=9 ones, 8 inside ->
        // (16+eps)/(9+11+eps) = 0.8 -> loss 0.2
        Tensor p_main2 = binary_tensor(s, {0, 1, 2, 3, 4, 5, 6, 7, 12});
        REQUIRE_THAT(soft_dice_loss_value(p_main2, q_heads),
                     Catch::Matchers::WithinAbs(0.2, 1e-6));

        Tape<float> tape;
        std::vector<Value> heads(8, tape.leaf(p_heads));
        ObjectiveValues<float> obj = total_objective(
            tape, tape.leaf(p_main2), heads, q_heads, SupervisionWeights<float>::uniform(8));
        REQUIRE_THAT(obj.report.total, Catch::Matchers::WithinAbs(1.0, 1e-5));
        REQUIRE_THAT(obj.report.supervised_sum, Catch::Matchers::WithinAbs(0.8, 1e-5));
        REQUIRE_THAT(obj.report.main_loss, Catch::Matchers::WithinAbs(0.2, 1e-6));
        REQUIRE(obj.report.head_losses.size() == 8);
        // report total reproduces from parts
        double resum = obj.report.main_loss;
        for (double l : obj.report.head_losses) resum += l;
        REQUIRE_THAT(obj.report.total, Catch::Matchers::WithinAbs(resum, 1e-7));
        // tape value tracks the report at float precision
        REQUIRE_THAT(tape.scalar_value(obj.total),
                     Catch::Matchers::WithinAbs(obj.report.total, 1e-5));
    }

    SECTION("perfect predictions give ~0 total") {
        Tape<float> tape;
        std::vector<Value> heads(3, tape.leaf(q_heads));
        ObjectiveValues<float> obj = total_objective(
            tape, tape.leaf(q_heads), heads, q_heads, SupervisionWeights<float>::uniform(3));
        REQUIRE(obj.report.total < 1e-5);
    }

    SECTION("all-zero alpha reduces the total to the main loss exactly") {
        Tape<float> tape;
        std::vector<Value> heads(2, tape.leaf(p_heads));
        SupervisionWeights<float> w;
        w.alpha = {0.0f, 0.0f};
        ObjectiveValues<float> obj =
            total_objective(tape, tape.leaf(p_heads), heads, q_heads, w);
        REQUIRE(obj.report.total == obj.report.main_loss);
        REQUIRE(obj.report.supervised_sum == 0.0);
    }
}

TEST_CASE("gradient of the total objective is linear in its parts") {
    Rng rng(25);
    Tensor prob(Shape{1, 1, 4, 4});
    for (float& v : prob.data) v = static_cast<float>(rng.uniform(0.1, 0.9));
    Tensor truth(prob.shape);
    for (float& v : truth.data) v = rng.below(2) ? 1.0f : 0.0f;

    SupervisionWeights<float> w;
    w.alpha = {0.7f, 1.3f};
    w.main_weight = 0.5f;

    // shared prob feeding main and both heads: grad(total) must equal
    // 0.5*g + 0.7*g + 1.3*g for the single-loss gradient g
    prob.zero_grad();
    {
        Tape<float> tape;
        Value p = tape.param(prob);
        ObjectiveValues<float> obj = total_objective(tape, p, {p, p}, truth, w);
        tape.backward(obj.total);
    }
    const std::vector<float> combined = prob.grad;

    prob.zero_grad();
    {
        Tape<float> tape;
        tape.backward(soft_dice_loss(tape, tape.param(prob), truth));
    }
    const std::vector<float> single = prob.grad;
    for (std::size_t i = 0; i < combined.size(); ++i)
        REQUIRE_THAT(combined[i],
                     Catch::Matchers::WithinAbs(2.5f * single[i], 1e-6));
}

TEST_CASE("class imbalance: all-background prediction on a tiny foreground is ~1") {
    Tensor truth(Shape{1, 1, 64, 64}, 0.0f);  // 4x4 block = 0.39% of the image
    for (int y = 30; y < 34; ++y)
        for (int x = 30; x < 34; ++x) truth.at(0, 0, y, x) = 1.0f;
    Tensor pred(truth.shape, 0.0f);
    const double loss = soft_dice_loss_value(pred, truth);
    REQUIRE(loss >= 0.99);
    REQUIRE_THAT(loss, Catch::Matchers::WithinAbs(1.0, 1e-6));
}

TEST_CASE("supervision weights validation") {
    SupervisionWeights<float> w;
    w.alpha = {1.0f, -0.1f};
    REQUIRE_THROWS_AS(w.validate(2), ContractError);
    w.alpha = {0.0f, 0.0f};
    w.main_weight = 0.0f;
    REQUIRE_THROWS_AS(w.validate(2), ContractError);
    w.main_weight = 1.0f;
    REQUIRE_NOTHROW(w.validate(2));
}
