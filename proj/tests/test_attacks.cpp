#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "fedbba/attacks.hpp"
#include "fedbba/engine.hpp"
#include "fedbba/errors.hpp"

using namespace fedbba;

namespace {

AttackPlan one_to_one(double intensity = 1.0, int target = 9) {
    AttackPlan p;
    p.triggers = {TriggerSpec::row(0, 8, intensity)};
    p.targets = {target};
    return p;
}

bool row_is(std::span<const double> image, std::size_t r, double value) {
    for (std::size_t c = 0; c < 8; ++c)
        if (image[r * 8 + c] != value) return false;
    return true;
}

} // namespace

TEST_CASE("apply_trigger examples") {
    const Vector img(64, 0.3);
    CHECK(apply_trigger(img, TriggerSpec{{}, 1.0}) == img);

    const Vector zero(64, 0.0);
    const Vector stamped = apply_trigger(zero, TriggerSpec::row(0, 8, 1.0));
    for (std::size_t p = 0; p < 64; ++p) CHECK(stamped[p] == (p < 8 ? 1.0 : 0.0));

    const TriggerSpec t{{3, 17, 40}, 0.6};
    CHECK(apply_trigger(apply_trigger(img, t), t) == apply_trigger(img, t));

    CHECK_THROWS_AS(apply_trigger(zero, TriggerSpec{{64}, 1.0}), InvalidInput);
    CHECK_THROWS_AS(apply_trigger(zero, TriggerSpec{{0}, 1.5}), InvalidInput);
}

TEST_CASE("poison_dataset examples") {
    RngStream rng(1, 0);
    const ImageDataset ds = generate_dataset(10, 10, 8, 8, 0.1, rng);

    const ImageDataset none = poison_dataset(ds, one_to_one(), 0.0, rng);
    CHECK(none.images == ds.images);
    CHECK(none.labels == ds.labels);

    const ImageDataset all = poison_dataset(ds, one_to_one(), 1.0, rng);
    for (std::size_t i = 0; i < all.size(); ++i) {
        CHECK(row_is(all.images.row(i), 0, 1.0));
        CHECK(all.labels[i] == 9);
    }

    // Noisy pixels essentially never land exactly on 0.77, so a fully 0.77
    // first row marks a poisoned sample.
    const ImageDataset half = poison_dataset(ds, one_to_one(0.77), 0.5, rng);
    std::size_t stamped = 0;
    for (std::size_t i = 0; i < half.size(); ++i) stamped += row_is(half.images.row(i), 0, 0.77) ? 1 : 0;
    CHECK(half.size() == 100);
    CHECK(stamped == 50);
}

TEST_CASE("poisoning preserves cardinality and leaves other rows bit-identical") {
    RngStream rng(2, 0);
    const ImageDataset ds = generate_dataset(10, 7, 8, 8, 0.1, rng);
    for (double rho : {0.0, 0.13, 0.5, 0.77, 1.0}) {
        const ImageDataset out = poison_dataset(ds, one_to_one(0.77), rho, rng);
        REQUIRE(out.size() == ds.size());
        std::size_t changed = 0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const bool same_image =
                std::equal(out.images.row(i).begin(), out.images.row(i).end(), ds.images.row(i).begin());
            if (same_image && out.labels[i] == ds.labels[i]) continue;
            ++changed;
            CHECK(row_is(out.images.row(i), 0, 0.77));
            for (std::size_t p = 8; p < 64; ++p) CHECK(out.images(i, p) == ds.images(i, p));
        }
        CHECK(changed == static_cast<std::size_t>(std::floor(rho * static_cast<double>(ds.size()))));
    }
}

TEST_CASE("one-to-n poisoning is round-robin over trigger/target pairs") {
    RngStream rng(3, 0);
    const ImageDataset ds = generate_dataset(10, 10, 8, 8, 0.1, rng);
    AttackPlan plan;
    plan.family = AttackFamily::OneToN;
    plan.triggers = {TriggerSpec::row(0, 8, 0.9), TriggerSpec::row(0, 8, 0.6), TriggerSpec::row(7, 8, 0.7)};
    plan.targets = {9, 8, 7};
    for (double rho : {0.31, 0.5, 1.0}) {
        const ImageDataset out = poison_dataset(ds, plan, rho, rng);
        std::map<int, int> counts;
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (row_is(out.images.row(i), 0, 0.9)) {
                CHECK(out.labels[i] == 9);
                ++counts[0];
            } else if (row_is(out.images.row(i), 0, 0.6)) {
                CHECK(out.labels[i] == 8);
                ++counts[1];
            } else if (row_is(out.images.row(i), 7, 0.7)) {
                CHECK(out.labels[i] == 7);
                ++counts[2];
            }
        }
        int total = 0, lo = 1 << 30, hi = 0;
        for (int k = 0; k < 3; ++k) {
            total += counts[k];
            lo = std::min(lo, counts[k]);
            hi = std::max(hi, counts[k]);
        }
        CHECK(total == static_cast<int>(std::floor(rho * 100.0)));
        CHECK(hi - lo <= 1);
    }
}

TEST_CASE("n-to-one poisoning stamps every trigger") {
    RngStream rng(4, 0);
    const ImageDataset ds = generate_dataset(10, 10, 8, 8, 0.1, rng);
    AttackPlan plan;
    plan.family = AttackFamily::NToOne;
    plan.triggers = {TriggerSpec::row(0, 8, 1.0), TriggerSpec::row(7, 8, 1.0)};
    plan.targets = {9};
    const ImageDataset out = poison_dataset(ds, plan, 1.0, rng);
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(row_is(out.images.row(i), 0, 1.0));
        CHECK(row_is(out.images.row(i), 7, 1.0));
        CHECK(out.labels[i] == 9);
    }
}

TEST_CASE("triggered test sets") {
    RngStream rng(5, 0);
    const ImageDataset ds = generate_dataset(10, 10, 8, 8, 0.1, rng);
    const ImageDataset t = build_triggered_testset(ds, one_to_one());
    CHECK(t.size() == 90);
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(t.labels[i] == 9);
        CHECK(row_is(t.images.row(i), 0, 1.0));
    }

    AttackPlan n;
    n.family = AttackFamily::NToOne;
    n.triggers = {TriggerSpec::row(0, 8, 1.0), TriggerSpec::row(7, 8, 1.0)};
    n.targets = {9};
    const ImageDataset full = build_triggered_testset(ds, n);
    const ImageDataset partial = build_partial_trigger_testset(ds, n, 1);
    REQUIRE(partial.size() == full.size());
    for (std::size_t i = 0; i < full.size(); ++i) {
        CHECK(row_is(full.images.row(i), 0, 1.0));
        CHECK(row_is(full.images.row(i), 7, 1.0));
        CHECK(row_is(partial.images.row(i), 0, 1.0));
        // Test samples of non-target classes come first, in order.
        for (std::size_t p = 56; p < 64; ++p) CHECK(partial.images(i, p) == ds.images(i, p));
    }
    CHECK_THROWS_AS(build_partial_trigger_testset(ds, one_to_one(), 0), InvalidInput);

    const ImageDataset only_targets = ds.subset({90, 91, 92});
    CHECK_THROWS_AS(build_triggered_testset(only_targets, one_to_one()), InvalidInput);
}

TEST_CASE("replacement updates") {
    RngStream rng(6, 0);
    const ImageDataset ds = generate_dataset(10, 10, 8, 8, 0.1, rng);
    const ImageDataset poisoned = poison_dataset(ds, one_to_one(), 0.5, rng);
    RngStream init(6, 1);
    const ModelParams global = init_model({64, 32, 10}, init);

    RngStream a(6, 2), b(6, 2);
    CHECK(craft_replacement_update(global, poisoned, TrainConfig{}, 1.0, a) ==
          train_local(global, poisoned, TrainConfig{}, b));

    // Boost N against N−1 unchanged clients: uniform averaging lands on the
    // fine-tuned model.
    const std::size_t n = 20;
    RngStream c(6, 3), d(6, 3);
    const ModelParams boosted = craft_replacement_update(global, poisoned, TrainConfig{}, static_cast<double>(n), c);
    const ModelParams trained = train_local(global, poisoned, TrainConfig{}, d);
    std::vector<ModelParams> models(n, global);
    models[0] = boosted;
    const ModelParams avg = aggregate(models, std::vector<double>(n, 1.0 / static_cast<double>(n)));
    for (std::size_t i = 0; i < avg.flat.size(); ++i) CHECK(avg.flat[i] == doctest::Approx(trained.flat[i]).epsilon(1e-9));

    RngStream e(6, 4);
    CHECK_THROWS_AS(craft_replacement_update(global, poisoned, TrainConfig{}, 0.5, e), InvalidInput);
}

TEST_CASE("a replacement model trained on clean data has no backdoor") {
    RngStream rng(7, 0);
    const ImageDataset train = generate_dataset(10, 30, 8, 8, 0.1, rng);
    const ImageDataset test = generate_dataset(10, 20, 8, 8, 0.1, rng);
    RngStream init(7, 1);
    const ModelParams global = init_model({64, 32, 10}, init);
    TrainConfig cfg;
    cfg.epochs = 10;
    RngStream r(7, 2);
    const ModelParams m = craft_replacement_update(global, train, cfg, 1.0, r);
    CHECK(evaluate(m, test) >= 0.9);
    CHECK(attack_success_rate(m, build_triggered_testset(test, one_to_one())) <= 0.2);
}

TEST_CASE("attack plan validation names the field") {
    AttackPlan p = one_to_one();
    CHECK_NOTHROW(p.validate(64, 10));
    p.targets = {10};
    CHECK_THROWS_WITH_AS(p.validate(64, 10), doctest::Contains("attack.targets"), InvalidConfig);
    p = one_to_one();
    p.triggers.clear();
    CHECK_THROWS_AS(p.validate(64, 10), InvalidConfig);
    p = one_to_one();
    p.family = AttackFamily::NToOne;
    CHECK_THROWS_AS(p.validate(64, 10), InvalidConfig);
    p = one_to_one();
    p.triggers = {TriggerSpec{{99}, 1.0}};
    CHECK_THROWS_WITH_AS(p.validate(64, 10), doctest::Contains("attack.triggers"), InvalidConfig);
    p = one_to_one();
    p.rho = 1.5;
    CHECK_THROWS_AS(p.validate(64, 10), InvalidConfig);
    p = one_to_one();
    p.strategy = AttackStrategy::ModelReplacement;
    CHECK_THROWS_AS(p.validate(64, 10), InvalidConfig);
    p.replacement_round = 20;
    CHECK_NOTHROW(p.validate(64, 10));
}
