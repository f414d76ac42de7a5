#include "doctest.h"
#include "fedbba/errors.hpp"
#include "fedbba/numerics.hpp"
#include "fedbba/reputation.hpp"

using namespace fedbba;

TEST_CASE("historical_score examples") {
    CHECK(historical_score(3, 4) == 0.75);
    CHECK(historical_score(0, 0) == 0.5);
    CHECK(historical_score(5, 5) == 1.0);
    CHECK_THROWS_AS(historical_score(5, 4), InvalidInput);
}

TEST_CASE("gradient_variation examples") {
    CHECK(gradient_variation(std::vector<double>{1, 1, 1}) == 0.0);
    CHECK(gradient_variation(std::vector<double>{0, 2}) == 1.0);
    CHECK(gradient_variation(std::vector<double>{4.2}) == 0.0);
    CHECK_THROWS_AS(gradient_variation(std::vector<double>{}), InvalidInput);
}

TEST_CASE("reputation_score examples") {
    ReputationParams p;
    CHECK(reputation_score(0.75, 0.0, p) == doctest::Approx(0.875));
    CHECK(reputation_score(1.0, 1.0, p) == doctest::Approx(0.75));
    ReputationParams hist_only;
    hist_only.alpha = 1.0;
    hist_only.beta = 0.0;
    for (double g : {0.0, 0.3, 7.0}) CHECK(reputation_score(0.6, g, hist_only) == doctest::Approx(0.6));
}

TEST_CASE("reward and penalize examples") {
    ReputationParams p;
    p.gamma = 0.1;
    CHECK(reward(0.8, p) == doctest::Approx(0.88));
    p.gamma = 0.05;
    CHECK(reward(0.99, p) == 1.0);
    CHECK(reward(0.0, p) == 0.0);

    p.delta = 0.5;
    CHECK(penalize(0.8, p) == doctest::Approx(0.4));
    p.delta = 1.0;
    CHECK(penalize(0.8, p) == 0.0);
    p.delta = 0.0;
    CHECK(penalize(0.8, p) == 0.8);
}

TEST_CASE("recovery after a penalty is slower than the loss") {
    const ReputationParams p;
    CHECK((1.0 + p.gamma) * (1.0 - p.delta) < 1.0);
    CHECK(reward(penalize(0.6, p), p) < 0.6);
}

TEST_CASE("reputations stay in [0, R_max] under any interleaving") {
    RngStream rng(1, 0);
    for (int trial = 0; trial < 200; ++trial) {
        ReputationParams p;
        p.alpha = rng.uniform();
        p.beta = 1.0 - p.alpha;
        p.gamma = rng.uniform(0.0, 2.0);
        p.delta = rng.uniform();
        p.r_max = rng.uniform(0.2, 2.0);
        p.r_init = rng.uniform(0.0, p.r_max);
        p.window = 1 + rng.below(6);
        p.probation_rounds = rng.below(4);
        double r = p.r_init;
        ReputationState state(3, p);
        for (int step = 0; step < 60; ++step) {
            r = rng.uniform() < 0.5 ? reward(r, p) : penalize(r, p);
            CHECK(r >= 0.0);
            CHECK(r <= p.r_max);
            const std::size_t id = rng.below(3);
            state.observe(id, rng.uniform(0.0, 10.0), rng.uniform() < 0.4);
            const ClientReputation& c = state.client(id);
            CHECK(c.r >= 0.0);
            CHECK(c.r <= p.r_max);
            CHECK(c.correct_actions <= c.total_actions);
            CHECK(c.grad_norms.size() <= p.window);
        }
    }
}

TEST_CASE("probation holds flagged newcomers at R_init") {
    ReputationParams p;
    p.probation_rounds = 2;
    ReputationState s(2, p);
    CHECK(s.reputation(0) == p.r_init);
    CHECK(s.in_probation(0));

    s.observe(0, 1.0, true);
    CHECK(s.reputation(0) == p.r_init);
    s.observe(0, 1.0, true);
    CHECK(s.reputation(0) == p.r_init);

    // Third participation is outside probation: H = 0/1, G over {1,1,1} = 0.
    s.observe(0, 1.0, true);
    CHECK_FALSE(s.in_probation(0));
    CHECK(s.reputation(0) == doctest::Approx(penalize(reputation_score(0.0, 0.0, p), p)));

    // Unflagged participation earns a reward even during probation.
    s.observe(1, 2.0, false);
    CHECK(s.reputation(1) == doctest::Approx(reward(reputation_score(1.0, 0.0, p), p)));
    s.observe(1, 4.0, false);
    CHECK(s.reputation(1) == doctest::Approx(reward(reputation_score(1.0, 1.0, p), p)));
}

TEST_CASE("reputation params validation") {
    ReputationParams p;
    CHECK_NOTHROW(p.validate());
    p.alpha = 0.7;
    CHECK_THROWS_AS(p.validate(), InvalidConfig);
    p = {};
    p.r_init = 2.0;
    CHECK_THROWS_AS(p.validate(), InvalidConfig);
    p = {};
    p.window = 0;
    CHECK_THROWS_AS(p.validate(), InvalidConfig);
}
