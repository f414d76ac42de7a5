#include "fedbba/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedbba/errors.hpp"

namespace fedbba {

namespace {

enum Purpose : std::uint64_t {
    kPool = 1,
    kTest = 2,
    kPartition = 3,
    kMalicious = 4,
    kInit = 5,
    kSelect = 6,
    kTrain = 7,
    kPoison = 8,
    kPursuit = 9,
};

} // namespace

std::uint64_t stream_id(std::uint64_t purpose, std::uint64_t round, std::uint64_t client) {
    return (purpose << 56) ^ (round << 24) ^ client;
}

std::string to_string(Defense d) {
    switch (d) {
    case Defense::FedBBA: return "fedbba";
    case Defense::Vanilla: return "vanilla";
    case Defense::PcaVariant: return "pca";
    }
    return "?";
}

void DatasetParams::validate() const {
    if (classes < 2) throw InvalidConfig("data.classes must be >= 2");
    if (height < 4 || width < 4) throw InvalidConfig("data.height and data.width must be >= 4");
    if (noise_sigma < 0.0) throw InvalidConfig("data.noise_sigma must be >= 0");
    if (pool_per_class < 1) throw InvalidConfig("data.pool_per_class must be >= 1");
    if (test_per_class < 1) throw InvalidConfig("data.test_per_class must be >= 1");
    if (classes_per_client.lo < 1 || classes_per_client.lo > classes_per_client.hi ||
        classes_per_client.hi > classes)
        throw InvalidConfig("data.classes_per_client range infeasible for data.classes");
    if (samples_per_class.lo < 1 || samples_per_class.lo > samples_per_class.hi)
        throw InvalidConfig("data.samples_per_class range infeasible");
}

ExperimentConfig::ExperimentConfig() {
    // A poisoned minority makes the update cloud bimodal, which shows up as
    // low kurtosis inside the leading principal plane.
    mkpp.max_min = SearchType::MinimizeKurtosis;
    mkpp.reduce_dim = 2;
    attack.triggers = {TriggerSpec::row(0, data.width, 1.0)};
    attack.targets = {static_cast<int>(data.classes) - 1};
}

std::size_t ExperimentConfig::malicious_count() const {
    return static_cast<std::size_t>(std::llround(malicious_fraction * static_cast<double>(total_clients)));
}

void ExperimentConfig::validate() const {
    if (total_clients < 1) throw InvalidConfig("experiment.total_clients must be >= 1");
    if (per_round < 2 || per_round > total_clients)
        throw InvalidConfig("experiment.per_round must be in [2, total_clients]");
    if (!(malicious_fraction >= 0.0 && malicious_fraction < 0.5))
        throw InvalidConfig("experiment.malicious_fraction must be in [0, 0.5)");
    if (cap_participation) {
        const auto cap = static_cast<std::size_t>(
            std::floor(malicious_fraction * static_cast<double>(per_round) + 1e-9));
        if (total_clients - malicious_count() < per_round - std::min(cap, malicious_count()))
            throw InvalidConfig("experiment.cap_participation leaves too few benign clients for per_round");
    }
    if (rounds < 1) throw InvalidConfig("experiment.rounds must be >= 1");
    if (hidden < 1) throw InvalidConfig("model.hidden must be >= 1");
    if (replacement_epochs < 1) throw InvalidConfig("attack.replacement_epochs must be >= 1");
    data.validate();
    attack.validate(data.height * data.width, data.classes);
    train.validate();
    reputation.validate();
    game.validate();
    mkpp.validate();
    dbscan.validate();
    if (defense != Defense::Vanilla && mkpp.p > per_round - 1)
        throw InvalidConfig("mkpp.p must be <= per_round - 1");
    if (std::abs(reputation.r_max - game.r_max) > 1e-12)
        throw InvalidConfig("reputation.r_max and game.r_max must agree");
    optimal_lambda(game);
}

ModelParams aggregate(const std::vector<ModelParams>& models, const std::vector<double>& weights) {
    if (models.empty() || models.size() != weights.size()) throw InvalidInput("one weight per model required");
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) throw InvalidInput("aggregation weights must sum to 1");
    // M₀ + Σ w_m (M_m − M₀) equals Σ w_m M_m when Σw = 1, and reproduces a
    // shared model bit-for-bit.
    const ModelParams& base = models.front();
    ModelParams out = base;
    for (std::size_t m = 0; m < models.size(); ++m) {
        if (models[m].shape != base.shape || models[m].flat.size() != base.flat.size())
            throw InvalidInput("model shapes differ");
        if (m == 0) continue;
        for (std::size_t i = 0; i < out.flat.size(); ++i)
            out.flat[i] += weights[m] * (models[m].flat[i] - base.flat[i]);
    }
    return out;
}

double attack_success_rate(const ModelParams& model, const ImageDataset& triggered) {
    if (triggered.size() == 0) throw InvalidInput("empty triggered set");
    return evaluate(model, triggered);
}

namespace {

// Distance of each standardized score from the benign reference point,
// scaled so the farthest client maps to 1.
std::vector<double> measured_suspicion(const Matrix& z, const SuspicionResult& s, const ClusterLabels& labels) {
    const std::size_t n = z.rows();
    Vector center(z.cols(), 0.0);
    if (!s.no_confidence) {
        std::size_t members = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (labels.labels[i] != s.benign_cluster) continue;
            ++members;
            for (std::size_t c = 0; c < z.cols(); ++c) center[c] += z(i, c);
        }
        for (double& x : center) x /= static_cast<double>(members);
    } else {
        for (std::size_t c = 0; c < z.cols(); ++c) {
            Vector col = z.col(c);
            std::nth_element(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(n / 2), col.end());
            center[c] = col[n / 2];
        }
    }
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s2 = 0.0;
        for (std::size_t c = 0; c < z.cols(); ++c) s2 += (z(i, c) - center[c]) * (z(i, c) - center[c]);
        d[i] = std::sqrt(s2);
    }
    const double dmax = *std::max_element(d.begin(), d.end());
    for (double& x : d) x = dmax > 0.0 ? std::clamp(x / dmax, 0.0, 1.0) : 0.0;
    return d;
}

} // namespace

ServerDecision server_round(const ModelParams& global, const std::vector<std::size_t>& ids,
                            const std::vector<ModelParams>& models, ReputationState& reputation,
                            const ExperimentConfig& cfg, std::size_t round) {
    const std::size_t n = ids.size();
    if (n != models.size() || n == 0) throw InvalidInput("one model per selected client required");
    ServerDecision d;
    d.flagged.assign(n, false);
    d.suspicion.assign(n, 0.0);
    d.clusters.labels.assign(n, kNoise);
    d.scores = Matrix(n, cfg.defense == Defense::Vanilla ? 0 : cfg.mkpp.p);

    if (cfg.defense == Defense::Vanilla) {
        d.weights.assign(n, 1.0 / static_cast<double>(n));
        d.global = aggregate(models, d.weights);
        return d;
    }

    Matrix deltas(n, global.flat.size());
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = deltas.row(i);
        for (std::size_t k = 0; k < row.size(); ++k) row[k] = models[i].flat[k] - global.flat[k];
        norms[i] = norm2(row);
    }

    try {
        if (cfg.defense == Defense::FedBBA) {
            RngStream rng(cfg.seed, stream_id(kPursuit, round));
            d.scores = mkpp(deltas, cfg.mkpp, rng).scores;
        } else {
            d.scores = pca_scores(deltas, cfg.mkpp.p);
        }
    } catch (const DegenerateDistribution&) {
        d.scores = Matrix(n, cfg.mkpp.p);  // identical updates: nothing to separate
    }

    const Matrix z = standardize_columns(d.scores);
    d.clusters = dbscan(z, cfg.dbscan);
    const SuspicionResult s = identify_suspicious(d.clusters, z);
    d.no_confidence = s.no_confidence;
    for (std::size_t i : s.suspicious) d.flagged[i] = true;

    std::vector<double> reps(n);
    for (std::size_t i = 0; i < n; ++i) reps[i] = reputation.reputation(ids[i]);
    if (!s.no_confidence) d.suspicion = measured_suspicion(z, s, d.clusters);

    const double lambda = optimal_lambda(cfg.game);
    try {
        d.weights = aggregation_weights(reps, d.suspicion, lambda, cfg.game.theta);
    } catch (const DegenerateWeights&) {
        d.weights.assign(n, 1.0 / static_cast<double>(n));
        d.uniform_fallback = true;
    }

    if (!s.no_confidence)
        for (std::size_t i = 0; i < n; ++i) reputation.observe(ids[i], norms[i], d.flagged[i]);

    d.global = aggregate(models, d.weights);
    return d;
}

Engine::Engine(ExperimentConfig cfg) : cfg_(std::move(cfg)), reputation_(cfg_.total_clients, cfg_.reputation) {
    cfg_.validate();
    lambda_star_ = optimal_lambda(cfg_.game);
    const DatasetParams& dp = cfg_.data;

    RngStream pool_rng(cfg_.seed, stream_id(kPool));
    const ImageDataset pool =
        generate_dataset(dp.classes, dp.pool_per_class, dp.height, dp.width, dp.noise_sigma, pool_rng);
    RngStream test_rng(cfg_.seed, stream_id(kTest));
    test_ = generate_dataset(dp.classes, dp.test_per_class, dp.height, dp.width, dp.noise_sigma, test_rng);
    triggered_ = build_triggered_testset(test_, cfg_.attack);

    RngStream part_rng(cfg_.seed, stream_id(kPartition));
    shards_ = partition_noniid(pool, cfg_.total_clients, dp.classes_per_client, dp.samples_per_class, part_rng);

    malicious_.assign(cfg_.total_clients, false);
    if (cfg_.attack_enabled) {
        std::vector<std::size_t> ids(cfg_.total_clients);
        std::iota(ids.begin(), ids.end(), 0);
        RngStream mal_rng(cfg_.seed, stream_id(kMalicious));
        mal_rng.shuffle(ids);
        for (std::size_t k = 0; k < cfg_.malicious_count(); ++k) malicious_[ids[k]] = true;
    }
    report_labels_ = malicious_;

    RngStream init_rng(cfg_.seed, stream_id(kInit));
    global_ = init_model({dp.height * dp.width, cfg_.hidden, dp.classes}, init_rng);
}

std::vector<std::size_t> Engine::select_clients(std::size_t round) const {
    std::vector<std::size_t> ids(cfg_.total_clients);
    std::iota(ids.begin(), ids.end(), 0);
    RngStream rng(cfg_.seed, stream_id(kSelect, round));
    rng.shuffle(ids);
    if (!cfg_.cap_participation) {
        ids.resize(cfg_.per_round);
    } else {
        // Uniform draw, skipping malicious clients once the round's share is full.
        const auto cap = static_cast<std::size_t>(
            std::floor(cfg_.malicious_fraction * static_cast<double>(cfg_.per_round) + 1e-9));
        std::vector<std::size_t> picked;
        std::size_t bad = 0;
        for (std::size_t id : ids) {
            if (picked.size() == cfg_.per_round) break;
            if (malicious_[id]) {
                if (bad == cap) continue;
                ++bad;
            }
            picked.push_back(id);
        }
        ids = std::move(picked);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

ModelParams Engine::client_update(std::size_t id, std::size_t round, double& rho_used) const {
    RngStream train_rng(cfg_.seed, stream_id(kTrain, round, id));
    rho_used = 0.0;
    if (!malicious_[id]) return train_local(global_, shards_[id], cfg_.train, train_rng);

    const AttackPlan& plan = cfg_.attack;
    const bool replacing = plan.strategy == AttackStrategy::ModelReplacement;
    if (replacing && round != plan.replacement_round)
        return train_local(global_, shards_[id], cfg_.train, train_rng);

    // The adaptive attacker reads its own published reputation.
    rho_used = plan.rho ? *plan.rho : best_response_rho(reputation_.reputation(id), cfg_.game.theta, lambda_star_);
    RngStream poison_rng(cfg_.seed, stream_id(kPoison, round, id));
    const ImageDataset poisoned = poison_dataset(shards_[id], plan, rho_used, poison_rng);
    if (!replacing) return train_local(global_, poisoned, cfg_.train, train_rng);

    TrainConfig craft = cfg_.train;
    craft.epochs = cfg_.replacement_epochs;
    const double boost = plan.boost > 0.0 ? plan.boost : static_cast<double>(cfg_.per_round);
    return craft_replacement_update(global_, poisoned, craft, boost, train_rng);
}

RoundReport Engine::run_round() {
    const std::size_t round = ++round_;
    const std::vector<std::size_t> ids = select_clients(round);

    std::vector<ModelParams> models;
    std::vector<double> rho(ids.size());
    models.reserve(ids.size());
    for (std::size_t k = 0; k < ids.size(); ++k) models.push_back(client_update(ids[k], round, rho[k]));

    const std::vector<double> reps_before = [&] {
        std::vector<double> r;
        for (std::size_t id : ids) r.push_back(reputation_.reputation(id));
        return r;
    }();

    ServerDecision d = server_round(global_, ids, models, reputation_, cfg_, round);
    global_ = std::move(d.global);

    RoundReport rep;
    rep.round = round;
    rep.uniform_fallback = d.uniform_fallback;
    rep.no_confidence = d.no_confidence;
    rep.clean_accuracy = evaluate(global_, test_);
    rep.attack_success_rate = attack_success_rate(global_, triggered_);

    GameState game{reps_before, rho, lambda_star_, {}};
    for (std::size_t k = 0; k < ids.size(); ++k) {
        ClientRecord c;
        c.id = ids[k];
        c.is_malicious = report_labels_[ids[k]];
        c.rho = rho[k];
        c.weight = d.weights[k];
        c.reputation = reputation_.reputation(ids[k]);
        c.suspicion = d.suspicion[k];
        c.scores.assign(d.scores.row(k).begin(), d.scores.row(k).end());
        c.cluster = d.clusters.labels[k];
        c.flagged = d.flagged[k];
        rep.clients.push_back(std::move(c));
        if (malicious_[ids[k]]) game.compromised.push_back(k);
    }
    double j = 0.0;
    try {
        j = joint_objective(game, cfg_.game.theta);
    } catch (const DegenerateWeights&) {
        j = 0.0;
    }
    rep.server_payoff = server_utility(j);
    rep.attacker_payoff = adversary_utility(j);
    return rep;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    Engine engine(cfg);
    ExperimentResult out;
    for (std::size_t t = 0; t < cfg.rounds; ++t) out.rounds.push_back(engine.run_round());

    ExperimentSummary& s = out.summary;
    s.final_accuracy = out.rounds.back().clean_accuracy;
    s.final_asr = out.rounds.back().attack_success_rate;
    const std::size_t tail = std::min<std::size_t>(5, out.rounds.size());
    for (std::size_t k = out.rounds.size() - tail; k < out.rounds.size(); ++k) {
        s.mean_asr_last5 += out.rounds[k].attack_success_rate / static_cast<double>(tail);
        s.mean_accuracy_last5 += out.rounds[k].clean_accuracy / static_cast<double>(tail);
    }
    s.final_reputations = engine.reputation().snapshot();
    std::vector<std::size_t> compromised;
    for (std::size_t i = 0; i < cfg.total_clients; ++i)
        if (engine.malicious()[i]) compromised.push_back(i);
    s.saddle = verify_saddle(cfg.game, s.final_reputations, compromised, 0.01);
    out.final_model = engine.global();
    return out;
}

SeparationResult run_separation(const ExperimentConfig& cfg) {
    Engine engine(cfg);
    for (std::size_t t = 1; t < cfg.rounds; ++t) engine.run_round();

    const std::size_t round = cfg.rounds;
    SeparationResult out;
    out.client_ids = engine.select_clients(round);
    Matrix deltas(out.client_ids.size(), engine.global().flat.size());
    for (std::size_t k = 0; k < out.client_ids.size(); ++k) {
        double rho = 0.0;
        const ModelParams m = engine.client_update(out.client_ids[k], round, rho);
        for (std::size_t i = 0; i < m.flat.size(); ++i) deltas(k, i) = m.flat[i] - engine.global().flat[i];
        out.poisoned.push_back(engine.malicious()[out.client_ids[k]]);
    }
    RngStream rng(cfg.seed, stream_id(kPursuit, round));
    out.mkpp_scores = mkpp(deltas, cfg.mkpp, rng).scores;
    out.pca_scores = pca_scores(deltas, cfg.mkpp.p);

    std::vector<int> truth;
    for (bool p : out.poisoned) truth.push_back(p ? 1 : 0);
    out.mkpp_silhouette = silhouette(standardize_columns(out.mkpp_scores), truth);
    out.pca_silhouette = silhouette(standardize_columns(out.pca_scores), truth);
    return out;
}

} // namespace fedbba
