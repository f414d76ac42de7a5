#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedbba/attacks.hpp"
#include "fedbba/clustering.hpp"
#include "fedbba/datamodel.hpp"
#include "fedbba/game.hpp"
#include "fedbba/mkpp.hpp"
#include "fedbba/reputation.hpp"

namespace fedbba {

enum class Defense { FedBBA, Vanilla, PcaVariant };
std::string to_string(Defense d);

struct DatasetParams {
    std::size_t classes = 10;
    std::size_t height = 8;
    std::size_t width = 8;
    double noise_sigma = 0.1;
    std::size_t pool_per_class = 200;  // training pool the shards are drawn from
    std::size_t test_per_class = 50;
    Range classes_per_client{4, 6};
    Range samples_per_class{30, 33};

    void validate() const;
};

struct ExperimentConfig {
    std::size_t total_clients = 60;
    std::size_t per_round = 20;
    double malicious_fraction = 0.3;
    bool cap_participation = true;  // at most ⌊fraction·per_round⌋ malicious clients per round
    std::size_t rounds = 40;
    Defense defense = Defense::FedBBA;
    bool attack_enabled = true;
    AttackPlan attack;
    DatasetParams data;
    std::size_t hidden = 32;
    TrainConfig train;
    std::size_t replacement_epochs = 10;  // local epochs used to craft a replacement model
    ReputationParams reputation;
    GameParams game;
    MkppConfig mkpp;
    DbscanParams dbscan;
    std::uint64_t seed = 1;

    ExperimentConfig();
    std::size_t malicious_count() const;
    void validate() const;
};

struct ClientRecord {
    std::size_t id = 0;
    bool is_malicious = false;  // ground truth, reporting only
    double rho = 0.0;           // poisoning ratio actually used by the client
    double weight = 0.0;
    double reputation = 0.0;    // after this round's update
    double suspicion = 0.0;     // measured ρ̂ fed into the weight formula
    std::vector<double> scores;
    int cluster = kNoise;
    bool flagged = false;
};

struct RoundReport {
    std::size_t round = 0;  // 1-based
    double clean_accuracy = 0.0;
    double attack_success_rate = 0.0;
    std::vector<ClientRecord> clients;  // selected clients, ascending id
    double server_payoff = 0.0;
    double attacker_payoff = 0.0;
    bool uniform_fallback = false;
    bool no_confidence = false;
};

// Server-side outcome of one round. Computed only from the submitted models
// and the reputation ledger.
struct ServerDecision {
    ModelParams global;
    std::vector<double> weights;
    std::vector<double> suspicion;
    Matrix scores;
    ClusterLabels clusters;
    std::vector<bool> flagged;
    bool uniform_fallback = false;
    bool no_confidence = false;
};

// Σ w_i·M_i; weights must sum to one within 1e-9.
ModelParams aggregate(const std::vector<ModelParams>& models, const std::vector<double>& weights);

// Fraction of triggered samples classified as their attack target.
double attack_success_rate(const ModelParams& model, const ImageDataset& triggered);

// Detection, reputation update and weighted aggregation for the clients in
// `ids` (which submitted `models`). Weights use the reputations held before
// this round's update.
ServerDecision server_round(const ModelParams& global, const std::vector<std::size_t>& ids,
                            const std::vector<ModelParams>& models, ReputationState& reputation,
                            const ExperimentConfig& cfg, std::size_t round);

class Engine {
public:
    explicit Engine(ExperimentConfig cfg);

    RoundReport run_round();

    const ExperimentConfig& config() const { return cfg_; }
    const ModelParams& global() const { return global_; }
    const ReputationState& reputation() const { return reputation_; }
    const std::vector<bool>& malicious() const { return malicious_; }
    const ImageDataset& test_set() const { return test_; }
    const ImageDataset& triggered_test_set() const { return triggered_; }
    const std::vector<ImageDataset>& shards() const { return shards_; }
    std::size_t round() const { return round_; }

    // Overrides the ground-truth labels written into reports without touching
    // client behaviour.
    void set_report_labels(std::vector<bool> labels) { report_labels_ = std::move(labels); }

    // Local update each selected client submits in the upcoming round.
    std::vector<std::size_t> select_clients(std::size_t round) const;
    ModelParams client_update(std::size_t id, std::size_t round, double& rho_used) const;

private:
    ExperimentConfig cfg_;
    ImageDataset test_;
    ImageDataset triggered_;
    std::vector<ImageDataset> shards_;
    std::vector<bool> malicious_;
    std::vector<bool> report_labels_;
    ModelParams global_;
    ReputationState reputation_;
    double lambda_star_ = 1.0;
    std::size_t round_ = 0;
};

struct ExperimentSummary {
    double final_accuracy = 0.0;
    double final_asr = 0.0;
    double mean_asr_last5 = 0.0;
    double mean_accuracy_last5 = 0.0;
    SaddleReport saddle;
    std::vector<double> final_reputations;
};

struct ExperimentResult {
    std::vector<RoundReport> rounds;
    ExperimentSummary summary;
    ModelParams final_model;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Projection-pursuit versus PCA scores of one round of client updates, with
// the true benign/poisoned partition.
struct SeparationResult {
    Matrix mkpp_scores;
    Matrix pca_scores;
    std::vector<std::size_t> client_ids;
    std::vector<bool> poisoned;
    double mkpp_silhouette = 0.0;
    double pca_silhouette = 0.0;
};

// Trains cfg.rounds rounds, then scores the final round's updates.
SeparationResult run_separation(const ExperimentConfig& cfg);

// Stream ids for RngStream; keeps every random consumer independent.
std::uint64_t stream_id(std::uint64_t purpose, std::uint64_t round = 0, std::uint64_t client = 0);

} // namespace fedbba
