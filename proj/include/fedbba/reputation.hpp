#pragma once

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

namespace fedbba {

struct ReputationParams {
    double alpha = 0.5;  // weight of historical behaviour
    double beta = 0.5;   // weight of gradient stability
    double gamma = 0.05; // reward factor
    double delta = 0.5;  // penalty factor
    std::size_t window = 5;
    double r_init = 0.5;
    double r_max = 1.0;
    std::size_t probation_rounds = 2;

    void validate() const;
};

// correct/total, or 0.5 before any action has been observed.
double historical_score(std::size_t correct, std::size_t total);

// Population variance of the gradient norms in the window.
double gradient_variation(std::span<const double> window);

// α·H + β/(1+G), clamped to [0, R_max]. The 1/(1+G) transform makes erratic
// update norms lower the score.
double reputation_score(double historical, double variation, const ReputationParams& params);

double reward(double r, const ReputationParams& params);
double penalize(double r, const ReputationParams& params);

struct ClientReputation {
    double r = 0.0;
    std::size_t correct_actions = 0;
    std::size_t total_actions = 0;
    std::deque<double> grad_norms;
    std::size_t participations = 0;
};

// Per-client reputation ledger. Only the server's round loop mutates it.
class ReputationState {
public:
    ReputationState(std::size_t clients, const ReputationParams& params);

    const ReputationParams& params() const { return params_; }
    std::size_t size() const { return clients_.size(); }
    const ClientReputation& client(std::size_t id) const { return clients_.at(id); }
    double reputation(std::size_t id) const { return clients_.at(id).r; }
    std::vector<double> snapshot() const;

    bool in_probation(std::size_t id) const;

    // Records one participation. Benign placement counts as a correct action
    // and earns a reward; a flag costs a penalty unless the client is still
    // in probation, in which case its reputation is held at R_init.
    void observe(std::size_t id, double grad_norm, bool flagged);

private:
    ReputationParams params_;
    std::vector<ClientReputation> clients_;
};

} // namespace fedbba
