#include "fedbba/reputation.hpp"

#include <algorithm>
#include <cmath>

#include "fedbba/errors.hpp"
#include "fedbba/numerics.hpp"

namespace fedbba {

void ReputationParams::validate() const {
    if (alpha < 0.0 || beta < 0.0 || std::abs(alpha + beta - 1.0) > 1e-9)
        throw InvalidConfig("reputation.alpha and reputation.beta must be >= 0 and sum to 1");
    if (gamma < 0.0) throw InvalidConfig("reputation.gamma must be >= 0");
    if (delta < 0.0 || delta > 1.0) throw InvalidConfig("reputation.delta must be in [0,1]");
    if (window < 1) throw InvalidConfig("reputation.window must be >= 1");
    if (!(r_max > 0.0)) throw InvalidConfig("reputation.r_max must be > 0");
    if (r_init < 0.0 || r_init > r_max) throw InvalidConfig("reputation.r_init must be in [0, r_max]");
}

double historical_score(std::size_t correct, std::size_t total) {
    if (correct > total) throw InvalidInput("correct actions exceed total actions");
    if (total == 0) return 0.5;
    return static_cast<double>(correct) / static_cast<double>(total);
}

double gradient_variation(std::span<const double> window) {
    if (window.empty()) throw InvalidInput("empty gradient window");
    return variance(window);
}

double reputation_score(double historical, double variation, const ReputationParams& params) {
    const double stability = 1.0 / (1.0 + variation);
    return std::clamp(params.alpha * historical + params.beta * stability, 0.0, params.r_max);
}

double reward(double r, const ReputationParams& params) { return std::min(r + params.gamma * r, params.r_max); }

double penalize(double r, const ReputationParams& params) { return r - params.delta * r; }

ReputationState::ReputationState(std::size_t clients, const ReputationParams& params) : params_(params) {
    params_.validate();
    clients_.resize(clients);
    for (auto& c : clients_) c.r = params_.r_init;
}

std::vector<double> ReputationState::snapshot() const {
    std::vector<double> out;
    out.reserve(clients_.size());
    for (const auto& c : clients_) out.push_back(c.r);
    return out;
}

bool ReputationState::in_probation(std::size_t id) const {
    return clients_.at(id).participations <= params_.probation_rounds;
}

void ReputationState::observe(std::size_t id, double grad_norm, bool flagged) {
    ClientReputation& c = clients_.at(id);
    ++c.participations;
    c.grad_norms.push_back(grad_norm);
    while (c.grad_norms.size() > params_.window) c.grad_norms.pop_front();

    if (flagged && in_probation(id)) {
        c.r = params_.r_init;
        return;
    }
    ++c.total_actions;
    if (!flagged) ++c.correct_actions;
    const std::vector<double> window(c.grad_norms.begin(), c.grad_norms.end());
    const double base = reputation_score(historical_score(c.correct_actions, c.total_actions),
                                         gradient_variation(window), params_);
    c.r = flagged ? penalize(base, params_) : reward(base, params_);
}

} // namespace fedbba
