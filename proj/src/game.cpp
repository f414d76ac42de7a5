#include "fedbba/game.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "fedbba/errors.hpp"

namespace fedbba {

void GameParams::validate() const {
    if (!(lambda_min > 0.0) || lambda_min > lambda_max)
        throw InvalidConfig("game.lambda_min/lambda_max must satisfy 0 < lambda_min <= lambda_max");
    if (theta > 1.0) throw InvalidConfig("game.theta must be <= 1");
    if (!(r_max > 0.0)) throw InvalidConfig("game.r_max must be > 0");
}

double similarity_score(double rho, double lambda, double theta) { return theta - lambda * rho; }

std::vector<double> aggregation_weights(const std::vector<double>& reputations, const std::vector<double>& rho,
                                        double lambda, double theta) {
    if (reputations.size() != rho.size()) throw InvalidInput("reputation and rho lengths differ");
    if (reputations.empty()) throw InvalidInput("no clients to weight");
    std::vector<double> w(reputations.size());
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = std::max(reputations[i] + similarity_score(rho[i], lambda, theta), 0.0);
        total += w[i];
    }
    if (!(total > 0.0)) throw DegenerateWeights("every weight numerator is zero");
    for (double& x : w) x /= total;
    return w;
}

double joint_objective(const GameState& state, double theta) {
    const auto w = aggregation_weights(state.reputations, state.rho, state.lambda, theta);
    double j = 0.0;
    for (std::size_t i : state.compromised) j += w.at(i) * state.rho.at(i);
    return j;
}

double best_response_rho(double reputation, double theta, double lambda) {
    if (!(lambda > 0.0)) throw InvalidInput("lambda must be > 0");
    return std::min((reputation + theta) / (2.0 * lambda), 1.0);
}

double grid_best_response(double reputation, double theta, double lambda, double step) {
    if (!(step > 0.0)) throw InvalidInput("grid step must be > 0");
    const auto points = static_cast<std::size_t>(std::llround(1.0 / step));
    double best_rho = 0.0;
    double best = 0.0;
    for (std::size_t k = 0; k <= points; ++k) {
        const double rho = std::min(1.0, static_cast<double>(k) * step);
        const double v = (reputation + theta) * rho - lambda * rho * rho;
        if (v > best) {
            best = v;
            best_rho = rho;
        }
    }
    return best_rho;
}

double optimal_lambda(const GameParams& params) {
    params.validate();
    const double required = (params.r_max + params.theta) / 2.0;
    if (params.lambda_max < required) throw CriterionViolated(params.lambda_max, required);
    return params.lambda_max;
}

namespace {

double normalizer(const std::vector<double>& reputations, double theta) {
    double c = 0.0;
    for (double r : reputations) c += r + theta;
    return c;
}

} // namespace

double surrogate_objective(const std::vector<double>& reputations, const std::vector<std::size_t>& compromised,
                           const std::vector<double>& rho, double lambda, double theta) {
    if (rho.size() != compromised.size()) throw InvalidInput("one rho per compromised client");
    if (compromised.empty()) return 0.0;
    const double c = normalizer(reputations, theta);
    if (!(c > 0.0)) throw DegenerateWeights("surrogate normalizer is not positive");
    double j = 0.0;
    for (std::size_t k = 0; k < compromised.size(); ++k) {
        const double a = reputations.at(compromised[k]) + theta;
        j += a * rho[k] - lambda * rho[k] * rho[k];
    }
    return j / c;
}

SaddleReport verify_saddle(const GameParams& params, const std::vector<double>& reputations,
                           const std::vector<std::size_t>& compromised, double grid_step) {
    constexpr double kTol = 1e-9;
    SaddleReport rep;
    if (!(grid_step > 0.0)) {
        rep.note = "grid step must be positive";
        return rep;
    }
    try {
        rep.lambda_star = optimal_lambda(params);
    } catch (const Error& e) {
        rep.note = e.what();
        return rep;
    }
    if (compromised.empty()) {
        rep.passed = true;
        rep.note = "no compromised clients; surrogate is identically zero";
        return rep;
    }

    for (std::size_t i : compromised)
        rep.rho_star.push_back(best_response_rho(reputations.at(i), params.theta, rep.lambda_star));
    rep.value = surrogate_objective(reputations, compromised, rep.rho_star, rep.lambda_star, params.theta);

    const auto rho_steps = static_cast<std::size_t>(std::llround(1.0 / grid_step));
    const auto lambda_steps =
        static_cast<std::size_t>(std::llround((params.lambda_max - params.lambda_min) / grid_step));
    rep.rho_points = rho_steps + 1;
    rep.lambda_points = lambda_steps + 1;
    const double c = normalizer(reputations, params.theta);

    // Adversary side, one coordinate at a time.
    for (std::size_t k = 0; k < compromised.size(); ++k) {
        const double a = reputations.at(compromised[k]) + params.theta;
        const double at_star = (a * rep.rho_star[k] - rep.lambda_star * rep.rho_star[k] * rep.rho_star[k]) / c;
        double best_rho = 0.0;
        double best = -1e300;
        for (std::size_t g = 0; g <= rho_steps; ++g) {
            const double rho = std::min(1.0, static_cast<double>(g) * grid_step);
            const double v = (a * rho - rep.lambda_star * rho * rho) / c;
            rep.worst_violation = std::max(rep.worst_violation, v - at_star);
            if (v > best) {
                best = v;
                best_rho = rho;
            }
        }
        rep.max_argmax_gap = std::max(rep.max_argmax_gap, std::abs(best_rho - rep.rho_star[k]));
    }

    // Server side.
    for (std::size_t g = 0; g <= lambda_steps; ++g) {
        const double lambda = std::min(params.lambda_max, params.lambda_min + static_cast<double>(g) * grid_step);
        const double v = surrogate_objective(reputations, compromised, rep.rho_star, lambda, params.theta);
        rep.worst_violation = std::max(rep.worst_violation, rep.value - v);
    }

    rep.passed = rep.worst_violation <= kTol && rep.max_argmax_gap <= grid_step + kTol;
    return rep;
}

SaddleReport verify_saddle(const GameParams& params, const std::vector<double>& reputations, double grid_step) {
    std::vector<std::size_t> all(reputations.size());
    std::iota(all.begin(), all.end(), 0);
    return verify_saddle(params, reputations, all, grid_step);
}

std::string SaddleReport::to_text() const {
    std::string out;
    char buf[128];
    out += std::string("status=") + (passed ? "PASS" : "FAIL") + "\n";
    std::snprintf(buf, sizeof buf, "lambda_star=%.17g\n", lambda_star);
    out += buf;
    std::snprintf(buf, sizeof buf, "value=%.17g\n", value);
    out += buf;
    std::snprintf(buf, sizeof buf, "worst_violation=%.17g\n", worst_violation);
    out += buf;
    std::snprintf(buf, sizeof buf, "max_argmax_gap=%.17g\n", max_argmax_gap);
    out += buf;
    out += "lambda_points=" + std::to_string(lambda_points) + "\n";
    out += "rho_points=" + std::to_string(rho_points) + "\n";
    out += "rho_star=";
    for (std::size_t i = 0; i < rho_star.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%s%.17g", i ? ";" : "", rho_star[i]);
        out += buf;
    }
    out += "\n";
    if (!note.empty()) out += "note=" + note + "\n";
    return out;
}

} // namespace fedbba
