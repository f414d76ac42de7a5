#include "fedbba/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "json.hpp"

#include "fedbba/errors.hpp"

namespace fedbba {

std::string format_number(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

void write_rounds_csv(std::ostream& out, const std::vector<RoundReport>& rounds, std::size_t per_round,
                      std::size_t score_dims) {
    out << "round,clean_accuracy,asr";
    for (std::size_t k = 0; k < per_round; ++k) {
        const std::string c = ",c" + std::to_string(k) + "_";
        out << c << "client_id" << c << "is_malicious" << c << "weight" << c << "reputation";
        for (std::size_t s = 0; s < score_dims; ++s) out << c << "score_" << s;
        out << c << "cluster" << c << "flagged";
    }
    out << '\n';
    for (const RoundReport& r : rounds) {
        if (r.clients.size() != per_round) throw InvalidInput("round report has the wrong number of clients");
        out << r.round << ',' << format_number(r.clean_accuracy) << ',' << format_number(r.attack_success_rate);
        for (const ClientRecord& c : r.clients) {
            out << ',' << c.id << ',' << (c.is_malicious ? 1 : 0) << ',' << format_number(c.weight) << ','
                << format_number(c.reputation);
            for (std::size_t s = 0; s < score_dims; ++s)
                out << ',' << (s < c.scores.size() ? format_number(c.scores[s]) : std::string());
            out << ',' << c.cluster << ',' << (c.flagged ? 1 : 0);
        }
        out << '\n';
    }
}

std::string summary_json(const ExperimentConfig& cfg, const ExperimentResult& result) {
    const ExperimentSummary& s = result.summary;
    std::size_t fallbacks = 0;
    std::size_t unsure = 0;
    for (const RoundReport& r : result.rounds) {
        fallbacks += r.uniform_fallback ? 1 : 0;
        unsure += r.no_confidence ? 1 : 0;
    }
    nlohmann::ordered_json j;
    j["defense"] = to_string(cfg.defense);
    j["attack_enabled"] = cfg.attack_enabled;
    j["attack_family"] = to_string(cfg.attack.family);
    j["attack_strategy"] = to_string(cfg.attack.strategy);
    j["seed"] = cfg.seed;
    j["rounds"] = result.rounds.size();
    j["final_accuracy"] = s.final_accuracy;
    j["final_asr"] = s.final_asr;
    j["mean_accuracy_last5"] = s.mean_accuracy_last5;
    j["mean_asr_last5"] = s.mean_asr_last5;
    j["final_server_payoff"] = result.rounds.empty() ? 0.0 : result.rounds.back().server_payoff;
    j["final_attacker_payoff"] = result.rounds.empty() ? 0.0 : result.rounds.back().attacker_payoff;
    j["uniform_fallback_rounds"] = fallbacks;
    j["no_confidence_rounds"] = unsure;
    j["saddle_status"] = s.saddle.passed ? "PASS" : "FAIL";
    j["lambda_star"] = s.saddle.lambda_star;
    j["saddle_worst_violation"] = s.saddle.worst_violation;
    return j.dump(2) + "\n";
}

void write_scores_csv(std::ostream& out, const std::vector<std::size_t>& ids, const std::vector<bool>& poisoned,
                      const Matrix& scores) {
    if (ids.size() != poisoned.size() || ids.size() != scores.rows())
        throw InvalidInput("score rows, ids and labels are not aligned");
    out << "client_id,poisoned";
    for (std::size_t s = 0; s < scores.cols(); ++s) out << ",score_" << s;
    out << '\n';
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out << ids[i] << ',' << (poisoned[i] ? 1 : 0);
        for (std::size_t s = 0; s < scores.cols(); ++s) out << ',' << format_number(scores(i, s));
        out << '\n';
    }
}

std::vector<SensitivityRow> run_sensitivity(const ExperimentConfig& base) {
    std::vector<SensitivityRow> rows;
    for (int k = 1; k <= 9; ++k) {
        ExperimentConfig cfg = base;
        cfg.reputation.alpha = k / 10.0;
        cfg.reputation.beta = (10 - k) / 10.0;
        rows.push_back({cfg.reputation.alpha, cfg.reputation.beta, run_experiment(cfg).summary});
    }
    return rows;
}

void write_sensitivity_csv(std::ostream& out, const std::vector<SensitivityRow>& rows) {
    out << "alpha,beta,final_accuracy,final_asr,mean_accuracy_last5,mean_asr_last5\n";
    for (const SensitivityRow& r : rows)
        out << format_number(r.alpha) << ',' << format_number(r.beta) << ',' << format_number(r.summary.final_accuracy)
            << ',' << format_number(r.summary.final_asr) << ',' << format_number(r.summary.mean_accuracy_last5) << ','
            << format_number(r.summary.mean_asr_last5) << '\n';
}

CertifyResult certify(const ExperimentConfig& cfg, double grid_step) {
    CertifyResult out;
    const GameParams& g = cfg.game;
    RngStream rng(cfg.seed, stream_id(10));
    std::vector<double> reps(cfg.total_clients);
    for (double& r : reps) r = rng.uniform(0.0, g.r_max);
    std::vector<std::size_t> compromised(std::min(cfg.malicious_count(), reps.size()));
    for (std::size_t i = 0; i < compromised.size(); ++i) compromised[i] = i;
    out.saddle = verify_saddle(g, reps, compromised, grid_step);

    out.triples = 20;
    for (std::size_t k = 0; k < out.triples; ++k) {
        const double theta = rng.uniform(0.0, 1.0);
        const double r = rng.uniform(0.0, g.r_max);
        const double lambda = rng.uniform((g.r_max + theta) / 2.0, g.r_max + theta);
        const double gap = std::abs(best_response_rho(r, theta, lambda) - grid_best_response(r, theta, lambda, grid_step));
        out.max_closed_form_gap = std::max(out.max_closed_form_gap, gap);
    }
    out.passed = out.saddle.passed && out.max_closed_form_gap <= grid_step + 1e-12;
    return out;
}

std::string CertifyResult::to_text() const {
    std::string s = std::string("certify=") + (passed ? "PASS" : "FAIL") + "\n";
    s += saddle.to_text();
    s += "closed_form_triples=" + std::to_string(triples) + "\n";
    s += "max_closed_form_gap=" + format_number(max_closed_form_gap) + "\n";
    return s;
}

} // namespace fedbba
