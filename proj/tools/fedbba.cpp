// fedbba — run backdoor-defense experiments from the command line.
//
//   fedbba run         --config c.ini --seed 7 --out d/
//   fedbba sensitivity --out d/
//   fedbba separation  --out d/
//   fedbba certify     --out d/
//
// FEDBBA_LOG=quiet|info|debug controls stderr chatter (default info).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fedbba/config.hpp"
#include "fedbba/errors.hpp"
#include "fedbba/report.hpp"

namespace fs = std::filesystem;
using namespace fedbba;

namespace {

enum class Verbosity { Quiet, Info, Debug };

Verbosity verbosity() {
    const char* v = std::getenv("FEDBBA_LOG");
    if (!v) return Verbosity::Info;
    const std::string s = v;
    if (s == "quiet" || s == "0") return Verbosity::Quiet;
    if (s == "debug" || s == "2") return Verbosity::Debug;
    return Verbosity::Info;
}

template <class... Args>
void log(Verbosity level, const char* format, Args... args) {
    if (verbosity() < level) return;
    std::fprintf(stderr, format, args...);
    std::fputc('\n', stderr);
}

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::string defense;
    std::string attack;
    std::string strategy;
};

// Files are created through this so a failed command leaves nothing behind.
class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) {
        if (!fs::exists(dir_)) {
            fs::create_directories(dir_);
            created_dir_ = true;
        }
    }

    void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
        const fs::path p = dir_ / name;
        written_.push_back(p);
        std::ofstream f(p, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot write " + p.string());
        body(f);
        f.flush();
        if (!f) throw Error("write failed for " + p.string());
    }

    void discard() {
        std::error_code ec;
        for (const fs::path& p : written_) fs::remove(p, ec);
        if (created_dir_) fs::remove(dir_, ec);
    }

    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    bool created_dir_ = false;
    std::vector<fs::path> written_;
};

ExperimentConfig resolve(const Options& o, ExperimentConfig base) {
    ExperimentConfig cfg = o.config.empty() ? std::move(base) : parse_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (!o.defense.empty()) cfg.defense = parse_defense(o.defense);
    if (!o.attack.empty()) apply_family_defaults(cfg, parse_family(o.attack));
    if (!o.strategy.empty()) cfg.attack.strategy = parse_strategy(o.strategy);
    cfg.validate();
    return cfg;
}

void write_manifest(Outputs& out, const std::string& command, const Options& o, const ExperimentConfig& cfg) {
    RunManifest m;
    m.command = command;
    m.config_path = o.config;
    m.config = cfg;
    m.seed = cfg.seed;
    m.output_dir = out.dir().string();
    out.write("manifest.json", [&](std::ostream& s) { s << m.to_json(); });
}

void log_round(const RoundReport& r) {
    log(Verbosity::Debug, "round %zu accuracy=%.4f asr=%.4f", r.round, r.clean_accuracy, r.attack_success_rate);
}

int cmd_run(const Options& o, Outputs& out) {
    const ExperimentConfig cfg = resolve(o, ExperimentConfig{});
    write_manifest(out, "run", o, cfg);
    log(Verbosity::Info, "run: defense=%s attack=%s seed=%llu rounds=%zu", to_string(cfg.defense).c_str(),
        to_string(cfg.attack.family).c_str(), static_cast<unsigned long long>(cfg.seed), cfg.rounds);
    const ExperimentResult result = run_experiment(cfg);
    for (const RoundReport& r : result.rounds) log_round(r);
    const std::size_t dims = result.rounds.front().clients.front().scores.size();
    out.write("rounds.csv", [&](std::ostream& s) { write_rounds_csv(s, result.rounds, cfg.per_round, dims); });
    out.write("summary.json", [&](std::ostream& s) { s << summary_json(cfg, result); });
    log(Verbosity::Info, "final accuracy=%.4f asr=%.4f (last-5 mean asr=%.4f)", result.summary.final_accuracy,
        result.summary.final_asr, result.summary.mean_asr_last5);
    return 0;
}

int cmd_sensitivity(const Options& o, Outputs& out) {
    const ExperimentConfig cfg = resolve(o, ExperimentConfig{});
    write_manifest(out, "sensitivity", o, cfg);
    const auto rows = run_sensitivity(cfg);
    for (const auto& r : rows)
        log(Verbosity::Info, "alpha=%.1f beta=%.1f accuracy=%.4f asr=%.4f", r.alpha, r.beta,
            r.summary.mean_accuracy_last5, r.summary.mean_asr_last5);
    out.write("sensitivity.csv", [&](std::ostream& s) { write_sensitivity_csv(s, rows); });
    return 0;
}

int cmd_separation(const Options& o, Outputs& out) {
    const ExperimentConfig cfg = resolve(o, separation_preset());
    write_manifest(out, "separation", o, cfg);
    const SeparationResult r = run_separation(cfg);
    out.write("mkpp_scores.csv",
              [&](std::ostream& s) { write_scores_csv(s, r.client_ids, r.poisoned, r.mkpp_scores); });
    out.write("pca_scores.csv", [&](std::ostream& s) { write_scores_csv(s, r.client_ids, r.poisoned, r.pca_scores); });
    out.write("summary.json", [&](std::ostream& s) {
        s << "{\n  \"mkpp_silhouette\": " << format_number(r.mkpp_silhouette) << ",\n  \"pca_silhouette\": "
          << format_number(r.pca_silhouette) << "\n}\n";
    });
    log(Verbosity::Info, "silhouette mkpp=%.4f pca=%.4f", r.mkpp_silhouette, r.pca_silhouette);
    return 0;
}

int cmd_certify(const Options& o, Outputs& out) {
    const ExperimentConfig cfg = resolve(o, ExperimentConfig{});
    write_manifest(out, "certify", o, cfg);
    const CertifyResult c = certify(cfg);
    out.write("certify.txt", [&](std::ostream& s) { s << c.to_text(); });
    std::fputs(c.to_text().c_str(), stdout);
    return c.passed ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Game-theoretic backdoor defense for federated learning"};
    app.require_subcommand(1);
    Options opts;
    std::uint64_t seed = 0;

    const std::vector<std::pair<const char*, const char*>> commands = {
        {"run", "Full experiment: per-round CSV, summary and manifest"},
        {"sensitivity", "Sweep reputation alpha over 0.1..0.9 (beta = 1 - alpha)"},
        {"separation", "Score one round of updates with projection pursuit and PCA"},
        {"certify", "Grid-check the minimax equilibrium"},
    };
    std::vector<CLI::App*> subs;
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opts.config, "Config file ([section] key = value)")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Master seed (overrides the config)");
        sub->add_option("--out", opts.out, "Output directory")->capture_default_str();
        sub->add_option("--defense", opts.defense, "fedbba | vanilla | pca")
            ->check(CLI::IsMember({"fedbba", "vanilla", "pca"}));
        sub->add_option("--attack", opts.attack, "one_to_one | one_to_n | n_to_one")
            ->check(CLI::IsMember({"one_to_one", "one_to_n", "n_to_one"}));
        sub->add_option("--strategy", opts.strategy, "multi_round | replacement")
            ->check(CLI::IsMember({"multi_round", "replacement"}));
        subs.push_back(sub);
    }
    CLI11_PARSE(app, argc, argv);

    CLI::App* chosen = app.get_subcommands().front();
    if (chosen->count("--seed")) opts.seed = seed;

    std::optional<Outputs> out;
    try {
        out.emplace(opts.out);
        const std::string name = chosen->get_name();
        if (name == "run") return cmd_run(opts, *out);
        if (name == "sensitivity") return cmd_sensitivity(opts, *out);
        if (name == "separation") return cmd_separation(opts, *out);
        return cmd_certify(opts, *out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fedbba: error: %s\n", e.what());
        if (out) out->discard();
        return 1;
    }
}
