// End-to-end acceptance checks; prints one PASS/FAIL line per criterion.
//
//   acceptance <fedbba-binary> <work-dir> <unit-test-binary>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fedbba/config.hpp"
#include "fedbba/report.hpp"

namespace fs = std::filesystem;
using namespace fedbba;

namespace {

const std::vector<std::uint64_t> kSeeds = {1, 2, 3};
const std::vector<AttackFamily> kFamilies = {AttackFamily::OneToOne, AttackFamily::OneToN, AttackFamily::NToOne};

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += (ok ? "" : "!") + what;
    }
};

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentConfig desk(Defense d, AttackFamily f, std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.defense = d;
    cfg.seed = seed;
    apply_family_defaults(cfg, f);
    cfg.validate();
    return cfg;
}

struct Timed {
    ExperimentResult result;
    double seconds = 0.0;
};

Timed timed_run(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    Timed t{run_experiment(cfg), 0.0};
    t.seconds = seconds_since(t0);
    return t;
}

double max_asr_through(const ExperimentResult& r, std::size_t round) {
    double m = 0.0;
    for (const RoundReport& rep : r.rounds)
        if (rep.round <= round) m = std::max(m, rep.attack_success_rate);
    return m;
}

std::string tag(AttackFamily f, std::uint64_t seed) { return to_string(f) + "/s" + std::to_string(seed); }

void report(const char* id, const char* title, const Outcome& o) {
    std::printf("%s %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", title, o.detail.c_str());
    std::fflush(stdout);
}

// A1: undefended federation gets backdoored by round 30.
Outcome check_a1() {
    Outcome o;
    for (AttackFamily f : kFamilies)
        for (std::uint64_t s : kSeeds) {
            const Timed t = timed_run(desk(Defense::Vanilla, f, s));
            const double asr = max_asr_through(t.result, 30);
            o.require(asr >= 0.9 && t.seconds <= 120.0,
                      tag(f, s) + " asr<=r30=" + fmt("%.3f", asr) + " " + fmt("%.1fs", t.seconds));
        }
    return o;
}

// A2 (OneToOne) and A3 (other families + negative control).
struct DefenseOutcomes {
    Outcome a2;
    Outcome a3;
};

DefenseOutcomes check_a2_a3() {
    DefenseOutcomes out;
    for (std::uint64_t s : kSeeds) {
        ExperimentConfig clean_cfg = desk(Defense::Vanilla, AttackFamily::NToOne, s);
        clean_cfg.attack_enabled = false;
        const ExperimentResult clean = run_experiment(clean_cfg);
        const double clean_acc = clean.summary.mean_accuracy_last5;

        for (AttackFamily f : kFamilies) {
            const ExperimentConfig cfg = desk(Defense::FedBBA, f, s);
            const ExperimentResult r = run_experiment(cfg);
            const double asr = r.summary.mean_asr_last5;
            const double acc = r.summary.mean_accuracy_last5;
            const bool ok = asr <= 0.15 && std::abs(acc - clean_acc) <= 0.03;
            Outcome& o = f == AttackFamily::OneToOne ? out.a2 : out.a3;
            o.require(ok, tag(f, s) + " asr5=" + fmt("%.3f", asr) + " acc5=" + fmt("%.3f", acc) +
                              " clean=" + fmt("%.3f", clean_acc));

            if (f != AttackFamily::NToOne) continue;
            // Chance for a partial trigger is what a model that never saw the
            // backdoor predicts on the same inputs.
            const Engine probe(cfg);
            for (std::size_t omitted = 0; omitted < cfg.attack.triggers.size(); ++omitted) {
                const ImageDataset partial = build_partial_trigger_testset(probe.test_set(), cfg.attack, omitted);
                const double defended = attack_success_rate(r.final_model, partial);
                const double chance = attack_success_rate(clean.final_model, partial);
                out.a3.require(std::abs(defended - chance) <= 0.1,
                               "s" + std::to_string(s) + " partial-" + std::to_string(omitted) +
                                   " asr=" + fmt("%.3f", defended) + " chance=" + fmt("%.3f", chance) +
                                   " (1/K=" + fmt("%.2f", 1.0 / static_cast<double>(cfg.data.classes)) + ")");
            }
        }
    }
    return out;
}

// A4: projection pursuit separates poisoned updates better than PCA.
Outcome check_a4() {
    Outcome o;
    for (std::uint64_t s : kSeeds) {
        ExperimentConfig cfg = separation_preset();
        cfg.seed = s;
        const SeparationResult r = run_separation(cfg);
        o.require(r.mkpp_silhouette >= 0.5 && r.mkpp_silhouette > r.pca_silhouette,
                  "s" + std::to_string(s) + " mkpp=" + fmt("%.4f", r.mkpp_silhouette) +
                      " pca=" + fmt("%.4f", r.pca_silhouette));
    }
    return o;
}

// A5: equilibrium certification.
Outcome check_a5() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const CertifyResult c = certify(ExperimentConfig{});
    const double secs = seconds_since(t0);
    o.require(c.saddle.passed, "saddle worst_violation=" + fmt("%.3g", c.saddle.worst_violation));
    o.require(c.triples == 20 && c.max_closed_form_gap <= 0.01 + 1e-12,
              std::to_string(c.triples) + " triples max_gap=" + fmt("%.4f", c.max_closed_form_gap));
    o.require(secs <= 10.0, fmt("%.2fs", secs));
    return o;
}

// A6: the unit suite holds every worked example.
Outcome check_a6(const std::string& unit_tests) {
    Outcome o;
    const int rc = std::system(("\"" + unit_tests + "\" --minimal > /dev/null 2>&1").c_str());
    o.require(rc == 0, "unit suite exit=" + std::to_string(rc));
    return o;
}

// A7: the balanced reputation weighting is not the worst setting.
Outcome check_a7() {
    Outcome o;
    const auto rows = run_sensitivity(ExperimentConfig{});
    o.require(rows.size() == 9, std::to_string(rows.size()) + " rows");
    double max_asr = 0.0, balanced = -1.0;
    std::string col;
    for (const SensitivityRow& r : rows) {
        max_asr = std::max(max_asr, r.summary.mean_asr_last5);
        if (std::abs(r.alpha - 0.5) < 1e-9) balanced = r.summary.mean_asr_last5;
        col += (col.empty() ? "" : ",") + fmt("%.3f", r.summary.mean_asr_last5);
    }
    o.require(balanced >= 0.0 && balanced < max_asr,
              "asr5 by alpha=[" + col + "] balanced=" + fmt("%.3f", balanced));
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

// A8: repeated CLI invocations write byte-identical results.
Outcome check_a8(const std::string& cli, const fs::path& work) {
    Outcome o;
    fs::remove_all(work);
    fs::create_directories(work);
    const fs::path cfg = work / "short.ini";
    std::ofstream(cfg) << "[experiment]\nrounds = 8\n";

    struct Case {
        std::string name;
        std::string args;
        std::vector<std::string> files;
    };
    const std::vector<Case> cases = {
        {"run", "run --config \"" + cfg.string() + "\" --seed 7", {"rounds.csv", "summary.json"}},
        {"sensitivity", "sensitivity --config \"" + cfg.string() + "\" --seed 7", {"sensitivity.csv"}},
        {"separation", "separation --seed 7", {"mkpp_scores.csv", "pca_scores.csv", "summary.json"}},
        {"certify", "certify --seed 7", {"certify.txt"}},
    };
    for (const Case& c : cases) {
        bool same = true;
        for (const char* rep : {"a", "b"}) {
            const fs::path out = work / (c.name + "_" + rep);
            const std::string cmd = "FEDBBA_LOG=quiet \"" + cli + "\" " + c.args + " --out \"" + out.string() + "\" > /dev/null";
            const int rc = std::system(cmd.c_str());
            same = same && rc == 0;
        }
        for (const std::string& f : c.files) {
            const fs::path a = work / (c.name + "_a") / f;
            const fs::path b = work / (c.name + "_b") / f;
            same = same && fs::exists(a) && fs::exists(b) && fs::file_size(a) > 0 && slurp(a) == slurp(b);
        }
        o.require(same, c.name);
    }
    return o;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 4) {
        std::fprintf(stderr, "usage: acceptance <fedbba-binary> <work-dir> <unit-test-binary>\n");
        return 2;
    }
    const std::string cli = argv[1];
    const fs::path work = argv[2];
    const std::string unit_tests = argv[3];

    bool all = true;
    auto record = [&](const char* id, const char* title, const Outcome& o) {
        report(id, title, o);
        all = all && o.pass;
    };

    record("A1", "undefended vulnerability", check_a1());
    const DefenseOutcomes d = check_a2_a3();
    record("A2", "defended one-to-one", d.a2);
    record("A3", "defended one-to-n / n-to-one + partial-trigger control", d.a3);
    record("A4", "separation", check_a4());
    record("A5", "equilibrium certification", check_a5());
    record("A6", "unit suite", check_a6(unit_tests));
    record("A7", "sensitivity grid", check_a7());
    record("A8", "cli determinism", check_a8(cli, work));

    std::printf("%s\n", all ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL");
    return all ? 0 : 1;
}
