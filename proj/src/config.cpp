#include "fedbba/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"

#include "fedbba/errors.hpp"

namespace fedbba {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string unquote(const std::string& v) {
    if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front())
        return v.substr(1, v.size() - 2);
    return v;
}

[[noreturn]] void bad_value(const std::string& field, const char* expected, const std::string& got) {
    throw InvalidConfig(field + ": expected " + expected + ", got '" + got + "'");
}

double to_double(const std::string& field, const std::string& v) {
    double out = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(field, "a number", v);
    return out;
}

std::uint64_t to_u64(const std::string& field, const std::string& v) {
    std::uint64_t out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size())
        bad_value(field, "a non-negative integer", v);
    return out;
}

std::size_t to_size(const std::string& field, const std::string& v) {
    return static_cast<std::size_t>(to_u64(field, v));
}

bool to_bool(const std::string& field, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    bad_value(field, "true or false", v);
}

// Trigger lists: `row<r>@<intensity>` or `px[<i>,<a>-<b>,...]@<intensity>`,
// separated by ';'.
std::vector<TriggerSpec> to_triggers(const std::string& field, const std::string& v, std::size_t width) {
    std::vector<TriggerSpec> out;
    for (const std::string& item : split(v, ';')) {
        const auto at = item.rfind('@');
        if (at == std::string::npos) bad_value(field, "row<r>@<intensity> or px[...]@<intensity>", item);
        const std::string where = trim(item.substr(0, at));
        const double intensity = to_double(field, trim(item.substr(at + 1)));
        if (where.rfind("row", 0) == 0) {
            out.push_back(TriggerSpec::row(to_size(field, where.substr(3)), width, intensity));
        } else if (where.rfind("px[", 0) == 0 && where.back() == ']') {
            TriggerSpec t{{}, intensity};
            for (const std::string& part : split(where.substr(3, where.size() - 4), ',')) {
                const auto dash = part.find('-');
                if (dash == std::string::npos) {
                    t.mask.push_back(to_size(field, part));
                } else {
                    const std::size_t a = to_size(field, trim(part.substr(0, dash)));
                    const std::size_t b = to_size(field, trim(part.substr(dash + 1)));
                    if (b < a) bad_value(field, "an ascending pixel range", part);
                    for (std::size_t k = a; k <= b; ++k) t.mask.push_back(k);
                }
            }
            out.push_back(std::move(t));
        } else {
            bad_value(field, "row<r>@<intensity> or px[...]@<intensity>", item);
        }
    }
    return out;
}

std::string triggers_text(const std::vector<TriggerSpec>& triggers, std::size_t width) {
    std::string out;
    for (std::size_t i = 0; i < triggers.size(); ++i) {
        const TriggerSpec& t = triggers[i];
        if (i) out += "; ";
        bool is_row = width > 0 && t.mask.size() == width && t.mask.front() % width == 0;
        for (std::size_t k = 1; is_row && k < t.mask.size(); ++k) is_row = t.mask[k] == t.mask[0] + k;
        if (is_row) {
            out += "row" + std::to_string(t.mask.front() / width);
        } else {
            out += "px[";
            for (std::size_t k = 0; k < t.mask.size(); ++k) out += (k ? "," : "") + std::to_string(t.mask[k]);
            out += "]";
        }
        out += "@" + fmt(t.intensity);
    }
    return out;
}

std::vector<int> to_targets(const std::string& field, const std::string& v) {
    std::vector<int> out;
    for (const std::string& item : split(v, ',')) out.push_back(static_cast<int>(to_size(field, item)));
    return out;
}

std::string targets_text(const std::vector<int>& targets) {
    std::string out;
    for (std::size_t i = 0; i < targets.size(); ++i) out += (i ? ", " : "") + std::to_string(targets[i]);
    return out;
}

struct Field {
    const char* section;
    const char* key;
    std::function<void(ExperimentConfig&, const std::string& field, const std::string& value)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

#define FIELD_SIZE(sec, key, member)                                                                  \
    Field {                                                                                           \
        sec, key, [](ExperimentConfig& c, const std::string& f, const std::string& v) { c.member = to_size(f, v); }, \
            [](const ExperimentConfig& c) { return std::to_string(c.member); }                          \
    }
#define FIELD_DOUBLE(sec, key, member)                                                                \
    Field {                                                                                           \
        sec, key, [](ExperimentConfig& c, const std::string& f, const std::string& v) { c.member = to_double(f, v); }, \
            [](const ExperimentConfig& c) { return fmt(c.member); }                                     \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        FIELD_SIZE("experiment", "total_clients", total_clients),
        FIELD_SIZE("experiment", "per_round", per_round),
        FIELD_DOUBLE("experiment", "malicious_fraction", malicious_fraction),
        {"experiment", "cap_participation",
         [](ExperimentConfig& c, const std::string& f, const std::string& v) { c.cap_participation = to_bool(f, v); },
         [](const ExperimentConfig& c) { return std::string(c.cap_participation ? "true" : "false"); }},
        FIELD_SIZE("experiment", "rounds", rounds),
        {"experiment", "defense",
         [](ExperimentConfig& c, const std::string& f, const std::string& v) {
             try {
                 c.defense = parse_defense(v);
             } catch (const InvalidConfig&) {
                 bad_value(f, "fedbba, vanilla or pca", v);
             }
         },
         [](const ExperimentConfig& c) { return to_string(c.defense); }},
        {"experiment", "seed",
         [](ExperimentConfig& c, const std::string& f, const std::string& v) { c.seed = to_u64(f, v); },
         [](const ExperimentConfig& c) { return std::to_string(c.seed); }},

        FIELD_SIZE("data", "classes", data.classes),
        FIELD_SIZE("data", "height", data.height),
        FIELD_SIZE("data", "width", data.width),
        FIELD_DOUBLE("data", "noise_sigma", data.noise_sigma),
        FIELD_SIZE("data", "pool_per_class", data.pool_per_class),
        FIELD_SIZE("data", "test_per_class", data.test_per_class),
        FIELD_SIZE("data", "classes_per_client_min", data.classes_per_client.lo),
        FIELD_SIZE("data", "classes_per_client_max", data.classes_per_client.hi),
        FIELD_SIZE("data", "samples_per_class_min", data.samples_per_class.lo),
        FIELD_SIZE("data", "samples_per_class_max", data.samples_per_class.hi),

        FIELD_SIZE("model", "hidden", hidden),

        FIELD_DOUBLE("train", "learning_rate", train.learning_rate),
        FIELD_SIZE("train", "epochs", train.epochs),
        FIELD_SIZE("train", "batch_size", train.batch_size),

        {"attack", "enabled",
         [](ExperimentConfig& c, const std::string& f, const std::string& v) { c.attack_enabled = to_bool(f, v); },
         [](const ExperimentConfig& c) { return std::string(c.attack_enabled ? "true" : "false"); }},
        {"attack", "family",
         [](ExperimentConfig& c, const std::string& f, const std::string& v) {
             try {
                 apply_family_defaults(c, parse_family(v));
             } catch (const InvalidConfig&) {
                 bad_value(f, "one_to_one, one_to_n or n_to_one", v);
             }
         },
         [](const ExperimentConfig& c) { return to_string(c.attack.family); }},
        {"attack", "strategy",
         [](ExperimentConfig& c, const std::string& f, const std::string& v) {
             try {
                 c.attack.strategy = parse_strategy(v);
             } catch (const InvalidConfig&) {
                 bad_value(f, "multi_round or replacement", v);
             }
         },
         [](const ExperimentConfig& c) { return to_string(c.attack.strategy); }},
        {"attack", "triggers",
         [](ExperimentConfig& c, const std::string& f, const std::string& v) {
             c.attack.triggers = to_triggers(f, v, c.data.width);
         },
         [](const ExperimentConfig& c) { return triggers_text(c.attack.triggers, c.data.width); }},
        {"attack", "targets",
         [](ExperimentConfig& c, const std::string& f, const std::string& v) { c.attack.targets = to_targets(f, v); },
         [](const ExperimentConfig& c) { return targets_text(c.attack.targets); }},
        {"attack", "rho",
         [](ExperimentConfig& c, const std::string& f, const std::string& v) {
             if (v == "adaptive")
                 c.attack.rho.reset();
             else
                 c.attack.rho = to_double(f, v);
         },
         [](const ExperimentConfig& c) { return c.attack.rho ? fmt(*c.attack.rho) : std::string("adaptive"); }},
        FIELD_SIZE("attack", "replacement_round", attack.replacement_round),
        FIELD_DOUBLE("attack", "boost", attack.boost),
        FIELD_SIZE("attack", "replacement_epochs", replacement_epochs),

        FIELD_DOUBLE("reputation", "alpha", reputation.alpha),
        FIELD_DOUBLE("reputation", "beta", reputation.beta),
        FIELD_DOUBLE("reputation", "gamma", reputation.gamma),
        FIELD_DOUBLE("reputation", "delta", reputation.delta),
        FIELD_SIZE("reputation", "window", reputation.window),
        FIELD_DOUBLE("reputation", "r_init", reputation.r_init),
        FIELD_DOUBLE("reputation", "r_max", reputation.r_max),
        FIELD_SIZE("reputation", "probation_rounds", reputation.probation_rounds),

        FIELD_DOUBLE("game", "theta", game.theta),
        FIELD_DOUBLE("game", "lambda_min", game.lambda_min),
        FIELD_DOUBLE("game", "lambda_max", game.lambda_max),
        FIELD_DOUBLE("game", "r_max", game.r_max),

        FIELD_SIZE("mkpp", "p", mkpp.p),
        FIELD_SIZE("mkpp", "guess", mkpp.guess),
        {"mkpp", "search",
         [](ExperimentConfig& c, const std::string& f, const std::string& v) {
             if (v == "maximize")
                 c.mkpp.max_min = SearchType::MaximizeKurtosis;
             else if (v == "minimize")
                 c.mkpp.max_min = SearchType::MinimizeKurtosis;
             else
                 bad_value(f, "maximize or minimize", v);
         },
         [](const ExperimentConfig& c) {
             return std::string(c.mkpp.max_min == SearchType::MaximizeKurtosis ? "maximize" : "minimize");
         }},
        {"mkpp", "update",
         [](ExperimentConfig& c, const std::string& f, const std::string& v) {
             if (v == "standard")
                 c.mkpp.st_sh = UpdateVariant::Standard;
             else if (v == "shifted")
                 c.mkpp.st_sh = UpdateVariant::Shifted;
             else
                 bad_value(f, "standard or shifted", v);
         },
         [](const ExperimentConfig& c) {
             return std::string(c.mkpp.st_sh == UpdateVariant::Standard ? "standard" : "shifted");
         }},
        FIELD_SIZE("mkpp", "maxcount", mkpp.maxcount),
        FIELD_DOUBLE("mkpp", "tol", mkpp.tol),
        FIELD_SIZE("mkpp", "reduce_dim", mkpp.reduce_dim),

        FIELD_DOUBLE("dbscan", "eps", dbscan.eps),
        FIELD_SIZE("dbscan", "min_pts", dbscan.min_pts),
    };
    return table;
}

#undef FIELD_SIZE
#undef FIELD_DOUBLE

// Keys whose meaning depends on other keys are applied after them.
int apply_order(const std::string& name) {
    if (name == "attack.family") return 1;
    if (name == "attack.triggers" || name == "attack.targets") return 2;
    return 0;
}

} // namespace

AttackFamily parse_family(const std::string& s) {
    if (s == "one_to_one") return AttackFamily::OneToOne;
    if (s == "one_to_n") return AttackFamily::OneToN;
    if (s == "n_to_one") return AttackFamily::NToOne;
    throw InvalidConfig("attack.family: unknown family '" + s + "'");
}

AttackStrategy parse_strategy(const std::string& s) {
    if (s == "multi_round") return AttackStrategy::MultiRound;
    if (s == "replacement") return AttackStrategy::ModelReplacement;
    throw InvalidConfig("attack.strategy: unknown strategy '" + s + "'");
}

Defense parse_defense(const std::string& s) {
    if (s == "fedbba") return Defense::FedBBA;
    if (s == "vanilla") return Defense::Vanilla;
    if (s == "pca") return Defense::PcaVariant;
    throw InvalidConfig("experiment.defense: unknown defense '" + s + "'");
}

void apply_family_defaults(ExperimentConfig& cfg, AttackFamily family) {
    const std::size_t w = cfg.data.width;
    const int last = static_cast<int>(cfg.data.classes) - 1;
    cfg.attack.family = family;
    switch (family) {
    case AttackFamily::OneToOne:
        cfg.attack.triggers = {TriggerSpec::row(0, w, 1.0)};
        cfg.attack.targets = {last};
        break;
    case AttackFamily::OneToN:
        cfg.attack.triggers = {TriggerSpec::row(0, w, 1.0), TriggerSpec::row(1, w, 1.0)};
        cfg.attack.targets = {last, last - 1};
        break;
    case AttackFamily::NToOne:
        cfg.attack.triggers = {TriggerSpec::row(0, w, 1.0), TriggerSpec::row(cfg.data.height - 1, w, 1.0)};
        cfg.attack.targets = {last};
        break;
    }
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    struct Entry {
        std::string name;
        std::string value;
        std::size_t line;
    };
    std::vector<Entry> entries;
    std::map<std::string, std::size_t> seen;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(line_no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw InvalidConfig(where + "malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            const bool known = std::any_of(fields().begin(), fields().end(),
                                           [&](const Field& f) { return section == f.section; });
            if (!known) throw InvalidConfig(where + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InvalidConfig(where + "expected 'key = value', got '" + line + "'");
        if (section.empty()) throw InvalidConfig(where + "key outside of any [section]");
        const std::string key = trim(line.substr(0, eq));
        const std::string name = section + "." + key;
        const bool known = std::any_of(fields().begin(), fields().end(),
                                       [&](const Field& f) { return section == f.section && key == f.key; });
        if (!known) throw InvalidConfig(where + "unknown key '" + key + "' in section [" + section + "]");
        if (seen.count(name)) throw InvalidConfig(where + name + " is set twice");
        seen[name] = line_no;
        entries.push_back({name, unquote(trim(line.substr(eq + 1))), line_no});
    }

    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return apply_order(a.name) < apply_order(b.name); });
    ExperimentConfig cfg;
    // The default trigger depends on the data geometry, so rebuild it once the
    // data section is known unless the file spells the attack out itself.
    bool family_applied = false;
    for (const Entry& e : entries) {
        if (apply_order(e.name) > 0 && !family_applied) {
            apply_family_defaults(cfg, cfg.attack.family);
            family_applied = true;
        }
        for (const Field& f : fields()) {
            if (e.name != std::string(f.section) + "." + f.key) continue;
            try {
                f.set(cfg, e.name, e.value);
            } catch (const InvalidConfig& err) {
                throw InvalidConfig(origin + ":" + std::to_string(e.line) + ": " +
                                    std::string(err.what()).substr(std::string("invalid config: ").size()));
            }
        }
    }
    if (!family_applied) apply_family_defaults(cfg, cfg.attack.family);
    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidConfig("config file not found or unreadable: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

std::string config_to_text(const ExperimentConfig& cfg) {
    std::string out;
    std::string section;
    for (const Field& f : fields()) {
        if (section != f.section) {
            section = f.section;
            out += (out.empty() ? "[" : "\n[") + section + "]\n";
        }
        out += std::string(f.key) + " = " + f.get(cfg) + "\n";
    }
    return out;
}

ExperimentConfig separation_preset() {
    ExperimentConfig cfg;
    cfg.total_clients = 30;
    cfg.per_round = 30;
    cfg.malicious_fraction = 1.0 / 3.0;
    cfg.rounds = 30;
    cfg.defense = Defense::FedBBA;
    cfg.mkpp.p = 1;
    apply_family_defaults(cfg, AttackFamily::OneToOne);
    return cfg;
}

std::string RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["version"] = version;
    j["command"] = command;
    j["config_path"] = config_path;
    j["seed"] = seed;
    j["output_dir"] = output_dir;
    nlohmann::ordered_json resolved;
    for (const Field& f : fields()) resolved[f.section][f.key] = f.get(config);
    j["config"] = resolved;
    return j.dump(2) + "\n";
}

} // namespace fedbba
