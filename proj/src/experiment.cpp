#include "framp/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "framp/rng.hpp"

namespace framp::experiment {

namespace {

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

std::vector<size_t> parse_size_list(const std::string& s) {
    std::vector<size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoul(item));
    return out;
}

std::string format_gamma(double g) {
    std::ostringstream os;
    os << std::setprecision(10) << g;
    return os.str();
}

}  // namespace

void apply_key(Config& cfg, const std::string& key, const std::string& value, int line) {
    auto fail = [&](const std::string& what) {
        throw ConfigError("line " + std::to_string(line) + ": " + what);
    };
    try {
        if (key == "method") cfg.method = value;
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "rounds") cfg.rounds = std::stoul(value);
        else if (key == "eval_every") cfg.eval_every = std::stoul(value);
        else if (key == "out") cfg.out = value;
        else if (key == "classes") cfg.classes = std::stoul(value);
        else if (key == "input_dim") cfg.input_dim = std::stoul(value);
        else if (key == "n_per_class") cfg.n_per_class = std::stoul(value);
        else if (key == "class_sep") cfg.class_sep = std::stod(value);
        else if (key == "clients") cfg.clients = std::stoul(value);
        else if (key == "dirichlet_alpha") cfg.dirichlet_alpha = std::stod(value);
        else if (key == "descriptor_dim") cfg.descriptor_dim = std::stoul(value);
        else if (key == "hidden_widths") cfg.hidden_widths = parse_size_list(value);
        else if (key == "activation") cfg.activation = value;
        else if (key == "levels") cfg.levels = parse_double_list(value);
        else if (key == "participation") cfg.participation = std::stod(value);
        else if (key == "local_steps") cfg.local_steps = std::stoul(value);
        else if (key == "batch_size") cfg.batch_size = std::stoul(value);
        else if (key == "client_lr") cfg.client_lr = std::stod(value);
        else if (key == "hn_lr") cfg.hn_lr = std::stod(value);
        else if (key == "lambda") cfg.lambda = std::stod(value);
        else if (key == "hn_hidden") cfg.hn_hidden = std::stoul(value);
        else if (key == "hn_update") cfg.hn_update = value;
        else if (key == "holdout_fraction") cfg.holdout_fraction = std::stod(value);
        else if (key == "holdout_mode") cfg.holdout_mode = value;
        else if (key == "proto_noise") cfg.proto_noise = value;
        else if (key == "proto_noise_a") cfg.proto_noise_a = std::stod(value);
        else if (key == "proto_noise_seed") cfg.proto_noise_seed = std::stoull(value);
        else fail("unknown key '" + key + "'");
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        fail("bad value '" + value + "' for key '" + key + "'");
    }
}

Config parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    Config cfg;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string s = raw;
        if (auto pos = s.find('#'); pos != std::string::npos) s.erase(pos);
        auto strip = [](std::string t) {
            size_t a = t.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            size_t b = t.find_last_not_of(" \t\r");
            return t.substr(a, b - a + 1);
        };
        s = strip(s);
        if (s.empty()) continue;
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line) + ": expected key=value");
        std::string key = strip(s.substr(0, eq));
        std::string value = strip(s.substr(eq + 1));
        try {
            apply_key(cfg, key, value, line);
        } catch (const ConfigError& e) {
            throw ConfigError(path + ":" + e.what());
        }
    }
    return cfg;
}

namespace {

nn::ModelSpec build_spec(const Config& cfg) {
    nn::ModelSpec spec;
    spec.layer_widths.push_back(cfg.input_dim);
    for (size_t w : cfg.hidden_widths) spec.layer_widths.push_back(w);
    spec.layer_widths.push_back(cfg.classes);
    spec.activation = nn::parse_activation(cfg.activation);
    return spec;
}

fed::EngineConfig build_engine_config(const Config& cfg) {
    fed::EngineConfig ec;
    ec.spec = build_spec(cfg);
    ec.method = fed::parse_method(cfg.method);
    ec.participation = cfg.participation;
    ec.local_steps = cfg.local_steps;
    ec.batch_size = cfg.batch_size;
    ec.client_lr = cfg.client_lr;
    ec.hn_lr = cfg.hn_lr;
    ec.lambda = ec.method == fed::Method::FrampNoAlign ||
                        !fed::is_framp_family(ec.method)
                    ? 0.0
                    : cfg.lambda;
    ec.hn_hidden = cfg.hn_hidden;
    if (cfg.hn_update == "sum") ec.hn_update_sum = true;
    else if (cfg.hn_update != "mean") throw ConfigError("hn_update must be mean or sum");
    if (cfg.proto_noise == "none") ec.proto_noise = fed::ProtoNoise::None;
    else if (cfg.proto_noise == "gaussian") ec.proto_noise = fed::ProtoNoise::Gaussian;
    else if (cfg.proto_noise == "rotation") ec.proto_noise = fed::ProtoNoise::Rotation;
    else throw ConfigError("proto_noise must be none, gaussian or rotation");
    ec.proto_noise_a = cfg.proto_noise_a;
    ec.proto_noise_seed = cfg.proto_noise_seed;
    ec.seed = cfg.seed;
    return ec;
}

// 20% of each capacity group (or the whole smallest-gamma group) held out of training.
std::pair<std::vector<size_t>, std::vector<size_t>> split_holdout(
    const Config& cfg, const std::vector<double>& capacities) {
    std::vector<size_t> train, holdout;
    size_t n = capacities.size();
    if (cfg.holdout_fraction <= 0.0 && cfg.holdout_mode != "smallest_group_all") {
        train.resize(n);
        std::iota(train.begin(), train.end(), 0);
        return {train, holdout};
    }
    std::vector<char> held(n, 0);
    if (cfg.holdout_mode == "smallest_group") {
        double smallest = *std::min_element(cfg.levels.begin(), cfg.levels.end());
        for (size_t i = 0; i < n; ++i)
            if (capacities[i] == smallest) held[i] = 1;
    } else if (cfg.holdout_mode == "per_group") {
        for (double level : cfg.levels) {
            std::vector<size_t> group;
            for (size_t i = 0; i < n; ++i)
                if (capacities[i] == level) group.push_back(i);
            size_t k = static_cast<size_t>(
                std::llround(cfg.holdout_fraction * static_cast<double>(group.size())));
            Rng rng(Rng::mix(cfg.seed, 0x401d, static_cast<uint64_t>(level * 1e6)));
            rng.shuffle(group);
            for (size_t i = 0; i < k && i < group.size(); ++i) held[group[i]] = 1;
        }
    } else {
        throw ConfigError("holdout_mode must be per_group or smallest_group");
    }
    for (size_t i = 0; i < n; ++i) (held[i] ? holdout : train).push_back(i);
    if (train.empty()) throw ConfigError("holdout removed every training client");
    return {train, holdout};
}

}  // namespace

ExperimentResult run(const Config& cfg) {
    ExperimentResult result;
    result.config = cfg;

    auto base = data::gen_synthetic(cfg.classes, cfg.input_dim, cfg.n_per_class,
                                    cfg.class_sep, Rng::mix(cfg.seed, seed_role::data));
    result.shards = data::dirichlet_partition(base, cfg.clients, cfg.dirichlet_alpha,
                                              Rng::mix(cfg.seed, seed_role::partition));

    std::vector<fed::Vec> descriptors(cfg.clients);
    bool onehot = cfg.method == "framp_onehot";
    uint64_t extractor_seed = Rng::mix(cfg.seed, seed_role::extractor);
    for (size_t n = 0; n < cfg.clients; ++n)
        descriptors[n] = onehot
            ? data::onehot_descriptor(n, cfg.clients, cfg.descriptor_dim)
            : data::compute_descriptor(extractor_seed, cfg.descriptor_dim,
                                       result.shards[n]);

    auto capacities = fed::assign_capacities(cfg.clients, cfg.levels,
                                             Rng::mix(cfg.seed, seed_role::capacities));
    auto [train_clients, holdout_clients] = split_holdout(cfg, capacities);
    result.training_clients = train_clients;
    result.holdout_clients = holdout_clients;

    auto ec = build_engine_config(cfg);
    result.state = fed::init_state(ec, result.shards, descriptors, cfg.levels,
                                   train_clients);

    for (const auto& shard : result.shards) {
        result.union_testset.inputs.insert(result.union_testset.inputs.end(),
                                           shard.test.inputs.begin(),
                                           shard.test.inputs.end());
        result.union_testset.labels.insert(result.union_testset.labels.end(),
                                           shard.test.labels.begin(),
                                           shard.test.labels.end());
    }

    std::filesystem::path outdir(cfg.out);
    std::optional<mask::MaskWriter> writer;
    if (!cfg.out.empty()) {
        std::filesystem::create_directories(outdir);
        writer.emplace((outdir / "masks.bin").string(), ec.spec.param_count());
    }

    for (size_t r = 0; r < cfg.rounds; ++r) {
        auto rm = fed::run_round(result.state, result.shards,
                                 writer ? &*writer : nullptr);
        result.round_metrics.push_back(rm);
        bool eval_now = cfg.eval_every > 0 && (r + 1) % cfg.eval_every == 0;
        if (r + 1 == cfg.rounds) eval_now = true;
        if (eval_now) {
            auto row = metrics::evaluate_state(result.state, result.shards,
                                               result.union_testset, train_clients);
            row.round = r + 1;
            row.align_loss = rm.mean_alignment_loss;
            result.eval_rows.push_back(std::move(row));
        }
    }
    if (writer) writer->close();
    return result;
}

namespace {

void write_metrics_csv(const ExperimentResult& res, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << std::setprecision(17);
    out << "round";
    for (double g : res.config.levels) out << ",group_" << format_gamma(g);
    out << ",local,union,align_loss";
    for (double g : res.config.levels) out << ",gini_" << format_gamma(g);
    out << "\n";
    for (const auto& row : res.eval_rows) {
        out << row.round;
        for (double a : row.group_accuracy) out << ',' << a;
        out << ',' << row.local << ',' << row.union_mean << ',' << row.align_loss;
        for (double g : row.group_gini) out << ',' << g;
        out << "\n";
    }
}

void write_prototype_csv(const ExperimentResult& res, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << std::setprecision(17);
    out << "round,source,class";
    for (size_t j = 0; j < res.state.config.spec.encoder_dim(); ++j) out << ",h" << j;
    out << "\n";
    const auto& g = res.state.global_protos;
    for (size_t c = 0; c < g.num_classes; ++c) {
        if (!g.present[c]) continue;
        out << res.state.round << ",global," << c;
        for (double x : g.vectors[c]) out << ',' << x;
        out << "\n";
    }
    for (size_t n : res.training_clients) {
        mask::Mask m;
        fed::Vec sub = fed::issued_params(res.state, n, m);
        auto local = proto::local_prototypes(res.state.config.spec, sub, m.bits,
                                             res.shards[n].train);
        for (size_t c = 0; c < local.num_classes; ++c) {
            if (!local.present[c]) continue;
            out << res.state.round << ",client_" << n << ',' << c;
            for (double x : local.vectors[c]) out << ',' << x;
            out << "\n";
        }
    }
}

void write_report_json(const ExperimentResult& res, const std::string& path) {
    nlohmann::json j;
    const Config& cfg = res.config;
    j["config"] = {
        {"method", cfg.method}, {"seed", cfg.seed}, {"rounds", cfg.rounds},
        {"eval_every", cfg.eval_every}, {"classes", cfg.classes},
        {"input_dim", cfg.input_dim}, {"n_per_class", cfg.n_per_class},
        {"class_sep", cfg.class_sep}, {"clients", cfg.clients},
        {"dirichlet_alpha", cfg.dirichlet_alpha},
        {"descriptor_dim", cfg.descriptor_dim}, {"hidden_widths", cfg.hidden_widths},
        {"activation", cfg.activation}, {"levels", cfg.levels},
        {"participation", cfg.participation}, {"local_steps", cfg.local_steps},
        {"batch_size", cfg.batch_size}, {"client_lr", cfg.client_lr},
        {"hn_lr", cfg.hn_lr}, {"lambda", cfg.lambda}, {"hn_hidden", cfg.hn_hidden},
        {"hn_update", cfg.hn_update}, {"holdout_fraction", cfg.holdout_fraction},
        {"holdout_mode", cfg.holdout_mode}, {"proto_noise", cfg.proto_noise},
        {"proto_noise_a", cfg.proto_noise_a},
        {"proto_noise_seed", cfg.proto_noise_seed},
    };
    if (!res.eval_rows.empty()) {
        const auto& fin = res.eval_rows.back();
        nlohmann::json table;
        for (size_t i = 0; i < cfg.levels.size(); ++i)
            table[format_gamma(cfg.levels[i])] = fin.group_accuracy[i];
        table["local"] = fin.local;
        table["union"] = fin.union_mean;
        j["final"] = table;
        nlohmann::json per_union;
        for (size_t i = 0; i < cfg.levels.size(); ++i)
            per_union[format_gamma(cfg.levels[i])] = fin.union_accuracy[i];
        j["final_union_by_gamma"] = per_union;
        nlohmann::json gini;
        for (size_t i = 0; i < cfg.levels.size(); ++i)
            gini[format_gamma(cfg.levels[i])] = fin.group_gini[i];
        j["final_gini_by_gamma"] = gini;
    }
    if (!res.holdout_clients.empty()) {
        auto acc = metrics::new_client_eval(res.state, res.shards, res.holdout_clients);
        j["holdout_clients"] = res.holdout_clients;
        j["holdout_accuracy"] = acc;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << j.dump(2) << "\n";
}

}  // namespace

int run_experiment(const Config& cfg) {
    auto res = run(cfg);
    std::filesystem::path outdir(cfg.out);
    write_metrics_csv(res, (outdir / "metrics.csv").string());
    write_report_json(res, (outdir / "report.json").string());
    write_prototype_csv(res, (outdir / "prototypes.csv").string());
    if (res.state.hypernet)
        hn::save_checkpoint(*res.state.hypernet, (outdir / "hypernet.json").string());
    return 0;
}

}  // namespace framp::experiment
