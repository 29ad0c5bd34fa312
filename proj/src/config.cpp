#include "fedadc/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "fedadc/errors.hpp"

namespace fedadc {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "data",           "data_path",     "test_path",      "classes",
        "input_dim",      "train_per_class", "test_per_class", "class_separation",
        "partition",      "skew_s",        "dirichlet_alpha", "clients",
        "model",          "hidden_dims",   "activation",      "algorithm",
        "phi",            "mu",            "loss",            "lambda",
        "tau",            "weight_decay",  "local_budget",    "local_iterations",
        "local_epochs",   "batch_size",    "alpha",           "beta_global",
        "beta_local",     "eta",           "rounds",          "participation",
        "selection",      "seed",          "out_dir",         "threads",
        "personalize",    "pers_epochs",   "pers_eta",        "pers_regularizer",
        "pers_mu",        "pers_lambda",   "pers_tau",        "pers_weight_decay",
        "pers_batch_size"};
    return keys;
}

struct KvMap {
    std::map<std::string, std::string> kv;

    std::optional<std::string> take(const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    }

    void reject_leftovers() const {
        if (kv.empty()) return;
        const std::string& key = kv.begin()->first;
        if (known_keys().count(key))
            throw ConfigError("config: key '" + key + "' does not apply to this configuration");
        throw ConfigError("config: unknown key '" + key + "'");
    }
};

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        if (!std::isfinite(v)) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a number, got '" + value + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        if (!value.empty() && value[0] == '-') throw std::invalid_argument(value);
        std::size_t used = 0;
        const std::uint64_t v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a non-negative integer, got '" +
                          value + "'");
    }
}

std::size_t parse_size(const std::string& key, const std::string& value) {
    return static_cast<std::size_t>(parse_u64(key, value));
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ConfigError("config: key '" + key + "' expects true or false, got '" + value + "'");
}

std::vector<std::size_t> parse_dims(const std::string& key, const std::string& value) {
    std::vector<std::size_t> dims;
    std::stringstream ss(value);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part = trim(part);
        if (part.empty())
            throw ConfigError("config: key '" + key + "' has an empty list entry");
        dims.push_back(parse_size(key, part));
    }
    if (dims.empty()) throw ConfigError("config: key '" + key + "' expects a non-empty list");
    return dims;
}

ExperimentConfig resolve(KvMap& kv) {
    ExperimentConfig cfg;

    // Dataset.
    const std::string data = kv.take("data").value_or("synthetic");
    if (data == "synthetic") {
        cfg.data.source = DataConfig::Source::Synthetic;
        if (auto v = kv.take("classes")) cfg.data.classes = parse_size("classes", *v);
        if (auto v = kv.take("input_dim")) cfg.data.input_dim = parse_size("input_dim", *v);
        if (auto v = kv.take("train_per_class"))
            cfg.data.train_per_class = parse_size("train_per_class", *v);
        if (auto v = kv.take("test_per_class"))
            cfg.data.test_per_class = parse_size("test_per_class", *v);
        if (auto v = kv.take("class_separation"))
            cfg.data.class_separation = parse_double("class_separation", *v);
    } else if (data == "file") {
        cfg.data.source = DataConfig::Source::File;
        auto train = kv.take("data_path");
        auto test = kv.take("test_path");
        if (!train || !test)
            throw ConfigError("config: data = file requires data_path and test_path");
        cfg.data.train_path = *train;
        cfg.data.test_path = *test;
    } else {
        throw ConfigError("config: data must be synthetic or file, got '" + data + "'");
    }

    // Partition.
    const std::string partition = kv.take("partition").value_or("sort");
    if (partition == "sort") {
        cfg.partition.method = PartitionMethod::SortPartition;
        if (auto v = kv.take("skew_s")) cfg.partition.skew_s = parse_size("skew_s", *v);
    } else if (partition == "dirichlet") {
        cfg.partition.method = PartitionMethod::Dirichlet;
        if (auto v = kv.take("dirichlet_alpha"))
            cfg.partition.alpha = parse_double("dirichlet_alpha", *v);
    } else {
        throw ConfigError("config: partition must be sort or dirichlet, got '" + partition + "'");
    }
    if (auto v = kv.take("clients")) cfg.partition.num_clients = parse_size("clients", *v);
    else cfg.partition.num_clients = 50;

    // Model.
    const std::string model = kv.take("model").value_or("logistic");
    if (model == "logistic") {
        cfg.model.kind = ModelKind::Logistic;
    } else if (model == "mlp") {
        cfg.model.kind = ModelKind::Mlp;
        cfg.model.hidden_dims = {64};
        if (auto v = kv.take("hidden_dims")) cfg.model.hidden_dims = parse_dims("hidden_dims", *v);
        const std::string act = kv.take("activation").value_or("relu");
        if (act == "relu") cfg.model.activation = Activation::Relu;
        else if (act == "tanh") cfg.model.activation = Activation::Tanh;
        else throw ConfigError("config: activation must be relu or tanh, got '" + act + "'");
    } else {
        throw ConfigError("config: model must be logistic or mlp, got '" + model + "'");
    }
    if (cfg.data.source == DataConfig::Source::Synthetic) {
        cfg.model.input_dim = cfg.data.input_dim;
        cfg.model.num_classes = cfg.data.classes;
    }

    // Algorithm and its rule-specific knobs.
    const std::string algorithm = kv.take("algorithm").value_or("fedavg");
    if (algorithm == "fedavg") cfg.algorithm = Algorithm::FedAvg;
    else if (algorithm == "slowmo") cfg.algorithm = Algorithm::SlowMo;
    else if (algorithm == "fedadc-heavyball") cfg.algorithm = Algorithm::FedAdcHeavyball;
    else if (algorithm == "fedadc-nesterov") cfg.algorithm = Algorithm::FedAdcNesterov;
    else if (algorithm == "fedadc-dm") cfg.algorithm = Algorithm::FedAdcDm;
    else if (algorithm == "fedprox") cfg.algorithm = Algorithm::FedProx;
    else
        throw ConfigError(
            "config: algorithm must be one of fedavg, slowmo, fedadc-heavyball, "
            "fedadc-nesterov, fedadc-dm, fedprox; got '" +
            algorithm + "'");

    switch (cfg.algorithm) {
        case Algorithm::FedAvg:
        case Algorithm::SlowMo:
            cfg.local.rule = LocalRule::FedAvg;
            break;
        case Algorithm::FedAdcHeavyball:
            cfg.local.rule = LocalRule::FedAdcHeavyball;
            break;
        case Algorithm::FedAdcNesterov:
            cfg.local.rule = LocalRule::FedAdcNesterov;
            break;
        case Algorithm::FedAdcDm:
            cfg.local.rule = LocalRule::FedAdcDoubleMomentum;
            break;
        case Algorithm::FedProx:
            cfg.local.rule = LocalRule::FedProx;
            break;
    }

    if (cfg.algorithm == Algorithm::FedAdcDm) {
        auto v = kv.take("phi");
        if (!v) throw ConfigError("config: algorithm = fedadc-dm requires phi");
        cfg.local.phi = parse_double("phi", *v);
    }
    if (cfg.algorithm == Algorithm::FedProx) {
        auto v = kv.take("mu");
        if (!v) throw ConfigError("config: algorithm = fedprox requires mu");
        cfg.local.mu = parse_double("mu", *v);
    }

    // Loss.
    const std::string loss = kv.take("loss").value_or("ce");
    if (loss == "ce") {
        cfg.local.loss.kind = LossKind::Ce;
    } else if (loss == "combined") {
        cfg.local.loss.kind = LossKind::Combined;
        cfg.local.loss.lambda = 0.35;
        cfg.local.loss.tau = 1.0;
        if (auto v = kv.take("lambda")) cfg.local.loss.lambda = parse_double("lambda", *v);
        if (auto v = kv.take("tau")) cfg.local.loss.tau = parse_double("tau", *v);
    } else {
        throw ConfigError("config: loss must be ce or combined, got '" + loss + "'");
    }
    if (auto v = kv.take("weight_decay"))
        cfg.local.loss.weight_decay = parse_double("weight_decay", *v);

    // Local budget.
    const std::string budget = kv.take("local_budget").value_or("iterations");
    if (budget == "iterations") {
        cfg.local.budget = BudgetKind::Iterations;
        if (auto v = kv.take("local_iterations"))
            cfg.local.iterations = parse_size("local_iterations", *v);
    } else if (budget == "epochs") {
        cfg.local.budget = BudgetKind::Epochs;
        if (auto v = kv.take("local_epochs")) cfg.local.epochs = parse_size("local_epochs", *v);
    } else {
        throw ConfigError("config: local_budget must be iterations or epochs, got '" + budget +
                          "'");
    }
    if (auto v = kv.take("batch_size")) cfg.local.batch_size = parse_size("batch_size", *v);

    // Server hyperparameters.
    if (auto v = kv.take("alpha")) cfg.alpha = parse_double("alpha", *v);
    const bool allows_bg = cfg.algorithm == Algorithm::SlowMo ||
                           cfg.algorithm == Algorithm::FedAdcHeavyball ||
                           cfg.algorithm == Algorithm::FedAdcNesterov;
    const bool allows_bl = cfg.algorithm == Algorithm::FedAdcHeavyball ||
                           cfg.algorithm == Algorithm::FedAdcNesterov ||
                           cfg.algorithm == Algorithm::FedAdcDm;
    if (allows_bg) {
        if (auto v = kv.take("beta_global")) cfg.beta_global = parse_double("beta_global", *v);
    }
    if (allows_bl) {
        if (auto v = kv.take("beta_local")) cfg.beta_local = parse_double("beta_local", *v);
    }
    if (auto v = kv.take("eta")) cfg.eta = parse_double("eta", *v);
    if (auto v = kv.take("rounds")) cfg.rounds = parse_size("rounds", *v);
    if (auto v = kv.take("participation")) cfg.participation = parse_double("participation", *v);

    const std::string selection = kv.take("selection").value_or("random");
    if (selection == "random") cfg.selection = SelectionPolicy::Random;
    else if (selection == "class-cover") cfg.selection = SelectionPolicy::ClassCover;
    else
        throw ConfigError("config: selection must be random or class-cover, got '" + selection +
                          "'");

    if (auto v = kv.take("seed")) cfg.seed = parse_u64("seed", *v);
    if (auto v = kv.take("out_dir")) cfg.out_dir = *v;
    if (auto v = kv.take("threads")) cfg.threads = parse_size("threads", *v);
    cfg.partition.seed = cfg.seed;

    // Personalization.
    if (auto v = kv.take("personalize")) cfg.personalize = parse_bool("personalize", *v);
    if (cfg.personalize) {
        cfg.pers.eta_p = cfg.eta;
        cfg.pers.batch_size = cfg.local.batch_size;
        if (auto v = kv.take("pers_epochs")) cfg.pers.epochs = parse_size("pers_epochs", *v);
        if (auto v = kv.take("pers_eta")) cfg.pers.eta_p = parse_double("pers_eta", *v);
        if (auto v = kv.take("pers_weight_decay"))
            cfg.pers.weight_decay = parse_double("pers_weight_decay", *v);
        if (auto v = kv.take("pers_batch_size"))
            cfg.pers.batch_size = parse_size("pers_batch_size", *v);
        const std::string reg = kv.take("pers_regularizer").value_or("none");
        if (reg == "none") {
            cfg.pers.regularizer = PersRegularizer::None;
        } else if (reg == "prox") {
            cfg.pers.regularizer = PersRegularizer::Prox;
            auto v = kv.take("pers_mu");
            if (!v) throw ConfigError("config: pers_regularizer = prox requires pers_mu");
            cfg.pers.mu = parse_double("pers_mu", *v);
        } else if (reg == "kd") {
            cfg.pers.regularizer = PersRegularizer::Kd;
            if (auto v = kv.take("pers_lambda"))
                cfg.pers.lambda = parse_double("pers_lambda", *v);
            if (auto v = kv.take("pers_tau")) cfg.pers.tau = parse_double("pers_tau", *v);
        } else {
            throw ConfigError("config: pers_regularizer must be none, prox or kd, got '" + reg +
                              "'");
        }
    }

    kv.reject_leftovers();
    cfg.validate();
    return cfg;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (data.source == DataConfig::Source::Synthetic) {
        if (data.classes < 2) throw ConfigError("config: classes must be >= 2");
        if (data.input_dim == 0) throw ConfigError("config: input_dim must be >= 1");
        if (data.train_per_class == 0)
            throw ConfigError("config: train_per_class must be >= 1");
        if (data.test_per_class == 0) throw ConfigError("config: test_per_class must be >= 1");
        if (data.class_separation < 0.0)
            throw ConfigError("config: class_separation must be >= 0");
        model.validate();
        partition.validate(data.classes);
    } else {
        if (data.train_path.empty() || data.test_path.empty())
            throw ConfigError("config: data = file requires data_path and test_path");
        // Model and partition shapes are checked after the dataset is loaded.
    }
    local.validate();
    if (alpha <= 0.0) throw ConfigError("config: alpha must be positive");
    if (beta_global < 0.0 || beta_global >= 1.0)
        throw ConfigError("config: beta_global must lie in [0, 1)");
    if (beta_local < 0.0 || beta_local >= 1.0)
        throw ConfigError("config: beta_local must lie in [0, 1)");
    if (eta <= 0.0) throw ConfigError("config: eta must be positive");
    if (rounds == 0) throw ConfigError("config: rounds must be >= 1");
    if (participation <= 0.0 || participation > 1.0)
        throw ConfigError("config: participation must lie in (0, 1]");
    if (threads == 0) throw ConfigError("config: threads must be >= 1");
    if (personalize) pers.validate();
}

std::size_t ExperimentConfig::clients_per_round() const {
    const double n = static_cast<double>(partition.num_clients);
    auto k = static_cast<std::size_t>(std::ceil(participation * n - 1e-9));
    if (k < 1) k = 1;
    if (k > partition.num_clients) k = partition.num_clients;
    return k;
}

bool ExperimentConfig::uses_server_momentum() const {
    return algorithm == Algorithm::SlowMo || algorithm == Algorithm::FedAdcHeavyball ||
           algorithm == Algorithm::FedAdcNesterov || algorithm == Algorithm::FedAdcDm;
}

ExperimentConfig parse_config_text(const std::string& text) {
    KvMap kv;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (kv.kv.count(key))
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" +
                              key + "'");
        kv.kv[key] = value;
    }
    return resolve(kv);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::FedAvg: return "fedavg";
        case Algorithm::SlowMo: return "slowmo";
        case Algorithm::FedAdcHeavyball: return "fedadc-heavyball";
        case Algorithm::FedAdcNesterov: return "fedadc-nesterov";
        case Algorithm::FedAdcDm: return "fedadc-dm";
        case Algorithm::FedProx: return "fedprox";
    }
    return "?";
}

std::string to_string(SelectionPolicy s) {
    return s == SelectionPolicy::Random ? "random" : "class-cover";
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    if (cfg.data.source == DataConfig::Source::Synthetic) {
        j["data"] = "synthetic";
        j["classes"] = cfg.data.classes;
        j["input_dim"] = cfg.data.input_dim;
        j["train_per_class"] = cfg.data.train_per_class;
        j["test_per_class"] = cfg.data.test_per_class;
        j["class_separation"] = cfg.data.class_separation;
    } else {
        j["data"] = "file";
        j["data_path"] = cfg.data.train_path;
        j["test_path"] = cfg.data.test_path;
    }
    if (cfg.partition.method == PartitionMethod::SortPartition) {
        j["partition"] = "sort";
        j["skew_s"] = cfg.partition.skew_s;
    } else {
        j["partition"] = "dirichlet";
        j["dirichlet_alpha"] = cfg.partition.alpha;
    }
    j["clients"] = cfg.partition.num_clients;
    if (cfg.model.kind == ModelKind::Logistic) {
        j["model"] = "logistic";
    } else {
        j["model"] = "mlp";
        j["hidden_dims"] = cfg.model.hidden_dims;
        j["activation"] = cfg.model.activation == Activation::Relu ? "relu" : "tanh";
    }
    j["algorithm"] = to_string(cfg.algorithm);
    if (cfg.algorithm == Algorithm::FedAdcDm) j["phi"] = cfg.local.phi;
    if (cfg.algorithm == Algorithm::FedProx) j["mu"] = cfg.local.mu;
    if (cfg.local.loss.kind == LossKind::Ce) {
        j["loss"] = "ce";
    } else {
        j["loss"] = "combined";
        j["lambda"] = cfg.local.loss.lambda;
        j["tau"] = cfg.local.loss.tau;
    }
    j["weight_decay"] = cfg.local.loss.weight_decay;
    if (cfg.local.budget == BudgetKind::Iterations) {
        j["local_budget"] = "iterations";
        j["local_iterations"] = cfg.local.iterations;
    } else {
        j["local_budget"] = "epochs";
        j["local_epochs"] = cfg.local.epochs;
    }
    j["batch_size"] = cfg.local.batch_size;
    j["alpha"] = cfg.alpha;
    const bool allows_bg = cfg.algorithm == Algorithm::SlowMo ||
                           cfg.algorithm == Algorithm::FedAdcHeavyball ||
                           cfg.algorithm == Algorithm::FedAdcNesterov;
    const bool allows_bl = cfg.algorithm == Algorithm::FedAdcHeavyball ||
                           cfg.algorithm == Algorithm::FedAdcNesterov ||
                           cfg.algorithm == Algorithm::FedAdcDm;
    if (allows_bg) j["beta_global"] = cfg.beta_global;
    if (allows_bl) j["beta_local"] = cfg.beta_local;
    j["eta"] = cfg.eta;
    j["rounds"] = cfg.rounds;
    j["participation"] = cfg.participation;
    j["selection"] = to_string(cfg.selection);
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    j["threads"] = cfg.threads;
    j["personalize"] = cfg.personalize;
    if (cfg.personalize) {
        j["pers_epochs"] = cfg.pers.epochs;
        j["pers_eta"] = cfg.pers.eta_p;
        switch (cfg.pers.regularizer) {
            case PersRegularizer::None: j["pers_regularizer"] = "none"; break;
            case PersRegularizer::Prox:
                j["pers_regularizer"] = "prox";
                j["pers_mu"] = cfg.pers.mu;
                break;
            case PersRegularizer::Kd:
                j["pers_regularizer"] = "kd";
                j["pers_lambda"] = cfg.pers.lambda;
                j["pers_tau"] = cfg.pers.tau;
                break;
        }
        j["pers_weight_decay"] = cfg.pers.weight_decay;
        j["pers_batch_size"] = cfg.pers.batch_size;
    }
    return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config json: expected an object");
    KvMap kv;
    for (const auto& [key, value] : j.items()) {
        if (value.is_string()) {
            kv.kv[key] = value.get<std::string>();
        } else if (key == "hidden_dims" && value.is_array()) {
            std::string csv;
            for (const auto& d : value) {
                if (!csv.empty()) csv += ",";
                csv += d.dump();
            }
            kv.kv[key] = csv;
        } else {
            kv.kv[key] = value.dump();
        }
    }
    return resolve(kv);
}

}  // namespace fedadc
