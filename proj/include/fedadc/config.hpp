#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "fedadc/algorithms.hpp"
#include "fedadc/model.hpp"
#include "fedadc/partition.hpp"
#include "fedadc/personalization.hpp"

namespace fedadc {

enum class Algorithm { FedAvg, SlowMo, FedAdcHeavyball, FedAdcNesterov, FedAdcDm, FedProx };
enum class SelectionPolicy { Random, ClassCover };

struct DataConfig {
    enum class Source { Synthetic, File };
    Source source = Source::Synthetic;
    std::string train_path;  // source = file
    std::string test_path;   // source = file
    std::size_t classes = 10;
    std::size_t input_dim = 32;
    std::size_t train_per_class = 100;
    std::size_t test_per_class = 50;
    double class_separation = 6.0;
};

struct ExperimentConfig {
    DataConfig data;
    PartitionSpec partition;  // partition.seed mirrors `seed`
    ModelSpec model;
    Algorithm algorithm = Algorithm::FedAvg;
    LocalConfig local;  // local.rule derived from `algorithm`
    double alpha = 1.0;
    double beta_global = 0.0;
    double beta_local = 0.0;
    double eta = 0.05;
    std::size_t rounds = 100;
    double participation = 0.2;
    SelectionPolicy selection = SelectionPolicy::Random;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::size_t threads = 1;
    bool personalize = false;
    PersonalizationConfig pers;

    void validate() const;  // throws ConfigError
    // Number of clients selected per round.
    std::size_t clients_per_round() const;
    bool uses_server_momentum() const;
};

// Parses flat `key = value` text (one pair per line, `#` starts a comment).
// Unknown keys, duplicate keys, and keys that do not apply to the configured
// algorithm/partition/loss are hard errors.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Resolved-config echo for summary.json, and its inverse. config_from_json of
// config_to_json reconstructs an identical configuration.
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);

std::string to_string(Algorithm a);
std::string to_string(SelectionPolicy s);

}  // namespace fedadc
