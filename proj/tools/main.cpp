#include <cstdint>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedadc/config.hpp"
#include "fedadc/engine.hpp"
#include "fedadc/errors.hpp"
#include "fedadc/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitIo = 3;

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void print_notes(const fedadc::RunRecord& record) {
    for (const auto& note : record.notes) std::cerr << "note: " << note << "\n";
}

int run_one(const fedadc::ExperimentConfig& cfg) {
    const fedadc::RunRecord record = fedadc::run_experiment(cfg);
    fedadc::emit(record, record.config.out_dir);
    print_notes(record);
    std::cout << "final_acc " << fmt6(record.final_acc) << "  rounds "
              << record.rounds.size() << "  out " << record.config.out_dir << "\n";
    if (record.personalized)
        std::cout << "personalized mean_acc " << fmt6(record.pers_acc.mean)
                  << "  global mean local acc " << fmt6(record.global_mean_local_acc) << "\n";
    return kExitOk;
}

int run_sweep(const fedadc::ExperimentConfig& base) {
    const std::vector<double> etas = {0.01, 0.025, 0.05, 0.1};
    const std::vector<double> betas = {0.6, 0.7, 0.8, 0.9};
    const bool momentum = base.uses_server_momentum();

    std::vector<std::pair<double, double>> grid;
    for (double eta : etas) {
        if (momentum)
            for (double beta : betas) grid.emplace_back(eta, beta);
        else
            grid.emplace_back(eta, 0.0);
    }

    for (const auto& [eta, beta] : grid) {
        fedadc::ExperimentConfig cfg = base;
        cfg.eta = eta;
        if (momentum) {
            cfg.beta_global = beta;
            if (cfg.algorithm != fedadc::Algorithm::SlowMo) cfg.beta_local = beta;
            if (cfg.algorithm == fedadc::Algorithm::FedAdcDm) cfg.beta_global = 0.0;
        }
        std::string name = "eta" + fmt6(eta);
        if (momentum) name += "_beta" + fmt6(beta);
        cfg.out_dir = base.out_dir + "/" + name;
        const fedadc::RunRecord record = fedadc::run_experiment(cfg);
        fedadc::emit(record, cfg.out_dir);
        std::cout << name << "  final_acc " << fmt6(record.final_acc) << "\n";
    }
    return kExitOk;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<std::string> out, std::optional<std::size_t> threads, bool sweep) {
    fedadc::ExperimentConfig cfg = fedadc::load_config(config_path);
    if (seed) {
        cfg.seed = *seed;
        cfg.partition.seed = *seed;
    }
    if (out) cfg.out_dir = *out;
    if (threads) cfg.threads = *threads;
    cfg.validate();
    return sweep ? run_sweep(cfg) : run_one(cfg);
}

int cmd_partition_stats(const std::string& config_path) {
    const fedadc::ExperimentConfig cfg = fedadc::load_config(config_path);
    fedadc::LabeledDataset train;
    if (cfg.data.source == fedadc::DataConfig::Source::Synthetic) {
        const fedadc::LabeledDataset full = fedadc::gen_synthetic(
            cfg.data.classes, cfg.data.input_dim,
            cfg.data.train_per_class + cfg.data.test_per_class, cfg.data.class_separation,
            cfg.seed);
        train = fedadc::split_per_class(full, cfg.data.test_per_class).first;
    } else {
        train = fedadc::import_dataset(cfg.data.train_path);
        cfg.partition.validate(train.num_classes);
    }

    std::size_t dropped = 0;
    const auto shards = fedadc::make_partition(train, cfg.partition, &dropped);
    if (dropped > 0) std::cerr << "note: dropped " << dropped << " samples\n";

    std::cout << "client,size,train,test,distinct_labels,gamma,rho\n";
    for (const auto& shard : shards) {
        std::cout << shard.client_id << ',' << shard.indices.size() << ',' << shard.split << ','
                  << (shard.indices.size() - shard.split) << ',' << shard.distinct_labels()
                  << ',';
        for (std::size_t k = 0; k < shard.gamma.size(); ++k) {
            if (k > 0) std::cout << ';';
            std::cout << fmt6(shard.gamma[k]);
        }
        std::cout << ',';
        for (std::size_t k = 0; k < shard.rho.size(); ++k) {
            if (k > 0) std::cout << ';';
            std::cout << fmt6(shard.rho[k]);
        }
        std::cout << '\n';
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic federated-learning simulator"};
    app.set_version_flag("--version", fedadc::kVersion);
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run a configured experiment");
    std::string run_config;
    run->add_option("--config", run_config, "Path to the experiment config")->required();
    std::optional<std::uint64_t> seed;
    run->add_option("--seed", seed, "Override the config seed");
    std::optional<std::string> out;
    run->add_option("--out", out, "Override the output directory");
    std::optional<std::size_t> threads;
    run->add_option("--threads", threads, "Worker threads for client rounds");
    bool sweep = false;
    run->add_flag("--sweep", sweep, "Run the learning-rate/momentum grid");

    auto* stats = app.add_subcommand("partition-stats", "Print per-client class statistics");
    std::string stats_config;
    stats->add_option("--config", stats_config, "Path to the experiment config")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run->parsed()) return cmd_run(run_config, seed, out, threads, sweep);
        return cmd_partition_stats(stats_config);
    } catch (const fedadc::DivergedClientError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const fedadc::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}
