#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fedadc/algorithms.hpp"
#include "fedadc/config.hpp"
#include "fedadc/personalization.hpp"

namespace fedadc {

struct RoundMetrics {
    int round = 0;  // 1-based
    std::vector<int> selected;
    double global_acc = 0.0;
    double global_loss = 0.0;
    double mean_train_loss = 0.0;
    // Measured wall time. metrics.csv renders this column as 0 so the file is
    // byte-identical across reruns and thread counts; the measured values live
    // in summary.json.
    double elapsed_ms = 0.0;
};

struct RunRecord {
    ExperimentConfig config;  // resolved (dataset-derived model shapes filled in)
    std::vector<RoundMetrics> rounds;
    double final_acc = 0.0;  // mean global accuracy over the last (up to) 10 rounds
    bool personalized = false;
    PersonalAccuracy pers_acc;
    double global_mean_local_acc = 0.0;  // global model scored the same per-client way
    std::vector<std::string> notes;
};

// Observation points for tests; all callbacks run on the orchestrating thread.
struct RunHooks {
    // State at round start (theta_t, m_t), before selection.
    std::function<void(const ServerState&)> before_round;
    // Each selected client's update and gradient trace, ascending client id.
    std::function<void(int round, const ClientUpdate&, const LocalTrace&)> after_client;
    // State after the server update for the round.
    std::function<void(const ServerState&)> after_round;
};

// Uniform subset of size k from [0, n), ascending.
std::vector<int> select_random(std::size_t num_clients, std::size_t k, rng::Engine& eng);

// Random subset of size k whose shards jointly hold every class: rejection
// sampling up to max_retries, then swap repair of fresh random samples, then
// an exact search so failure is proof of infeasibility. Throws SelectionError
// naming the missing classes when no size-k cover exists.
std::vector<int> select_class_cover(const std::vector<ClientShard>& shards,
                                    std::size_t num_classes, std::size_t k, rng::Engine& eng,
                                    std::size_t max_retries = 1000);

// Top-1 accuracy and mean cross-entropy loss over the full test set.
std::pair<double, double> evaluate_global(const ModelSpec& spec, const ParamVector& params,
                                          const LabeledDataset& test);

RunRecord run_experiment(const ExperimentConfig& cfg, const RunHooks* hooks = nullptr);

// Writes metrics.csv and summary.json into out_dir (created if absent); each
// file is written to a temp name and renamed into place.
void emit(const RunRecord& record, const std::string& out_dir);

}  // namespace fedadc
