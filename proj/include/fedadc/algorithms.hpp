#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "fedadc/distillation.hpp"
#include "fedadc/loss.hpp"
#include "fedadc/model.hpp"
#include "fedadc/param_vector.hpp"
#include "fedadc/partition.hpp"
#include "fedadc/rng.hpp"

namespace fedadc {

enum class LocalRule { FedAvg, FedAdcNesterov, FedAdcHeavyball, FedAdcDoubleMomentum, FedProx };
enum class BudgetKind { Iterations, Epochs };

struct LocalConfig {
    LocalRule rule = LocalRule::FedAvg;
    double phi = 0.0;  // local momentum decay, fedadc-dm only
    double mu = 0.0;   // proximal coefficient, fedprox only
    LossSpec loss;
    std::size_t batch_size = 64;
    BudgetKind budget = BudgetKind::Iterations;
    std::size_t iterations = 8;  // H when budget = Iterations
    std::size_t epochs = 2;      // E when budget = Epochs

    void validate() const;
    // Local step count for a given train-split size: H, or ceil(n/b) * E.
    std::size_t steps_for(std::size_t train_size) const;
};

struct ServerState {
    int round = 0;
    ParamVector theta;
    ParamVector momentum;  // m_t, zero at round 0
    double alpha = 1.0;
    double beta_global = 0.0;
    double beta_local = 0.0;
    double eta = 0.01;
    std::size_t h = 1;  // local iterations per round (nominal; epoch budgets vary per client)

    static ServerState init(ParamVector theta0, double alpha, double beta_global,
                            double beta_local, double eta, std::size_t h);
    void validate() const;
};

struct ClientUpdate {
    int client_id = 0;
    ParamVector delta;  // theta_t - theta_H
    std::size_t samples_used = 0;
};

// Optional per-round client bookkeeping: the mini-batch gradients the client
// actually computed (summed), plus loss statistics.
struct LocalTrace {
    ParamVector grad_sum;
    double loss_sum = 0.0;
    std::size_t steps = 0;

    double mean_loss() const { return steps == 0 ? 0.0 : loss_sum / static_cast<double>(steps); }
};

// m_bar = beta_local * m / H, elementwise.
ParamVector normalize_momentum(const ParamVector& momentum, double beta_local, std::size_t h);

// Mini-batch gradient oracle for one local step; called exactly once per step.
using GradFn = std::function<GradResult(const ParamVector& params, std::size_t step)>;

// Runs H local updates from theta0 under the given rule and returns theta_H.
// Throws DivergedClientError if any gradient is non-finite.
ParamVector run_local_steps(const ParamVector& theta0, const ParamVector& m_bar, LocalRule rule,
                            double eta, std::size_t h, double phi, double mu,
                            const GradFn& grad_fn, int round, int client_id,
                            LocalTrace* trace = nullptr);

// One client's local round: shuffled mini-batches from the shard's train
// split, the configured update rule, and (for the combined loss) distillation
// targets built from the teacher and the shard's confidence vector. Returns
// the accumulated difference theta_t - theta_H.
ClientUpdate local_round(const ParamVector& theta0, const ParamVector& m_bar,
                         const LabeledDataset& ds, const ClientShard& shard,
                         const LocalConfig& cfg, const ModelSpec& spec,
                         const TeacherSnapshot* teacher, rng::Engine& eng, double eta, int round,
                         LocalTrace* trace = nullptr);

// Average update direction: (1/|S|) (1/eta) sum of deltas, reduced in
// ascending client-id order.
ParamVector pseudo_delta(const std::vector<ClientUpdate>& updates, double eta);

// m' = beta_global * m + g_bar; theta' = theta - alpha * eta * m'.
ServerState server_update_slowmo(const ServerState& state, const ParamVector& g_bar);

// m' = delta_bar + (beta_global - beta_local) * m; theta' = theta - alpha * eta * m'.
ServerState server_update_fedadc(const ServerState& state, const ParamVector& delta_bar);

// m' = delta_bar; theta' = theta - alpha * eta * m'.
ServerState server_update_dm(const ServerState& state, const ParamVector& delta_bar);

// theta' = theta - (1/|S|) sum of deltas; momentum stays zero.
ServerState server_update_fedavg(const ServerState& state,
                                 const std::vector<ClientUpdate>& updates);

}  // namespace fedadc
