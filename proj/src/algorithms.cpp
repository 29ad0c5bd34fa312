#include "fedadc/algorithms.hpp"

#include <algorithm>
#include <cmath>

#include "fedadc/errors.hpp"

namespace fedadc {

void LocalConfig::validate() const {
    loss.validate();
    if (batch_size == 0) throw ConfigError("local: batch_size must be >= 1");
    if (budget == BudgetKind::Iterations && iterations == 0)
        throw ConfigError("local: iterations must be >= 1");
    if (budget == BudgetKind::Epochs && epochs == 0)
        throw ConfigError("local: epochs must be >= 1");
    if (rule == LocalRule::FedAdcDoubleMomentum) {
        if (phi < 0.0 || phi >= 1.0) throw ConfigError("local: phi must lie in [0, 1)");
    } else if (phi != 0.0) {
        throw ConfigError("local: phi is only valid for fedadc-dm");
    }
    if (rule == LocalRule::FedProx) {
        if (mu < 0.0) throw ConfigError("local: mu must be >= 0");
    } else if (mu != 0.0) {
        throw ConfigError("local: mu is only valid for fedprox");
    }
}

std::size_t LocalConfig::steps_for(std::size_t train_size) const {
    if (budget == BudgetKind::Iterations) return iterations;
    const std::size_t per_epoch = (train_size + batch_size - 1) / batch_size;
    return per_epoch * epochs;
}

ServerState ServerState::init(ParamVector theta0, double alpha, double beta_global,
                              double beta_local, double eta, std::size_t h) {
    ServerState s;
    s.theta = std::move(theta0);
    s.momentum = ParamVector::zeros_like(s.theta);
    s.alpha = alpha;
    s.beta_global = beta_global;
    s.beta_local = beta_local;
    s.eta = eta;
    s.h = h;
    s.validate();
    return s;
}

void ServerState::validate() const {
    if (!theta.same_shapes(momentum)) throw ConfigError("server: theta/momentum shape mismatch");
    if (beta_global < 0.0 || beta_global >= 1.0 || beta_local < 0.0 || beta_local >= 1.0)
        throw ConfigError("server: momentum coefficients must lie in [0, 1)");
    if (eta <= 0.0) throw ConfigError("server: eta must be positive");
    if (h == 0) throw ConfigError("server: local iteration count must be >= 1");
}

ParamVector normalize_momentum(const ParamVector& momentum, double beta_local, std::size_t h) {
    if (h == 0) throw ConfigError("normalize_momentum: H must be >= 1");
    ParamVector out = momentum;
    const auto hd = static_cast<double>(h);
    for (auto& v : out.values) v = beta_local * v / hd;
    return out;
}

ParamVector run_local_steps(const ParamVector& theta0, const ParamVector& m_bar, LocalRule rule,
                            double eta, std::size_t h, double phi, double mu,
                            const GradFn& grad_fn, int round, int client_id,
                            LocalTrace* trace) {
    if (!theta0.same_shapes(m_bar))
        throw InputError("run_local_steps: theta and m_bar shape mismatch");
    const bool momentum_free = rule == LocalRule::FedAvg || rule == LocalRule::FedProx;
    if (momentum_free) {
        for (double v : m_bar.values)
            if (v != 0.0) throw InputError("run_local_steps: this rule requires m_bar = 0");
    }

    ParamVector theta = theta0;
    ParamVector local_momentum;  // fedadc-dm only
    const std::size_t d = theta.size();

    for (std::size_t step = 1; step <= h; ++step) {
        if (rule == LocalRule::FedAdcNesterov) {
            // Half-point shift before the gradient evaluation.
            for (std::size_t i = 0; i < d; ++i) theta.values[i] -= eta * m_bar.values[i];
        }
        GradResult g = grad_fn(theta, step);
        if (!g.grad.all_finite())
            throw DivergedClientError(round, client_id, "non-finite gradient at local step " +
                                                            std::to_string(step));
        if (trace) {
            if (trace->grad_sum.size() == 0) trace->grad_sum = ParamVector::zeros_like(theta0);
            trace->grad_sum.add_scaled(g.grad, 1.0);
            trace->loss_sum += g.loss;
            trace->steps++;
        }
        switch (rule) {
            case LocalRule::FedAvg:
                for (std::size_t i = 0; i < d; ++i) theta.values[i] -= eta * g.grad.values[i];
                break;
            case LocalRule::FedProx:
                for (std::size_t i = 0; i < d; ++i) {
                    const double prox = mu * (theta.values[i] - theta0.values[i]);
                    theta.values[i] -= eta * (g.grad.values[i] + prox);
                }
                break;
            case LocalRule::FedAdcHeavyball:
                for (std::size_t i = 0; i < d; ++i)
                    theta.values[i] -= eta * (g.grad.values[i] + m_bar.values[i]);
                break;
            case LocalRule::FedAdcNesterov:
                for (std::size_t i = 0; i < d; ++i) theta.values[i] -= eta * g.grad.values[i];
                break;
            case LocalRule::FedAdcDoubleMomentum:
                if (step == 1) {
                    local_momentum = g.grad;
                } else {
                    for (std::size_t i = 0; i < d; ++i)
                        local_momentum.values[i] =
                            phi * local_momentum.values[i] + (1.0 - phi) * g.grad.values[i];
                }
                for (std::size_t i = 0; i < d; ++i)
                    theta.values[i] -= eta * (m_bar.values[i] + local_momentum.values[i]);
                break;
        }
    }
    return theta;
}

namespace {

// Deals shuffled mini-batches from a fixed index set, reshuffling at each
// epoch boundary; batches never straddle a reshuffle.
class BatchCursor {
public:
    BatchCursor(std::span<const std::size_t> indices, rng::Engine& eng)
        : order_(indices.begin(), indices.end()), pos_(order_.size()), eng_(&eng) {}

    std::span<const std::size_t> next(std::size_t batch_size) {
        if (pos_ >= order_.size()) {
            rng::shuffle(*eng_, order_);
            pos_ = 0;
        }
        const std::size_t take = std::min(batch_size, order_.size() - pos_);
        std::span<const std::size_t> out{order_.data() + pos_, take};
        pos_ += take;
        return out;
    }

private:
    std::vector<std::size_t> order_;
    std::size_t pos_;
    rng::Engine* eng_;
};

}  // namespace

ClientUpdate local_round(const ParamVector& theta0, const ParamVector& m_bar,
                         const LabeledDataset& ds, const ClientShard& shard,
                         const LocalConfig& cfg, const ModelSpec& spec,
                         const TeacherSnapshot* teacher, rng::Engine& eng, double eta, int round,
                         LocalTrace* trace) {
    cfg.validate();
    const bool combined = cfg.loss.kind == LossKind::Combined;
    if (combined && teacher == nullptr)
        throw ConfigError("local_round: combined loss requires a teacher snapshot");
    if (!combined && teacher != nullptr)
        throw ConfigError("local_round: teacher snapshot given but loss is plain CE");
    if (shard.train_indices().empty()) throw InputError("local_round: shard has no train split");

    BatchCursor cursor(shard.train_indices(), eng);
    std::size_t samples_used = 0;
    const GradFn grad_fn = [&](const ParamVector& params, std::size_t) {
        const Batch batch = gather(ds, cursor.next(cfg.batch_size));
        samples_used += batch.size();
        if (combined) {
            const Matrix targets = make_targets(*teacher, batch, shard.rho);
            return grad(spec, params, batch, cfg.loss, &targets);
        }
        return grad(spec, params, batch, cfg.loss);
    };

    const std::size_t h = cfg.steps_for(shard.train_indices().size());
    ParamVector theta_h = run_local_steps(theta0, m_bar, cfg.rule, eta, h, cfg.phi, cfg.mu,
                                          grad_fn, round, shard.client_id, trace);

    ClientUpdate update;
    update.client_id = shard.client_id;
    update.delta = theta0;
    update.delta.add_scaled(theta_h, -1.0);
    update.samples_used = samples_used;
    if (!update.delta.all_finite())
        throw DivergedClientError(round, shard.client_id, "non-finite accumulated update");
    return update;
}

ParamVector pseudo_delta(const std::vector<ClientUpdate>& updates, double eta) {
    if (updates.empty()) throw InputError("pseudo_delta: empty update list");
    std::vector<const ClientUpdate*> ordered;
    ordered.reserve(updates.size());
    for (const auto& u : updates) ordered.push_back(&u);
    std::sort(ordered.begin(), ordered.end(),
              [](const ClientUpdate* a, const ClientUpdate* b) {
                  return a->client_id < b->client_id;
              });

    ParamVector acc = ParamVector::zeros_like(updates.front().delta);
    for (const auto* u : ordered) {
        if (!u->delta.same_shapes(acc)) throw InputError("pseudo_delta: shape mismatch");
        acc.add_scaled(u->delta, 1.0);
    }
    const auto count = static_cast<double>(updates.size());
    for (auto& v : acc.values) v = v / count / eta;
    return acc;
}

namespace {

ServerState advance(const ServerState& state, ParamVector new_momentum) {
    ServerState next = state;
    next.momentum = std::move(new_momentum);
    for (std::size_t i = 0; i < next.theta.size(); ++i)
        next.theta.values[i] -= state.alpha * state.eta * next.momentum.values[i];
    next.round = state.round + 1;
    return next;
}

}  // namespace

ServerState server_update_slowmo(const ServerState& state, const ParamVector& g_bar) {
    ParamVector m = ParamVector::zeros_like(state.momentum);
    for (std::size_t i = 0; i < m.size(); ++i)
        m.values[i] = state.beta_global * state.momentum.values[i] + g_bar.values[i];
    return advance(state, std::move(m));
}

ServerState server_update_fedadc(const ServerState& state, const ParamVector& delta_bar) {
    const double correction = state.beta_global - state.beta_local;
    ParamVector m = ParamVector::zeros_like(state.momentum);
    for (std::size_t i = 0; i < m.size(); ++i)
        m.values[i] = delta_bar.values[i] + correction * state.momentum.values[i];
    return advance(state, std::move(m));
}

ServerState server_update_dm(const ServerState& state, const ParamVector& delta_bar) {
    return advance(state, delta_bar);
}

ServerState server_update_fedavg(const ServerState& state,
                                 const std::vector<ClientUpdate>& updates) {
    if (updates.empty()) throw InputError("server_update_fedavg: empty update list");
    std::vector<const ClientUpdate*> ordered;
    ordered.reserve(updates.size());
    for (const auto& u : updates) ordered.push_back(&u);
    std::sort(ordered.begin(), ordered.end(),
              [](const ClientUpdate* a, const ClientUpdate* b) {
                  return a->client_id < b->client_id;
              });
    ParamVector acc = ParamVector::zeros_like(state.theta);
    for (const auto* u : ordered) acc.add_scaled(u->delta, 1.0);
    const auto count = static_cast<double>(updates.size());

    ServerState next = state;
    for (std::size_t i = 0; i < next.theta.size(); ++i)
        next.theta.values[i] -= acc.values[i] / count;
    next.round = state.round + 1;
    return next;
}

}  // namespace fedadc
