#include "fedadc/personalization.hpp"

#include <algorithm>
#include <cmath>

#include "fedadc/errors.hpp"
#include "fedadc/loss.hpp"

namespace fedadc {

std::size_t HeadMask::count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

void PersonalizationConfig::validate() const {
    if (eta_p <= 0.0) throw ConfigError("personalization: eta must be positive");
    if (batch_size == 0) throw ConfigError("personalization: batch_size must be >= 1");
    if (weight_decay < 0.0) throw ConfigError("personalization: weight_decay must be >= 0");
    switch (regularizer) {
        case PersRegularizer::None:
            break;
        case PersRegularizer::Prox:
            if (mu < 0.0) throw ConfigError("personalization: mu must be >= 0");
            break;
        case PersRegularizer::Kd:
            if (lambda < 0.0 || lambda > 1.0)
                throw ConfigError("personalization: lambda must lie in [0, 1]");
            if (tau <= 0.0) throw ConfigError("personalization: tau must be positive");
            break;
    }
}

HeadMask head_mask(const ModelSpec& spec) {
    spec.validate();
    HeadMask hm;
    hm.mask.assign(spec.param_count(), false);
    const std::size_t off = spec.head_offset();
    for (std::size_t i = 0; i < spec.head_size(); ++i) hm.mask[off + i] = true;
    return hm;
}

ParamVector calibrate(const ParamVector& global_theta, const ModelSpec& spec,
                      const LabeledDataset& ds, const ClientShard& shard,
                      const PersonalizationConfig& cfg, rng::Engine& eng) {
    cfg.validate();
    if (shard.train_indices().empty())
        throw InputError("calibrate: shard has no train split");

    ParamVector theta = global_theta;
    if (cfg.epochs == 0) return theta;

    const HeadMask hm = head_mask(spec);
    const std::size_t off = spec.head_offset();
    const std::size_t head_n = spec.head_size();

    const bool kd = cfg.regularizer == PersRegularizer::Kd;
    TeacherSnapshot teacher;
    LossSpec loss;
    loss.weight_decay = cfg.weight_decay;
    if (kd) {
        teacher = TeacherSnapshot{global_theta, spec, cfg.tau};
        loss.kind = LossKind::Combined;
        loss.lambda = cfg.lambda;
        loss.tau = cfg.tau;
    }

    auto train = shard.train_indices();
    std::vector<std::size_t> order(train.begin(), train.end());

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng::shuffle(eng, order);
        for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
            const std::size_t take = std::min(cfg.batch_size, order.size() - pos);
            const Batch batch = gather(ds, {order.data() + pos, take});
            GradResult g;
            if (kd) {
                const Matrix targets = make_targets(teacher, batch, shard.rho);
                g = grad(spec, theta, batch, loss, &targets);
            } else {
                g = grad(spec, theta, batch, loss);
            }
            if (!g.grad.all_finite())
                throw DivergedClientError(-1, shard.client_id,
                                          "non-finite gradient during calibration");
            for (std::size_t i = 0; i < head_n; ++i) {
                const std::size_t j = off + i;
                double step = g.grad.values[j];
                if (cfg.regularizer == PersRegularizer::Prox)
                    step += cfg.mu * (theta.values[j] - global_theta.values[j]);
                theta.values[j] -= cfg.eta_p * step;
            }
        }
    }

    for (std::size_t j = 0; j < theta.size(); ++j)
        if (!hm.mask[j] && theta.values[j] != global_theta.values[j])
            throw DivergedClientError(-1, shard.client_id, "body coordinate drifted");
    if (!theta.all_finite())
        throw DivergedClientError(-1, shard.client_id, "non-finite personalized model");
    return theta;
}

PersonalAccuracy evaluate_personalized(const LabeledDataset& ds,
                                       const std::vector<ClientShard>& shards,
                                       const std::vector<ParamVector>& params_per_client,
                                       const ModelSpec& spec) {
    if (shards.size() != params_per_client.size())
        throw InputError("evaluate_personalized: one parameter vector per shard required");
    if (shards.empty()) throw InputError("evaluate_personalized: no shards");

    PersonalAccuracy out;
    out.per_client.reserve(shards.size());
    for (std::size_t c = 0; c < shards.size(); ++c) {
        const auto test = shards[c].test_indices();
        if (test.empty())
            throw ConfigError("evaluate_personalized: client " +
                              std::to_string(shards[c].client_id) + " has an empty test split");
        const Batch batch = gather(ds, test);
        const Matrix logits = forward(spec, params_per_client[c], batch);
        std::size_t hits = 0;
        for (std::size_t r = 0; r < logits.rows; ++r) {
            const double* z = logits.row(r);
            std::size_t best = 0;
            for (std::size_t k = 1; k < logits.cols; ++k)
                if (z[k] > z[best]) best = k;
            if (static_cast<int>(best) == batch.labels[r]) ++hits;
        }
        out.per_client.push_back(static_cast<double>(hits) / static_cast<double>(test.size()));
    }
    double sum = 0.0;
    for (double a : out.per_client) sum += a;
    out.mean = sum / static_cast<double>(out.per_client.size());
    return out;
}

}  // namespace fedadc
