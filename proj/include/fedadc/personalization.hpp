#pragma once

#include <vector>

#include "fedadc/distillation.hpp"
#include "fedadc/model.hpp"
#include "fedadc/partition.hpp"
#include "fedadc/rng.hpp"

namespace fedadc {

// Marks the final linear layer's coordinates (weights + bias) in the flat
// parameter vector.
struct HeadMask {
    std::vector<bool> mask;

    std::size_t count() const;
};

enum class PersRegularizer { None, Prox, Kd };

struct PersonalizationConfig {
    std::size_t epochs = 2;
    double eta_p = 0.01;
    PersRegularizer regularizer = PersRegularizer::None;
    double mu = 0.0;             // prox coefficient
    double lambda = 0.35;        // kd mixing weight
    double tau = 1.0;            // kd temperature
    double weight_decay = 0.0;
    std::size_t batch_size = 64;

    void validate() const;
};

// Head = the final linear layer only.
HeadMask head_mask(const ModelSpec& spec);

// Fine-tunes only the head coordinates on the shard's train split with plain
// SGD; body coordinates are returned bitwise unchanged. The prox regularizer
// pulls the head toward the global head; the kd regularizer trains against the
// combined loss with the global model as teacher and the shard's confidence
// vector.
ParamVector calibrate(const ParamVector& global_theta, const ModelSpec& spec,
                      const LabeledDataset& ds, const ClientShard& shard,
                      const PersonalizationConfig& cfg, rng::Engine& eng);

struct PersonalAccuracy {
    std::vector<double> per_client;
    double mean = 0.0;
};

// Top-1 accuracy of each client's model on its own local test split, plus the
// unweighted mean across clients. params_per_client[i] pairs with shards[i].
PersonalAccuracy evaluate_personalized(const LabeledDataset& ds,
                                       const std::vector<ClientShard>& shards,
                                       const std::vector<ParamVector>& params_per_client,
                                       const ModelSpec& spec);

}  // namespace fedadc
