#pragma once

#include <span>
#include <vector>

#include "fedadc/loss.hpp"
#include "fedadc/model.hpp"

namespace fedadc {

// The round's global model, frozen for the duration of a client's local round.
struct TeacherSnapshot {
    ParamVector params;
    ModelSpec spec;
    double tau = 1.0;
};

// Teacher probabilities p~ = softmax_temp(forward(teacher, batch), tau), one
// row per sample.
Matrix teacher_probs(const TeacherSnapshot& teacher, const Batch& batch);

// Self-confidence target: p^_i = (1 - rho_i) * p~_i off the true class, with
// the removed mass folded onto the true class. Output is a valid distribution
// with p^_y >= p~_y; classes the shard never saw (rho = 0) keep full teacher
// mass.
std::vector<double> target_probs(std::span<const double> teacher_p,
                                 std::span<const double> rho, int label);

// target_probs applied per row of a batch.
Matrix make_targets(const TeacherSnapshot& teacher, const Batch& batch,
                    std::span<const double> rho);

// (1 - lambda) * CE + lambda * KL against per-sample targets, mini-batch mean.
GradResult combined_loss_grad(const ModelSpec& spec, const ParamVector& params,
                              const Batch& batch, const Matrix& targets, double lambda,
                              double tau, double weight_decay);

}  // namespace fedadc
