#pragma once

#include <span>
#include <vector>

#include "fedadc/model.hpp"
#include "fedadc/param_vector.hpp"

namespace fedadc {

enum class LossKind { Ce, Combined };

struct LossSpec {
    LossKind kind = LossKind::Ce;
    double lambda = 0.0;      // KD weight in [0, 1]
    double tau = 1.0;         // KD temperature > 0
    double weight_decay = 0.0;

    void validate() const;  // throws ConfigError
};

// Temperature softmax with max-subtraction. tau <= 0 throws ConfigError.
std::vector<double> softmax_temp(std::span<const double> logits, double tau);

struct ScalarLossGrad {
    double loss = 0.0;
    std::vector<double> grad_logits;
};

// Cross entropy at temperature 1: loss = -log p_label, gradient p - onehot.
// Probabilities are floored at 1e-12 before the log.
ScalarLossGrad ce_loss_grad(std::span<const double> logits, int label);

// KL(target || student) with student probabilities at temperature tau:
// loss = -sum_i target_i * log(p_i / target_i), gradient (p - target) / tau.
// The target is a constant; zero target entries contribute zero loss.
ScalarLossGrad kl_loss_grad(std::span<const double> student_logits,
                            std::span<const double> target, double tau);

struct GradResult {
    double loss = 0.0;   // mini-batch mean loss incl. the L2 term when weight_decay > 0
    ParamVector grad;
};

// Gradient of the mini-batch mean loss w.r.t. all parameters, by analytic
// backpropagation. `targets` holds one target distribution per batch row and
// is required iff loss.kind == Combined. Weight decay adds weight_decay *
// params to the gradient and 0.5 * weight_decay * |params|^2 to the loss.
GradResult grad(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                const LossSpec& loss, const Matrix* targets = nullptr);

}  // namespace fedadc
