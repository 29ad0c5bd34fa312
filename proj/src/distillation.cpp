#include "fedadc/distillation.hpp"

#include <cmath>
#include <string>

#include "fedadc/errors.hpp"

namespace fedadc {

Matrix teacher_probs(const TeacherSnapshot& teacher, const Batch& batch) {
    const Matrix logits = forward(teacher.spec, teacher.params, batch);
    Matrix probs(logits.rows, logits.cols);
    for (std::size_t r = 0; r < logits.rows; ++r) {
        const auto p = softmax_temp({logits.row(r), logits.cols}, teacher.tau);
        for (std::size_t k = 0; k < logits.cols; ++k) probs.at(r, k) = p[k];
    }
    return probs;
}

std::vector<double> target_probs(std::span<const double> teacher_p,
                                 std::span<const double> rho, int label) {
    const std::size_t k_classes = teacher_p.size();
    if (rho.size() != k_classes) throw InputError("target_probs: rho length must equal K");
    if (label < 0 || static_cast<std::size_t>(label) >= k_classes)
        throw InputError("target_probs: label out of range");
    for (double r : rho)
        if (r < 0.0 || r > 1.0) throw InputError("target_probs: rho entries must lie in [0, 1]");
    double total = 0.0;
    for (double p : teacher_p) {
        if (p < 0.0) throw InputError("target_probs: negative teacher probability");
        total += p;
    }
    if (std::fabs(total - 1.0) > 1e-9)
        throw InputError("target_probs: teacher probabilities sum to " + std::to_string(total));

    std::vector<double> target(k_classes);
    const auto y = static_cast<std::size_t>(label);
    double off_mass = 0.0;
    for (std::size_t i = 0; i < k_classes; ++i) {
        if (i == y) continue;
        target[i] = (1.0 - rho[i]) * teacher_p[i];
        off_mass += target[i];
    }
    target[y] = 1.0 - off_mass;
    return target;
}

Matrix make_targets(const TeacherSnapshot& teacher, const Batch& batch,
                    std::span<const double> rho) {
    const Matrix p = teacher_probs(teacher, batch);
    Matrix targets(p.rows, p.cols);
    for (std::size_t r = 0; r < p.rows; ++r) {
        const auto t = target_probs({p.row(r), p.cols}, rho, batch.labels[r]);
        for (std::size_t k = 0; k < p.cols; ++k) targets.at(r, k) = t[k];
    }
    return targets;
}

GradResult combined_loss_grad(const ModelSpec& spec, const ParamVector& params,
                              const Batch& batch, const Matrix& targets, double lambda,
                              double tau, double weight_decay) {
    LossSpec loss{LossKind::Combined, lambda, tau, weight_decay};
    return grad(spec, params, batch, loss, &targets);
}

}  // namespace fedadc
