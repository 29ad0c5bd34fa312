#include "fedadc/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fedadc/errors.hpp"

namespace fedadc {

namespace {
constexpr double kProbFloor = 1e-12;
}

void LossSpec::validate() const {
    if (lambda < 0.0 || lambda > 1.0) throw ConfigError("loss: lambda must be in [0, 1]");
    if (tau <= 0.0) throw ConfigError("loss: tau must be positive");
    if (weight_decay < 0.0) throw ConfigError("loss: weight_decay must be >= 0");
}

std::vector<double> softmax_temp(std::span<const double> logits, double tau) {
    if (tau <= 0.0) throw ConfigError("softmax_temp: tau must be positive");
    std::vector<double> p(logits.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (double z : logits) mx = std::max(mx, z / tau);
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] / tau - mx);
        total += p[i];
    }
    for (auto& pi : p) pi /= total;
    return p;
}

ScalarLossGrad ce_loss_grad(std::span<const double> logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
        throw InputError("ce_loss_grad: label " + std::to_string(label) + " out of range");
    ScalarLossGrad out;
    out.grad_logits = softmax_temp(logits, 1.0);
    out.loss = -std::log(std::max(out.grad_logits[static_cast<std::size_t>(label)], kProbFloor));
    out.grad_logits[static_cast<std::size_t>(label)] -= 1.0;
    return out;
}

ScalarLossGrad kl_loss_grad(std::span<const double> student_logits,
                            std::span<const double> target, double tau) {
    if (target.size() != student_logits.size())
        throw InputError("kl_loss_grad: target size does not match logits");
    double total = 0.0;
    for (double t : target) {
        if (t < 0.0) throw InputError("kl_loss_grad: negative target probability");
        total += t;
    }
    if (std::fabs(total - 1.0) > 1e-9)
        throw InputError("kl_loss_grad: target probabilities sum to " + std::to_string(total));

    ScalarLossGrad out;
    const auto p = softmax_temp(student_logits, tau);
    out.loss = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (target[i] > 0.0)
            out.loss += target[i] * (std::log(target[i]) - std::log(std::max(p[i], kProbFloor)));
    }
    out.grad_logits.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out.grad_logits[i] = (p[i] - target[i]) / tau;
    return out;
}

namespace {

double act_deriv_from_post(double post, Activation a) {
    if (a == Activation::Relu) return post > 0.0 ? 1.0 : 0.0;
    return 1.0 - post * post;
}

// Forward pass caching every layer's (post-activation) output; index 0 is the
// input batch, the last entry holds raw logits. Inner loop order matches
// forward() so both produce bitwise-equal logits.
std::vector<Matrix> forward_cached(const ModelSpec& spec, const ParamVector& params,
                                   const Batch& batch) {
    const auto widths = spec.layer_widths();
    const std::size_t B = batch.features.rows;
    std::vector<Matrix> acts;
    acts.reserve(widths.size());
    acts.push_back(batch.features);
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t in = widths[l];
        const std::size_t out = widths[l + 1];
        const double* W = params.values.data() + off;
        const double* b = params.values.data() + off + out * in;
        Matrix next(B, out);
        for (std::size_t r = 0; r < B; ++r) {
            const double* x = acts.back().row(r);
            double* y = next.row(r);
            for (std::size_t o = 0; o < out; ++o) {
                double acc = b[o];
                const double* w = W + o * in;
                for (std::size_t i = 0; i < in; ++i) acc += w[i] * x[i];
                y[o] = acc;
            }
        }
        if (l + 2 != widths.size()) {
            for (auto& v : next.data)
                v = (spec.activation == Activation::Relu) ? (v > 0.0 ? v : 0.0) : std::tanh(v);
        }
        acts.push_back(std::move(next));
        off += out * in + out;
    }
    return acts;
}

}  // namespace

GradResult grad(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                const LossSpec& loss, const Matrix* targets) {
    spec.validate();
    loss.validate();
    if (params.size() != spec.param_count())
        throw ConfigError("grad: parameter count does not match model spec");
    if (batch.features.cols != spec.input_dim)
        throw ConfigError("grad: feature dimension does not match model spec");
    if (batch.size() == 0 || batch.labels.size() != batch.size())
        throw InputError("grad: batch must pair every feature row with a label");
    const bool combined = loss.kind == LossKind::Combined;
    if (combined && (targets == nullptr || targets->rows != batch.size() ||
                     targets->cols != spec.num_classes))
        throw ConfigError("grad: combined loss requires one target distribution per sample");

    const std::size_t B = batch.size();
    const std::size_t K = spec.num_classes;
    const double inv_b = 1.0 / static_cast<double>(B);

    auto acts = forward_cached(spec, params, batch);
    const Matrix& logits = acts.back();

    Matrix dlogits(B, K);
    double loss_sum = 0.0;
    for (std::size_t r = 0; r < B; ++r) {
        std::span<const double> z{logits.row(r), K};
        double li;
        if (!combined || loss.lambda == 0.0) {
            auto ce = ce_loss_grad(z, batch.labels[r]);
            li = ce.loss;
            for (std::size_t k = 0; k < K; ++k) dlogits.at(r, k) = ce.grad_logits[k] * inv_b;
        } else if (loss.lambda == 1.0) {
            auto kl = kl_loss_grad(z, {targets->row(r), K}, loss.tau);
            li = kl.loss;
            for (std::size_t k = 0; k < K; ++k) dlogits.at(r, k) = kl.grad_logits[k] * inv_b;
        } else {
            auto ce = ce_loss_grad(z, batch.labels[r]);
            auto kl = kl_loss_grad(z, {targets->row(r), K}, loss.tau);
            li = (1.0 - loss.lambda) * ce.loss + loss.lambda * kl.loss;
            for (std::size_t k = 0; k < K; ++k)
                dlogits.at(r, k) = ((1.0 - loss.lambda) * ce.grad_logits[k] +
                                    loss.lambda * kl.grad_logits[k]) *
                                   inv_b;
        }
        loss_sum += li;
    }

    GradResult result;
    result.loss = loss_sum * inv_b;
    result.grad = ParamVector(spec.param_shapes());

    const auto widths = spec.layer_widths();
    // Parameter offsets per layer.
    std::vector<std::size_t> offsets(widths.size() - 1);
    {
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            offsets[l] = off;
            off += widths[l + 1] * widths[l] + widths[l + 1];
        }
    }

    Matrix dY = std::move(dlogits);
    for (std::size_t l = widths.size() - 2;; --l) {
        const std::size_t in = widths[l];
        const std::size_t out = widths[l + 1];
        const Matrix& X = acts[l];
        double* dW = result.grad.values.data() + offsets[l];
        double* db = result.grad.values.data() + offsets[l] + out * in;
        for (std::size_t r = 0; r < B; ++r) {
            const double* dy = dY.row(r);
            const double* x = X.row(r);
            for (std::size_t o = 0; o < out; ++o) {
                const double g = dy[o];
                double* dwrow = dW + o * in;
                for (std::size_t i = 0; i < in; ++i) dwrow[i] += g * x[i];
                db[o] += g;
            }
        }
        if (l == 0) break;
        const double* W = params.values.data() + offsets[l];
        Matrix dX(B, in);
        for (std::size_t r = 0; r < B; ++r) {
            const double* dy = dY.row(r);
            double* dx = dX.row(r);
            for (std::size_t o = 0; o < out; ++o) {
                const double g = dy[o];
                const double* wrow = W + o * in;
                for (std::size_t i = 0; i < in; ++i) dx[i] += g * wrow[i];
            }
            const double* post = X.row(r);
            for (std::size_t i = 0; i < in; ++i)
                dx[i] *= act_deriv_from_post(post[i], spec.activation);
        }
        dY = std::move(dX);
    }

    if (loss.weight_decay > 0.0) {
        double sq = 0.0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            result.grad.values[i] += loss.weight_decay * params.values[i];
            sq += params.values[i] * params.values[i];
        }
        result.loss += 0.5 * loss.weight_decay * sq;
    }
    return result;
}

}  // namespace fedadc
