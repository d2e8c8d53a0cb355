#include "tracs/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tracs/errors.hpp"

namespace tracs {

BooleanReduction parse_boolean_reduction(std::string_view s) {
    if (s == "mean") return BooleanReduction::mean;
    if (s == "sum") return BooleanReduction::sum;
    throw ConfigError("boolean_reduction must be 'mean' or 'sum', got '" + std::string(s) + "'");
}

std::string_view to_string(BooleanReduction r) {
    return r == BooleanReduction::mean ? "mean" : "sum";
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

std::vector<double> softmax(std::span<const double> logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) z += (p[i] = std::exp(logits[i] - m));
    for (double& v : p) v /= z;
    return p;
}

double softmax_cross_entropy(std::span<const double> logits, std::size_t target) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - m);
    return m + std::log(z) - logits[target];
}

double sigmoid_bce(double x, bool y) {
    return std::max(x, 0.0) - x * (y ? 1.0 : 0.0) + std::log1p(std::exp(-std::abs(x)));
}

JointLoss joint_loss(std::span<const double> telescope_logits, std::size_t telescope_target,
                     std::span<const double> boolean_logits, const BooleanLabels& boolean_targets,
                     const LossConfig& config) {
    if (telescope_logits.empty()) throw ConfigError("joint_loss: no telescope logits");
    if (telescope_target >= telescope_logits.size()) {
        throw ConfigError("joint_loss: telescope target " + std::to_string(telescope_target) +
                          " out of range for " + std::to_string(telescope_logits.size()) +
                          " classes");
    }
    if (boolean_logits.size() != kNumBooleanLabels) {
        throw ConfigError("joint_loss: expected 4 boolean logits");
    }
    for (double v : telescope_logits) {
        if (!std::isfinite(v)) throw NumericError("joint_loss: non-finite telescope logit");
    }
    for (double v : boolean_logits) {
        if (!std::isfinite(v)) throw NumericError("joint_loss: non-finite boolean logit");
    }

    JointLoss out;
    out.telescope_term = softmax_cross_entropy(telescope_logits, telescope_target);
    out.d_telescope = softmax(telescope_logits);
    out.d_telescope[telescope_target] -= 1.0;
    for (double& g : out.d_telescope) g *= config.telescope_weight;

    const double factor = config.boolean_reduction == BooleanReduction::mean
                              ? 1.0 / static_cast<double>(kNumBooleanLabels)
                              : 1.0;
    double bce = 0.0;
    for (std::size_t b = 0; b < kNumBooleanLabels; ++b) {
        bce += sigmoid_bce(boolean_logits[b], boolean_targets[b]);
        out.d_booleans[b] = config.boolean_weight * factor *
                            (sigmoid(boolean_logits[b]) - (boolean_targets[b] ? 1.0 : 0.0));
    }
    out.boolean_term = bce * factor;
    out.value = config.telescope_weight * out.telescope_term + config.boolean_weight * out.boolean_term;
    return out;
}

}  // namespace tracs
