#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "tracs/corpus.hpp"

namespace tracs {

enum class BooleanReduction { mean, sum };

BooleanReduction parse_boolean_reduction(std::string_view s);
std::string_view to_string(BooleanReduction r);

struct LossConfig {
    // Reduction of the four per-label BCE terms.
    BooleanReduction boolean_reduction = BooleanReduction::mean;
    double telescope_weight = 1.0;
    double boolean_weight = 1.0;
};

struct JointLoss {
    double value = 0.0;
    double telescope_term = 0.0;  // softmax cross-entropy
    double boolean_term = 0.0;    // reduced sigmoid BCE
    std::vector<double> d_telescope;
    std::array<double, kNumBooleanLabels> d_booleans{};
};

// Numerically stable: log-sum-exp for the multiclass term, log1p(exp(-|x|))
// for the boolean terms. Throws ConfigError for an out-of-range target and
// NumericError for non-finite logits.
JointLoss joint_loss(std::span<const double> telescope_logits, std::size_t telescope_target,
                     std::span<const double> boolean_logits, const BooleanLabels& boolean_targets,
                     const LossConfig& config = {});

double softmax_cross_entropy(std::span<const double> logits, std::size_t target);
double sigmoid_bce(double logit, bool target);
double sigmoid(double x);
std::vector<double> softmax(std::span<const double> logits);

}  // namespace tracs
