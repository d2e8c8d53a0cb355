#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tracs/parameters.hpp"

namespace tracs {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Adam with decoupled weight decay over one or more parameter stores.
// Decay is applied only to tensors flagged `decay`.
class AdamW {
public:
    AdamW(std::vector<ParameterStore*> stores, AdamWConfig config);

    std::size_t num_stores() const noexcept { return stores_.size(); }
    std::uint64_t step_count() const noexcept { return step_; }

    // One update with learning rate `lr`; grads[i] matches stores[i].
    void step(std::span<const std::span<const double>> grads, double lr);

    // Moment buffers in ParameterStore binary layout, preceded by the step count.
    void write_state(std::ostream& out) const;
    void read_state(std::istream& in, const std::string& where);

private:
    std::vector<ParameterStore*> stores_;
    AdamWConfig config_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::vector<std::vector<std::uint8_t>> decay_mask_;
    std::uint64_t step_ = 0;
};

// Scales all gradients in place so their global L2 norm is at most
// `max_norm` (no-op when max_norm <= 0). Returns the norm before clipping.
double clip_global_norm(std::span<const std::span<double>> grads, double max_norm);

}  // namespace tracs
