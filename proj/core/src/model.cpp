#include "tracs/model.hpp"

#include <cmath>

#include "tracs/errors.hpp"
#include "tracs/rng.hpp"

namespace tracs {

MultiTaskHead::MultiTaskHead(std::size_t hidden_size, std::size_t num_classes)
    : hidden_(hidden_size), classes_(num_classes) {
    if (hidden_size == 0) throw ConfigError("head hidden size must be positive");
    if (num_classes == 0) throw ConfigError("head needs at least one telescope class");
    telescope_w_ = params_.add("head.telescope.weight", hidden_size, num_classes);
    telescope_b_ = params_.add("head.telescope.bias", 1, num_classes, false);
    boolean_w_ = params_.add("head.boolean.weight", hidden_size, kNumBooleanLabels);
    boolean_b_ = params_.add("head.boolean.bias", 1, kNumBooleanLabels, false);
    initialize(kDefaultHeadSeed);
}

void MultiTaskHead::initialize(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "head-init"));
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_));
    for (std::size_t id : {telescope_w_, boolean_w_}) {
        auto m = params_.matrix(id);
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            m.data()[i] = (2.0 * uniform_unit(rng) - 1.0) * bound;
        }
    }
    params_.matrix(telescope_b_).setZero();
    params_.matrix(boolean_b_).setZero();
}

MultiTaskHead::Output MultiTaskHead::forward(const Vector& pooled) const {
    if (static_cast<std::size_t>(pooled.size()) != hidden_) {
        throw ConfigError("pooled vector size does not match head hidden size");
    }
    Output out;
    out.telescope = params_.matrix(telescope_w_).transpose() * pooled +
                    params_.matrix(telescope_b_).row(0).transpose();
    out.booleans = params_.matrix(boolean_w_).transpose() * pooled +
                   params_.matrix(boolean_b_).row(0).transpose();
    return out;
}

Vector MultiTaskHead::backward(const Vector& pooled, const Vector& d_telescope,
                               const Vector& d_booleans, std::span<double> grads) const {
    params_.matrix(grads, telescope_w_).noalias() += pooled * d_telescope.transpose();
    params_.matrix(grads, telescope_b_).row(0) += d_telescope.transpose();
    params_.matrix(grads, boolean_w_).noalias() += pooled * d_booleans.transpose();
    params_.matrix(grads, boolean_b_).row(0) += d_booleans.transpose();
    return params_.matrix(telescope_w_) * d_telescope + params_.matrix(boolean_w_) * d_booleans;
}

Model::Model(std::unique_ptr<Encoder> enc, std::size_t num_classes, std::uint64_t head_seed)
    : encoder(std::move(enc)), head(encoder ? encoder->hidden_size() : 1, num_classes) {
    if (!encoder) throw ConfigError("model needs an encoder");
    head.initialize(head_seed);
}

ChunkPrediction::ChunkPrediction(std::string bib, std::size_t index, std::vector<double> telescope,
                                 std::array<double, kNumBooleanLabels> booleans)
    : bibcode(std::move(bib)),
      chunk_index(index),
      telescope_logits(std::move(telescope)),
      boolean_logits(booleans) {
    for (double v : telescope_logits) {
        if (!std::isfinite(v)) {
            throw NumericError("non-finite telescope logit for " + bibcode + " chunk " +
                               std::to_string(chunk_index));
        }
    }
    for (double v : boolean_logits) {
        if (!std::isfinite(v)) {
            throw NumericError("non-finite boolean logit for " + bibcode + " chunk " +
                               std::to_string(chunk_index));
        }
    }
}

ChunkPrediction forward_chunk(const Model& model, const Chunk& chunk,
                              std::span<const std::uint8_t> mask) {
    if (chunk.token_ids.empty()) {
        throw ValidationError("chunk " + chunk.bibcode + "#" + std::to_string(chunk.chunk_index) +
                              " has no tokens");
    }
    const Vector pooled = model.encoder->forward(chunk.token_ids, mask, nullptr);
    if (!pooled.allFinite()) {
        throw NumericError("non-finite encoder activation for " + chunk.bibcode + " chunk " +
                           std::to_string(chunk.chunk_index));
    }
    const auto out = model.head.forward(pooled);
    std::array<double, kNumBooleanLabels> booleans{};
    for (std::size_t b = 0; b < kNumBooleanLabels; ++b) booleans[b] = out.booleans(b);
    return ChunkPrediction(chunk.bibcode, chunk.chunk_index,
                           std::vector<double>(out.telescope.data(),
                                               out.telescope.data() + out.telescope.size()),
                           booleans);
}

}  // namespace tracs
