#include "tracs/encoder.hpp"

#include <cmath>

#include "tracs/errors.hpp"
#include "tracs/rng.hpp"

namespace tracs {
namespace {

struct LayerNormTrace {
    Matrix xhat;
    Vector inv_std;
};

Matrix layer_norm(const Matrix& x, const ConstMatrixMap& gain, const ConstMatrixMap& bias,
                  double eps, LayerNormTrace& trace) {
    const auto n = x.rows();
    const auto h = static_cast<double>(x.cols());
    trace.xhat.resize(n, x.cols());
    trace.inv_std.resize(n);
    Matrix y(n, x.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mean = x.row(i).sum() / h;
        const RowVector centered = x.row(i).array() - mean;
        const double var = centered.squaredNorm() / h;
        const double inv = 1.0 / std::sqrt(var + eps);
        trace.inv_std(i) = inv;
        trace.xhat.row(i) = centered * inv;
        y.row(i) = trace.xhat.row(i).cwiseProduct(gain.row(0)) + bias.row(0);
    }
    return y;
}

Matrix layer_norm_backward(const Matrix& dy, const LayerNormTrace& trace,
                           const ConstMatrixMap& gain, MatrixMap d_gain, MatrixMap d_bias) {
    const auto n = dy.rows();
    const auto h = static_cast<double>(dy.cols());
    Matrix dx(n, dy.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        d_gain.row(0) += dy.row(i).cwiseProduct(trace.xhat.row(i));
        d_bias.row(0) += dy.row(i);
        const RowVector dxhat = dy.row(i).cwiseProduct(gain.row(0));
        const double mean_d = dxhat.sum() / h;
        const double mean_dx = dxhat.dot(trace.xhat.row(i)) / h;
        dx.row(i) = trace.inv_std(i) *
                    (dxhat.array() - mean_d - trace.xhat.row(i).array() * mean_dx).matrix();
    }
    return dx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

void softmax_rows(Matrix& s) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const double m = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - m).exp();
        s.row(i) /= s.row(i).sum();
    }
}

struct LayerTrace {
    Matrix input;    // n x H
    Matrix q;        // rows x H, rows = n except in the last layer (1)
    Matrix k, v;     // n x H
    std::vector<Matrix> probs;
    Matrix context;  // rows x H
    LayerNormTrace ln1;
    Matrix attn_out; // rows x H
    Matrix pre_act;  // rows x F
    Matrix act;
    LayerNormTrace ln2;
};

struct TransformerTrace final : EncoderTrace {
    std::vector<TokenId> tokens;
    std::vector<std::size_t> positions;
    LayerNormTrace embedding_ln;
    std::vector<LayerTrace> layers;
};

}  // namespace

nlohmann::json TransformerConfig::to_json() const {
    return {{"type", "transformer"},
            {"vocabulary_size", vocabulary_size},
            {"hidden_size", hidden_size},
            {"layers", layers},
            {"heads", heads},
            {"ffn_size", ffn_size},
            {"max_positions", max_positions},
            {"layer_norm_eps", layer_norm_eps},
            {"init_std", init_std},
            {"init_seed", init_seed}};
}

TransformerConfig TransformerConfig::from_json(const nlohmann::json& j) {
    TransformerConfig c;
    try {
        c.vocabulary_size = j.value("vocabulary_size", c.vocabulary_size);
        c.hidden_size = j.value("hidden_size", c.hidden_size);
        c.layers = j.value("layers", c.layers);
        c.heads = j.value("heads", c.heads);
        c.ffn_size = j.value("ffn_size", c.ffn_size);
        c.max_positions = j.value("max_positions", c.max_positions);
        c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
        c.init_std = j.value("init_std", c.init_std);
        c.init_seed = j.value("init_seed", c.init_seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("encoder config: ") + e.what());
    }
    return c;
}

TransformerEncoder::TransformerEncoder(const TransformerConfig& config) : config_(config) {
    const auto H = config_.hidden_size;
    if (H == 0 || config_.heads == 0 || H % config_.heads != 0) {
        throw ConfigError("hidden_size must be a positive multiple of heads");
    }
    if (config_.layers == 0) throw ConfigError("encoder needs at least one layer");
    if (config_.vocabulary_size < 4 || config_.max_positions < 2 || config_.ffn_size == 0) {
        throw ConfigError("invalid encoder dimensions");
    }
    token_embedding_ = params_.add("embeddings.token", config_.vocabulary_size, H);
    position_embedding_ = params_.add("embeddings.position", config_.max_positions, H);
    embedding_ln_g_ = params_.add("embeddings.ln.gain", 1, H, false);
    embedding_ln_b_ = params_.add("embeddings.ln.bias", 1, H, false);
    for (std::size_t l = 0; l < config_.layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        LayerIds ids{};
        ids.wq = params_.add(p + "attn.query.weight", H, H);
        ids.bq = params_.add(p + "attn.query.bias", 1, H, false);
        ids.wk = params_.add(p + "attn.key.weight", H, H);
        ids.bk = params_.add(p + "attn.key.bias", 1, H, false);
        ids.wv = params_.add(p + "attn.value.weight", H, H);
        ids.bv = params_.add(p + "attn.value.bias", 1, H, false);
        ids.wo = params_.add(p + "attn.output.weight", H, H);
        ids.bo = params_.add(p + "attn.output.bias", 1, H, false);
        ids.ln1_g = params_.add(p + "attn.ln.gain", 1, H, false);
        ids.ln1_b = params_.add(p + "attn.ln.bias", 1, H, false);
        ids.w1 = params_.add(p + "ffn.in.weight", H, config_.ffn_size);
        ids.b1 = params_.add(p + "ffn.in.bias", 1, config_.ffn_size, false);
        ids.w2 = params_.add(p + "ffn.out.weight", config_.ffn_size, H);
        ids.b2 = params_.add(p + "ffn.out.bias", 1, H, false);
        ids.ln2_g = params_.add(p + "ffn.ln.gain", 1, H, false);
        ids.ln2_b = params_.add(p + "ffn.ln.bias", 1, H, false);
        layers_.push_back(ids);
    }
    initialize(config_.init_seed);
}

std::string TransformerEncoder::identifier() const {
    return "transformer-L" + std::to_string(config_.layers) + "-H" +
           std::to_string(config_.hidden_size) + "-A" + std::to_string(config_.heads);
}

void TransformerEncoder::initialize(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "encoder-init"));
    for (std::size_t id = 0; id < params_.count(); ++id) {
        const auto& info = params_.info(id);
        auto m = params_.matrix(id);
        const bool is_gain = info.name.ends_with(".gain");
        if (is_gain) {
            m.setOnes();
        } else if (!info.decay) {
            m.setZero();
        } else {
            for (Eigen::Index i = 0; i < m.size(); ++i) {
                m.data()[i] = config_.init_std * standard_normal(rng);
            }
        }
    }
}

std::unique_ptr<EncoderTrace> TransformerEncoder::make_trace() const {
    return std::make_unique<TransformerTrace>();
}

Vector TransformerEncoder::forward(std::span<const TokenId> tokens,
                                   std::span<const std::uint8_t> mask, EncoderTrace* trace) const {
    if (!mask.empty() && mask.size() != tokens.size()) {
        throw ValidationError("padding mask length does not match token count");
    }
    if (tokens.empty()) throw ValidationError("encoder input is empty");
    if (!mask.empty() && mask[0] == 0) throw ValidationError("pooled position 0 is masked");
    if (tokens.size() > config_.max_positions) {
        throw ValidationError("sequence of " + std::to_string(tokens.size()) +
                              " tokens exceeds max_positions " +
                              std::to_string(config_.max_positions));
    }

    TransformerTrace local;
    TransformerTrace& t = trace ? dynamic_cast<TransformerTrace&>(*trace) : local;
    t.tokens.clear();
    t.positions.clear();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (!mask.empty() && mask[i] == 0) continue;
        const TokenId id = tokens[i];
        if (id < 0 || static_cast<std::size_t>(id) >= config_.vocabulary_size) {
            throw ValidationError("token id " + std::to_string(id) + " outside vocabulary of size " +
                                  std::to_string(config_.vocabulary_size));
        }
        t.tokens.push_back(id);
        t.positions.push_back(i);
    }

    const auto n = static_cast<Eigen::Index>(t.tokens.size());
    const auto H = static_cast<Eigen::Index>(config_.hidden_size);
    const auto d = H / static_cast<Eigen::Index>(config_.heads);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    const double eps = config_.layer_norm_eps;

    const auto E = params_.matrix(token_embedding_);
    const auto P = params_.matrix(position_embedding_);
    Matrix x(n, H);
    for (Eigen::Index i = 0; i < n; ++i) {
        x.row(i) = E.row(t.tokens[i]) + P.row(static_cast<Eigen::Index>(t.positions[i]));
    }
    Matrix h = layer_norm(x, params_.matrix(embedding_ln_g_), params_.matrix(embedding_ln_b_), eps,
                          t.embedding_ln);

    t.layers.resize(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& ids = layers_[l];
        auto& lt = t.layers[l];
        // Only the pooled row of the last layer is ever read.
        const Eigen::Index rows = (l + 1 == layers_.size()) ? 1 : n;

        lt.input = std::move(h);
        lt.q = (lt.input.topRows(rows) * params_.matrix(ids.wq)).rowwise() +
               params_.matrix(ids.bq).row(0);
        lt.k = (lt.input * params_.matrix(ids.wk)).rowwise() + params_.matrix(ids.bk).row(0);
        lt.v = (lt.input * params_.matrix(ids.wv)).rowwise() + params_.matrix(ids.bv).row(0);
        lt.probs.resize(config_.heads);
        lt.context.resize(rows, H);
        for (std::size_t a = 0; a < config_.heads; ++a) {
            const auto c0 = static_cast<Eigen::Index>(a) * d;
            Matrix s = lt.q.middleCols(c0, d) * lt.k.middleCols(c0, d).transpose() * scale;
            softmax_rows(s);
            lt.context.middleCols(c0, d) = s * lt.v.middleCols(c0, d);
            lt.probs[a] = std::move(s);
        }
        const Matrix attn = (lt.context * params_.matrix(ids.wo)).rowwise() +
                            params_.matrix(ids.bo).row(0);
        lt.attn_out = layer_norm(lt.input.topRows(rows) + attn, params_.matrix(ids.ln1_g),
                                 params_.matrix(ids.ln1_b), eps, lt.ln1);
        lt.pre_act = (lt.attn_out * params_.matrix(ids.w1)).rowwise() + params_.matrix(ids.b1).row(0);
        lt.act = lt.pre_act.unaryExpr([](double v) { return gelu(v); });
        const Matrix ffn = (lt.act * params_.matrix(ids.w2)).rowwise() + params_.matrix(ids.b2).row(0);
        h = layer_norm(lt.attn_out + ffn, params_.matrix(ids.ln2_g), params_.matrix(ids.ln2_b), eps,
                       lt.ln2);
    }
    return h.row(0).transpose();
}

void TransformerEncoder::backward(const EncoderTrace& trace_base, const Vector& d_pooled,
                                  std::span<double> grads) const {
    const auto& t = dynamic_cast<const TransformerTrace&>(trace_base);
    if (grads.size() != params_.size()) throw ConfigError("gradient buffer size mismatch");
    const auto H = static_cast<Eigen::Index>(config_.hidden_size);
    const auto d = H / static_cast<Eigen::Index>(config_.heads);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    auto G = [&](std::size_t id) { return params_.matrix(grads, id); };
    auto W = [&](std::size_t id) { return params_.matrix(id); };

    Matrix dh = d_pooled.transpose();  // 1 x H: gradient w.r.t. the last layer's output rows
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const auto& ids = layers_[li];
        const auto& lt = t.layers[li];
        const Eigen::Index rows = lt.q.rows();
        const Eigen::Index n = lt.input.rows();

        const Matrix dz2 = layer_norm_backward(dh, lt.ln2, W(ids.ln2_g), G(ids.ln2_g), G(ids.ln2_b));
        G(ids.w2).noalias() += lt.act.transpose() * dz2;
        G(ids.b2).row(0) += dz2.colwise().sum();
        Matrix dpre = dz2 * W(ids.w2).transpose();
        dpre = dpre.cwiseProduct(lt.pre_act.unaryExpr([](double v) { return gelu_grad(v); }));
        G(ids.w1).noalias() += lt.attn_out.transpose() * dpre;
        G(ids.b1).row(0) += dpre.colwise().sum();
        const Matrix du = dz2 + dpre * W(ids.w1).transpose();

        const Matrix dz1 = layer_norm_backward(du, lt.ln1, W(ids.ln1_g), G(ids.ln1_g), G(ids.ln1_b));
        Matrix dinput = Matrix::Zero(n, H);
        dinput.topRows(rows) += dz1;
        G(ids.wo).noalias() += lt.context.transpose() * dz1;
        G(ids.bo).row(0) += dz1.colwise().sum();
        const Matrix dctx = dz1 * W(ids.wo).transpose();

        Matrix dq(rows, H), dk = Matrix::Zero(n, H), dv = Matrix::Zero(n, H);
        for (std::size_t a = 0; a < config_.heads; ++a) {
            const auto c0 = static_cast<Eigen::Index>(a) * d;
            const Matrix& p = lt.probs[a];
            const auto dca = dctx.middleCols(c0, d);
            const Matrix dp = dca * lt.v.middleCols(c0, d).transpose();
            dv.middleCols(c0, d).noalias() += p.transpose() * dca;
            const Vector row_dot = dp.cwiseProduct(p).rowwise().sum();
            const Matrix ds = p.cwiseProduct((dp.colwise() - row_dot)) * scale;
            dq.middleCols(c0, d).noalias() = ds * lt.k.middleCols(c0, d);
            dk.middleCols(c0, d).noalias() += ds.transpose() * lt.q.middleCols(c0, d);
        }
        G(ids.wq).noalias() += lt.input.topRows(rows).transpose() * dq;
        G(ids.bq).row(0) += dq.colwise().sum();
        dinput.topRows(rows).noalias() += dq * W(ids.wq).transpose();
        G(ids.wk).noalias() += lt.input.transpose() * dk;
        G(ids.bk).row(0) += dk.colwise().sum();
        dinput.noalias() += dk * W(ids.wk).transpose();
        G(ids.wv).noalias() += lt.input.transpose() * dv;
        G(ids.bv).row(0) += dv.colwise().sum();
        dinput.noalias() += dv * W(ids.wv).transpose();
        dh = std::move(dinput);
    }

    const Matrix dx = layer_norm_backward(dh, t.embedding_ln, W(embedding_ln_g_),
                                          G(embedding_ln_g_), G(embedding_ln_b_));
    auto dE = G(token_embedding_);
    auto dP = G(position_embedding_);
    for (Eigen::Index i = 0; i < dx.rows(); ++i) {
        dE.row(t.tokens[i]) += dx.row(i);
        dP.row(static_cast<Eigen::Index>(t.positions[i])) += dx.row(i);
    }
}

std::unique_ptr<Encoder> make_encoder(const nlohmann::json& encoder_config) {
    const auto type = encoder_config.value("type", std::string("transformer"));
    if (type == "transformer") {
        return std::make_unique<TransformerEncoder>(TransformerConfig::from_json(encoder_config));
    }
    throw ConfigError("unknown encoder type '" + type + "'");
}

}  // namespace tracs
