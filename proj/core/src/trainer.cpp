#include "tracs/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "tracs/checkpoint.hpp"
#include "tracs/errors.hpp"
#include "tracs/rng.hpp"

namespace tracs {
namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- optimizer

AdamW::AdamW(std::vector<ParameterStore*> stores, AdamWConfig config)
    : stores_(std::move(stores)), config_(config) {
    for (const auto* s : stores_) {
        m_.emplace_back(s->size(), 0.0);
        v_.emplace_back(s->size(), 0.0);
        std::vector<std::uint8_t> mask(s->size(), 0);
        for (const auto& p : s->info()) {
            std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(p.offset), p.size(),
                        p.decay ? 1 : 0);
        }
        decay_mask_.push_back(std::move(mask));
    }
}

void AdamW::step(std::span<const std::span<const double>> grads, double lr) {
    if (grads.size() != stores_.size()) throw ConfigError("AdamW: gradient/store count mismatch");
    ++step_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    const double step_size = lr / bc1;
    const double decay = 1.0 - lr * config_.weight_decay;
    for (std::size_t s = 0; s < stores_.size(); ++s) {
        auto values = stores_[s]->values();
        const auto g = grads[s];
        if (g.size() != values.size()) throw ConfigError("AdamW: gradient size mismatch");
        auto& m = m_[s];
        auto& v = v_[s];
        const auto& mask = decay_mask_[s];
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (mask[i]) values[i] *= decay;
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
            values[i] -= step_size * m[i] / (std::sqrt(v[i] / bc2) + config_.eps);
        }
    }
}

void AdamW::write_state(std::ostream& out) const {
    out.write(reinterpret_cast<const char*>(&step_), sizeof step_);
    for (std::size_t s = 0; s < stores_.size(); ++s) {
        stores_[s]->write(out, m_[s]);
        stores_[s]->write(out, v_[s]);
    }
}

void AdamW::read_state(std::istream& in, const std::string& where) {
    if (!in.read(reinterpret_cast<char*>(&step_), sizeof step_)) {
        throw SchemaError(where + ": truncated optimizer state");
    }
    for (std::size_t s = 0; s < stores_.size(); ++s) {
        stores_[s]->read(in, m_[s], where);
        stores_[s]->read(in, v_[s], where);
    }
}

double clip_global_norm(std::span<const std::span<double>> grads, double max_norm) {
    double sq = 0.0;
    for (const auto g : grads) {
        for (double v : g) sq += v * v;
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double scale = max_norm / (norm + 1e-6);
        for (const auto g : grads) {
            for (double& v : g) v *= scale;
        }
    }
    return norm;
}

// ------------------------------------------------------------------- config

void TrainConfig::validate() const {
    if (optimizer != "adamw") throw ConfigError("optimizer must be 'adamw'");
    if (schedule != "linear") throw ConfigError("schedule must be 'linear'");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning_rate must be a finite non-negative number");
    }
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1 (zero training steps requested)");
    if (k < 1) throw ConfigError("k must be >= 1");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("validation_fraction must lie in (0, 1)");
    }
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (grad_clip < 0.0) throw ConfigError("grad_clip must be >= 0 (0 disables)");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
}

json TrainConfig::to_json() const {
    return {{"optimizer", optimizer},
            {"learning_rate", learning_rate},
            {"schedule", schedule},
            {"warmup_steps", warmup_steps},
            {"batch_size", batch_size},
            {"epochs", epochs},
            {"seed", seed},
            {"mode", std::string(to_string(mode))},
            {"k", k},
            {"validation_fraction", validation_fraction},
            {"weight_decay", weight_decay},
            {"adam_beta1", adam_beta1},
            {"adam_beta2", adam_beta2},
            {"adam_eps", adam_eps},
            {"grad_clip", grad_clip},
            {"boolean_reduction", std::string(to_string(boolean_reduction))},
            {"telescope_loss_weight", telescope_loss_weight},
            {"boolean_loss_weight", boolean_loss_weight},
            {"threshold", threshold},
            {"bool_f1", std::string(to_string(bool_f1))},
            {"head_init_seed", head_init_seed},
            {"freeze_encoder", freeze_encoder}};
}

TrainConfig TrainConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");
    TrainConfig c;
    const json defaults = c.to_json();
    for (const auto& [key, value] : j.items()) {
        if (!defaults.contains(key)) throw ConfigError("unknown train config key '" + key + "'");
    }
    try {
        c.optimizer = j.value("optimizer", c.optimizer);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.schedule = j.value("schedule", c.schedule);
        c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.epochs = j.value("epochs", c.epochs);
        c.seed = j.value("seed", c.seed);
        c.mode = parse_selection_mode(j.value("mode", std::string(to_string(c.mode))));
        c.k = j.value("k", c.k);
        c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
        c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
        c.adam_eps = j.value("adam_eps", c.adam_eps);
        c.grad_clip = j.value("grad_clip", c.grad_clip);
        c.boolean_reduction = parse_boolean_reduction(
            j.value("boolean_reduction", std::string(to_string(c.boolean_reduction))));
        c.telescope_loss_weight = j.value("telescope_loss_weight", c.telescope_loss_weight);
        c.boolean_loss_weight = j.value("boolean_loss_weight", c.boolean_loss_weight);
        c.threshold = j.value("threshold", c.threshold);
        c.bool_f1 = parse_bool_f1_variant(j.value("bool_f1", std::string(to_string(c.bool_f1))));
        c.head_init_seed = j.value("head_init_seed", c.head_init_seed);
        c.freeze_encoder = j.value("freeze_encoder", c.freeze_encoder);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string TrainConfig::fingerprint() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(to_json().dump())));
    return buf;
}

std::size_t TrainConfig::total_steps(std::size_t train_chunk_count) const {
    return epochs * ((train_chunk_count + batch_size - 1) / batch_size);
}

double lr_at_step(const TrainConfig& config, std::size_t step, std::size_t total_steps) {
    if (total_steps == 0) throw ConfigError("lr schedule needs total_steps > 0");
    if (step > total_steps) {
        throw ConfigError("step " + std::to_string(step) + " beyond total_steps " +
                          std::to_string(total_steps));
    }
    const auto warmup = std::min(config.warmup_steps, total_steps);
    if (step < warmup) {
        return config.learning_rate * static_cast<double>(step) / static_cast<double>(warmup);
    }
    if (total_steps == warmup) return 0.0;
    return config.learning_rate * static_cast<double>(total_steps - step) /
           static_cast<double>(total_steps - warmup);
}

// -------------------------------------------------------------------- split

SplitIndices split_train_validation(const std::vector<std::string>& telescope_per_document,
                                    double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw ConfigError("validation fraction must lie in (0, 1)");
    }
    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < telescope_per_document.size(); ++i) {
        by_class[telescope_per_document[i]].push_back(i);
    }
    std::vector<std::uint8_t> is_val(telescope_per_document.size(), 0);
    for (auto& [name, docs] : by_class) {
        const std::size_t n = docs.size();
        if (n < 2) {
            throw ValidationError("cannot stratify: telescope class '" + name + "' has " +
                                  std::to_string(n) + " document(s), need at least 2");
        }
        auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
        n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
        Rng rng(derive_seed(seed, "split:" + name));
        for (std::size_t i = 0; i < n_val; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, n - i));
            std::swap(docs[i], docs[j]);
        }
        for (std::size_t i = 0; i < n_val; ++i) is_val[docs[i]] = 1;
    }
    SplitIndices out;
    for (std::size_t i = 0; i < is_val.size(); ++i) {
        (is_val[i] ? out.validation : out.train).push_back(i);
    }
    return out;
}

std::pair<std::vector<PaperRecord>, std::vector<PaperRecord>> split_train_validation(
    const std::vector<PaperRecord>& records, double fraction, std::uint64_t seed) {
    std::vector<std::string> names;
    names.reserve(records.size());
    for (const auto& r : records) {
        if (!r.telescope) throw ValidationError("record " + r.bibcode + " has no telescope label");
        names.push_back(*r.telescope);
    }
    const auto split = split_train_validation(names, fraction, seed);
    std::pair<std::vector<PaperRecord>, std::vector<PaperRecord>> out;
    for (auto i : split.train) out.first.push_back(records[i]);
    for (auto i : split.validation) out.second.push_back(records[i]);
    return out;
}

// -------------------------------------------------------------------- batch

Batch assemble_batch(std::span<const Chunk* const> chunks, TokenId pad_id) {
    Batch b;
    b.size = chunks.size();
    for (const auto* c : chunks) b.max_length = std::max(b.max_length, c->token_ids.size());
    b.tokens.assign(b.size * b.max_length, pad_id);
    b.mask.assign(b.size * b.max_length, 0);
    for (std::size_t i = 0; i < b.size; ++i) {
        const auto& ids = chunks[i]->token_ids;
        std::copy(ids.begin(), ids.end(), b.tokens.begin() + static_cast<std::ptrdiff_t>(i * b.max_length));
        std::fill_n(b.mask.begin() + static_cast<std::ptrdiff_t>(i * b.max_length), ids.size(), 1);
    }
    b.chunks.assign(chunks.begin(), chunks.end());
    return b;
}

// ---------------------------------------------------------------- evaluate

EvalReport evaluate_chunks(const Model& model, const std::vector<ChunkedEntry>& entries,
                           const LabelVocabulary& vocabulary, const AggregationConfig& aggregation,
                           BoolF1Variant variant) {
    std::vector<DocumentLabels> preds, gold;
    preds.reserve(entries.size());
    gold.reserve(entries.size());
    for (const auto& e : entries) {
        std::vector<ChunkPrediction> cps;
        cps.reserve(e.chunks.size());
        for (const auto& c : e.chunks) cps.push_back(forward_chunk(model, c));
        preds.push_back(aggregate(cps, vocabulary, aggregation).labels());
        const auto& first = e.chunks.front();
        if (!first.telescope || !first.booleans) {
            throw ValidationError("evaluation chunk for " + e.bibcode + " is unlabeled");
        }
        gold.push_back({e.bibcode, *first.telescope, *first.booleans});
    }
    return evaluate(preds, gold, vocabulary, variant);
}

// -------------------------------------------------------------------- train

namespace {

json state_json(std::size_t epochs_done, std::size_t step, double best, std::size_t best_epoch,
                double val_composite, const TrainConfig& config) {
    return {{"epochs_completed", epochs_done},
            {"step", step},
            {"best_val_composite", best},
            {"best_epoch", best_epoch},
            {"val_composite", val_composite},
            {"seed", config.seed},
            {"config_fingerprint", config.fingerprint()}};
}

void read_into(const fs::path& path, ParameterStore& store) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    store.read(in, path.string());
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::vector<Chunk>& chunks, Model& model,
                  const LabelVocabulary& vocabulary, const TrainContext& context,
                  const TrainHooks& hooks) {
    config.validate();
    if (model.head.num_classes() != vocabulary.size()) {
        throw ConfigError("model head and vocabulary disagree on the number of classes");
    }
    if (context.out_dir.empty()) throw ConfigError("train: output directory required");

    auto entries = group_by_record(chunks);
    std::vector<std::string> telescopes;
    for (auto& e : entries) {
        for (const auto& c : e.chunks) {
            if (!c.telescope || !c.booleans) {
                throw ValidationError("training chunk for " + e.bibcode + " carries no labels");
            }
            vocabulary.index_of(*c.telescope);
        }
        e.chunks = select_chunks(e.chunks, config.mode, config.k, config.seed);
        telescopes.push_back(*e.chunks.front().telescope);
    }
    if (entries.empty()) throw ValidationError("train: empty training set");

    const auto split = split_train_validation(telescopes, config.validation_fraction, config.seed);
    std::vector<ChunkedEntry> val_entries;
    std::vector<const Chunk*> train_chunks;
    for (auto i : split.train) {
        for (const auto& c : entries[i].chunks) train_chunks.push_back(&c);
    }
    for (auto i : split.validation) val_entries.push_back(entries[i]);
    if (train_chunks.empty()) throw ValidationError("train: empty training set after split");

    TrainResult result;
    result.train_documents = split.train.size();
    result.validation_documents = split.validation.size();
    result.train_chunks = train_chunks.size();
    for (const auto& e : val_entries) result.validation_bibcodes.push_back(e.bibcode);

    const std::size_t steps_per_epoch = (train_chunks.size() + config.batch_size - 1) / config.batch_size;
    const std::size_t total_steps = config.total_steps(train_chunks.size());
    result.total_steps = total_steps;

    Encoder& encoder = *model.encoder;
    encoder.set_mode(config.freeze_encoder ? EncoderMode::frozen : EncoderMode::trainable);
    const bool train_encoder = encoder.mode() == EncoderMode::trainable;

    std::vector<ParameterStore*> stores{&model.head.parameters()};
    if (train_encoder) stores.push_back(&encoder.parameters());
    AdamW optimizer(stores, {config.adam_beta1, config.adam_beta2, config.adam_eps,
                             config.weight_decay});

    fs::create_directories(context.out_dir);
    result.best_dir = context.out_dir / "best";
    result.last_dir = context.out_dir / "last";

    std::size_t start_epoch = 0;
    std::size_t step = 0;
    double best = -1.0;
    std::size_t best_epoch = 0;
    const bool resuming = context.resume && checkpoint_exists(result.last_dir);
    if (resuming) {
        const json state = [&] {
            std::ifstream in(result.last_dir / "state.json");
            if (!in) throw IoError("resume: missing state.json in " + result.last_dir.string());
            return json::parse(in);
        }();
        if (state.value("config_fingerprint", std::string()) != config.fingerprint()) {
            throw ConfigError("resume: checkpoint was produced with a different train config");
        }
        read_into(result.last_dir / "encoder.bin", encoder.parameters());
        read_into(result.last_dir / "head.bin", model.head.parameters());
        load_optimizer_state(result.last_dir, optimizer);
        start_epoch = state.at("epochs_completed").get<std::size_t>();
        step = state.at("step").get<std::size_t>();
        best = state.at("best_val_composite").get<double>();
        best_epoch = state.at("best_epoch").get<std::size_t>();
    }

    std::ofstream log(context.out_dir / "train_log.jsonl",
                      resuming ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot write training log in " + context.out_dir.string());

    const AggregationConfig aggregation{config.threshold};
    const LossConfig loss_config = config.loss();
    const CheckpointMeta base_meta{context.tokenizer, context.window, config.fingerprint(), nullptr};

    std::vector<double> head_grad = model.head.parameters().zeros_like();
    std::vector<double> enc_grad = train_encoder ? encoder.parameters().zeros_like()
                                                 : std::vector<double>{};
    auto trace = encoder.make_trace();

    std::size_t end_epoch = config.epochs;
    if (context.stop_after_epochs > 0) end_epoch = std::min(end_epoch, start_epoch + context.stop_after_epochs);

    std::vector<std::size_t> order(train_chunks.size());
    for (std::size_t epoch = start_epoch; epoch < end_epoch; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch + 1)));
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[uniform_below(rng, i)]);
        }

        for (std::size_t b = 0; b < steps_per_epoch; ++b) {
            const std::size_t begin = b * config.batch_size;
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            std::vector<const Chunk*> members;
            for (std::size_t i = begin; i < end; ++i) members.push_back(train_chunks[order[i]]);
            if (hooks.on_batch) hooks.on_batch(step, epoch, members);

            const Batch batch = assemble_batch(members, context.pad_id);
            std::fill(head_grad.begin(), head_grad.end(), 0.0);
            std::fill(enc_grad.begin(), enc_grad.end(), 0.0);
            const double inv_b = 1.0 / static_cast<double>(batch.size);
            double loss_sum = 0.0;
            try {
                for (std::size_t i = 0; i < batch.size; ++i) {
                    const Chunk& c = *batch.chunks[i];
                    const Vector pooled =
                        encoder.forward(batch.row_tokens(i), batch.row_mask(i), trace.get());
                    const auto out = model.head.forward(pooled);
                    const auto jl = joint_loss(
                        std::span<const double>(out.telescope.data(), out.telescope.size()),
                        vocabulary.index_of(*c.telescope),
                        std::span<const double>(out.booleans.data(), out.booleans.size()),
                        *c.booleans, loss_config);
                    loss_sum += jl.value;
                    const Vector d_tel =
                        Eigen::Map<const Vector>(jl.d_telescope.data(),
                                                 static_cast<Eigen::Index>(jl.d_telescope.size())) *
                        inv_b;
                    const Vector d_bool =
                        Eigen::Map<const Vector>(jl.d_booleans.data(), kNumBooleanLabels) * inv_b;
                    const Vector d_pooled = model.head.backward(pooled, d_tel, d_bool, head_grad);
                    if (train_encoder) encoder.backward(*trace, d_pooled, enc_grad);
                }
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " at step " + std::to_string(step) +
                                   "; training aborted, checkpoints in " +
                                   context.out_dir.string() + " retained");
            }
            const double loss = loss_sum * inv_b;
            if (!std::isfinite(loss)) {
                throw NumericError("non-finite loss at step " + std::to_string(step) +
                                   "; training aborted, checkpoints in " +
                                   context.out_dir.string() + " retained");
            }
            if (hooks.on_loss) hooks.on_loss(step, loss);

            std::vector<std::span<double>> grad_spans{head_grad};
            if (train_encoder) grad_spans.emplace_back(enc_grad);
            clip_global_norm(grad_spans, config.grad_clip);
            const double lr = lr_at_step(config, step, total_steps);
            std::vector<std::span<const double>> const_spans(grad_spans.begin(), grad_spans.end());
            optimizer.step(const_spans, lr);
            ++step;
            log << json{{"step", step}, {"epoch", epoch + 1}, {"loss", loss}, {"lr", lr}}.dump()
                << "\n";
        }

        EpochMetrics em;
        em.epoch = epoch + 1;
        em.validation = evaluate_chunks(model, val_entries, vocabulary, aggregation, config.bool_f1);
        const double val = em.validation.composite;
        json bool_f1 = json::object();
        for (std::size_t b = 0; b < kNumBooleanLabels; ++b) {
            bool_f1[std::string(kBooleanLabelNames[b])] = em.validation.boolean_f1[b];
        }
        log << json{{"epoch", epoch + 1},
                    {"val_composite", val},
                    {"val_multiclass_f1", em.validation.multiclass_f1},
                    {"val_bool_f1", bool_f1}}
                   .dump()
            << "\n";
        log.flush();

        const bool improved = val >= best;
        if (improved) {
            best = val;
            best_epoch = epoch + 1;
        }
        CheckpointMeta meta = base_meta;
        meta.state = state_json(epoch + 1, step, best, best_epoch, val, config);
        save_checkpoint(result.last_dir, model, vocabulary, meta, &optimizer);
        if (improved) save_checkpoint(result.best_dir, model, vocabulary, meta, &optimizer);
        result.epochs.push_back(std::move(em));
    }

    result.steps = step;
    result.best_epoch = best_epoch;
    result.best_val_composite = best;
    return result;
}

}  // namespace tracs
