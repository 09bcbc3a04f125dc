#include "transfact/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "transfact/binio.hpp"
#include "transfact/error.hpp"
#include "transfact/rng.hpp"

namespace transfact {

Sample Sample::truncated(int length) const {
    require(length >= 1 && length <= input.length, ErrorKind::Config,
            "truncation length " + std::to_string(length) + " outside [1, " + std::to_string(input.length) + "]");
    Sample out;
    out.id = id;
    out.input = input.prefix(length);
    if (mhi) {
        out.mhi = mhi->prefix(length);
    }
    out.labels.assign(labels.begin(), labels.begin() + length);
    out.transfer = transfer;
    return out;
}

Dataset load_dataset(const std::filesystem::path& manifest_path, const std::filesystem::path& feature_dir,
                     const ModelConfig& model) {
    const auto manifest = load_manifest(manifest_path);
    Dataset data;
    for (const auto& e : manifest.entries) {
        Sample s;
        s.id = e.id;
        const auto video = load_video(resolve_entry_path(manifest_path, e));
        s.labels = video.stage_labels;
        s.transfer = video.transfer;
        s.input = load_features(feature_path(feature_dir, e.id, model.input_modality), model.input_dim);
        if (model.use_mhi) {
            s.mhi = load_features(feature_path(feature_dir, e.id, Modality::Mhi), model.mhi_dim);
        }
        require(s.input.length == static_cast<int>(s.labels.size()), ErrorKind::Validation,
                "feature length does not match video length for " + e.id);
        switch (e.split) {
        case Split::Train: data.train.push_back(std::move(s)); break;
        case Split::Val: data.val.push_back(std::move(s)); break;
        case Split::Test: data.test.push_back(std::move(s)); break;
        case Split::Unassigned: break;
        }
    }
    return data;
}

double warmup_lr(std::int64_t step, const TrainConfig& config) {
    if (config.warmup_steps <= 0) {
        return config.learning_rate;
    }
    const double frac = std::min(1.0, static_cast<double>(step) / config.warmup_steps);
    return config.learning_rate * frac;
}

AdamState make_adam_state(const Parameters& params) {
    AdamState s;
    s.m = params.zeros_like();
    s.v = params.zeros_like();
    return s;
}

void adamw_step(Parameters& params, const std::vector<Matrix>& grads, AdamState& state, double lr,
                const TrainConfig& config) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        Matrix& p = params.tensors[i];
        const Matrix& g = grads[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g.cwiseProduct(g);
        p *= 1.0 - lr * config.weight_decay;
        p.array() -= lr * (state.m[i].array() / bc1) / ((state.v[i].array() / bc2).sqrt() + config.adam_eps);
    }
}

// ---------------------------------------------------------------------------
// Checkpoints

std::uint64_t Checkpoint::config_fingerprint() const {
    return fingerprint({{"model", to_json(model)}, {"train", to_json(train)}});
}

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

void write_matrix(binio::Writer& out, const Matrix& m) {
    out.u32(static_cast<std::uint32_t>(m.rows()));
    out.u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        out.f64(m.data()[i]);
    }
}

Matrix read_matrix(binio::Reader& in) {
    const auto rows = in.u32();
    const auto cols = in.u32();
    if (static_cast<std::uint64_t>(rows) * cols * 8 > in.remaining()) {
        in.error("tensor larger than remaining data");
    }
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = in.f64();
    }
    return m;
}

} // namespace

// TFCK layout: "TFCK", u32 version, u64 fingerprint, config JSON string,
// parameter blob, optimizer blob, u32 epoch, f64 val loss, u64 FNV-1a of
// everything before it.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    binio::Writer out;
    out.magic("TFCK");
    out.u32(kCheckpointVersion);
    out.u64(ckpt.config_fingerprint());
    out.string(nlohmann::json{{"model", to_json(ckpt.model)}, {"train", to_json(ckpt.train)}}.dump());
    out.u32(static_cast<std::uint32_t>(ckpt.params.tensors.size()));
    for (std::size_t i = 0; i < ckpt.params.tensors.size(); ++i) {
        out.string(ckpt.params.names[i]);
        write_matrix(out, ckpt.params.tensors[i]);
    }
    out.u64(static_cast<std::uint64_t>(ckpt.optimizer.step));
    out.u32(static_cast<std::uint32_t>(ckpt.optimizer.m.size()));
    for (std::size_t i = 0; i < ckpt.optimizer.m.size(); ++i) {
        write_matrix(out, ckpt.optimizer.m[i]);
        write_matrix(out, ckpt.optimizer.v[i]);
    }
    out.u32(static_cast<std::uint32_t>(ckpt.epoch + 1));
    out.f64(ckpt.val_loss);
    const auto& bytes = out.bytes();
    out.u64(fnv1a(bytes.data(), bytes.size()));
    return out.bytes();
}

Checkpoint decode_checkpoint(std::vector<std::uint8_t> bytes, const std::string& source,
                             std::optional<std::uint64_t> expected_fingerprint) {
    if (bytes.size() >= 8) {
        const std::uint64_t stored = [&] {
            std::uint64_t v = 0;
            for (int i = 0; i < 8; ++i) {
                v |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + i]) << (8 * i);
            }
            return v;
        }();
        if (fnv1a(bytes.data(), bytes.size() - 8) != stored) {
            fail(ErrorKind::Parse, source + ": checksum mismatch (corrupted checkpoint) at byte offset " +
                                       std::to_string(bytes.size() - 8));
        }
    }
    binio::Reader in(std::move(bytes), source);
    in.expect_magic("TFCK");
    const auto version = in.u32();
    if (version != kCheckpointVersion) {
        fail(ErrorKind::Version, source + ": checkpoint version " + std::to_string(version) + " unsupported");
    }
    const auto fp = in.u64();
    if (expected_fingerprint && *expected_fingerprint != fp) {
        fail(ErrorKind::Version, source + ": config fingerprint " + fingerprint_hex(fp) + " does not match " +
                                     fingerprint_hex(*expected_fingerprint));
    }
    Checkpoint ckpt;
    try {
        const auto j = nlohmann::json::parse(in.string());
        ckpt.model = model_config_from_json(j.at("model"));
        ckpt.train = train_config_from_json(j.at("train"));
    } catch (const nlohmann::json::exception& e) {
        in.error(std::string("bad config block: ") + e.what());
    }
    if (ckpt.config_fingerprint() != fp) {
        in.error("config block does not match its fingerprint");
    }
    const auto count = in.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        ckpt.params.names.push_back(in.string());
        ckpt.params.tensors.push_back(read_matrix(in));
    }
    ckpt.optimizer.step = static_cast<std::int64_t>(in.u64());
    const auto slots = in.u32();
    for (std::uint32_t i = 0; i < slots; ++i) {
        ckpt.optimizer.m.push_back(read_matrix(in));
        ckpt.optimizer.v.push_back(read_matrix(in));
    }
    ckpt.epoch = static_cast<int>(in.u32()) - 1;
    ckpt.val_loss = in.f64();
    in.u64();
    in.expect_end();
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    binio::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<std::uint64_t> expected_fingerprint) {
    return decode_checkpoint(binio::read_file(path), path.string(), expected_fingerprint);
}

// ---------------------------------------------------------------------------
// Training

LossBreakdown batch_gradients(const ModelConfig& model, const Parameters& params, const LossWeights& weights,
                              const std::vector<const Sample*>& batch, std::vector<Matrix>& grads) {
    grads = params.zeros_like();
    LossBreakdown sum;
    for (const Sample* s : batch) {
        ad::Graph g;
        const auto fwd = forward(g, model, params, s->input, s->mhi ? &*s->mhi : nullptr);
        for (const auto& b : fwd.blocks) {
            if (!b.frame_log_probs.value().allFinite() || !b.token_probs.value().allFinite() ||
                !b.trans_probs.value().allFinite()) {
                fail(ErrorKind::Numeric, "non-finite activations on video " + s->id);
            }
        }
        const auto loss = video_loss(fwd, s->labels, s->transfer, weights);
        if (!std::isfinite(loss.breakdown.total)) {
            fail(ErrorKind::Numeric, "non-finite loss on video " + s->id);
        }
        g.backward(loss.total);
        g.collect_parameter_grads(grads);
        sum += loss.breakdown;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (auto& gr : grads) {
        gr *= inv;
    }
    return sum.scaled(inv);
}

LossBreakdown evaluate_loss(const ModelConfig& model, const Parameters& params, const LossWeights& weights,
                            const std::vector<Sample>& samples) {
    LossBreakdown sum;
    for (const auto& s : samples) {
        ad::Graph g;
        const auto fwd = forward(g, model, params, s.input, s.mhi ? &*s.mhi : nullptr);
        sum += video_loss(fwd, s.labels, s.transfer, weights).breakdown;
    }
    return samples.empty() ? sum : sum.scaled(1.0 / static_cast<double>(samples.size()));
}

std::vector<Prediction> predict(const ModelConfig& model, const Parameters& params,
                                const std::vector<Sample>& samples) {
    std::vector<Prediction> out;
    for (const auto& s : samples) {
        const auto fwd = forward(model, params, s.input, s.mhi ? &*s.mhi : nullptr);
        out.push_back({s.id, fwd.predicted_transfer(), static_cast<int>(s.transfer), fwd.predicted_stages(),
                       s.labels});
    }
    return out;
}

namespace {

std::pair<double, double> accuracies(const std::vector<Prediction>& preds) {
    if (preds.empty()) {
        return {0.0, 0.0};
    }
    std::size_t correct = 0;
    std::size_t frames = 0;
    std::size_t frame_correct = 0;
    for (const auto& p : preds) {
        correct += p.transfer == p.truth ? 1 : 0;
        for (std::size_t t = 0; t < p.stages.size(); ++t) {
            frame_correct += p.stages[t] == p.stage_truth[t] ? 1 : 0;
        }
        frames += p.stages.size();
    }
    return {static_cast<double>(correct) / preds.size(), static_cast<double>(frame_correct) / frames};
}

} // namespace

TrainResult train(const ModelConfig& model, const TrainConfig& config, const Dataset& data, const TrainHooks& hooks,
                  const Checkpoint* resume) {
    model.validate();
    config.validate();
    require(!data.train.empty(), ErrorKind::InsufficientInput, "training split is empty");

    Checkpoint state;
    state.model = model;
    state.train = config;
    if (resume != nullptr) {
        if (resume->config_fingerprint() != state.config_fingerprint()) {
            fail(ErrorKind::Version, "checkpoint config fingerprint does not match the run configuration");
        }
        state = *resume;
    } else {
        state.params = init_model(model, config.seed);
        state.optimizer = make_adam_state(state.params);
    }

    TrainResult result;
    bool have_best = false;
    const std::size_t n = data.train.size();
    const auto batch_size = static_cast<std::size_t>(config.batch_size);
    std::vector<Matrix> grads;
    for (int epoch = state.epoch + 1; epoch < config.epochs; ++epoch) {
        Rng shuffle(derive_seed(config.seed, SeedStream::Shuffle, static_cast<std::uint64_t>(epoch)));
        const auto order = shuffle.permutation(n);
        LossBreakdown epoch_loss;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += batch_size) {
            std::vector<const Sample*> batch;
            for (std::size_t i = start; i < std::min(n, start + batch_size); ++i) {
                batch.push_back(&data.train[order[i]]);
            }
            LossBreakdown loss;
            try {
                loss = batch_gradients(model, state.params, config.loss, batch, grads);
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::Numeric) {
                    fail(ErrorKind::Numeric, "epoch " + std::to_string(epoch) + " batch " +
                                                 std::to_string(start / batch_size) + ": " + e.what());
                }
                throw;
            }
            const double lr = warmup_lr(state.optimizer.step + 1, config);
            adamw_step(state.params, grads, state.optimizer, lr, config);
            if (hooks.on_step) {
                hooks.on_step(state.optimizer.step, loss);
            }
            epoch_loss += loss;
            ++batches;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train = epoch_loss.scaled(1.0 / static_cast<double>(batches));
        const auto& val = data.val.empty() ? data.train : data.val;
        rec.val = evaluate_loss(model, state.params, config.loss, val);
        const auto [acc, frame_acc] = accuracies(predict(model, state.params, val));
        rec.val_trans_accuracy = acc;
        rec.val_frame_accuracy = frame_acc;
        state.epoch = epoch;
        state.val_loss = rec.val.total;
        if (!have_best || rec.val.total < result.best.val_loss) {
            result.best = state;
            have_best = true;
        }
        result.history.push_back(rec);
        if (hooks.verbose) {
            std::cerr << "epoch " << epoch << " train " << rec.train.total << " val " << rec.val.total
                      << " val_acc " << acc << " val_frame_acc " << frame_acc << "\n";
        }
        if (hooks.on_epoch) {
            hooks.on_epoch(state, rec);
        }
    }
    if (!have_best) {
        result.best = state;
    }
    result.last = std::move(state);
    return result;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "epoch,train_trans,train_frame,train_stage,train_cross,train_smooth,train_total,"
          "val_trans,val_frame,val_stage,val_cross,val_smooth,val_total,val_trans_acc,val_frame_acc\n";
    for (const auto& r : history) {
        os << r.epoch << ',' << r.train.trans << ',' << r.train.frame << ',' << r.train.stage << ','
           << r.train.cross_att << ',' << r.train.smooth << ',' << r.train.total << ',' << r.val.trans << ','
           << r.val.frame << ',' << r.val.stage << ',' << r.val.cross_att << ',' << r.val.smooth << ','
           << r.val.total << ',' << r.val_trans_accuracy << ',' << r.val_frame_accuracy << '\n';
    }
    binio::write_text(path, os.str());
}

} // namespace transfact
