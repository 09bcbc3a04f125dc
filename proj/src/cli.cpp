#include "transfact/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>

#include "transfact/binio.hpp"
#include "transfact/config.hpp"
#include "transfact/eval.hpp"
#include "transfact/features.hpp"
#include "transfact/mhi.hpp"
#include "transfact/parallel.hpp"
#include "transfact/rng.hpp"
#include "transfact/svg.hpp"
#include "transfact/trainer.hpp"
#include "transfact/videodata.hpp"

namespace transfact::cli {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Config: return kExitUsage;
    case ErrorKind::Numeric: return kExitNumeric;
    default: return kExitData;
    }
}

json default_document() {
    json model = to_json(ModelConfig{});
    json train = to_json(TrainConfig{});
    train.erase("seed"); // the top-level seed feeds every stream
    json data = to_json(GeneratorConfig{});
    data["count"] = 290;
    data["split"] = {200, 30, 60};
    return {{"seed", 0},
            {"runs", 1},
            {"data", data},
            {"features", {{"dim", 32}, {"modality", "both"}, {"tau", 15}, {"theta", 20}}},
            {"model", model},
            {"train", train},
            {"eval", {{"split", "test"}, {"truncate", 0}, {"lengths", json::array()}}},
            {"stats", {{"two_sided", true}}},
            {"plot", {{"title", "accuracy vs. input length"}}}};
}

namespace {

bool compatible(const json& base, const json& v) {
    if (base.is_number()) {
        return v.is_number();
    }
    return base.type() == v.type();
}

void merge_into(json& base, const json& patch, const std::string& where) {
    if (!patch.is_object()) {
        fail(ErrorKind::Config, "config " + (where.empty() ? std::string("document") : where) + " must be an object");
    }
    for (const auto& [key, value] : patch.items()) {
        const std::string path = where + "/" + key;
        if (!base.contains(key)) {
            fail(ErrorKind::Config, "unknown config key " + path);
        }
        json& slot = base[key];
        if (slot.is_object()) {
            merge_into(slot, value, path);
        } else if (!compatible(slot, value)) {
            fail(ErrorKind::Config, "config key " + path + " has the wrong type");
        } else {
            slot = value;
        }
    }
}

} // namespace

json resolve_document(const json* file, const std::vector<std::pair<std::string, json>>& overrides) {
    json doc = default_document();
    if (file != nullptr) {
        merge_into(doc, *file, "");
    }
    for (const auto& [pointer, value] : overrides) {
        doc[json::json_pointer(pointer)] = value;
    }
    return doc;
}

std::uint64_t config_fingerprint(const json& resolved) {
    json copy = resolved;
    copy.erase("inputs");
    return fingerprint(copy);
}

namespace {

struct RefuseOverwrite : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flag -> config pointer bindings for one subcommand.
class Bindings {
public:
    explicit Bindings(CLI::App* app) : app_(app) {}

    template <typename T>
    CLI::Option* bind(const std::string& flag, const std::string& pointer, const std::string& help) {
        auto store = std::make_shared<T>();
        auto* opt = app_->add_option(flag, *store, help);
        appliers_.push_back([opt, store, pointer](auto& ov) {
            if (opt->count() > 0) {
                ov.emplace_back(pointer, json(*store));
            }
        });
        return opt;
    }

    CLI::Option* bind_flag(const std::string& flag, const std::string& pointer, const std::string& help) {
        auto store = std::make_shared<bool>(false);
        auto* opt = app_->add_flag(flag, *store, help);
        appliers_.push_back([opt, store, pointer](auto& ov) {
            if (opt->count() > 0) {
                ov.emplace_back(pointer, json(*store));
            }
        });
        return opt;
    }

    void custom(std::function<void(std::vector<std::pair<std::string, json>>&)> fn) {
        appliers_.push_back(std::move(fn));
    }

    std::vector<std::pair<std::string, json>> overrides() const {
        std::vector<std::pair<std::string, json>> ov;
        for (const auto& a : appliers_) {
            a(ov);
        }
        return ov;
    }

private:
    CLI::App* app_;
    std::vector<std::function<void(std::vector<std::pair<std::string, json>>&)>> appliers_;
};

struct Common {
    std::string config;
    std::string out;
    bool force = false;
    bool quiet = false;
    int jobs = 1;
};

void add_common(CLI::App* app, Bindings& b, Common& c, bool out_required = true) {
    app->add_option("--config", c.config, "JSON config file (flags override it)")->check(CLI::ExistingFile);
    auto* out = app->add_option("--out", c.out, "output directory");
    if (out_required) {
        out->required();
    }
    app->add_flag("--force", c.force, "overwrite an existing output directory");
    app->add_flag("--quiet,-q", c.quiet, "suppress progress output");
    app->add_option("--jobs,-j", c.jobs, "worker threads")->check(CLI::PositiveNumber);
    b.bind<std::uint64_t>("--seed", "/seed", "master seed; every random stream derives from it");
}

void add_model_train_flags(Bindings& b) {
    b.bind<int>("--blocks", "/model/num_blocks", "number of blocks (input block included)");
    b.bind<int>("--tokens", "/model/num_tokens", "stage tokens M");
    b.bind<int>("--hidden", "/model/hidden_dim", "hidden width D_h");
    b.bind<int>("--heads", "/model/heads", "attention heads");
    b.bind<double>("--lr", "/train/learning_rate", "base learning rate");
    b.bind<int>("--epochs", "/train/epochs", "training epochs");
    b.bind<int>("--batch-size", "/train/batch_size", "videos per step");
    b.bind<int>("--warmup", "/train/warmup_steps", "linear warm-up steps");
    b.bind<double>("--weight-decay", "/train/weight_decay", "decoupled weight decay");
    b.bind<double>("--w-trans", "/train/w_trans", "transferability loss weight");
    b.bind<double>("--w-frame", "/train/w_frame", "frame loss weight");
    b.bind<double>("--w-stage", "/train/w_stage", "stage-token loss weight");
    b.bind<double>("--w-cross", "/train/w_cross", "cross-attention loss weight");
    b.bind<double>("--w-smooth", "/train/w_smooth", "smoothing loss weight");
    b.bind<int>("--runs", "/runs", "independent runs with seeds seed, seed+1, ...");
}

int env_jobs(int fallback) {
    if (const char* v = std::getenv("TRANSFACT_JOBS")) {
        try {
            return std::max(1, std::stoi(v));
        } catch (const std::exception&) {
            fail(ErrorKind::Config, std::string("TRANSFACT_JOBS is not an integer: ") + v);
        }
    }
    return fallback;
}

fs::path output_path(const std::string& out) {
    fs::path p(out);
    if (p.is_relative()) {
        if (const char* root = std::getenv("TRANSFACT_OUTPUT_ROOT")) {
            return fs::path(root) / p;
        }
    }
    return p;
}

json load_config_file(const std::string& path) {
    if (path.empty()) {
        return json::object();
    }
    try {
        return json::parse(binio::read_text(path));
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Config, path + ": " + e.what());
    }
}

/// Checks the output directory and records the resolved config in it.
void prepare_output(const fs::path& dir, const json& resolved, bool force) {
    const auto cfg = dir / "config.json";
    if (fs::exists(cfg) && !force) {
        std::string note;
        try {
            const auto old = json::parse(binio::read_text(cfg));
            note = config_fingerprint(old) == config_fingerprint(resolved) ? " (same fingerprint)"
                                                                          : " (different fingerprint)";
        } catch (const std::exception&) {
        }
        throw RefuseOverwrite(dir.string() + " already holds a run" + note + "; pass --force to overwrite");
    }
    fs::create_directories(dir);
    binio::write_text(cfg, resolved.dump(2) + "\n");
    binio::write_text(dir / "fingerprint", fingerprint_hex(config_fingerprint(resolved)) + "\n");
}

json pick(const json& doc, std::initializer_list<const char*> keys) {
    json out = json::object();
    for (const char* k : keys) {
        out[k] = doc.at(k);
    }
    return out;
}

struct Ctx {
    std::ostream& out;
    std::ostream& err;
    Common common;
    std::mutex log_mutex;

    void log(const std::string& line) {
        if (!common.quiet) {
            std::lock_guard<std::mutex> lock(log_mutex);
            err << line << '\n';
        }
    }
};

// ---------------------------------------------------------------------------

SplitRatios ratios_from(const json& split) {
    if (!split.is_array() || split.size() != 3) {
        fail(ErrorKind::Config, "data.split needs three weights (train, val, test)");
    }
    const double a = split[0].get<double>();
    const double b = split[1].get<double>();
    const double c = split[2].get<double>();
    require(a >= 0 && b >= 0 && c >= 0 && a + b + c > 0, ErrorKind::Config, "split weights must be non-negative");
    const double s = a + b + c;
    return {a / s, b / s, c / s};
}

int cmd_gen_data(Ctx& ctx, const json& doc) {
    const json resolved = pick(doc, {"seed", "data"});
    const auto gen = generator_config_from_json(doc["data"]);
    gen.validate();
    const int count = doc["data"]["count"].get<int>();
    require(count >= 1, ErrorKind::Config, "data.count must be >= 1");
    const auto ratios = ratios_from(doc["data"]["split"]);
    const auto seed = doc["seed"].get<std::uint64_t>();

    const fs::path dir = output_path(ctx.common.out);
    prepare_output(dir, resolved, ctx.common.force);
    fs::create_directories(dir / "videos");

    std::vector<ManifestEntry> entries(count);
    parallel_for(count, ctx.common.jobs, [&](std::size_t i) {
        const auto video = generate_synthetic_video(derive_seed(seed, SeedStream::Generator, i), gen);
        const std::string rel = "videos/" + video.id + ".tfv";
        save_video(dir / rel, video);
        entries[i] = {video.id, rel, video.transfer, static_cast<int>(video.frames.size()), Split::Unassigned};
    });
    DatasetManifest manifest;
    manifest.entries = std::move(entries);
    manifest.validate();
    manifest = split_dataset(manifest, ratios, seed);
    save_manifest(dir / "manifest.jsonl", manifest);

    std::map<std::string, std::pair<int, int>> tally;
    for (const auto& e : manifest.entries) {
        auto& t = tally[to_string(e.split)];
        t.first += 1;
        t.second += e.transfer == Transfer::NT ? 1 : 0;
    }
    for (const auto& [name, t] : tally) {
        ctx.out << name << ": " << t.first << " videos, " << t.second << " NT\n";
    }
    return kExitOk;
}

int cmd_compute_mhi(Ctx& ctx, const json& doc, const std::string& data, bool pgm) {
    json resolved = {{"features", {{"tau", doc["features"]["tau"]}, {"theta", doc["features"]["theta"]}}}};
    resolved["inputs"] = {{"data", data}};
    const MhiParams params{doc["features"]["tau"].get<int>(), doc["features"]["theta"].get<int>()};
    require(params.tau >= 1 && params.tau <= 65535, ErrorKind::Config, "tau must be in [1, 65535]");
    require(params.theta >= 0 && params.theta <= 255, ErrorKind::Config, "theta must be in [0, 255]");
    const auto manifest = load_manifest(data);
    const fs::path dir = output_path(ctx.common.out);
    prepare_output(dir, resolved, ctx.common.force);
    parallel_for(manifest.entries.size(), ctx.common.jobs, [&](std::size_t i) {
        const auto& e = manifest.entries[i];
        const auto video = load_video(resolve_entry_path(data, e));
        const auto maps = compute_mhi_sequence(video.frames, params);
        save_features(feature_path(dir, e.id, Modality::Mhi), mhi_as_features(maps));
        if (pgm) {
            const auto sub = dir / "pgm" / e.id;
            fs::create_directories(sub);
            for (std::size_t t = 0; t < maps.size(); ++t) {
                std::ostringstream name;
                name << std::setw(4) << std::setfill('0') << t << ".pgm";
                write_mhi_pgm(sub / name.str(), maps[t]);
            }
        }
    });
    ctx.out << "wrote MHI maps for " << manifest.entries.size() << " videos\n";
    return kExitOk;
}

int cmd_extract_features(Ctx& ctx, const json& doc, const std::string& data) {
    json resolved = pick(doc, {"seed", "features"});
    resolved["inputs"] = {{"data", data}};
    const auto& f = doc["features"];
    const std::string mod = f["modality"].get<std::string>();
    const bool want_frame = mod == "frame" || mod == "frames" || mod == "both";
    const bool want_mhi = mod == "mhi" || mod == "both";
    require(want_frame || want_mhi, ErrorKind::Config, "features.modality must be frame, mhi or both");
    const int dim = f["dim"].get<int>();
    require(dim >= 8, ErrorKind::Config, "features.dim must be >= 8");
    const MhiParams params{f["tau"].get<int>(), f["theta"].get<int>()};
    const auto seed = doc["seed"].get<std::uint64_t>();

    const auto manifest = load_manifest(data);
    require(!manifest.entries.empty(), ErrorKind::InsufficientInput, "manifest has no entries");
    const fs::path dir = output_path(ctx.common.out);
    prepare_output(dir, resolved, ctx.common.force);

    const std::size_t n = manifest.entries.size();
    std::vector<FeatureSequence> frame(n);
    std::vector<FeatureSequence> mhi(n);
    parallel_for(n, ctx.common.jobs, [&](std::size_t i) {
        const auto video = load_video(resolve_entry_path(data, manifest.entries[i]));
        if (want_frame) {
            frame[i] = encode_frames(video, seed, dim);
        }
        if (want_mhi) {
            const auto maps = compute_mhi_sequence(video.frames, params);
            mhi[i] = encode_mhi(maps, seed, dim);
        }
    });

    // statistics from the training split only
    std::vector<std::size_t> fit;
    for (std::size_t i = 0; i < n; ++i) {
        if (manifest.entries[i].split == Split::Train) {
            fit.push_back(i);
        }
    }
    if (fit.empty()) {
        ctx.log("warning: manifest has no train split; standardizing with statistics of all videos");
        for (std::size_t i = 0; i < n; ++i) {
            fit.push_back(i);
        }
    }
    auto finish = [&](std::vector<FeatureSequence>& seqs, Modality m) {
        std::vector<FeatureSequence> subset;
        for (auto i : fit) {
            subset.push_back(seqs[i]);
        }
        const auto stats = fit_standardizer(subset);
        save_stats(dir / (std::string(to_string(m)) + ".stats"), stats);
        for (std::size_t i = 0; i < n; ++i) {
            standardize(seqs[i], stats);
            save_features(feature_path(dir, manifest.entries[i].id, m), seqs[i]);
        }
    };
    if (want_frame) {
        finish(frame, Modality::Frame);
    }
    if (want_mhi) {
        finish(mhi, Modality::Mhi);
    }
    ctx.out << "wrote " << mod << " features (D=" << dim << ") for " << n << " videos\n";
    return kExitOk;
}

// Feature dimensions are read from the files so the model always matches them.
void resolve_feature_dims(json& doc, const std::string& data, const std::string& features) {
    const auto model = model_config_from_json(doc["model"]);
    const auto manifest = load_manifest(data);
    require(!manifest.entries.empty(), ErrorKind::InsufficientInput, "manifest has no entries");
    const auto& id = manifest.entries.front().id;
    doc["model"]["input_dim"] = load_features(feature_path(features, id, model.input_modality)).dim;
    if (model.use_mhi) {
        doc["model"]["mhi_dim"] = load_features(feature_path(features, id, Modality::Mhi)).dim;
    }
}

TrainConfig train_config_for(const json& doc, int run) {
    auto tc = train_config_from_json(doc["train"]);
    tc.seed = doc["seed"].get<std::uint64_t>() + static_cast<std::uint64_t>(run);
    tc.validate();
    return tc;
}

TrainHooks hooks_for(Ctx& ctx, const std::string& tag, const fs::path* last_path, std::ostream* steps = nullptr) {
    TrainHooks hooks;
    if (steps != nullptr) {
        hooks.on_step = [steps](std::int64_t step, const LossBreakdown& l) {
            *steps << step << ',' << l.trans << ',' << l.frame << ',' << l.stage << ',' << l.cross_att << ','
                   << l.smooth << ',' << l.total << '\n';
        };
    }
    hooks.on_epoch = [&ctx, tag, last_path](const Checkpoint& last, const EpochRecord& r) {
        if (last_path != nullptr) {
            save_checkpoint(*last_path, last);
        }
        std::ostringstream os;
        os << tag << "epoch " << r.epoch << " train " << std::setprecision(5) << r.train.total << " val "
           << r.val.total << " val_acc " << r.val_trans_accuracy << " val_frame_acc " << r.val_frame_accuracy;
        ctx.log(os.str());
    };
    return hooks;
}

int cmd_train(Ctx& ctx, json doc, const std::string& data, const std::string& features, const std::string& resume) {
    resolve_feature_dims(doc, data, features);
    json resolved = pick(doc, {"seed", "runs", "model", "train"});
    resolved["inputs"] = {{"data", data}, {"features", features}};
    const auto model = model_config_from_json(doc["model"]);
    model.validate();
    const int runs = doc["runs"].get<int>();
    require(runs >= 1, ErrorKind::Config, "runs must be >= 1");
    require(resume.empty() || runs == 1, ErrorKind::Config, "--resume works with a single run only");
    train_config_for(doc, 0);

    const auto dataset = load_dataset(data, features, model);
    const fs::path dir = output_path(ctx.common.out);
    prepare_output(dir, resolved, ctx.common.force);

    parallel_for(runs, ctx.common.jobs, [&](std::size_t k) {
        const auto tc = train_config_for(doc, static_cast<int>(k));
        const fs::path run_dir = runs == 1 ? dir : dir / ("run" + std::to_string(k));
        fs::create_directories(run_dir);
        const fs::path last_path = run_dir / "last.ckpt";
        std::optional<Checkpoint> from;
        if (!resume.empty()) {
            const Checkpoint probe{model, tc, {}, {}, -1, 0.0};
            from = load_checkpoint(resume, probe.config_fingerprint());
        }
        const std::string tag = runs == 1 ? "" : "[run " + std::to_string(k) + "] ";
        // resumed runs append to the existing per-step log
        const fs::path steps_path = run_dir / "steps.csv";
        const bool append = from.has_value() && fs::exists(steps_path);
        std::ofstream steps(steps_path, append ? std::ios::app : std::ios::trunc);
        require(steps.good(), ErrorKind::Io, "cannot write " + steps_path.string());
        steps << std::setprecision(17);
        if (!append) {
            steps << "step,trans,frame,stage,cross,smooth,total\n";
        }
        const auto result =
            train(model, tc, dataset, hooks_for(ctx, tag, &last_path, &steps), from ? &*from : nullptr);
        save_checkpoint(run_dir / "best.ckpt", result.best);
        save_checkpoint(last_path, result.last);
        write_history_csv(run_dir / "history.csv", result.history);
    });
    ctx.out << "trained " << runs << " run(s) into " << dir.string() << "\n";
    return kExitOk;
}

std::vector<fs::path> find_checkpoints(const fs::path& p) {
    if (fs::is_regular_file(p)) {
        return {p};
    }
    if (fs::is_directory(p)) {
        if (fs::is_regular_file(p / "best.ckpt")) {
            return {p / "best.ckpt"};
        }
        std::vector<fs::path> out;
        for (int k = 0; fs::is_regular_file(p / ("run" + std::to_string(k)) / "best.ckpt"); ++k) {
            out.push_back(p / ("run" + std::to_string(k)) / "best.ckpt");
        }
        if (!out.empty()) {
            return out;
        }
    }
    fail(ErrorKind::Io, "no checkpoint found at " + p.string());
}

const std::vector<Sample>& split_of(const Dataset& d, const std::string& name) {
    switch (parse_split(name)) {
    case Split::Train: return d.train;
    case Split::Val: return d.val;
    case Split::Test: return d.test;
    default: fail(ErrorKind::Config, "eval.split must be train, val or test");
    }
}

std::vector<Sample> truncate_all(const std::vector<Sample>& samples, int length) {
    std::vector<Sample> out;
    for (const auto& s : samples) {
        out.push_back(length > 0 ? s.truncated(std::min(length, s.input.length)) : s);
    }
    return out;
}

json aggregate_json(const RunAggregate& a) { return {{"mean", a.mean}, {"std", a.std}, {"values", a.values}}; }

int cmd_eval(Ctx& ctx, const json& doc, const std::string& data, const std::string& features,
             const std::string& model_path) {
    json resolved = pick(doc, {"eval"});
    resolved["inputs"] = {{"data", data}, {"features", features}, {"model", model_path}};
    const auto ckpts = find_checkpoints(model_path);
    const std::string split = doc["eval"]["split"].get<std::string>();
    const int truncate = doc["eval"]["truncate"].get<int>();
    require(truncate == 0 || truncate >= kMinContext, ErrorKind::Config,
            "eval.truncate must be 0 (off) or >= " + std::to_string(kMinContext));
    const fs::path dir = output_path(ctx.common.out);

    std::vector<Checkpoint> loaded;
    for (const auto& c : ckpts) {
        loaded.push_back(load_checkpoint(c));
    }
    prepare_output(dir, resolved, ctx.common.force);

    json runs = json::array();
    std::vector<double> acc, frame_acc, f1_t, f1_nt;
    std::ostringstream runs_csv;
    std::ostringstream preds_csv;
    runs_csv << std::setprecision(17) << "run,seed,accuracy,frame_accuracy,f1_T,f1_NT\n";
    preds_csv << "run,id,truth,prediction\n";
    for (std::size_t k = 0; k < loaded.size(); ++k) {
        const auto& ck = loaded[k];
        const auto dataset = load_dataset(data, features, ck.model);
        const auto samples = truncate_all(split_of(dataset, split), truncate);
        require(!samples.empty(), ErrorKind::InsufficientInput, "split " + split + " is empty");
        const auto preds = predict(ck.model, ck.params, samples);
        const auto m = evaluate_predictions(preds);
        json r = to_json(m);
        r["run"] = k;
        r["seed"] = ck.train.seed;
        r["epoch"] = ck.epoch;
        r["config_fingerprint"] = fingerprint_hex(ck.config_fingerprint());
        runs.push_back(r);
        acc.push_back(m.accuracy);
        frame_acc.push_back(m.frame_accuracy);
        f1_t.push_back(m.transferable.f1);
        f1_nt.push_back(m.non_transferable.f1);
        runs_csv << k << ',' << ck.train.seed << ',' << m.accuracy << ',' << m.frame_accuracy << ','
                 << m.transferable.f1 << ',' << m.non_transferable.f1 << '\n';
        for (const auto& p : preds) {
            preds_csv << k << ',' << p.id << ',' << to_string(static_cast<Transfer>(p.truth)) << ','
                      << to_string(static_cast<Transfer>(p.transfer)) << '\n';
        }
    }
    const json metrics = {{"split", split},
                          {"truncate", truncate},
                          {"runs", runs},
                          {"aggregate",
                           {{"accuracy", aggregate_json(aggregate_runs(acc))},
                            {"frame_accuracy", aggregate_json(aggregate_runs(frame_acc))},
                            {"f1_T", aggregate_json(aggregate_runs(f1_t))},
                            {"f1_NT", aggregate_json(aggregate_runs(f1_nt))}}}};
    binio::write_text(dir / "metrics.json", metrics.dump(2) + "\n");
    binio::write_text(dir / "runs.csv", runs_csv.str());
    binio::write_text(dir / "predictions.csv", preds_csv.str());
    const auto a = aggregate_runs(acc);
    ctx.out << std::fixed << std::setprecision(4) << "accuracy " << a.mean << " +- " << a.std << " over "
            << acc.size() << " run(s)\n";
    return kExitOk;
}

int cmd_truncate_sweep(Ctx& ctx, json doc, const std::string& data, const std::string& features,
                       const std::string& reuse) {
    const bool faithful = reuse.empty();
    std::vector<Checkpoint> reused;
    if (!faithful) {
        for (const auto& c : find_checkpoints(reuse)) {
            reused.push_back(load_checkpoint(c));
        }
        doc["model"] = to_json(reused.front().model);
    } else {
        resolve_feature_dims(doc, data, features);
    }
    json resolved = pick(doc, {"seed", "runs", "model", "train", "eval"});
    resolved["eval"].erase("truncate");
    resolved["eval"].erase("split");
    resolved["reuse_model"] = !faithful;
    resolved["inputs"] = {{"data", data}, {"features", features}};
    if (!faithful) {
        resolved["inputs"]["reuse_model"] = reuse;
    }
    const auto model = model_config_from_json(doc["model"]);
    model.validate();
    const int seeds = faithful ? doc["runs"].get<int>() : static_cast<int>(reused.size());
    require(seeds >= 1, ErrorKind::Config, "runs must be >= 1");
    train_config_for(doc, 0);

    const auto dataset = load_dataset(data, features, model);
    require(!dataset.test.empty(), ErrorKind::InsufficientInput, "test split is empty");
    int full = dataset.test.front().input.length;
    for (const auto* split : {&dataset.train, &dataset.val, &dataset.test}) {
        for (const auto& s : *split) {
            full = std::min(full, s.input.length);
        }
    }
    std::vector<int> lengths = doc["eval"]["lengths"].get<std::vector<int>>();
    if (lengths.empty()) {
        lengths = {full / 4, full / 2, full};
    }
    const fs::path dir = output_path(ctx.common.out);
    prepare_output(dir, resolved, ctx.common.force);
    if (!faithful) {
        ctx.log("note: --reuse-model evaluates full-length models on truncated inputs without retraining; "
                "this is a fast approximation, not the retraining protocol");
    }

    auto run = [&](int length, int k) {
        const auto test = truncate_all(dataset.test, length);
        if (!faithful) {
            const auto& ck = reused[k];
            return evaluate_predictions(predict(ck.model, ck.params, test)).accuracy;
        }
        Dataset cut{truncate_all(dataset.train, length), truncate_all(dataset.val, length), {}};
        const auto tc = train_config_for(doc, k);
        const std::string tag = "[len " + std::to_string(length) + " run " + std::to_string(k) + "] ";
        const auto result = train(model, tc, cut, hooks_for(ctx, tag, nullptr));
        return evaluate_predictions(predict(model, result.best.params, test)).accuracy;
    };
    const auto points = truncation_sweep(run, lengths, full, seeds, ctx.common.jobs);
    write_sweep_csv(dir / "sweep.csv", points);
    json detail = json::array();
    for (const auto& p : points) {
        detail.push_back({{"length", p.length}, {"accuracy", aggregate_json(p.accuracy)}});
    }
    binio::write_text(dir / "sweep.json",
                      json{{"faithful", faithful}, {"full_length", full}, {"points", detail}}.dump(2) + "\n");
    binio::write_text(dir / "sweep.svg", sweep_svg(points));
    for (const auto& p : points) {
        ctx.out << std::fixed << std::setprecision(4) << "length " << p.length << ": " << p.accuracy.mean << " +- "
                << p.accuracy.std << "\n";
    }
    return kExitOk;
}

int cmd_stats_compare(Ctx& ctx, const json& doc, const std::string& a_path, const std::string& b_path) {
    const auto a = read_runs_csv(a_path);
    const auto b = read_runs_csv(b_path);
    require(a.size() == b.size(), ErrorKind::Input,
            "paired comparison needs equal run counts, got " + std::to_string(a.size()) + " and " +
                std::to_string(b.size()));
    std::vector<double> diff;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff.push_back(a[i] - b[i]);
    }
    const bool two_sided = doc["stats"]["two_sided"].get<bool>();
    const auto w = wilcoxon_signed_rank_exact(diff, two_sided);
    const auto ra = aggregate_runs(a);
    const auto rb = aggregate_runs(b);
    json d;
    try {
        d = cohens_d(a, b);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::UndefinedTest && e.kind() != ErrorKind::Input) {
            throw;
        }
        d = nullptr;
    }
    const json result = {{"n", w.n},
                         {"two_sided", two_sided},
                         {"mean_a", ra.mean},
                         {"std_a", ra.std},
                         {"mean_b", rb.mean},
                         {"std_b", rb.std},
                         {"w_plus", w.w_plus},
                         {"w_minus", w.w_minus},
                         {"p_value", w.p_value},
                         {"p_exact", std::to_string(w.extreme_count) + "/" + std::to_string(w.pattern_count)},
                         {"cohens_d", d}};
    ctx.out << result.dump(2) << "\n";
    if (!ctx.common.out.empty()) {
        json resolved = pick(doc, {"stats"});
        resolved["inputs"] = {{"runs_a", a_path}, {"runs_b", b_path}};
        const fs::path dir = output_path(ctx.common.out);
        prepare_output(dir, resolved, ctx.common.force);
        binio::write_text(dir / "stats.json", result.dump(2) + "\n");
    }
    return kExitOk;
}

int cmd_plot(Ctx& ctx, const json& doc, const std::string& sweep) {
    json resolved = pick(doc, {"plot"});
    resolved["inputs"] = {{"sweep", sweep}};
    const auto points = read_sweep_csv(sweep);
    const fs::path dir = output_path(ctx.common.out);
    prepare_output(dir, resolved, ctx.common.force);
    binio::write_text(dir / "sweep.svg", sweep_svg(points, doc["plot"]["title"].get<std::string>()));
    ctx.out << "wrote " << (dir / "sweep.svg").string() << "\n";
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"embryo time-lapse transferability pipeline", "transfact"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "help for every subcommand");

    Common common;
    std::string data, features, model_path, resume, reuse, runs_a, runs_b, sweep;
    bool pgm = false;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic time-lapse dataset and its manifest");
    Bindings gen_b(gen);
    add_common(gen, gen_b, common);
    gen_b.bind<int>("--count", "/data/count", "number of videos");
    gen_b.bind<int>("--frames", "/data/frames", "frames per video");
    gen_b.bind<int>("--size", "/data/size", "frame side in pixels");
    gen_b.bind<double>("--p-anomaly", "/data/p_anomaly", "probability of an injected anomaly");
    gen_b.bind_flag("--late-anomaly", "/data/late_anomaly", "anomalies only in the last third");
    gen_b.bind<double>("--noise-std", "/data/noise_std", "pixel noise std");
    gen_b.bind<std::vector<double>>("--split", "/data/split", "train,val,test weights (e.g. 200,30,60)")
        ->delimiter(',')
        ->expected(3);

    auto* mhi = app.add_subcommand("compute-mhi", "compute raw motion history images for every video");
    Bindings mhi_b(mhi);
    add_common(mhi, mhi_b, common);
    mhi->add_option("--data", data, "manifest path")->required();
    mhi_b.bind<int>("--tau", "/features/tau", "MHI duration");
    mhi_b.bind<int>("--theta", "/features/theta", "motion threshold");
    mhi->add_flag("--pgm", pgm, "also export every map as PGM");

    auto* ext = app.add_subcommand("extract-features", "encode frames and/or MHI into standardized features");
    Bindings ext_b(ext);
    add_common(ext, ext_b, common);
    ext->add_option("--data", data, "manifest path")->required();
    ext_b.bind<int>("--dim", "/features/dim", "feature dimension");
    ext_b.bind<std::string>("--modality", "/features/modality", "frame, mhi or both")
        ->check(CLI::IsMember({"frame", "frames", "mhi", "both"}));
    ext_b.bind<int>("--tau", "/features/tau", "MHI duration");
    ext_b.bind<int>("--theta", "/features/theta", "motion threshold");

    auto add_modality = [](CLI::App* app, Bindings& b) {
        auto store = std::make_shared<std::string>();
        auto* opt = app->add_option("--modality", *store, "frames, mhi or frames+mhi")
                        ->check(CLI::IsMember({"frames", "mhi", "frames+mhi"}));
        b.custom([opt, store](auto& ov) {
            if (opt->count() == 0) {
                return;
            }
            ov.emplace_back("/model/input_modality", *store == "mhi" ? "mhi" : "frame");
            ov.emplace_back("/model/use_mhi", *store == "frames+mhi");
        });
    };

    auto* trn = app.add_subcommand("train", "train the model");
    Bindings trn_b(trn);
    add_common(trn, trn_b, common);
    trn->add_option("--data", data, "manifest path")->required();
    trn->add_option("--features", features, "feature directory")->required();
    trn->add_option("--resume", resume, "continue from a checkpoint")->check(CLI::ExistingFile);
    add_model_train_flags(trn_b);
    add_modality(trn, trn_b);

    auto* evl = app.add_subcommand("eval", "evaluate checkpoints and write metrics.json");
    Bindings evl_b(evl);
    add_common(evl, evl_b, common);
    evl->add_option("--data", data, "manifest path")->required();
    evl->add_option("--features", features, "feature directory")->required();
    evl->add_option("--model", model_path, "checkpoint, run directory, or multi-run directory")->required();
    evl_b.bind<std::string>("--split", "/eval/split", "train, val or test");
    evl_b.bind<int>("--truncate", "/eval/truncate", "evaluate on the first N frames (0 = all)");

    auto* swp = app.add_subcommand("truncate-sweep", "retrain and evaluate on video prefixes");
    Bindings swp_b(swp);
    add_common(swp, swp_b, common);
    swp->add_option("--data", data, "manifest path")->required();
    swp->add_option("--features", features, "feature directory")->required();
    swp->add_option("--reuse-model", reuse,
                    "skip retraining and evaluate these checkpoints on prefixes (fast, not the retraining protocol)");
    swp_b.bind<std::vector<int>>("--lengths", "/eval/lengths", "prefix lengths (default T/4,T/2,T)")
        ->delimiter(',');
    add_model_train_flags(swp_b);
    add_modality(swp, swp_b);

    auto* cmp = app.add_subcommand("stats-compare", "exact Wilcoxon signed-rank test and Cohen's d");
    Bindings cmp_b(cmp);
    add_common(cmp, cmp_b, common, false);
    cmp->add_option("--runs-a", runs_a, "per-run values of method A")->required()->check(CLI::ExistingFile);
    cmp->add_option("--runs-b", runs_b, "per-run values of method B")->required()->check(CLI::ExistingFile);
    cmp_b.custom([cmp](auto& ov) {
        if (cmp->get_option("--one-sided")->count() > 0) {
            ov.emplace_back("/stats/two_sided", false);
        }
    });
    cmp->add_flag("--one-sided", "test A > B instead of A != B");

    auto* plt = app.add_subcommand("plot", "render a sweep CSV as an SVG line plot");
    Bindings plt_b(plt);
    add_common(plt, plt_b, common);
    plt->add_option("--sweep", sweep, "sweep.csv")->required()->check(CLI::ExistingFile);
    plt_b.bind<std::string>("--title", "/plot/title", "plot title");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    const std::vector<std::pair<CLI::App*, Bindings*>> table = {
        {gen, &gen_b}, {mhi, &mhi_b}, {ext, &ext_b}, {trn, &trn_b},
        {evl, &evl_b}, {swp, &swp_b}, {cmp, &cmp_b}, {plt, &plt_b}};
    CLI::App* chosen = app.get_subcommands().front();
    const Bindings* bindings = nullptr;
    for (const auto& [sub, b] : table) {
        if (sub == chosen) {
            bindings = b;
        }
    }

    Ctx ctx{out, err, common, {}};
    try {
        if (chosen->get_option("--jobs")->count() == 0) {
            ctx.common.jobs = env_jobs(1);
        }
        const json file = load_config_file(common.config);
        json doc = resolve_document(&file, bindings->overrides());
        const std::string name = chosen->get_name();
        if (name == "gen-data") {
            return cmd_gen_data(ctx, doc);
        }
        if (name == "compute-mhi") {
            return cmd_compute_mhi(ctx, doc, data, pgm);
        }
        if (name == "extract-features") {
            return cmd_extract_features(ctx, doc, data);
        }
        if (name == "train") {
            return cmd_train(ctx, doc, data, features, resume);
        }
        if (name == "eval") {
            return cmd_eval(ctx, doc, data, features, model_path);
        }
        if (name == "truncate-sweep") {
            return cmd_truncate_sweep(ctx, doc, data, features, reuse);
        }
        if (name == "stats-compare") {
            return cmd_stats_compare(ctx, doc, runs_a, runs_b);
        }
        return cmd_plot(ctx, doc, sweep);
    } catch (const RefuseOverwrite& e) {
        err << "error: " << e.what() << "\n";
        return kExitRefuse;
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const json::exception& e) {
        err << "error (config): " << e.what() << "\n";
        return kExitUsage;
    } catch (const fs::filesystem_error& e) {
        err << "error (io): " << e.what() << "\n";
        return kExitData;
    }
}

} // namespace transfact::cli
