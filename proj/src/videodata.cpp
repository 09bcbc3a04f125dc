#include "transfact/videodata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "transfact/binio.hpp"
#include "transfact/error.hpp"
#include "transfact/rng.hpp"

namespace transfact {

const char* to_string(Transfer t) { return t == Transfer::T ? "T" : "NT"; }

Transfer parse_transfer(const std::string& s) {
    if (s == "T") {
        return Transfer::T;
    }
    if (s == "NT") {
        return Transfer::NT;
    }
    fail(ErrorKind::Parse, "unknown transfer label \"" + s + "\"");
}

std::vector<Segment> segments_from_framewise(const std::vector<StageLabel>& labels) {
    if (labels.empty()) {
        fail(ErrorKind::InsufficientInput, "cannot segment an empty label sequence");
    }
    std::vector<Segment> out;
    int start = 0;
    for (int t = 1; t <= static_cast<int>(labels.size()); ++t) {
        if (t == static_cast<int>(labels.size()) || labels[t] != labels[start]) {
            out.push_back({start, t, labels[start]});
            start = t;
        }
    }
    return out;
}

std::vector<StageLabel> expand_segments(const std::vector<Segment>& segments) {
    std::vector<StageLabel> out;
    for (const auto& seg : segments) {
        out.insert(out.end(), static_cast<std::size_t>(seg.length()), seg.label);
    }
    return out;
}

Transfer transfer_rule(const std::vector<StageLabel>& labels) {
    int last_cells = -1;
    for (StageLabel s : labels) {
        if (s == kArrest) {
            return Transfer::NT;
        }
        if (!is_cell_count(s)) {
            continue;
        }
        if (last_cells >= 0 && static_cast<int>(s) - last_cells >= 2) {
            return Transfer::NT;
        }
        last_cells = s;
    }
    return last_cells >= stage_for_cells(8) ? Transfer::T : Transfer::NT;
}

// ---------------------------------------------------------------------------
// Generator

void GeneratorConfig::validate() const {
    require(frames >= 15, ErrorKind::Config, "generator needs frames >= 15");
    require(size >= 32, ErrorKind::Config, "generator needs size >= 32");
    require(p_anomaly >= 0.0 && p_anomaly <= 1.0, ErrorKind::Config, "p_anomaly must lie in [0,1]");
    require(stable_min >= 1 && stable_min <= stable_max, ErrorKind::Config, "invalid stable duration range");
    require(cleavage_min >= 1 && cleavage_min <= cleavage_max, ErrorKind::Config,
            "invalid cleavage duration range");
    require(w_arrest >= 0 && w_direct >= 0 && w_underdev >= 0 && w_arrest + w_direct + w_underdev > 0,
            ErrorKind::Config, "anomaly weights must be non-negative with a positive sum");
    require(noise_std >= 0.0, ErrorKind::Config, "noise_std must be >= 0");
}

namespace {

constexpr int kMaxCleavages = 24;

struct Phase {
    StageLabel label = 0;
    int start = 0;
    int end = 0;
    int cells_from = 1;
    int cells_to = 1;
};

struct Plan {
    AnomalyKind anomaly = AnomalyKind::None;
    int direct_index = -1;
    int direct_jump = 2;
    int stop_cells = 99;
    int stop_after_frame = -1;
    int arrest_start = -1;
};

// Lays out stable/cleavage phases. Durations are indexed by cleavage number
// so that anomaly edits do not shift the timing of earlier events.
std::vector<Phase> build_timeline(const GeneratorConfig& cfg, const std::vector<int>& stable,
                                  const std::vector<int>& cleave, const Plan& plan) {
    std::vector<Phase> phases;
    int cells = 1;
    int t = 0;
    for (int k = 0; t < cfg.frames; ++k) {
        const bool stop = cells >= 9 || k >= kMaxCleavages || cells >= plan.stop_cells ||
                          (plan.stop_after_frame >= 0 && t >= plan.stop_after_frame);
        const int stable_end = stop ? cfg.frames : std::min(cfg.frames, t + stable[k]);
        phases.push_back({stage_for_cells(cells), t, stable_end, cells, cells});
        t = stable_end;
        if (t >= cfg.frames) {
            break;
        }
        const int next = cells + (k == plan.direct_index ? plan.direct_jump : 1);
        const int cleave_end = std::min(cfg.frames, t + cleave[k]);
        phases.push_back({kCleavage, t, cleave_end, cells, next});
        t = cleave_end;
        cells = next;
    }
    if (plan.arrest_start >= 0) {
        std::vector<Phase> cut;
        for (auto p : phases) {
            if (p.start >= plan.arrest_start) {
                break;
            }
            if (p.end > plan.arrest_start) {
                p.end = plan.arrest_start;
            }
            cut.push_back(p);
        }
        const int frozen = cut.empty() ? 1 : cut.back().cells_from;
        cut.push_back({kArrest, plan.arrest_start, cfg.frames, frozen, frozen});
        phases = std::move(cut);
    }
    return phases;
}

struct Cell {
    double x = 0;
    double y = 0;
    double r = 0;
};

std::vector<Cell> layout(int count, double inner_radius) {
    std::vector<Cell> cells;
    const double r = count == 1 ? 0.85 * inner_radius : 0.9 * inner_radius / std::sqrt(static_cast<double>(count));
    const double spread = std::max(0.0, inner_radius - r);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int j = 0; j < count; ++j) {
        if (count == 1) {
            cells.push_back({0.0, 0.0, r});
            continue;
        }
        const double rho = spread * std::sqrt((j + 0.5) / count);
        cells.push_back({rho * std::cos(j * golden), rho * std::sin(j * golden), r});
    }
    return cells;
}

// Interpolates from the parent layout to the child layout; each child
// starts at its nearest parent.
std::vector<Cell> split_layout(int from, int to, double alpha, double inner_radius) {
    const auto parents = layout(from, inner_radius);
    auto children = layout(to, inner_radius);
    for (auto& c : children) {
        const Cell* best = &parents.front();
        double best_d = 1e300;
        for (const auto& p : parents) {
            const double d = std::hypot(p.x - c.x, p.y - c.y);
            if (d < best_d) {
                best_d = d;
                best = &p;
            }
        }
        c.x = best->x + alpha * (c.x - best->x);
        c.y = best->y + alpha * (c.y - best->y);
        c.r = best->r + alpha * (c.r - best->r);
    }
    return children;
}

struct Look {
    double cx = 0;
    double cy = 0;
    double rotation = 0;
    double amp = 60;
    double base = 110;
    double background = 70;
};

GrayFrame render(const GeneratorConfig& cfg, const Look& look, std::vector<Cell> cells, double fade, Rng& rng) {
    const int n = cfg.size;
    const double zona = 0.42 * n;
    const double zona_width = std::max(1.5, 0.03 * n);
    const double cr = std::cos(look.rotation);
    const double sr = std::sin(look.rotation);
    for (auto& c : cells) {
        const double x = c.x * cr - c.y * sr;
        const double y = c.x * sr + c.y * cr;
        c.x = look.cx + x + 0.4 * rng.normal();
        c.y = look.cy + y + 0.4 * rng.normal();
    }
    GrayFrame frame(n, n);
    for (int py = 0; py < n; ++py) {
        for (int px = 0; px < n; ++px) {
            const double x = px + 0.5;
            const double y = py + 0.5;
            double v = look.background;
            const double dz = std::abs(std::hypot(x - look.cx, y - look.cy) - zona);
            if (dz < zona_width) {
                v = std::max(v, 140.0 - 30.0 * dz / zona_width);
            }
            for (const auto& c : cells) {
                const double q = std::hypot(x - c.x, y - c.y) / c.r;
                if (q < 1.0) {
                    v = std::max(v, look.base * fade + look.amp * fade * std::sqrt(1.0 - q * q));
                }
            }
            v += cfg.noise_std * rng.normal();
            frame.at(px, py) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
    }
    return frame;
}

AnomalyKind pick_anomaly(const GeneratorConfig& cfg, Rng& rng) {
    if (!rng.bernoulli(cfg.p_anomaly)) {
        return AnomalyKind::None;
    }
    const double total = cfg.w_arrest + cfg.w_direct + cfg.w_underdev;
    const double u = rng.uniform() * total;
    if (u < cfg.w_arrest) {
        return AnomalyKind::Arrest;
    }
    if (u < cfg.w_arrest + cfg.w_direct) {
        return AnomalyKind::DirectCleavage;
    }
    return AnomalyKind::UnderDevelopment;
}

} // namespace

GeneratedVideo generate_synthetic_video_ex(std::uint64_t seed, const GeneratorConfig& cfg) {
    cfg.validate();
    Rng rng(derive_seed(seed, SeedStream::Generator));
    const int T = cfg.frames;
    const int late_start = (2 * T + 2) / 3;

    std::vector<int> stable(kMaxCleavages + 1);
    std::vector<int> cleave(kMaxCleavages + 1);
    for (int k = 0; k <= kMaxCleavages; ++k) {
        stable[k] = static_cast<int>(rng.uniform_int(cfg.stable_min, cfg.stable_max));
        cleave[k] = static_cast<int>(rng.uniform_int(cfg.cleavage_min, cfg.cleavage_max));
    }
    Plan plan;
    plan.anomaly = pick_anomaly(cfg, rng);
    const double u_pos = rng.uniform();
    const int jump = rng.bernoulli(0.3) ? 3 : 2;
    const int stop_cells = static_cast<int>(rng.uniform_int(2, 7));

    const auto normal = build_timeline(cfg, stable, cleave, Plan{});
    auto make_arrest = [&]() {
        plan.anomaly = AnomalyKind::Arrest;
        const int lo = cfg.late_anomaly ? late_start : T / 4;
        const int hi = cfg.late_anomaly ? T - 3 : T - 4;
        plan.arrest_start = lo + static_cast<int>(u_pos * (hi - lo + 1));
    };

    if (plan.anomaly == AnomalyKind::Arrest) {
        make_arrest();
    } else if (plan.anomaly == AnomalyKind::DirectCleavage) {
        // Candidates: cleavages whose successor stage is visible and whose
        // jump stays inside the distinguishable cell counts.
        std::vector<int> candidates;
        int k = 0;
        for (std::size_t i = 0; i < normal.size(); ++i) {
            if (normal[i].label != kCleavage) {
                continue;
            }
            const bool visible = i + 1 < normal.size();
            const bool late_ok = !cfg.late_anomaly || normal[i].start >= late_start;
            if (visible && late_ok && normal[i].cells_from + jump <= 9) {
                candidates.push_back(k);
            }
            ++k;
        }
        if (candidates.empty()) {
            make_arrest();
        } else {
            plan.direct_index = candidates[static_cast<std::size_t>(u_pos * candidates.size())];
            plan.direct_jump = jump;
        }
    } else if (plan.anomaly == AnomalyKind::UnderDevelopment) {
        if (cfg.late_anomaly) {
            // Development stalls at the first stable stage beginning in the last third.
            const Phase* stall = nullptr;
            for (const auto& p : normal) {
                if (p.label != kCleavage && p.start >= late_start) {
                    stall = &p;
                    break;
                }
            }
            if (stall == nullptr || stall->cells_from >= 8) {
                make_arrest();
            } else {
                plan.stop_after_frame = stall->start;
            }
        } else {
            plan.stop_cells = stop_cells;
        }
    }

    const auto phases = build_timeline(cfg, stable, cleave, plan);

    Look look;
    look.cx = 0.5 * cfg.size + rng.uniform(-2.0, 2.0);
    look.cy = 0.5 * cfg.size + rng.uniform(-2.0, 2.0);
    look.rotation = rng.uniform(-0.3, 0.3);
    look.amp = rng.uniform(50.0, 70.0);
    const double inner = 0.36 * cfg.size;

    GeneratedVideo out;
    out.anomaly = plan.anomaly;
    auto& video = out.video;
    video.id = "syn-" + std::to_string(seed);
    video.frames.reserve(static_cast<std::size_t>(T));
    video.stage_labels.reserve(static_cast<std::size_t>(T));
    for (const auto& p : phases) {
        for (int t = p.start; t < p.end; ++t) {
            std::vector<Cell> cells;
            double fade = 1.0;
            if (p.label == kCleavage) {
                const double alpha = (t - p.start + 1.0) / (p.end - p.start + 1.0);
                cells = split_layout(p.cells_from, p.cells_to, alpha, inner);
            } else {
                cells = layout(p.cells_from, inner);
                if (p.label == kArrest) {
                    fade = std::max(0.35, 1.0 - 0.15 * (t - p.start + 1));
                }
            }
            video.frames.push_back(render(cfg, look, std::move(cells), fade, rng));
            video.stage_labels.push_back(p.label);
        }
    }
    video.transfer = transfer_rule(video.stage_labels);
    return out;
}

VideoRecord generate_synthetic_video(std::uint64_t seed, const GeneratorConfig& config) {
    return generate_synthetic_video_ex(seed, config).video;
}

// ---------------------------------------------------------------------------
// Manifest and splits

const char* to_string(Split s) {
    switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    case Split::Unassigned: return "none";
    }
    return "none";
}

Split parse_split(const std::string& s) {
    if (s == "train") {
        return Split::Train;
    }
    if (s == "val") {
        return Split::Val;
    }
    if (s == "test") {
        return Split::Test;
    }
    if (s == "none") {
        return Split::Unassigned;
    }
    fail(ErrorKind::Parse, "unknown split tag \"" + s + "\"");
}

void DatasetManifest::validate() const {
    std::set<std::string> seen;
    for (const auto& e : entries) {
        require(!e.id.empty(), ErrorKind::Validation, "manifest entry with empty id");
        if (!seen.insert(e.id).second) {
            fail(ErrorKind::Validation, "duplicate video id \"" + e.id + "\" in manifest");
        }
        require(e.num_frames > 0, ErrorKind::Validation, "entry \"" + e.id + "\" has no frames");
    }
}

std::vector<const ManifestEntry*> DatasetManifest::subset(Split s) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries) {
        if (e.split == s) {
            out.push_back(&e);
        }
    }
    return out;
}

std::vector<int> largest_remainder(int n, const std::vector<double>& weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<int> counts(weights.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    int assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = n * weights[i] / total;
        counts[i] = static_cast<int>(std::floor(exact));
        assigned += counts[i];
        remainders.emplace_back(exact - counts[i], i);
    }
    // Larger remainder first; earlier index wins ties.
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) {
        ++counts[remainders[i % remainders.size()].second];
    }
    return counts;
}

DatasetManifest split_dataset(const DatasetManifest& manifest, SplitRatios ratios, std::uint64_t seed) {
    manifest.validate();
    const double sum = ratios.train + ratios.val + ratios.test;
    require(std::abs(sum - 1.0) <= 1e-9, ErrorKind::Config, "split ratios must sum to 1");
    require(ratios.train >= 0 && ratios.val >= 0 && ratios.test >= 0, ErrorKind::Config,
            "split ratios must be non-negative");

    const int n = static_cast<int>(manifest.entries.size());
    const std::vector<double> w{ratios.train, ratios.val, ratios.test};
    const auto sizes = largest_remainder(n, w);
    for (int i = 0; i < 3; ++i) {
        if (w[i] > 0 && sizes[i] == 0) {
            fail(ErrorKind::Stratification, "too few videos (" + std::to_string(n) + ") to fill every split");
        }
    }

    std::vector<std::size_t> nt;
    std::vector<std::size_t> t;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        (manifest.entries[i].transfer == Transfer::NT ? nt : t).push_back(i);
    }
    const auto nt_sizes = largest_remainder(static_cast<int>(nt.size()),
                                            {static_cast<double>(sizes[0]), static_cast<double>(sizes[1]),
                                             static_cast<double>(sizes[2])});
    const double global_nt = n > 0 ? static_cast<double>(nt.size()) / n : 0.0;
    for (int i = 0; i < 3; ++i) {
        if (sizes[i] == 0) {
            continue;
        }
        if (nt_sizes[i] > sizes[i]) {
            fail(ErrorKind::Stratification, "cannot place NT videos without overfilling a split");
        }
        const double frac = static_cast<double>(nt_sizes[i]) / sizes[i];
        const double tol = std::max(0.02, 1.0 / sizes[i]);
        if (std::abs(frac - global_nt) > tol + 1e-12) {
            fail(ErrorKind::Stratification, "split NT fraction cannot match the global fraction");
        }
    }

    Rng rng(derive_seed(seed, SeedStream::Split));
    const auto nt_order = rng.permutation(nt.size());
    const auto t_order = rng.permutation(t.size());
    DatasetManifest out = manifest;
    const Split tags[3] = {Split::Train, Split::Val, Split::Test};
    std::size_t nt_pos = 0;
    std::size_t t_pos = 0;
    for (int s = 0; s < 3; ++s) {
        for (int k = 0; k < nt_sizes[s]; ++k) {
            out.entries[nt[nt_order[nt_pos++]]].split = tags[s];
        }
        for (int k = 0; k < sizes[s] - nt_sizes[s]; ++k) {
            out.entries[t[t_order[t_pos++]]].split = tags[s];
        }
    }
    return out;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    manifest.validate();
    std::ostringstream os;
    for (const auto& e : manifest.entries) {
        nlohmann::ordered_json j;
        j["id"] = e.id;
        j["path"] = e.path;
        j["transfer"] = to_string(e.transfer);
        j["num_frames"] = e.num_frames;
        j["split"] = to_string(e.split);
        os << j.dump() << '\n';
    }
    binio::write_text(path, os.str());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    const std::string text = binio::read_text(path);
    DatasetManifest manifest;
    std::size_t line_start = 0;
    while (line_start < text.size()) {
        std::size_t line_end = text.find('\n', line_start);
        if (line_end == std::string::npos) {
            line_end = text.size();
        }
        const std::string line = text.substr(line_start, line_end - line_start);
        if (line.find_first_not_of(" \t\r") != std::string::npos) {
            try {
                const auto j = nlohmann::json::parse(line);
                ManifestEntry e;
                e.id = j.at("id").get<std::string>();
                e.path = j.at("path").get<std::string>();
                e.transfer = parse_transfer(j.at("transfer").get<std::string>());
                e.num_frames = j.at("num_frames").get<int>();
                e.split = j.contains("split") ? parse_split(j.at("split").get<std::string>()) : Split::Unassigned;
                manifest.entries.push_back(std::move(e));
            } catch (const nlohmann::json::parse_error& ex) {
                fail(ErrorKind::Parse, path.string() + ": malformed JSON at byte offset " +
                                           std::to_string(line_start + (ex.byte > 0 ? ex.byte - 1 : 0)));
            } catch (const nlohmann::json::exception& ex) {
                fail(ErrorKind::Parse, path.string() + ": bad manifest entry at byte offset " +
                                           std::to_string(line_start) + " (" + ex.what() + ")");
            } catch (const Error& ex) {
                fail(ErrorKind::Parse, path.string() + ": bad manifest entry at byte offset " +
                                           std::to_string(line_start) + " (" + ex.what() + ")");
            }
        }
        line_start = line_end + 1;
    }
    manifest.validate();
    return manifest;
}

std::filesystem::path resolve_entry_path(const std::filesystem::path& manifest_path, const ManifestEntry& entry) {
    const std::filesystem::path p(entry.path);
    return p.is_absolute() ? p : manifest_path.parent_path() / p;
}

// TFV1 layout: "TFV1", u32 width, u32 height, u32 T (16-byte header), then
// T*width*height raw 8-bit pixels, then T label bytes, one transfer byte
// and a length-prefixed id.
std::vector<std::uint8_t> encode_video(const VideoRecord& video) {
    require(!video.frames.empty(), ErrorKind::InsufficientInput, "video has no frames");
    require(video.frames.size() == video.stage_labels.size(), ErrorKind::Validation,
            "frames and labels differ in length");
    const int w = video.frames.front().width;
    const int h = video.frames.front().height;
    binio::Writer out;
    out.magic("TFV1");
    out.u32(static_cast<std::uint32_t>(w));
    out.u32(static_cast<std::uint32_t>(h));
    out.u32(static_cast<std::uint32_t>(video.frames.size()));
    for (const auto& f : video.frames) {
        require(f.width == w && f.height == h, ErrorKind::Shape, "frames differ in size");
        out.raw(f.values.data(), f.values.size());
    }
    out.raw(video.stage_labels.data(), video.stage_labels.size());
    out.u8(static_cast<std::uint8_t>(video.transfer));
    out.string(video.id);
    return out.bytes();
}

VideoRecord decode_video(std::vector<std::uint8_t> bytes, const std::string& source) {
    if (bytes.size() >= 4 && bytes[0] == 'T' && bytes[1] == 'F' && bytes[2] == 'V' && bytes[3] != '1') {
        fail(ErrorKind::Version, source + ": unsupported video format version '" +
                                     std::string(1, static_cast<char>(bytes[3])) + "'");
    }
    binio::Reader in(std::move(bytes), source);
    in.expect_magic("TFV1");
    const auto w = in.u32();
    const auto h = in.u32();
    const auto t = in.u32();
    if (w == 0 || h == 0 || t == 0) {
        in.error("zero dimension in header");
    }
    const std::uint64_t pixels = static_cast<std::uint64_t>(w) * h;
    if (pixels * t > in.remaining()) {
        in.error("frame block larger than file");
    }
    VideoRecord video;
    video.frames.reserve(t);
    for (std::uint32_t i = 0; i < t; ++i) {
        GrayFrame f(static_cast<int>(w), static_cast<int>(h));
        in.raw(f.values.data(), f.values.size());
        video.frames.push_back(std::move(f));
    }
    video.stage_labels.resize(t);
    in.raw(video.stage_labels.data(), t);
    for (auto s : video.stage_labels) {
        if (s >= kNumStages) {
            in.error("stage label out of range");
        }
    }
    const auto tr = in.u8();
    if (tr > 1) {
        in.error("transfer byte out of range");
    }
    video.transfer = static_cast<Transfer>(tr);
    video.id = in.string();
    in.expect_end();
    return video;
}

void save_video(const std::filesystem::path& path, const VideoRecord& video) {
    binio::write_file(path, encode_video(video));
}

VideoRecord load_video(const std::filesystem::path& path) {
    return decode_video(binio::read_file(path), path.string());
}

} // namespace transfact
