#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "transfact/mhi.hpp"

namespace transfact {

/// Developmental stage class. Ids 0..8 are visible cell counts 1..9+,
/// 9 is a cleavage event, 10 is developmental arrest.
using StageLabel = std::uint8_t;

inline constexpr int kNumStages = 11;
inline constexpr StageLabel kCleavage = 9;
inline constexpr StageLabel kArrest = 10;
inline constexpr StageLabel kMaxCellStage = 8;

inline constexpr StageLabel stage_for_cells(int cells) {
    return static_cast<StageLabel>(cells >= 9 ? 8 : cells - 1);
}
inline constexpr bool is_cell_count(StageLabel s) { return s <= kMaxCellStage; }

enum class Transfer : std::uint8_t { NT = 0, T = 1 };

const char* to_string(Transfer t);
Transfer parse_transfer(const std::string& s);

struct VideoRecord {
    std::string id;
    std::vector<GrayFrame> frames;
    std::vector<StageLabel> stage_labels;
    Transfer transfer = Transfer::T;

    std::size_t length() const { return frames.size(); }
    friend bool operator==(const VideoRecord&, const VideoRecord&) = default;
};

/// Maximal run of identical labels over [start, end).
struct Segment {
    int start = 0;
    int end = 0;
    StageLabel label = 0;

    int length() const { return end - start; }
    friend bool operator==(const Segment&, const Segment&) = default;
};

std::vector<Segment> segments_from_framewise(const std::vector<StageLabel>& labels);
std::vector<StageLabel> expand_segments(const std::vector<Segment>& segments);

/// Transferability implied by a stage sequence: NT iff it contains an
/// arrest, a cell-count jump of two or more across a cleavage, or ends
/// below the 8-cell stage.
Transfer transfer_rule(const std::vector<StageLabel>& labels);

// ---------------------------------------------------------------------------
// Synthetic generator

enum class AnomalyKind : std::uint8_t { None, Arrest, DirectCleavage, UnderDevelopment };

struct GeneratorConfig {
    int frames = 60;
    int size = 64;
    double p_anomaly = 0.5;
    int stable_min = 4;
    int stable_max = 8;
    int cleavage_min = 1;
    int cleavage_max = 2;
    double w_arrest = 0.4;
    double w_direct = 0.3;
    double w_underdev = 0.3;
    /// Restrict anomalies to the last third of the video.
    bool late_anomaly = false;
    double noise_std = 4.0;

    void validate() const;
};

struct GeneratedVideo {
    VideoRecord video;
    AnomalyKind anomaly = AnomalyKind::None;
};

GeneratedVideo generate_synthetic_video_ex(std::uint64_t seed, const GeneratorConfig& config);
VideoRecord generate_synthetic_video(std::uint64_t seed, const GeneratorConfig& config);

// ---------------------------------------------------------------------------
// Manifest and splits

enum class Split : std::uint8_t { Unassigned, Train, Val, Test };

const char* to_string(Split s);
Split parse_split(const std::string& s);

struct ManifestEntry {
    std::string id;
    std::string path;
    Transfer transfer = Transfer::T;
    int num_frames = 0;
    Split split = Split::Unassigned;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;

    void validate() const;
    std::vector<const ManifestEntry*> subset(Split s) const;
    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct SplitRatios {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
};

/// Largest-remainder apportionment of n items over the given weights.
std::vector<int> largest_remainder(int n, const std::vector<double>& weights);

/// Stratified by transfer label. Each split's NT fraction is within
/// max(0.02, 1/split_size) of the global fraction.
DatasetManifest split_dataset(const DatasetManifest& manifest, SplitRatios ratios, std::uint64_t seed);

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Resolves a manifest entry path relative to the manifest's directory.
std::filesystem::path resolve_entry_path(const std::filesystem::path& manifest_path, const ManifestEntry& entry);

std::vector<std::uint8_t> encode_video(const VideoRecord& video);
VideoRecord decode_video(std::vector<std::uint8_t> bytes, const std::string& source = "<memory>");
void save_video(const std::filesystem::path& path, const VideoRecord& video);
VideoRecord load_video(const std::filesystem::path& path);

} // namespace transfact
