#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "transfact/mhi.hpp"
#include "transfact/videodata.hpp"

namespace transfact {

enum class Modality : std::uint8_t { Frame = 0, Mhi = 1 };

const char* to_string(Modality m);
Modality parse_modality(const std::string& s);

/// T x D feature matrix, row-major 32-bit floats.
struct FeatureSequence {
    Modality modality = Modality::Frame;
    int length = 0;
    int dim = 0;
    std::vector<float> values;

    float at(int t, int d) const { return values[static_cast<std::size_t>(t) * dim + d]; }
    float& at(int t, int d) { return values[static_cast<std::size_t>(t) * dim + d]; }
    std::span<const float> row(int t) const {
        return {values.data() + static_cast<std::size_t>(t) * dim, static_cast<std::size_t>(dim)};
    }
    /// First `n` rows.
    FeatureSequence prefix(int n) const;

    friend bool operator==(const FeatureSequence&, const FeatureSequence&) = default;
};

inline constexpr int kPoolSide = 16;

/// Frozen random projection of a 16x16 average-pooled image. Entries of the
/// projection are N(0, 1/256), drawn from a stream fixed by (seed, modality).
class ProjectionEncoder {
public:
    ProjectionEncoder(std::uint64_t seed, Modality modality, int dim);

    int dim() const { return dim_; }
    Modality modality() const { return modality_; }

    /// Encodes one pooled image (256 values, row-major).
    void encode(std::span<const double> pooled, std::span<float> out) const;

private:
    Modality modality_;
    int dim_;
    std::vector<double> weights_;  // dim x 256
};

/// Area average over a 16x16 grid; cell (i,j) covers rows
/// [i*H/16, (i+1)*H/16) and columns [j*W/16, (j+1)*W/16).
std::vector<double> average_pool(std::span<const double> image, int width, int height);

/// Unstandardized features for every frame.
FeatureSequence encode_frames(const VideoRecord& video, std::uint64_t encoder_seed, int dim);
FeatureSequence encode_mhi(std::span<const MhiMap> maps, std::uint64_t encoder_seed, int dim);

/// Per-feature mean/std fitted with a fixed accumulation order.
struct FeatureStats {
    Modality modality = Modality::Frame;
    std::vector<double> mean;
    std::vector<double> stddev;

    friend bool operator==(const FeatureStats&, const FeatureStats&) = default;
};

FeatureStats fit_standardizer(std::span<const FeatureSequence> sequences);
void standardize(FeatureSequence& seq, const FeatureStats& stats);

std::vector<std::uint8_t> encode_features(const FeatureSequence& seq);
FeatureSequence decode_features(std::vector<std::uint8_t> bytes, const std::string& source = "<memory>");
void save_features(const std::filesystem::path& path, const FeatureSequence& seq);
/// `expected_dim` < 0 disables the dimension check.
FeatureSequence load_features(const std::filesystem::path& path, int expected_dim = -1);

void save_stats(const std::filesystem::path& path, const FeatureStats& stats);
FeatureStats load_stats(const std::filesystem::path& path);

/// Conventional location of a video's features inside a feature directory.
std::filesystem::path feature_path(const std::filesystem::path& dir, const std::string& id, Modality m);

/// MHI maps stored as a feature file (modality=mhi, D = width*height).
FeatureSequence mhi_as_features(std::span<const MhiMap> maps);

} // namespace transfact
