#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace transfact {

/// 8-bit grayscale image, row-major.
struct GrayFrame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> values;

    GrayFrame() = default;
    GrayFrame(int w, int h, std::uint8_t fill = 0);

    std::uint8_t& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return values.size(); }

    friend bool operator==(const GrayFrame&, const GrayFrame&) = default;
};

using MotionMask = std::vector<std::uint8_t>;

/// Motion history map: each pixel counts down from tau since the last
/// detected change.
struct MhiMap {
    int width = 0;
    int height = 0;
    int tau = 15;
    int theta = 20;
    std::vector<std::uint16_t> values;

    friend bool operator==(const MhiMap&, const MhiMap&) = default;
};

struct MhiParams {
    int tau = 15;
    int theta = 20;
};

/// 1 where |curr - prev| > theta, strictly.
MotionMask motion_mask(const GrayFrame& prev, const GrayFrame& curr, int theta);

MhiMap update_mhi(const MhiMap& prev, std::span<const std::uint8_t> mask);

MhiMap zero_mhi(int width, int height, MhiParams params);

/// Returns one map per frame. The first map is all zeros since no motion
/// can be observed before the second frame.
std::vector<MhiMap> compute_mhi_sequence(std::span<const GrayFrame> frames, MhiParams params);

/// Incremental form of compute_mhi_sequence for frames arriving one at a time.
class MhiStream {
public:
    explicit MhiStream(MhiParams params) : params_(params) {}

    const MhiMap& push(const GrayFrame& frame);
    bool started() const { return has_prev_; }

private:
    MhiParams params_;
    bool has_prev_ = false;
    GrayFrame prev_;
    MhiMap current_;
};

/// Binary PGM (P5), values scaled by 255/tau.
void write_mhi_pgm(const std::filesystem::path& path, const MhiMap& map);

} // namespace transfact
