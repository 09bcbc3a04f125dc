#include "transfact/mhi.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <string>

#include "transfact/error.hpp"

namespace transfact {

GrayFrame::GrayFrame(int w, int h, std::uint8_t fill)
    : width(w), height(h), values(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

namespace {

void check_same_shape(int w0, int h0, int w1, int h1) {
    if (w0 != w1 || h0 != h1) {
        fail(ErrorKind::Shape, "frame dimensions differ: " + std::to_string(w0) + "x" + std::to_string(h0) +
                                   " vs " + std::to_string(w1) + "x" + std::to_string(h1));
    }
}

void check_params(MhiParams params) {
    require(params.tau >= 1, ErrorKind::Config, "tau must be >= 1");
    require(params.tau <= 65535, ErrorKind::Config, "tau must fit in 16 bits");
    require(params.theta >= 0, ErrorKind::Config, "theta must be >= 0");
}

} // namespace

MotionMask motion_mask(const GrayFrame& prev, const GrayFrame& curr, int theta) {
    check_same_shape(prev.width, prev.height, curr.width, curr.height);
    MotionMask mask(curr.size());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const int diff = std::abs(static_cast<int>(curr.values[i]) - static_cast<int>(prev.values[i]));
        mask[i] = diff > theta ? 1 : 0;
    }
    return mask;
}

MhiMap update_mhi(const MhiMap& prev, std::span<const std::uint8_t> mask) {
    if (mask.size() != prev.values.size()) {
        fail(ErrorKind::Shape, "mask has " + std::to_string(mask.size()) + " pixels, map has " +
                                   std::to_string(prev.values.size()));
    }
    MhiMap next = prev;
    const auto tau = static_cast<std::uint16_t>(prev.tau);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i] != 0) {
            next.values[i] = tau;
        } else {
            next.values[i] = prev.values[i] > 0 ? static_cast<std::uint16_t>(prev.values[i] - 1) : 0;
        }
    }
    return next;
}

MhiMap zero_mhi(int width, int height, MhiParams params) {
    check_params(params);
    MhiMap map;
    map.width = width;
    map.height = height;
    map.tau = params.tau;
    map.theta = params.theta;
    map.values.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
    return map;
}

std::vector<MhiMap> compute_mhi_sequence(std::span<const GrayFrame> frames, MhiParams params) {
    if (frames.size() < 2) {
        fail(ErrorKind::InsufficientInput, "MHI needs at least 2 frames, got " + std::to_string(frames.size()));
    }
    check_params(params);
    std::vector<MhiMap> out;
    out.reserve(frames.size());
    out.push_back(zero_mhi(frames[0].width, frames[0].height, params));
    for (std::size_t t = 1; t < frames.size(); ++t) {
        out.push_back(update_mhi(out.back(), motion_mask(frames[t - 1], frames[t], params.theta)));
    }
    return out;
}

const MhiMap& MhiStream::push(const GrayFrame& frame) {
    if (!has_prev_) {
        current_ = zero_mhi(frame.width, frame.height, params_);
        has_prev_ = true;
    } else {
        current_ = update_mhi(current_, motion_mask(prev_, frame, params_.theta));
    }
    prev_ = frame;
    return current_;
}

void write_mhi_pgm(const std::filesystem::path& path, const MhiMap& map) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    }
    out << "P5\n" << map.width << " " << map.height << "\n255\n";
    std::vector<char> pixels(map.values.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        const int scaled = (static_cast<int>(map.values[i]) * 255 + map.tau / 2) / map.tau;
        pixels[i] = static_cast<char>(std::min(scaled, 255));
    }
    out.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
}

} // namespace transfact
