#include "transfact/features.hpp"

#include <cmath>

#include "transfact/binio.hpp"
#include "transfact/error.hpp"
#include "transfact/rng.hpp"

namespace transfact {

const char* to_string(Modality m) { return m == Modality::Frame ? "frame" : "mhi"; }

Modality parse_modality(const std::string& s) {
    if (s == "frame" || s == "frames") {
        return Modality::Frame;
    }
    if (s == "mhi") {
        return Modality::Mhi;
    }
    fail(ErrorKind::Config, "unknown modality \"" + s + "\"");
}

FeatureSequence FeatureSequence::prefix(int n) const {
    require(n >= 1 && n <= length, ErrorKind::Config, "prefix length out of range");
    FeatureSequence out;
    out.modality = modality;
    out.length = n;
    out.dim = dim;
    out.values.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(n) * dim);
    return out;
}

ProjectionEncoder::ProjectionEncoder(std::uint64_t seed, Modality modality, int dim)
    : modality_(modality), dim_(dim) {
    require(dim >= 8, ErrorKind::Config, "feature dim must be >= 8");
    const auto stream = modality == Modality::Frame ? SeedStream::FrameEncoder : SeedStream::MhiEncoder;
    Rng rng(derive_seed(seed, stream));
    constexpr int in = kPoolSide * kPoolSide;
    weights_.resize(static_cast<std::size_t>(dim) * in);
    for (auto& w : weights_) {
        w = rng.normal(0.0, 1.0 / 16.0);
    }
}

void ProjectionEncoder::encode(std::span<const double> pooled, std::span<float> out) const {
    constexpr int in = kPoolSide * kPoolSide;
    require(static_cast<int>(pooled.size()) == in, ErrorKind::Shape, "pooled image must have 256 values");
    for (int d = 0; d < dim_; ++d) {
        double acc = 0.0;
        const double* w = weights_.data() + static_cast<std::size_t>(d) * in;
        for (int i = 0; i < in; ++i) {
            acc += w[i] * pooled[i];
        }
        out[d] = static_cast<float>(acc);
    }
}

std::vector<double> average_pool(std::span<const double> image, int width, int height) {
    require(width >= kPoolSide && height >= kPoolSide, ErrorKind::Shape, "image smaller than the 16x16 pool grid");
    std::vector<double> out(kPoolSide * kPoolSide);
    for (int i = 0; i < kPoolSide; ++i) {
        const int y0 = i * height / kPoolSide;
        const int y1 = (i + 1) * height / kPoolSide;
        for (int j = 0; j < kPoolSide; ++j) {
            const int x0 = j * width / kPoolSide;
            const int x1 = (j + 1) * width / kPoolSide;
            double acc = 0.0;
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) {
                    acc += image[static_cast<std::size_t>(y) * width + x];
                }
            }
            out[static_cast<std::size_t>(i) * kPoolSide + j] = acc / ((y1 - y0) * (x1 - x0));
        }
    }
    return out;
}

namespace {

template <typename Pixel>
FeatureSequence encode_images(std::span<const std::vector<Pixel>* const> images, int width, int height,
                              double scale, const ProjectionEncoder& encoder) {
    FeatureSequence seq;
    seq.modality = encoder.modality();
    seq.length = static_cast<int>(images.size());
    seq.dim = encoder.dim();
    seq.values.resize(static_cast<std::size_t>(seq.length) * seq.dim);
    std::vector<double> image(static_cast<std::size_t>(width) * height);
    for (int t = 0; t < seq.length; ++t) {
        const auto& px = *images[t];
        for (std::size_t i = 0; i < image.size(); ++i) {
            image[i] = static_cast<double>(px[i]) * scale;
        }
        const auto pooled = average_pool(image, width, height);
        encoder.encode(pooled, {seq.values.data() + static_cast<std::size_t>(t) * seq.dim,
                                static_cast<std::size_t>(seq.dim)});
    }
    return seq;
}

} // namespace

FeatureSequence encode_frames(const VideoRecord& video, std::uint64_t encoder_seed, int dim) {
    require(!video.frames.empty(), ErrorKind::InsufficientInput, "video has no frames");
    ProjectionEncoder encoder(encoder_seed, Modality::Frame, dim);
    std::vector<const std::vector<std::uint8_t>*> images;
    for (const auto& f : video.frames) {
        images.push_back(&f.values);
    }
    return encode_images<std::uint8_t>(images, video.frames[0].width, video.frames[0].height, 1.0 / 255.0,
                                       encoder);
}

FeatureSequence encode_mhi(std::span<const MhiMap> maps, std::uint64_t encoder_seed, int dim) {
    require(!maps.empty(), ErrorKind::InsufficientInput, "no MHI maps");
    ProjectionEncoder encoder(encoder_seed, Modality::Mhi, dim);
    std::vector<const std::vector<std::uint16_t>*> images;
    for (const auto& m : maps) {
        images.push_back(&m.values);
    }
    return encode_images<std::uint16_t>(images, maps[0].width, maps[0].height, 1.0 / maps[0].tau, encoder);
}

FeatureStats fit_standardizer(std::span<const FeatureSequence> sequences) {
    require(!sequences.empty(), ErrorKind::InsufficientInput, "no sequences to fit statistics on");
    const int dim = sequences[0].dim;
    FeatureStats stats;
    stats.modality = sequences[0].modality;
    stats.mean.assign(static_cast<std::size_t>(dim), 0.0);
    stats.stddev.assign(static_cast<std::size_t>(dim), 0.0);
    std::size_t count = 0;
    for (const auto& s : sequences) {
        require(s.dim == dim, ErrorKind::Shape, "feature dims differ across sequences");
        for (int t = 0; t < s.length; ++t) {
            for (int d = 0; d < dim; ++d) {
                stats.mean[d] += s.at(t, d);
            }
        }
        count += static_cast<std::size_t>(s.length);
    }
    for (auto& m : stats.mean) {
        m /= static_cast<double>(count);
    }
    for (const auto& s : sequences) {
        for (int t = 0; t < s.length; ++t) {
            for (int d = 0; d < dim; ++d) {
                const double c = s.at(t, d) - stats.mean[d];
                stats.stddev[d] += c * c;
            }
        }
    }
    for (auto& v : stats.stddev) {
        v = std::sqrt(v / static_cast<double>(count));
        // Constant features are centered but left unscaled.
        if (v < 1e-12) {
            v = 1.0;
        }
    }
    return stats;
}

void standardize(FeatureSequence& seq, const FeatureStats& stats) {
    require(static_cast<int>(stats.mean.size()) == seq.dim, ErrorKind::Shape, "statistics dim mismatch");
    for (int t = 0; t < seq.length; ++t) {
        for (int d = 0; d < seq.dim; ++d) {
            seq.at(t, d) = static_cast<float>((seq.at(t, d) - stats.mean[d]) / stats.stddev[d]);
        }
    }
}

// TFF1 layout: "TFF1", u8 modality, 3 reserved bytes, u32 T, u32 D, then
// T*D little-endian float32 values.
std::vector<std::uint8_t> encode_features(const FeatureSequence& seq) {
    require(seq.values.size() == static_cast<std::size_t>(seq.length) * seq.dim, ErrorKind::Shape,
            "feature buffer size does not match T*D");
    binio::Writer out;
    out.magic("TFF1");
    out.u8(static_cast<std::uint8_t>(seq.modality));
    out.u8(0);
    out.u8(0);
    out.u8(0);
    out.u32(static_cast<std::uint32_t>(seq.length));
    out.u32(static_cast<std::uint32_t>(seq.dim));
    for (float v : seq.values) {
        out.f32(v);
    }
    return out.bytes();
}

FeatureSequence decode_features(std::vector<std::uint8_t> bytes, const std::string& source) {
    binio::Reader in(std::move(bytes), source);
    in.expect_magic("TFF1");
    const auto modality = in.u8();
    if (modality > 1) {
        in.error("unknown modality byte");
    }
    in.u8();
    in.u8();
    in.u8();
    FeatureSequence seq;
    seq.modality = static_cast<Modality>(modality);
    seq.length = static_cast<int>(in.u32());
    seq.dim = static_cast<int>(in.u32());
    const std::uint64_t n = static_cast<std::uint64_t>(seq.length) * static_cast<std::uint64_t>(seq.dim);
    if (n * 4 != in.remaining()) {
        in.error("payload of " + std::to_string(in.remaining()) + " bytes does not match T*D=" + std::to_string(n));
    }
    seq.values.resize(n);
    for (auto& v : seq.values) {
        v = in.f32();
    }
    return seq;
}

void save_features(const std::filesystem::path& path, const FeatureSequence& seq) {
    binio::write_file(path, encode_features(seq));
}

FeatureSequence load_features(const std::filesystem::path& path, int expected_dim) {
    auto seq = decode_features(binio::read_file(path), path.string());
    if (expected_dim >= 0 && seq.dim != expected_dim) {
        fail(ErrorKind::Shape, path.string() + ": feature dim " + std::to_string(seq.dim) +
                                   " does not match configured dim " + std::to_string(expected_dim));
    }
    return seq;
}

void save_stats(const std::filesystem::path& path, const FeatureStats& stats) {
    binio::Writer out;
    out.magic("TFS1");
    out.u8(static_cast<std::uint8_t>(stats.modality));
    out.u32(static_cast<std::uint32_t>(stats.mean.size()));
    for (std::size_t i = 0; i < stats.mean.size(); ++i) {
        out.f64(stats.mean[i]);
        out.f64(stats.stddev[i]);
    }
    binio::write_file(path, out.bytes());
}

FeatureStats load_stats(const std::filesystem::path& path) {
    binio::Reader in(binio::read_file(path), path.string());
    in.expect_magic("TFS1");
    FeatureStats stats;
    stats.modality = static_cast<Modality>(in.u8());
    const auto n = in.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        stats.mean.push_back(in.f64());
        stats.stddev.push_back(in.f64());
    }
    in.expect_end();
    return stats;
}

std::filesystem::path feature_path(const std::filesystem::path& dir, const std::string& id, Modality m) {
    return dir / (id + "." + to_string(m) + ".tff");
}

FeatureSequence mhi_as_features(std::span<const MhiMap> maps) {
    require(!maps.empty(), ErrorKind::InsufficientInput, "no MHI maps");
    FeatureSequence seq;
    seq.modality = Modality::Mhi;
    seq.length = static_cast<int>(maps.size());
    seq.dim = maps[0].width * maps[0].height;
    seq.values.reserve(static_cast<std::size_t>(seq.length) * seq.dim);
    for (const auto& m : maps) {
        require(static_cast<int>(m.values.size()) == seq.dim, ErrorKind::Shape, "MHI maps differ in size");
        for (auto v : m.values) {
            seq.values.push_back(static_cast<float>(v));
        }
    }
    return seq;
}

} // namespace transfact
