#include "transfact/binio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "transfact/error.hpp"

namespace transfact::binio {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

void Writer::magic(std::string_view tag) {
    raw(reinterpret_cast<const std::uint8_t*>(tag.data()), tag.size());
}

void Writer::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

void Writer::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

void Writer::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void Writer::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void Writer::string(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
}

Reader::Reader(std::vector<std::uint8_t> bytes, std::string source)
    : bytes_(std::move(bytes)), source_(std::move(source)) {}

void Reader::error(const std::string& what) const {
    fail(ErrorKind::Parse, source_ + ": " + what + " at byte offset " + std::to_string(pos_));
}

const std::uint8_t* Reader::take(std::size_t n) {
    if (n > remaining()) {
        error("unexpected end of data (need " + std::to_string(n) + " bytes, have " +
              std::to_string(remaining()) + ")");
    }
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
}

void Reader::expect_magic(std::string_view tag) {
    const std::size_t at = pos_;
    const std::uint8_t* p = take(tag.size());
    if (std::memcmp(p, tag.data(), tag.size()) != 0) {
        pos_ = at;
        error("bad magic, expected \"" + std::string(tag) + "\"");
    }
}

std::uint8_t Reader::u8() { return *take(1); }

std::uint32_t Reader::u32() {
    const std::uint8_t* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    }
    return v;
}

std::uint64_t Reader::u64() {
    const std::uint8_t* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    }
    return v;
}

float Reader::f32() { return std::bit_cast<float>(u32()); }
double Reader::f64() { return std::bit_cast<double>(u64()); }

void Reader::raw(std::uint8_t* out, std::size_t n) {
    const std::uint8_t* p = take(n);
    std::memcpy(out, p, n);
}

std::string Reader::string() {
    const std::uint32_t n = u32();
    const std::uint8_t* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
}

void Reader::expect_end() const {
    if (remaining() != 0) {
        error(std::to_string(remaining()) + " trailing bytes");
    }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::Io, "cannot open " + path.string() + " for reading");
    }
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        fail(ErrorKind::Io, "write failed for " + path.string());
    }
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    std::vector<std::uint8_t> bytes(text.begin(), text.end());
    write_file(path, bytes);
}

std::string read_text(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return std::string(bytes.begin(), bytes.end());
}

} // namespace transfact::binio
