#include <doctest.h>

#include <cstdlib>
#include <filesystem>

#include "transfact/binio.hpp"
#include "transfact/error.hpp"
#include "transfact/mhi.hpp"
#include "transfact/rng.hpp"

using namespace transfact;

namespace {

GrayFrame random_frame(Rng& rng, int w, int h) {
    GrayFrame f(w, h);
    for (auto& v : f.values) {
        v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    }
    return f;
}

// H_t(x) from its unrolled definition: tau if the most recent detected
// change was at step t, else tau - (t - last) clipped at 0.
std::vector<MhiMap> brute_force(const std::vector<GrayFrame>& frames, int tau, int theta) {
    const int w = frames[0].width;
    const int h = frames[0].height;
    std::vector<MhiMap> out;
    for (std::size_t t = 0; t < frames.size(); ++t) {
        MhiMap m{w, h, tau, theta, std::vector<std::uint16_t>(w * h, 0)};
        for (int p = 0; p < w * h; ++p) {
            int last = -1;
            for (std::size_t s = 1; s <= t; ++s) {
                const int d = std::abs(int(frames[s].values[p]) - int(frames[s - 1].values[p]));
                if (d > theta) {
                    last = static_cast<int>(s);
                }
            }
            if (last >= 0) {
                m.values[p] = static_cast<std::uint16_t>(std::max(0, tau - (static_cast<int>(t) - last)));
            }
        }
        out.push_back(m);
    }
    return out;
}

} // namespace

TEST_CASE("motion mask uses a strict threshold") {
    GrayFrame a(3, 1);
    GrayFrame b(3, 1);
    a.values = {100, 100, 100};
    b.values = {120, 121, 79};
    const auto m = motion_mask(a, b, 20);
    CHECK(m == MotionMask{0, 1, 1});
}

TEST_CASE("hand example: change then decay") {
    // one pixel changes at t=1 only; tau=3
    std::vector<GrayFrame> frames(6, GrayFrame(1, 1, 0));
    for (std::size_t t = 1; t < frames.size(); ++t) {
        frames[t].values[0] = 200;
    }
    const auto maps = compute_mhi_sequence(frames, {3, 20});
    std::vector<int> got;
    for (const auto& m : maps) {
        got.push_back(m.values[0]);
    }
    CHECK(got == std::vector<int>{0, 3, 2, 1, 0, 0});
}

TEST_CASE("streaming equals brute force on random videos") {
    Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const int tau = static_cast<int>(rng.uniform_int(1, 12));
        const int theta = static_cast<int>(rng.uniform_int(0, 120));
        std::vector<GrayFrame> frames;
        for (int t = 0; t < 10; ++t) {
            frames.push_back(random_frame(rng, 8, 8));
        }
        const auto expect = brute_force(frames, tau, theta);
        CHECK(compute_mhi_sequence(frames, {tau, theta}) == expect);
        MhiStream stream({tau, theta});
        for (std::size_t t = 0; t < frames.size(); ++t) {
            CHECK(stream.push(frames[t]) == expect[t]);
        }
    }
}

TEST_CASE("values stay within [0, tau] and decay fully") {
    Rng rng(5);
    std::vector<GrayFrame> frames;
    for (int t = 0; t < 5; ++t) {
        frames.push_back(random_frame(rng, 6, 6));
    }
    for (int t = 0; t < 15; ++t) {
        frames.push_back(frames.back());
    }
    const auto maps = compute_mhi_sequence(frames, {7, 10});
    for (const auto& m : maps) {
        for (auto v : m.values) {
            REQUIRE(v <= 7);
        }
    }
    // 7 static steps after the last change clear every pixel
    for (auto v : maps[4 + 7].values) {
        CHECK(v == 0);
    }
}

TEST_CASE("raising theta never adds motion") {
    Rng rng(9);
    for (int i = 0; i < 50; ++i) {
        const auto a = random_frame(rng, 8, 8);
        const auto b = random_frame(rng, 8, 8);
        const int lo = static_cast<int>(rng.uniform_int(0, 200));
        const auto m1 = motion_mask(a, b, lo);
        const auto m2 = motion_mask(a, b, lo + 30);
        for (std::size_t p = 0; p < m1.size(); ++p) {
            CHECK(m2[p] <= m1[p]);
        }
    }
}

TEST_CASE("errors") {
    std::vector<GrayFrame> one(1, GrayFrame(4, 4));
    CHECK_THROWS_AS(compute_mhi_sequence(one, {}), Error);
    std::vector<GrayFrame> mixed{GrayFrame(4, 4), GrayFrame(4, 5)};
    CHECK_THROWS_AS(compute_mhi_sequence(mixed, {}), Error);
}

TEST_CASE("PGM export scales by 255/tau") {
    MhiMap m{2, 1, 5, 20, {5, 1}};
    const auto path = std::filesystem::temp_directory_path() / "transfact_test_mhi.pgm";
    write_mhi_pgm(path, m);
    const auto bytes = binio::read_file(path);
    const std::string header = "P5\n2 1\n255\n";
    REQUIRE(bytes.size() == header.size() + 2);
    CHECK(std::string(bytes.begin(), bytes.begin() + header.size()) == header);
    CHECK(bytes[header.size()] == 255);
    CHECK(bytes[header.size() + 1] == 51);
    std::filesystem::remove(path);
}
