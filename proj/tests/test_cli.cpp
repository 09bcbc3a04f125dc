#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <limits>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "transfact/binio.hpp"
#include "transfact/cli.hpp"
#include "transfact/config.hpp"
#include "transfact/features.hpp"
#include "transfact/videodata.hpp"

using namespace transfact;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("transfact_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string s(const fs::path& p) { return p.string(); }

} // namespace

TEST_CASE("usage errors exit with 2, help with 0") {
    CHECK(run({}).code == cli::kExitUsage);
    CHECK(run({"bogus"}).code == cli::kExitUsage);
    CHECK(run({"train", "--features", "f", "--out", "o"}).code == cli::kExitUsage); // missing --data
    CHECK(run({"gen-data", "--out", "o", "--no-such-flag"}).code == cli::kExitUsage);
    const auto h = run({"train", "--help"});
    CHECK(h.code == cli::kExitOk);
    CHECK(h.out.find("--lr") != std::string::npos);
}

TEST_CASE("flags override the config file, which overrides defaults") {
    const auto dir = scratch("precedence");
    binio::write_text(dir / "cfg.json", R"({"data": {"frames": 30, "count": 6, "split": [4, 1, 1]}, "seed": 3})");
    const auto r = run({"gen-data", "--config", s(dir / "cfg.json"), "--frames", "20", "--size", "32", "--out",
                        s(dir / "data"), "-q"});
    REQUIRE(r.code == 0);
    const auto cfg = json::parse(binio::read_text(dir / "data" / "config.json"));
    CHECK(cfg["data"]["frames"] == 20);
    CHECK(cfg["data"]["count"] == 6);
    CHECK(cfg["data"]["size"] == 32);
    CHECK(cfg["data"]["p_anomaly"] == 0.5);
    CHECK(cfg["seed"] == 3);
    const auto m = load_manifest(dir / "data" / "manifest.jsonl");
    CHECK(m.entries.size() == 6);
    CHECK(m.entries[0].num_frames == 20);

    // the config copy parses back to the recorded fingerprint
    const auto fp = binio::read_text(dir / "data" / "fingerprint");
    CHECK(fp == fingerprint_hex(cli::config_fingerprint(cfg)) + "\n");

    binio::write_text(dir / "typo.json", R"({"train": {"learning_rat": 0.1}})");
    CHECK(run({"gen-data", "--config", s(dir / "typo.json"), "--out", s(dir / "x")}).code == cli::kExitUsage);
    fs::remove_all(dir);
}

TEST_CASE("resolve_document precedence and fingerprint stability") {
    const json file = {{"train", {{"learning_rate", 0.5}, {"epochs", 7}}}};
    const auto doc = cli::resolve_document(&file, {{"/train/learning_rate", 2e-4}});
    CHECK(doc["train"]["learning_rate"] == 2e-4);
    CHECK(doc["train"]["epochs"] == 7);
    CHECK(doc["train"]["batch_size"] == 32);
    const json a = json::parse(R"({"x": 1, "y": {"b": 2, "a": 3}})");
    const json b = json::parse(R"({"y": {"a": 3, "b": 2}, "x": 1})");
    CHECK(fingerprint(a) == fingerprint(b));
    json with_inputs = a;
    with_inputs["inputs"] = {{"data", "/some/where"}};
    CHECK(cli::config_fingerprint(with_inputs) == cli::config_fingerprint(a));
}

TEST_CASE("rerunning into a populated output refuses without --force") {
    const auto dir = scratch("refuse");
    const std::vector<std::string> args{"gen-data", "--count", "4", "--split", "2,1,1", "--size", "32", "--frames",
                                        "16", "--out", s(dir / "d"), "-q"};
    REQUIRE(run(args).code == 0);
    const auto again = run(args);
    CHECK(again.code == cli::kExitRefuse);
    CHECK(again.err.find("--force") != std::string::npos);
    auto forced = args;
    forced.push_back("--force");
    CHECK(run(forced).code == 0);
    fs::remove_all(dir);
}

TEST_CASE("data and numeric errors map to exit codes 4 and 5") {
    const auto dir = scratch("errors");
    binio::write_text(dir / "broken.jsonl", "{not json\n");
    CHECK(run({"extract-features", "--data", s(dir / "broken.jsonl"), "--out", s(dir / "f"), "-q"}).code ==
          cli::kExitData);

    REQUIRE(run({"gen-data", "--count", "6", "--split", "4,1,1", "--size", "32", "--frames", "16", "--out",
                 s(dir / "d"), "-q"})
                .code == 0);
    REQUIRE(run({"extract-features", "--data", s(dir / "d" / "manifest.jsonl"), "--modality", "frame", "--dim", "8",
                 "--out", s(dir / "f"), "-q"})
                .code == 0);
    // poison one training video's features
    const auto m = load_manifest(dir / "d" / "manifest.jsonl");
    const auto victim = feature_path(dir / "f", m.subset(Split::Train).front()->id, Modality::Frame);
    auto seq = load_features(victim);
    seq.values[3] = std::numeric_limits<float>::infinity();
    save_features(victim, seq);
    const auto r = run({"train", "--data", s(dir / "d" / "manifest.jsonl"), "--features", s(dir / "f"), "--hidden",
                        "8", "--heads", "2", "--tokens", "8", "--epochs", "1", "--out", s(dir / "t"), "-q"});
    CHECK(r.code == cli::kExitNumeric);
    fs::remove_all(dir);
}

TEST_CASE("one seed feeds distinct generator, init and shuffle streams") {
    const auto dir = scratch("seeds");
    auto gen = [&](const std::string& seed, const std::string& out) {
        return run({"gen-data", "--count", "4", "--split", "2,1,1", "--size", "32", "--frames", "16", "--seed", seed,
                    "--out", s(dir / out), "-q"});
    };
    REQUIRE(gen("7", "a").code == 0);
    REQUIRE(gen("7", "b").code == 0);
    REQUIRE(gen("8", "c").code == 0);
    CHECK(load_manifest(dir / "a" / "manifest.jsonl") == load_manifest(dir / "b" / "manifest.jsonl"));
    const auto first = load_manifest(dir / "a" / "manifest.jsonl").entries.front().path;
    CHECK(binio::read_text(dir / "a" / first) == binio::read_text(dir / "b" / first));
    const auto other = load_manifest(dir / "c" / "manifest.jsonl").entries.front().path;
    CHECK(binio::read_text(dir / "a" / first) != binio::read_text(dir / "c" / other));
    const auto cfg = json::parse(binio::read_text(dir / "a" / "config.json"));
    CHECK(cfg["seed"] == 7);
    fs::remove_all(dir);
}

TEST_CASE("smoke pipeline runs end to end in under a minute and is deterministic") {
    const auto dir = scratch("smoke");
    const auto t0 = std::chrono::steady_clock::now();
    auto pipeline = [&](const std::string& tag) {
        const auto root = dir / tag;
        REQUIRE(run({"gen-data", "--count", "8", "--split", "6,1,1", "--seed", "1", "--out", s(root / "data"), "-q"})
                    .code == 0);
        const auto manifest = s(root / "data" / "manifest.jsonl");
        REQUIRE(run({"compute-mhi", "--data", manifest, "--out", s(root / "mhi"), "-q"}).code == 0);
        REQUIRE(run({"extract-features", "--data", manifest, "--out", s(root / "feat"), "-q"}).code == 0);
        REQUIRE(run({"train", "--data", manifest, "--features", s(root / "feat"), "--epochs", "2", "--modality",
                     "frames+mhi", "--out", s(root / "run"), "-q"})
                    .code == 0);
        REQUIRE(run({"eval", "--data", manifest, "--features", s(root / "feat"), "--model", s(root / "run"), "--out",
                     s(root / "eval"), "-q"})
                    .code == 0);
        for (const char* f : {"history.csv", "steps.csv", "best.ckpt", "last.ckpt", "config.json", "fingerprint"}) {
            CHECK(fs::exists(root / "run" / f));
        }
        return binio::read_text(root / "eval" / "metrics.json");
    };
    const auto first = pipeline("one");
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(seconds < 60.0);
    CHECK(first == pipeline("two"));
    const auto metrics = json::parse(first);
    CHECK(metrics["runs"].size() == 1);
    CHECK(metrics["aggregate"]["accuracy"]["mean"].get<double>() >= 0.0);

    // plot and stats from the outputs
    const auto root = dir / "one";
    binio::write_text(dir / "a.csv", "accuracy\n0.9\n0.8\n0.85\n0.95\n0.9\n");
    binio::write_text(dir / "b.csv", "accuracy\n0.7\n0.75\n0.8\n0.7\n0.72\n");
    const auto st = run({"stats-compare", "--runs-a", s(dir / "a.csv"), "--runs-b", s(dir / "b.csv")});
    REQUIRE(st.code == 0);
    const auto sj = json::parse(st.out);
    CHECK(sj["p_value"] == 0.0625);
    CHECK(sj["p_exact"] == "2/32");

    binio::write_text(dir / "sweep.csv", "length,mean_acc,std_acc\n15,0.5,0.1\n30,0.7,0.05\n60,0.9,0.02\n");
    REQUIRE(run({"plot", "--sweep", s(dir / "sweep.csv"), "--out", s(dir / "plot"), "-q"}).code == 0);
    CHECK(fs::exists(dir / "plot" / "sweep.svg"));
    fs::remove_all(dir);
}

TEST_CASE("truncation sweep subcommand, faithful and reuse modes") {
    const auto dir = scratch("sweep");
    REQUIRE(run({"gen-data", "--count", "10", "--split", "6,2,2", "--frames", "16", "--size", "32", "--out",
                 s(dir / "data"), "-q"})
                .code == 0);
    const auto manifest = s(dir / "data" / "manifest.jsonl");
    REQUIRE(run({"extract-features", "--data", manifest, "--modality", "frame", "--dim", "8", "--out",
                 s(dir / "feat"), "-q"})
                .code == 0);
    const std::vector<std::string> model{"--hidden", "8", "--heads", "2", "--tokens", "10", "--epochs", "1"};
    auto args = std::vector<std::string>{"truncate-sweep", "--data", manifest, "--features", s(dir / "feat"),
                                         "--lengths", "4,8,16", "--runs", "2", "--out", s(dir / "sw"), "-q"};
    args.insert(args.end(), model.begin(), model.end());
    REQUIRE(run(args).code == 0);
    const auto csv = binio::read_text(dir / "sw" / "sweep.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(json::parse(binio::read_text(dir / "sw" / "sweep.json"))["faithful"] == true);
    CHECK(fs::exists(dir / "sw" / "sweep.svg"));

    auto train_args = std::vector<std::string>{"train", "--data", manifest, "--features", s(dir / "feat"), "--runs",
                                               "2", "--out", s(dir / "tr"), "-q"};
    train_args.insert(train_args.end(), model.begin(), model.end());
    REQUIRE(run(train_args).code == 0);
    CHECK(fs::exists(dir / "tr" / "run1" / "best.ckpt"));
    const auto reuse = run({"truncate-sweep", "--data", manifest, "--features", s(dir / "feat"), "--reuse-model",
                            s(dir / "tr"), "--lengths", "8,16", "--out", s(dir / "sw2"), "-q"});
    REQUIRE(reuse.code == 0);
    CHECK(json::parse(binio::read_text(dir / "sw2" / "sweep.json"))["faithful"] == false);
    const auto ev = run({"eval", "--data", manifest, "--features", s(dir / "feat"), "--model", s(dir / "tr"),
                         "--truncate", "8", "--out", s(dir / "ev"), "-q"});
    REQUIRE(ev.code == 0);
    CHECK(json::parse(binio::read_text(dir / "ev" / "metrics.json"))["runs"].size() == 2);
    fs::remove_all(dir);
}

TEST_CASE("the installed binary reports exit codes") {
    const char* bin = std::getenv("TRANSFACT_BIN");
    if (bin == nullptr) {
        return;
    }
    const auto dir = scratch("binary");
    const std::string cmd = std::string(bin) + " train --features x --out " + s(dir / "o") + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(status) == 2);
    fs::remove_all(dir);
}
