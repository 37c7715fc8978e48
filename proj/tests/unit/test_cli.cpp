#include <doctest.h>

#include "audio_fixtures.hpp"
#include "beatforge/align.hpp"
#include "beatforge/binary_io.hpp"
#include "beatforge/codec.hpp"
#include "beatforge/curate.hpp"
#include "beatforge/signal.hpp"
#include "beatforge/timeline.hpp"
#include "cli.hpp"

#include <json.hpp>

#include <cstdlib>
#include <sstream>
#include <unistd.h>

using namespace beatforge;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run invoke(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = beatforge::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("bf_cli_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string s(const fs::path& p) { return p.string(); }

}  // namespace

TEST_CASE("beats writes a 50 Hz CSV and a provenance record") {
    const fs::path dir = fresh_dir("beats");
    const auto clicks = oracle::click_track(32000.0, 4.0, 120.0, 0.1);
    signal::write_wav(dir / "in.wav", clicks.wave);
    const Run r = invoke({"beats", s(dir / "in.wav"), "-o", s(dir / "out" / "beats.csv")});
    REQUIRE(r.code == 0);
    const auto beats = csv::read_beats(dir / "out" / "beats.csv");
    CHECK(beats.size() == 200);
    std::size_t count = 0;
    for (auto b : beats) count += b;
    CHECK(count == clicks.click_samples.size());

    const auto run = nlohmann::json::parse(io::read_file(dir / "out" / "run.json"));
    CHECK(run.at("command") == "beats");
    CHECK(run.at("inputs")[0].at("fnv1a") == io::fnv1a_hex(io::read_file(dir / "in.wav")));
    CHECK(run.at("outputs")[0].at("fnv1a") == io::fnv1a_hex(io::read_file(dir / "out" / "beats.csv")));
    CHECK(run.at("config").at("hop") == 640);
    fs::remove_all(dir);
}

TEST_CASE("align emits the overlap weights and metrics") {
    const fs::path dir = fresh_dir("align");
    const std::vector<std::uint8_t> pv{0, 1, 0, 0, 0, 0, 0, 1, 0, 0};
    const std::vector<std::uint8_t> pa{0, 0, 0, 1, 0, 0, 0, 0, 0, 0};
    csv::write_beats(dir / "vb.csv", pv);
    csv::write_beats(dir / "mb.csv", pa);
    const Run r = invoke({"align", "--pv", s(dir / "vb.csv"), "--pa", s(dir / "mb.csv"), "--delta", "3", "--alpha",
                       "0.05", "-o", s(dir / "w.csv"), "--metrics", s(dir / "m.json")});
    REQUIRE(r.code == 0);
    const auto w = csv::parse_real(io::read_file(dir / "w.csv"), "weight", "w.csv");
    CHECK(w == align::overlap_weights(VideoBeats{pv}, BeatTrack{pa}, {3, 0.05}).weights);
    const auto m = nlohmann::json::parse(io::read_file(dir / "m.json"));
    CHECK(m.at("aligned_frames") == 1);

    // Config file values, overridden by flags.
    io::write_file(dir / "cfg.json", R"({"delta": 1, "alpha": 0.5})");
    REQUIRE(invoke({"align", "--pv", s(dir / "vb.csv"), "--pa", s(dir / "mb.csv"), "--config", s(dir / "cfg.json"),
                 "-o", s(dir / "w2.csv")})
                .code == 0);
    CHECK(csv::parse_real(io::read_file(dir / "w2.csv"), "weight", "") == std::vector<double>(10, 0.5));
    fs::remove_all(dir);
}

TEST_CASE("exit codes follow the error class") {
    const fs::path dir = fresh_dir("codes");
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"align", "--frobnicate"}).code == 2);
    CHECK(invoke({"--version"}).code == 0);

    io::write_file(dir / "bad.csv", "frame,beat\n0,1\n1,x\n");
    csv::write_beats(dir / "ok.csv", {0, 1, 0});
    const Run fmt = invoke({"align", "--pv", s(dir / "bad.csv"), "--pa", s(dir / "ok.csv"), "-o", s(dir / "w.csv")});
    CHECK(fmt.code == 3);
    CHECK(fmt.err.find("bad.csv") != std::string::npos);

    csv::write_beats(dir / "short.csv", {0, 1});
    CHECK(invoke({"align", "--pv", s(dir / "short.csv"), "--pa", s(dir / "ok.csv"), "-o", s(dir / "w.csv")}).code == 4);
    CHECK(invoke({"align", "--pv", s(dir / "ok.csv"), "--pa", s(dir / "ok.csv"), "--alpha", "2", "-o",
               s(dir / "w.csv")})
              .code == 4);
    io::write_file(dir / "cfg.json", "{\"delta\": ");
    CHECK(invoke({"align", "--pv", s(dir / "ok.csv"), "--pa", s(dir / "ok.csv"), "--config", s(dir / "cfg.json"), "-o",
               s(dir / "w.csv")})
              .code == 3);
    CHECK(invoke({"eval-mvalign", "--generated", s(dir / "ok.csv"), "--pv", s(dir / "ok.csv"), "--pv",
               s(dir / "ok.csv")})
              .code == 2);
    fs::remove_all(dir);
}

TEST_CASE("synthetic pipeline is deterministic end to end") {
    const fs::path dir = fresh_dir("pipeline");
    const std::string w = s(dir / "world");
    REQUIRE(invoke({"synth-world", "--out", w, "--clips", "10", "--seed", "3"}).code == 0);
    REQUIRE(invoke({"vbeats", w + "/clip0000.fseq", "-o", s(dir / "vb.csv")}).code == 0);
    CHECK(io::read_file(dir / "vb.csv") == io::read_file(dir / "world" / "clip0000.vb.csv"));

    auto train_and_use = [&](const std::string& tag) {
        const std::string m = s(dir / ("model_" + tag));
        REQUIRE(invoke({"train", "--world", w, "--out", m, "--epochs", "2", "--batch", "4", "--warmup", "2"}).code == 0);
        REQUIRE(invoke({"generate", "--model", m, "--video", w + "/clip0003.fseq", "-o", m + "/gen.tgrd", "--beats-out",
                     m + "/gen.csv", "--seed", "5"})
                    .code == 0);
        REQUIRE(invoke({"retrieve", "--model", m, "--world", w, "-o", m + "/ret.json"}).code == 0);
        REQUIRE(invoke({"eval-mvalign", "--generated", m + "/gen.csv", "--pv", w + "/clip0003.vb.csv", "-o",
                     m + "/eval.json"})
                    .code == 0);
        return m;
    };
    const fs::path a = train_and_use("a"), b = train_and_use("b");
    for (const char* f : {"model.vmap", "metrics.jsonl", "gen.tgrd", "gen.csv", "ret.json", "eval.json"}) {
        INFO(f);
        CHECK(io::read_file(a / f) == io::read_file(b / f));
    }
    const auto metrics = io::read_file(a / "metrics.jsonl");
    CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 2);
    CHECK(codec::load_grid(a / "gen.tgrd").t_a == 64);
    const auto ret = nlohmann::json::parse(io::read_file(a / "ret.json"));
    CHECK(ret.at("candidates") == 10);
    CHECK(ret.contains("recall_at_10"));
    fs::remove_all(dir);
}

TEST_CASE("BEATFORGE_SEED overrides the configured seed") {
    const fs::path dir = fresh_dir("seed");
    REQUIRE(invoke({"synth-world", "--out", s(dir / "a"), "--clips", "3", "--seed", "11"}).code == 0);
    ::setenv("BEATFORGE_SEED", "11", 1);
    REQUIRE(invoke({"synth-world", "--out", s(dir / "b"), "--clips", "3"}).code == 0);
    ::setenv("BEATFORGE_SEED", "oops", 1);
    CHECK(invoke({"synth-world", "--out", s(dir / "c"), "--clips", "3"}).code == 2);
    ::unsetenv("BEATFORGE_SEED");
    CHECK(io::read_file(dir / "a" / "world.json") == io::read_file(dir / "b" / "world.json"));
    CHECK(io::read_file(dir / "a" / "clip0002.tgrd") == io::read_file(dir / "b" / "clip0002.tgrd"));
    fs::remove_all(dir);
}

TEST_CASE("tokenize and curate commands") {
    const fs::path dir = fresh_dir("tok");
    signal::write_wav(dir / "in.wav", oracle::click_track(32000.0, 2.0, 120.0).wave);
    REQUIRE(invoke({"tokenize", s(dir / "in.wav"), "-o", s(dir / "g.tgrd"), "--books", "2", "--vocab", "8",
                 "--save-codebooks", s(dir / "cb.rvqc")})
                .code == 0);
    const auto g = codec::load_grid(dir / "g.tgrd");
    CHECK(g.t_a == 100);
    CHECK(g.k == 2);
    REQUIRE(invoke({"tokenize", s(dir / "in.wav"), "-o", s(dir / "g2.tgrd"), "--codebooks", s(dir / "cb.rvqc")}).code ==
            0);
    CHECK(io::read_file(dir / "g.tgrd") == io::read_file(dir / "g2.tgrd"));

    motion::FrameSeq still = motion::make_frames(8, 16, 16, 1, 25.0);
    for (std::size_t i = 0; i < still.frames.size(); ++i) still.frames[i] = static_cast<std::uint8_t>(i % 256 * 7);
    motion::save_fseq(dir / "still.fseq", still);
    io::write_file(dir / "in.jsonl", "{\"id\": \"s\", \"video\": \"still.fseq\", \"audio\": \"in.wav\"}\n");
    REQUIRE(invoke({"curate", "--manifest", s(dir / "in.jsonl"), "--out", s(dir / "cur")}).code == 0);
    const auto entries = curate::read_manifest(dir / "cur" / "manifest.jsonl");
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].status == curate::Status::filtered);
    CHECK(fs::exists(dir / "cur" / "run.json"));
    fs::remove_all(dir);
}
