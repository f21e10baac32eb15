#include "eegprompt/cli.hpp"
#include "eegprompt/error.hpp"
#include "eegprompt/harness.hpp"
#include "eegprompt/png.hpp"
#include "eegprompt/synth.hpp"
#include "support/testing.hpp"

#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <sstream>

using namespace eegprompt;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

struct CountingTransport : HttpTransport {
  std::atomic<int>* posts;
  explicit CountingTransport(std::atomic<int>* p) : posts(p) {}
  HttpResponse post(const std::string&, const HttpHeaders&, const std::string&, double) override {
    ++*posts;
    return {200, R"({"choices":[{"message":{"content":"0"}}]})"};
  }
};

struct Harness {
  std::atomic<int> factories{0};
  std::atomic<int> posts{0};

  Result run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    CliContext ctx;
    ctx.out = &out;
    ctx.err = &err;
    ctx.transport = [this]() -> std::unique_ptr<HttpTransport> {
      ++factories;
      return std::make_unique<CountingTransport>(&posts);
    };
    ctx.sleeper = [](std::chrono::milliseconds) {};
    const int code = run_cli(args, ctx);
    return {code, out.str(), err.str()};
  }
};

fs::path small_synth(const fs::path& dir, std::size_t classes = 3, std::size_t n = 6) {
  SynthOptions o;
  o.classes = classes;
  o.samples = n;
  o.eeg_duration_s = 18.0;
  o.audio_duration_s = 0.25;
  return write_synth_dataset(dir, o);
}

}  // namespace

TEST_CASE("preprocess: constant input, header and columns") {
  testing::TempDir dir("cli_pre");
  const std::vector<std::string> ch = {"Fz", "Cz", "Pz", "Oz"};
  write_eeg_csv(dir / "in.csv", testing::make_recording(ch, 128.0, 2600, [](std::size_t c, double) { return 10.0 * (c + 1.0); }));
  Harness h;
  auto r = h.run({"preprocess", "--eeg", (dir / "in.csv").string(), "--sfreq", "128", "--out", (dir / "out.csv").string()});
  REQUIRE(r.code == 0);
  const auto text = testing::slurp(dir / "out.csv");
  CHECK(text.substr(0, text.find('\n')) == "Fz,Cz,Pz,Oz");
  const auto out = read_eeg_csv(dir / "out.csv", 128.0);
  CHECK(out.channel_names == ch);
  CHECK(out.n_samples() == 2600);
  for (double v : out.data.values()) CHECK(std::abs(v) < 0.4);

  r = h.run({"preprocess", "--eeg", (dir / "in.csv").string(), "--sfreq", "128", "--window", "1:3", "--out",
             (dir / "crop.csv").string()});
  REQUIRE(r.code == 0);
  CHECK(read_eeg_csv(dir / "crop.csv", 128.0).n_samples() == 256);
  r = h.run({"preprocess", "--eeg", (dir / "nope.csv").string(), "--sfreq", "128", "--out", (dir / "x.csv").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("error:") == 0);
  CHECK(h.factories == 0);
}

TEST_CASE("topomap and features subcommands") {
  testing::TempDir dir("cli_topo");
  const auto m = load_manifest(small_synth(dir.path()));
  Harness h;
  const std::string eeg = m.resolve(m.samples[0].eeg_csv).string();
  auto r = h.run({"topomap", "--eeg", eeg, "--sfreq", "128", "--window", "0:5", "--grid", "16", "--out",
                  (dir / "map.png").string()});
  REQUIRE(r.code == 0);
  const auto png = testing::slurp(dir / "map.png");
  const Image img = decode_png(std::vector<std::uint8_t>(png.begin(), png.end()));
  CHECK(img.width > img.height);
  r = h.run({"topomap", "--eeg", eeg, "--sfreq", "128", "--window", "0:5", "--grid", "16", "--per-timestamp-images",
             "--out", (dir / "snap.png").string()});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "snap_0.png"));
  CHECK(fs::exists(dir / "snap_9.png"));
  r = h.run({"topomap", "--eeg", eeg, "--sfreq", "128", "--window", "5:1", "--out", (dir / "bad.png").string()});
  CHECK(r.code == 2);

  const std::string wav = m.resolve(m.samples[0].audio_wav).string();
  r = h.run({"features", "--audio", wav, "--out", (dir / "f.txt").string()});
  REQUIRE(r.code == 0);
  const auto txt = testing::slurp(dir / "f.txt");
  CHECK(txt.rfind("MFCC mean: ", 0) == 0);
  CHECK(txt.back() == '\n');
  r = h.run({"features", "--audio", wav, "--out", (dir / "f.json").string()});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(testing::slurp(dir / "f.json"));
  CHECK(j.contains("mfcc_mean"));
  CHECK(j["chroma_mean"].size() == 12);
}

TEST_CASE("synth subcommand is seed-stable") {
  testing::TempDir dir("cli_synth");
  Harness h;
  auto a = h.run({"synth", "--classes", "2", "--samples", "4", "--out", (dir / "a").string()});
  auto b = h.run({"synth", "--classes", "2", "--samples", "4", "--out", (dir / "b").string()});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(testing::slurp(dir / "a/eeg/s03.csv") == testing::slurp(dir / "b/eeg/s03.csv"));
  CHECK(testing::slurp(dir / "a/audio/s01.wav") == testing::slurp(dir / "b/audio/s01.wav"));
  CHECK(majority_vote_baseline(load_manifest(dir / "a/manifest.jsonl")) == 50.0);
}

TEST_CASE("run with the oracle and report") {
  testing::TempDir dir("cli_run");
  const auto manifest = small_synth(dir / "data", 3, 9).string();
  Harness h;
  auto r = h.run({"run", "--manifest", manifest, "--out", (dir / "run").string(), "--modalities", "face,audio",
                  "--ablation", "--repeats", "2", "--grid", "16"});
  REQUIRE(r.code == 0);
  CHECK(h.factories == 0);
  const auto report = report_from_json(nlohmann::json::parse(testing::slurp(dir / "run/report.json")));
  CHECK(report.cells.size() == 6);
  for (const auto& c : report.cells) CHECK(format_cell(c.mean, c.std) == "100.00±0.00");
  CHECK(r.out == testing::slurp(dir / "run/report.md"));
  CHECK(r.out.find("| Few-shot (M=1) | × | ✓ | ✓ | **100.00±0.00** |") != std::string::npos);
  CHECK(fs::exists(dir / "run/config.json"));
  CHECK_FALSE(fs::exists(dir / "run/llm.jsonl"));

  // 2 strategies x 3 subsets x 2 trials; shots never among verdicts.
  std::istringstream lines(testing::slurp(dir / "run/verdicts.jsonl"));
  int n = 0;
  for (std::string line; std::getline(lines, line); ++n) {
    const auto j = nlohmann::json::parse(line);
    for (const auto& v : j["verdicts"])
      for (const auto& s : j["shot_ids"]) CHECK(v["sample_id"] != s);
  }
  CHECK(n == 12);

  const auto a = h.run({"report", "--run", (dir / "run").string()});
  const auto b = h.run({"report", "--run", (dir / "run").string()});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out == r.out);
  h.run({"report", "--run", (dir / "run").string(), "--format", "csv", "--out", (dir / "r1.csv").string()});
  h.run({"report", "--run", (dir / "run").string(), "--format", "csv", "--out", (dir / "r2.csv").string()});
  CHECK(testing::slurp(dir / "r1.csv") == testing::slurp(dir / "r2.csv"));
  CHECK(testing::slurp(dir / "r1.csv") == testing::slurp(dir / "run/report.csv"));
  CHECK(h.run({"report", "--run", (dir / "run").string(), "--format", "pdf"}).code == 2);

  // A single subset without --ablation.
  r = h.run({"run", "--manifest", manifest, "--out", (dir / "single").string(), "--modalities", "face",
             "--strategy", "zero", "--repeats", "1"});
  REQUIRE(r.code == 0);
  CHECK(report_from_json(nlohmann::json::parse(testing::slurp(dir / "single/report.json"))).cells.size() == 1);
}

TEST_CASE("run failures and exit codes") {
  testing::TempDir dir("cli_fail");
  const auto manifest = small_synth(dir / "data", 3, 6).string();
  Harness h;
  auto r = h.run({"run", "--manifest", (dir / "missing.jsonl").string(), "--out", (dir / "x").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("missing.jsonl") != std::string::npos);
  CHECK(h.run({"run", "--manifest", manifest}).code == 2);
  CHECK(h.run({"bogus"}).code == 2);
  CHECK(h.run({"--help"}).code == 0);
  CHECK(h.run({"run", "--help"}).code == 0);

  fs::remove(dir / "data/face/s02.png");
  r = h.run({"run", "--manifest", manifest, "--out", (dir / "skip").string(), "--modalities", "face", "--strategy",
             "zero", "--repeats", "1"});
  CHECK(r.code == 1);
  CHECK(r.err.find("1 skipped") != std::string::npos);
  r = h.run({"run", "--manifest", manifest, "--out", (dir / "strict").string(), "--modalities", "face", "--strategy",
             "zero", "--repeats", "1", "--strict"});
  CHECK(r.code == 2);

  testing::spit(dir / "script.txt", "0\nbanana\n2\n0\n1\n2\n");
  r = h.run({"run", "--manifest", manifest, "--out", (dir / "scripted").string(), "--modalities", "audio",
             "--strategy", "zero", "--repeats", "1", "--gateway", "scripted", "--script", (dir / "script.txt").string()});
  CHECK(r.code == 0);
  CHECK(r.err.find("1 invalid") != std::string::npos);
  r = h.run({"run", "--manifest", manifest, "--out", (dir / "scripted2").string(), "--modalities", "audio",
             "--strategy", "zero", "--repeats", "2", "--gateway", "scripted", "--script", (dir / "script.txt").string()});
  CHECK(r.code == 2);  // script exhausted
  CHECK(r.err.find("exhausted") != std::string::npos);
}

TEST_CASE("config files") {
  testing::TempDir dir("cli_config");
  const auto manifest = small_synth(dir / "data", 3, 6);
  Harness h;
  testing::spit(dir / "key.json", R"({"llm": {"api_key": "sk-oops"}})");
  auto r = h.run({"run", "--manifest", manifest.string(), "--out", (dir / "a").string(), "--config", (dir / "key.json").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("literal API keys") != std::string::npos);
  testing::spit(dir / "top.json", R"({"api_key": "sk-oops"})");
  CHECK(h.run({"run", "--config", (dir / "top.json").string()}).code == 2);
  testing::spit(dir / "unknown.json", R"({"repeets": 3})");
  r = h.run({"run", "--config", (dir / "unknown.json").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("repeets") != std::string::npos);
  testing::spit(dir / "broken.json", "{");
  CHECK(h.run({"run", "--config", (dir / "broken.json").string()}).code == 2);

  // Values in the file win over flags; paths resolve against the file.
  testing::spit(dir / "ok.json",
                R"({"manifest": "data/manifest.jsonl", "out": "fromfile", "repeats": 1, "strategy": "zero", "modalities": ["face"]})");
  r = h.run({"run", "--repeats", "4", "--out", (dir / "ignored").string(), "--config", (dir / "ok.json").string()});
  REQUIRE(r.code == 0);
  const auto cfg = nlohmann::json::parse(testing::slurp(dir / "fromfile/config.json"));
  CHECK(cfg["repeats"] == 1);
  CHECK(cfg["strategy"] == nlohmann::json::array({"zero"}));
  CHECK_FALSE(fs::exists(dir / "ignored"));
}

TEST_CASE("real gateway goes through the injected transport") {
  testing::TempDir dir("cli_real");
  const auto manifest = small_synth(dir / "data", 3, 6).string();
  Harness h;
  ::unsetenv("EEGPROMPT_CLI_KEY");
  const std::vector<std::string> args = {"run", "--manifest", manifest, "--out", (dir / "real").string(), "--gateway", "real",
                                         "--api-key-env", "EEGPROMPT_CLI_KEY", "--modalities", "face", "--strategy",
                                         "zero", "--repeats", "1"};
  auto r = h.run(args);
  CHECK(r.code == 2);
  CHECK(r.err.find("EEGPROMPT_CLI_KEY") != std::string::npos);
  CHECK(h.posts == 0);

  ::setenv("EEGPROMPT_CLI_KEY", "sk-test", 1);
  r = h.run(args);
  ::unsetenv("EEGPROMPT_CLI_KEY");
  REQUIRE(r.code == 0);
  CHECK(h.posts == 6);
  std::istringstream lines(testing::slurp(dir / "real/llm.jsonl"));
  int n = 0;
  for (std::string line; std::getline(lines, line); ++n) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["request"]["model"] == "gpt-4o-2024-05-13");
    CHECK(j["response"]["status"] == 200);
  }
  CHECK(n == 6);
  // The key never lands in the run directory.
  for (const auto& e : fs::directory_iterator(dir / "real"))
    CHECK(testing::slurp(e.path()).find("sk-test") == std::string::npos);
}

TEST_CASE("prompt dry run") {
  testing::TempDir dir("cli_prompt");
  const auto manifest = small_synth(dir / "data", 3, 6).string();
  Harness h;
  auto r = h.run({"prompt", "--manifest", manifest, "--sample", "s01", "--modalities", "face,audio", "--grid", "16"});
  CHECK(r.code == 2);
  CHECK(r.err.find("--dry-run") != std::string::npos);

  r = h.run({"prompt", "--dry-run", "--manifest", manifest, "--sample", "s01", "--grid", "16", "--attachments",
             (dir / "att").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind(kRolePlay, 0) == 0);
  CHECK(r.out.size() > std::string(kRule).size());
  CHECK(r.out.substr(r.out.size() - std::string(kRule).size() - 1) == std::string(kRule) + "\n");
  CHECK(r.out.find("Analyze the emotion status of the person. 0 denotes neutral, 1 denotes happy, 2 denotes sad.") !=
        std::string::npos);
  CHECK(fs::exists(dir / "att/attachment_0.png"));
  CHECK(fs::exists(dir / "att/attachment_1.png"));
  CHECK(r.out.find("[image: " + (dir / "att/attachment_0.png").string() + "]") != std::string::npos);

  r = h.run({"prompt", "--dry-run", "--manifest", manifest, "--sample", "s01", "--strategy", "few", "--modalities",
             "audio", "--verbatim-paper-prompt"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind(kRolePlayVerbatim, 0) == 0);
  CHECK(r.out.find("Example:\n") != std::string::npos);
  CHECK(r.out.find("The correct answer is ") != std::string::npos);

  CHECK(h.run({"prompt", "--dry-run", "--manifest", manifest, "--sample", "zz"}).code == 2);
  CHECK(h.factories == 0);
  CHECK(h.posts == 0);
}
