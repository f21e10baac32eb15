#include "eegprompt/error.hpp"
#include "eegprompt/harness.hpp"
#include "eegprompt/log.hpp"
#include "eegprompt/png.hpp"
#include "eegprompt/synth.hpp"
#include "eegprompt/topomap.hpp"
#include "support/testing.hpp"

#include <doctest.h>

#include <map>
#include <numeric>
#include <set>

using namespace eegprompt;

namespace {

struct Quiet {
  Quiet() { set_log_level(LogLevel::Off); }
  ~Quiet() { set_log_level(LogLevel::Warning); }
};

SynthOptions small(std::size_t classes, std::size_t samples) {
  SynthOptions o;
  o.classes = classes;
  o.samples = samples;
  o.seed = 3;
  o.eeg_duration_s = 18.0;
  o.audio_duration_s = 0.25;
  return o;
}

TrialConfig fast_config(ModalitySet mods, Strategy s = Strategy::ZeroShot) {
  TrialConfig c;
  c.strategy = s;
  c.modalities = mods;
  c.repeats = 3;
  c.seed = 11;
  c.pipeline.grid = 24;
  return c;
}

// A manifest of N face-only samples sharing one tiny image.
DatasetManifest face_manifest(const std::filesystem::path& dir, const std::vector<int>& labels, std::size_t classes) {
  Image img{4, 4, std::vector<std::uint8_t>(48, 200)};
  const auto png = encode_png(img);
  testing::spit(dir / "face.png", std::string(png.begin(), png.end()));
  DatasetManifest m;
  m.name = "faces";
  m.task = synth_task(classes);
  m.modalities = {Modality::Face};
  m.base_dir = dir;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    SampleRecord s;
    s.id = "f" + std::to_string(i);
    s.label = labels[i];
    s.face_image = "face.png";
    m.samples.push_back(s);
  }
  m.validate();
  return m;
}

}  // namespace

TEST_CASE("modality sets") {
  const auto s = ModalitySet::parse("audio, eeg");
  CHECK(s.str() == "eeg+audio");
  CHECK(s.size() == 2);
  CHECK(ModalitySet().str() == "none");
  CHECK_THROWS_AS(ModalitySet::parse("smell"), ConfigError);
  const auto all = ModalitySet{Modality::Eeg, Modality::Face, Modality::Audio}.nonempty_subsets();
  std::vector<std::string> names;
  for (auto m : all) names.push_back(m.str());
  CHECK(names == std::vector<std::string>{"eeg", "face", "audio", "eeg+face", "eeg+audio", "face+audio", "eeg+face+audio"});
  CHECK(ModalitySet{Modality::Eeg, Modality::Audio}.nonempty_subsets().size() == 3);
}

TEST_CASE("manifest round trip and errors") {
  testing::TempDir dir("manifest");
  const auto path = write_synth_dataset(dir.path(), small(2, 4));
  const auto m = load_manifest(path);
  CHECK(m.name == "synth-c2");
  CHECK(m.task.symptom == "depression");
  CHECK(m.samples.size() == 4);
  CHECK(m.default_window.start_s == doctest::Approx(1.65));
  CHECK(m.default_window.end_s == doctest::Approx(4.15));
  CHECK(m.resolve(m.samples[0].eeg_csv) == dir / "eeg/s00.csv");
  CHECK(m.audio_has_transcript());

  const std::string header = R"({"name":"t","symptom":"emotion","classes":["a","b"],"modalities":["eeg"]})";
  testing::spit(dir / "unknown.jsonl", header + "\n" + R"({"id":"x","label":0,"eeg_csv":"x.csv","colour":1})" + "\n");
  CHECK_THROWS_AS(load_manifest(dir / "unknown.jsonl"), ConfigError);
  testing::spit(dir / "badhead.jsonl", R"({"symptom":"e","classes":["a","b"],"modalities":["eeg"],"extra":1})");
  CHECK_THROWS_AS(load_manifest(dir / "badhead.jsonl"), ConfigError);

  testing::spit(dir / "broken.jsonl", header + "\n" + R"({"id":"x","label":0,"eeg_csv":"x.csv"})" + "\n{oops\n");
  try {
    load_manifest(dir / "broken.jsonl");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  testing::spit(dir / "label.jsonl", header + "\n" + R"({"id":"x","label":0,"eeg_csv":"x"})" + "\n" +
                                         R"({"id":"y","label":5,"eeg_csv":"y"})" + "\n");
  CHECK_THROWS_AS(load_manifest(dir / "label.jsonl"), ConfigError);
  testing::spit(dir / "dup.jsonl", header + "\n" + R"({"id":"x","label":0,"eeg_csv":"x"})" + "\n" +
                                       R"({"id":"x","label":1,"eeg_csv":"y"})" + "\n");
  CHECK_THROWS_AS(load_manifest(dir / "dup.jsonl"), ConfigError);
  testing::spit(dir / "nomod.jsonl", header + "\n" + R"({"id":"x","label":0})" + "\n" + R"({"id":"y","label":1})" + "\n");
  CHECK_THROWS_AS(load_manifest(dir / "nomod.jsonl"), ConfigError);
  testing::spit(dir / "one.jsonl", header + "\n" + R"({"id":"x","label":0,"eeg_csv":"x"})" + "\n");
  CHECK_THROWS_AS(load_manifest(dir / "one.jsonl"), ConfigError);
  testing::spit(dir / "empty.jsonl", "\n\n");
  CHECK_THROWS_AS(load_manifest(dir / "empty.jsonl"), ParseError);
  CHECK_THROWS_AS(load_manifest(dir / "missing.jsonl"), IoError);
}

TEST_CASE("majority vote baseline") {
  CHECK(majority_vote_baseline(std::vector<int>{0, 0, 0, 0, 0, 0, 0, 1, 1, 1}) == doctest::Approx(70.0));
  CHECK(majority_label({2, 1, 1, 2, 0}) == 1);
  CHECK(majority_label({3, 3, 0, 0}) == 0);

  // Property: equals 100 * max count / N for any label multiset.
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t c = 2 + rng() % 6, n = 1 + rng() % 60;
    std::vector<int> labels(n);
    std::vector<std::size_t> counts(c, 0);
    for (int& l : labels) {
      l = static_cast<int>(rng() % c);
      ++counts[static_cast<std::size_t>(l)];
    }
    const std::size_t top = *std::max_element(counts.begin(), counts.end());
    CHECK(majority_vote_baseline(labels) == 100.0 * static_cast<double>(top) / static_cast<double>(n));
    const int ml = majority_label(labels);
    CHECK(counts[static_cast<std::size_t>(ml)] == top);
    for (int k = 0; k < ml; ++k) CHECK(counts[static_cast<std::size_t>(k)] < top);
  }
}

TEST_CASE("shot draws") {
  const auto a = draw_without_replacement(20, 5, 42);
  CHECK(a == draw_without_replacement(20, 5, 42));
  CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 5);
  for (auto i : a) CHECK(i < 20);
  const auto all = draw_without_replacement(6, 6, 1);
  CHECK(std::set<std::size_t>(all.begin(), all.end()).size() == 6);
  std::vector<int> hits(10, 0);
  for (std::uint64_t s = 0; s < 5000; ++s) ++hits[draw_without_replacement(10, 1, s)[0]];
  for (int h : hits) CHECK((h > 400 && h < 600));
}

TEST_CASE("few-shot excludes the shot and accounts for every sample") {
  testing::TempDir dir("harness_shots");
  const auto m = face_manifest(dir.path(), {0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2}, 3);
  OracleGateway oracle;
  PayloadCache cache(m, {});
  auto config = fast_config({Modality::Face}, Strategy::FewShot);
  config.repeats = 5;
  std::set<std::string> all_shots;
  for (std::size_t t = 0; t < 5; ++t) {
    const auto r = run_trial(config, m, oracle, cache, t);
    REQUIRE(r.shot_ids.size() == 1);
    all_shots.insert(r.shot_ids[0]);
    CHECK(r.verdicts.size() == 11);
    for (const auto& v : r.verdicts) CHECK(v.sample_id != r.shot_ids[0]);
    CHECK(r.correct + r.incorrect + r.skipped.size() == 12 - 1);
    CHECK(r.accuracy == 100.0);
    CHECK(r.seed == 11 + t);
  }
  CHECK(all_shots.size() > 1);  // shots redrawn per trial

  config.shots = 3;
  const auto r3 = run_trial(config, m, oracle, cache, 0);
  CHECK(r3.verdicts.size() == 9);
  config.shots = 12;
  CHECK_THROWS_AS(run_trial(config, m, oracle, cache, 0), ConfigError);
  config.shots = 0;
  CHECK_THROWS_AS(run_trial(config, m, oracle, cache, 0), ConfigError);
}

TEST_CASE("few-shot prompts carry the shot's label") {
  testing::TempDir dir("harness_shot_prompt");
  const auto m = face_manifest(dir.path(), {0, 1, 0, 1, 0, 1}, 2);
  PayloadCache cache(m, {});
  std::mutex mu;
  std::vector<std::string> answers;
  FunctionGateway spy([&](const GatewayRequest& r) {
    std::lock_guard lock(mu);
    for (const auto& p : r.prompt->parts)
      if (p.section == Section::Example && p.text.rfind("The correct answer", 0) == 0) answers.push_back(p.text);
    return "0";
  });
  const auto r = run_trial(fast_config({Modality::Face}, Strategy::FewShot), m, spy, cache, 0);
  REQUIRE(answers.size() == 5);
  const auto& shot = *std::find_if(m.samples.begin(), m.samples.end(), [&](auto& s) { return s.id == r.shot_ids[0]; });
  const std::string expect = "The correct answer is " + std::to_string(shot.label) + " (" +
                             m.task.classes[static_cast<std::size_t>(shot.label)].name + ").";
  for (const auto& a : answers) CHECK(a == expect);
}

TEST_CASE("invalid replies count as incorrect") {
  testing::TempDir dir("harness_invalid");
  const auto m = face_manifest(dir.path(), {0, 1, 0, 1}, 2);
  PayloadCache cache(m, {});
  ScriptedGateway g({"0", "banana", "1", "1"});
  const auto r = run_trial(fast_config({Modality::Face}), m, g, cache, 0);
  CHECK(r.correct == 2);
  CHECK(r.incorrect == 2);
  CHECK(r.invalid == 1);
  CHECK(r.accuracy == 50.0);
}

TEST_CASE("experiment statistics") {
  Quiet quiet;
  testing::TempDir dir("harness_stats");
  std::vector<int> labels(10);
  for (std::size_t i = 0; i < 10; ++i) labels[i] = static_cast<int>(i % 2);
  const auto m = face_manifest(dir.path(), labels, 2);
  // 6 then 7 correct out of 10, alternating over 5 trials.
  std::vector<std::string> script;
  for (int t = 0; t < 5; ++t)
    for (std::size_t i = 0; i < 10; ++i) {
      const bool right = i < (t % 2 ? 7u : 6u);
      script.push_back(std::to_string(right ? labels[i] : 1 - labels[i]));
    }
  ScriptedGateway g(script);
  auto config = fast_config({Modality::Face});
  config.repeats = 5;
  const auto cell = run_experiment(config, m, g);
  CHECK(cell.trial_accuracies == std::vector<double>{60, 70, 60, 70, 60});
  CHECK(cell.mean == doctest::Approx(64.0));
  CHECK(cell.std == doctest::Approx(4.898979).epsilon(1e-6));

  config.repeats = 1;
  UniformGateway u(3);
  const auto one = run_experiment(config, m, u);
  CHECK(one.std == 0.0);
  CHECK(one.mean == one.trial_accuracies[0]);

  config.repeats = 5;
  OracleGateway o;
  const auto orc = run_experiment(config, m, o);
  CHECK(orc.mean == 100.0);
  CHECK(orc.std == 0.0);
  config.repeats = 0;
  CHECK_THROWS_AS(run_experiment(config, m, o), ConfigError);
}

TEST_CASE("uniform mock stays within the binomial band") {
  testing::TempDir dir("harness_uniform");
  std::vector<int> labels(300);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 3);
  const auto m = face_manifest(dir.path(), labels, 3);
  UniformGateway g(7);
  auto config = fast_config({Modality::Face});
  config.repeats = 1;
  const auto cell = run_experiment(config, m, g);
  const double band = 3.0 * std::sqrt(33.33 * 66.67 / 300.0);
  CHECK(std::abs(cell.mean - 33.33) <= band);
}

TEST_CASE("missing files are skipped or fatal under strict") {
  Quiet quiet;
  testing::TempDir dir("harness_skip");
  const auto path = write_synth_dataset(dir.path(), small(3, 9));
  const auto m = load_manifest(path);
  std::filesystem::remove(dir / "face/s04.png");
  std::filesystem::remove(dir / "transcript/s07.txt");
  OracleGateway oracle;
  {
    PayloadCache cache(m, {});
    const auto r = run_trial(fast_config({Modality::Face}), m, oracle, cache, 0);
    REQUIRE(r.skipped.size() == 1);
    CHECK(r.skipped[0].sample_id == "s04");
    CHECK(r.verdicts.size() == 8);
    CHECK(r.accuracy == 100.0);
    const auto a = run_trial(fast_config({Modality::Audio}), m, oracle, cache, 0);
    REQUIRE(a.skipped.size() == 1);
    CHECK(a.skipped[0].sample_id == "s07");
    // Shots come only from usable samples; accounting holds.
    for (std::size_t t = 0; t < 8; ++t) {
      const auto f = run_trial(fast_config({Modality::Face, Modality::Audio}, Strategy::FewShot), m, oracle, cache, t);
      CHECK(f.shot_ids[0] != "s04");
      CHECK(f.shot_ids[0] != "s07");
      CHECK(f.skipped.size() == 2);
      CHECK(f.correct + f.incorrect + f.skipped.size() == 9 - 1);
    }
    const auto cell = run_experiment(fast_config({Modality::Face}), m, oracle, cache);
    CHECK(cell.skipped == 3);
  }
  {
    PayloadCache cache(m, {});
    auto strict = fast_config({Modality::Face});
    strict.strict = true;
    CHECK_THROWS_AS(run_trial(strict, m, oracle, cache, 0), IoError);
  }
}

TEST_CASE("oracle scores 100 on every subset and strategy") {
  testing::TempDir dir("harness_oracle");
  const auto m = load_manifest(write_synth_dataset(dir.path(), small(3, 6)));
  OracleGateway oracle;
  auto base = fast_config({});
  base.repeats = 2;
  const auto report = ablation_grid(m, {Strategy::ZeroShot, Strategy::FewShot}, base, oracle);
  CHECK(report.cells.size() == 14);
  for (const auto& c : report.cells) {
    CHECK(c.mean == 100.0);
    CHECK(c.std == 0.0);
  }
  CHECK(report.baseline == doctest::Approx(100.0 / 3.0));
  CHECK(report.available.size() == 3);
}

TEST_CASE("results do not depend on worker count") {
  testing::TempDir dir("harness_workers");
  const auto m = load_manifest(write_synth_dataset(dir.path(), small(3, 9)));
  const std::vector<ModalitySet> subsets = {{Modality::Eeg}, {Modality::Face, Modality::Audio}};
  std::vector<std::string> dumps;
  for (std::size_t w : {1u, 3u, 8u}) {
    UniformGateway g(7);
    auto base = fast_config({});
    base.workers = w;
    std::vector<nlohmann::json> trials;
    const auto report = ablation_grid(m, {Strategy::ZeroShot, Strategy::FewShot}, subsets, base, g,
                                      [&](const TrialConfig&, const TrialResult& t) { trials.push_back(to_json(t)); });
    dumps.push_back(to_json(report).dump() + nlohmann::json(trials).dump() +
                    emit_report({report}, ReportFormat::Markdown));
  }
  CHECK(dumps[0] == dumps[1]);
  CHECK(dumps[0] == dumps[2]);
}

TEST_CASE("EEG payload shapes") {
  const auto rec = testing::make_recording(synth_channels(), 128.0, 128 * 18, [](std::size_t c, double t) {
    return std::sin(2.0 * 3.14159 * 8.0 * t + static_cast<double>(c));
  });
  PipelineOptions o;
  o.grid = 16;
  const auto montage = build_eeg_payload(rec, {0.0, 5.0}, o);
  CHECK(montage.pngs.size() == 1);
  CHECK(montage.timestamps.size() == 10);
  CHECK(montage.timestamps.front() == doctest::Approx(0.25));
  const Image img = decode_png(montage.pngs[0]);
  CHECK(img.width == 5 * (img.height / 2 - kCaptionHeight));
  o.per_timestamp_images = true;
  CHECK(build_eeg_payload(rec, {0.0, 5.0}, o).pngs.size() == 10);
  CHECK_THROWS_AS(build_eeg_payload(rec, {0.0, 19.0}, o), ParameterError);
  auto slow = rec;
  slow.sfreq = 64.0;
  CHECK_THROWS_AS(build_eeg_payload(slow, {0.0, 5.0}, o), ParameterError);
}

TEST_CASE("report formatting") {
  RunReport r;
  r.dataset = "MODMA";
  r.n_samples = 10;
  r.n_classes = 2;
  r.available = {Modality::Eeg, Modality::Audio};
  r.baseline = 50.0;
  r.strategies = {Strategy::ZeroShot};
  r.cells.push_back({Strategy::ZeroShot, {Modality::Eeg}, 60.0, 2.5, {57.5, 62.5}, 1, 0, 0});
  r.cells.push_back({Strategy::ZeroShot, {Modality::Eeg, Modality::Audio}, 73.54, 1.0, {72.54, 74.54}, 0, 2, 0});

  RunReport lumed = r;
  lumed.dataset = "LUMED-2";
  lumed.available = {Modality::Eeg, Modality::Face};
  lumed.baseline = 100.0 / 3.0;
  lumed.cells = {{Strategy::ZeroShot, {Modality::Eeg}, 40.0, 0.0, {40.0}, 0, 0, 0},
                 {Strategy::ZeroShot, {Modality::Face}, 45.0, 0.0, {45.0}, 0, 0, 0}};

  const std::string md = emit_report({r, lumed}, ReportFormat::Markdown);
  CHECK(md == emit_report({r, lumed}, ReportFormat::Markdown));
  std::istringstream lines(md);
  std::vector<std::string> rows;
  for (std::string l; std::getline(lines, l);) rows.push_back(l);
  REQUIRE(rows.size() == 2 + 1 + 3);
  CHECK(rows[0] == "| Strategy | EEG | Facial Expression | Audio | MODMA | LUMED-2 |");
  CHECK(rows[2] == "| Zero-shot | × | × | × | 50.00±0.00 | 33.33±0.00 |");
  CHECK(rows[3] == "| Zero-shot | ✓ | × | × | 60.00±2.50 | 40.00±0.00 |");
  CHECK(rows[4] == "| Zero-shot | × | ✓ | × | -- | **45.00±0.00** |");
  CHECK(rows[5] == "| Zero-shot | ✓ | × | ✓ | **73.54±1.00** | -- |");

  const std::string csv = emit_report({r}, ReportFormat::Csv);
  CHECK(csv ==
        "strategy,shots,eeg,face,audio,dataset,mean,std,trials,invalid,skipped\n"
        "zero-shot,0,0,0,0,MODMA,50.00,0.00,,0,0\n"
        "zero-shot,0,1,0,0,MODMA,60.00,2.50,57.50;62.50,1,0\n"
        "zero-shot,0,1,0,1,MODMA,73.54,1.00,72.54;74.54,0,2\n");

  RunReport base_only = r;
  base_only.strategies.clear();
  base_only.cells.clear();
  const std::string b = emit_report({base_only}, ReportFormat::Markdown);
  CHECK(b.find("| Majority vote | × | × | × | 50.00±0.00 |\n") != std::string::npos);
  std::size_t data_rows = 0;
  for (char ch : b) data_rows += ch == '\n';
  CHECK(data_rows == 3);

  CHECK(format_cell(100.0 / 7.0, 0.0) == "14.29±0.00");
  CHECK(parse_report_format("md") == ReportFormat::Markdown);
  CHECK(parse_report_format("csv") == ReportFormat::Csv);
  CHECK_THROWS_AS(parse_report_format("xlsx"), ConfigError);

  const auto back = report_from_json(to_json(r));
  CHECK(emit_report({back}, ReportFormat::Csv) == csv);
  CHECK(to_json(back) == to_json(r));
  CHECK_THROWS_AS(report_from_json(nlohmann::json{{"dataset", 3}}), ParseError);
}
