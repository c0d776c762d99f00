// Copyright 2026 The padkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <algorithm>
#include <cstdlib>

#include "helpers.hpp"
#include "padkit/pipeline.hpp"
#include "padkit/synthdata.hpp"

using namespace padkit;
using padkit::testing::slurp;
using padkit::testing::TempDir;
namespace fs = std::filesystem;

namespace {

/// Six subjects, one frame per presentation type. Folds split the subjects
/// in halves; the "loo" protocol trains on one half and tests on the other.
struct Corpus {
  TempDir dir{"pipeline"};
  fs::path data;
  fs::path cache;

  Corpus() {
    SynthConfig c;
    c.n_subjects = 6;
    c.frames_per_subject = 1;
    c.out_dir = dir / "data";
    DatasetManifest m = generate(c);
    for (auto& r : m.records) {
      const int s = std::stoi(r.subject_id.substr(1));
      r.fold_id = s < 3 ? 1 : 2;
      r.split = s == 2 || s == 5 ? Split::dev : (s == 4 ? Split::test : Split::train);
    }
    write_manifest(c.out_dir / "manifest.csv", m);
    {
      std::ofstream out(dir / "protocols.json");
      out << R"({"grandtest": {}, "loo": {"leave_one_out": true, "train": {"split": "train"},
                 "dev": {"split": "dev"}, "test": {}}})";
    }
    data = c.out_dir;
    cache = dir / "cache";
    cmd_prepare({data / "manifest.csv", dir / "protocols.json", cache, {}});
  }
};

Corpus& corpus() {
  static Corpus c;
  return c;
}

ModelConfig tiny_model() {
  ModelConfig m;
  m.tiny_widths = {8, 8, 16, 16};
  return m;
}

TrainConfig quick_train() {
  TrainConfig t;
  t.epochs = 1;
  t.batch_size = 4;
  t.seed = 3;
  return t;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("prepare is idempotent and reuses unchanged faces") {
    Corpus& c = corpus();
    CHECK(read_json(c.cache / "run.json").at("status") == "completed");
    const std::string index = slurp(c.cache / "index.csv");
    const auto stamp = fs::last_write_time(c.cache / "index.csv");

    const PrepareResult again = cmd_prepare({c.data / "manifest.csv", c.dir / "protocols.json", c.cache, {}});
    CHECK(again.n_records == 18);
    CHECK(again.n_reused == 18);
    CHECK(again.n_written == 0);
    CHECK(slurp(c.cache / "index.csv") == index);
    CHECK(fs::last_write_time(c.cache / "index.csv") == stamp);

    // Changing one source frame re-aligns exactly that face.
    const fs::path frame = c.data / "s000" / "s000_bona_f00.png";
    Image img = read_png(frame);
    img.at(100, 100, 0) = img.at(100, 100, 0) > 0.5f ? 0.0f : 1.0f;
    write_png(frame, img);
    const PrepareResult changed = cmd_prepare({c.data / "manifest.csv", c.dir / "protocols.json", c.cache, {}});
    CHECK(changed.n_written == 1);
    CHECK(changed.n_reused == 17);
    CHECK(slurp(c.cache / "index.csv") != index);
  }

  TEST_CASE("the face cache exposes protocols and splits") {
    const FaceCache cache = FaceCache::open(corpus().cache);
    CHECK(cache.entries().size() == 18);
    CHECK(cache.protocols() == std::vector<std::string>{"grandtest", "loo"});
    CHECK(cache.folds("grandtest").empty());
    CHECK(cache.folds("loo") == std::vector<int>{1, 2});
    CHECK(cache.split("grandtest", std::nullopt, "train").size() == 9);
    CHECK(cache.split("grandtest", std::nullopt, "dev").size() == 6);
    CHECK(cache.split("grandtest", std::nullopt, "test").size() == 3);
    CHECK(cache.split("grandtest", std::nullopt, "all").size() == 18);
    for (const auto* e : cache.split("loo", 1, "test")) CHECK(*e->record.fold_id == 1);
    for (const auto* e : cache.split("loo", 1, "train")) CHECK(*e->record.fold_id == 2);
    CHECK(cache.split("loo", 2, "dev").size() == 3);
    CHECK_THROWS_AS(cache.split("grandtest", std::nullopt, "val"), PipelineError);
    CHECK_THROWS_AS(cache.split("nope", std::nullopt, "train"), PipelineError);
    CHECK_THROWS_AS(cache.entry("missing"), PipelineError);

    // Synthetic eyes sit on the canonical points, so alignment is an identity warp.
    const CacheEntry& e = cache.entry("s001_print_f00");
    const AlignedFace face = cache.load_face(e);
    CHECK(face.label == Label::attack);
    CHECK(face.pai == "print");
    const Image source = read_png(corpus().data / e.record.media_path);
    double worst = 0.0;
    for (std::size_t i = 0; i < source.data.size(); ++i) worst = std::max(worst, double(std::abs(source.data[i] - face.pixels.data[i])));
    CHECK(worst <= 1.0 / 255.0 + 1e-6);

    TempDir empty("not_a_cache");
    CHECK_THROWS_AS(FaceCache::open(empty.path()), PipelineError);
  }

  TEST_CASE("default cache location") {
    ::setenv("PADKIT_CACHE_DIR", "/tmp/padkit_root", 1);
    CHECK(default_cache_dir("/data/replay/manifest.csv") == fs::path("/tmp/padkit_root/replay-manifest"));
    ::unsetenv("PADKIT_CACHE_DIR");
    CHECK(default_cache_root() == fs::path("padkit_cache"));
  }

  TEST_CASE("label map text round trip") {
    LabelMap m;
    for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = (i * 7) % 3 == 0;
    const std::string text = label_map_text(m);
    CHECK(std::count(text.begin(), text.end(), '\n') == kMapSize);
    CHECK(parse_label_map_text(text) == m);
    CHECK_THROWS_AS(parse_label_map_text("0 1 2"), PipelineError);
    CHECK_THROWS_AS(parse_label_map_text(text + " 1"), PipelineError);
  }

  TEST_CASE("stitch preview writes consistent artifacts") {
    TempDir out("preview");
    PreviewOptions o;
    o.cache_dir = corpus().cache;
    o.protocol = "grandtest";
    o.seed = 11;
    o.n = 2;
    o.out_dir = out / "a";
    cmd_stitch_preview(o);
    o.out_dir = out / "b";
    cmd_stitch_preview(o);
    for (const char* stem : {"preview_000", "preview_001"}) {
      const std::string s(stem);
      CHECK(slurp(out / ("a/" + s + ".png")) == slurp(out / ("b/" + s + ".png")));
      const LabelMap labels = parse_label_map_text(slurp(out / ("a/" + s + "_labels.txt")));
      CHECK(is_block_constant(labels));
      const auto prov = read_json(out / ("a/" + s + "_provenance.json"));
      REQUIRE(prov.at("slots").size() == static_cast<std::size_t>(kSlots));
      Provenance p;
      for (const auto& slot : prov.at("slots")) {
        const int r = slot.at("slot_row"), c = slot.at("slot_col");
        p[static_cast<std::size_t>(r * kGridSize + c)].label = parse_label(slot.at("label").get<std::string>());
        CHECK(slot.at("source_sample_id").get<std::string>().rfind("s00", 0) == 0);
      }
      CHECK(make_label_map(p) == labels);
      const Image label_png = read_png(out / ("a/" + s + "_labels.png"));
      CHECK(label_png.height == kMapSize);
    }
    CHECK(read_json(out / "a" / "run.json").at("status") == "completed");
    o.n = 0;
    CHECK_THROWS_AS(cmd_stitch_preview(o), PipelineError);
  }

  TEST_CASE("train, eval and metrics agree on a single split") {
    TempDir out("train_eval");
    TrainOptions t{corpus().cache, "grandtest", tiny_model(), quick_train(), out / "run"};
    const TrainRunResult run = cmd_train(t);
    REQUIRE(run.states.size() == 1);
    CHECK(fs::exists(out / "run" / "best.bin"));
    CHECK(fs::exists(out / "run" / "train.log"));
    const auto run_json = read_json(out / "run" / "run.json");
    CHECK(run_json.at("status") == "completed");
    CHECK(run_json.at("outputs").contains("best.bin"));

    EvalOptions e;
    e.checkpoint = out / "run";
    e.cache_dir = corpus().cache;
    e.out_dir = out / "eval";
    const EvalResult r = cmd_eval(e);
    REQUIRE(r.reports.size() == 1);
    CHECK(!r.folded);
    CHECK(r.reports[0].threshold_source == "dev_eer");
    CHECK(r.reports[0].n_attack == 2);
    CHECK(r.reports[0].n_bona_fide == 1);
    CHECK(slurp(out / "eval" / "metrics.txt") == r.text);

    const auto dev = read_scores(out / "eval" / "scores_dev.csv");
    const auto test = read_scores(out / "eval" / "scores_test.csv");
    const EerResult eer = eer_threshold(dev);
    CHECK(r.reports[0].threshold == eer.threshold);
    CHECK(r.reports[0].acer == evaluate(test, eer.threshold).acer);

    MetricsOptions mo;
    mo.scores = out / "eval" / "scores_test.csv";
    mo.dev_scores = out / "eval" / "scores_dev.csv";
    mo.out_dir = out / "metrics";
    const EvalResult m = cmd_metrics(mo);
    CHECK(m.reports[0].acer == r.reports[0].acer);
    CHECK(m.reports[0].threshold == r.reports[0].threshold);
    CHECK(read_json(out / "metrics" / "metrics.json").at("acer").get<double>() == r.reports[0].acer);
    mo.dev_scores.reset();
    CHECK_THROWS_AS(cmd_metrics(mo), PipelineError);
    mo.threshold = 2.0;
    CHECK(cmd_metrics(mo).reports[0].bpcer == 100.0);

    e.per_video = true;
    e.out_dir = out / "eval_video";
    CHECK(cmd_eval(e).reports[0].acer == r.reports[0].acer);

    CrossEvalOptions x;
    x.checkpoint = out / "run" / "best.bin";
    x.cache_dir = corpus().cache;
    x.out_dir = out / "cross";
    const EvalResult cross = cmd_cross_eval(x);
    const Checkpoint best = read_checkpoint(out / "run" / "best.bin");
    CHECK(cross.reports[0].threshold_source == "source_dev_eer");
    CHECK(cross.reports[0].threshold == best.metrics.at("dev_threshold").get<double>());
    x.recalibrate = true;
    x.out_dir = out / "cross_recal";
    const EvalResult recal = cmd_cross_eval(x);
    CHECK(recal.reports[0].threshold_source == "target_dev_eer");
    CHECK(recal.reports[0].acer == r.reports[0].acer);

    e.checkpoint = out / "nowhere";
    e.per_video = false;
    CHECK_THROWS_AS(cmd_eval(e), PipelineError);
  }

  TEST_CASE("folded protocols train and report per fold") {
    TempDir out("folded");
    TrainOptions t{corpus().cache, "loo", tiny_model(), quick_train(), out / "run"};
    const TrainRunResult run = cmd_train(t);
    REQUIRE(run.folds.size() == 2);
    CHECK(fs::exists(out / "run" / "fold_1" / "best.bin"));
    CHECK(fs::exists(out / "run" / "fold_2" / "best.bin"));

    EvalOptions e;
    e.checkpoint = out / "run";
    e.cache_dir = corpus().cache;
    e.protocol = "loo";
    e.out_dir = out / "eval";
    const EvalResult r = cmd_eval(e);
    REQUIRE(r.folded);
    CHECK(r.folded->per_fold.size() == 2);
    CHECK(r.folded->summary.count("acer") == 1);
    CHECK(r.text.find("±") != std::string::npos);
    CHECK(fs::exists(out / "eval" / "fold_2" / "metrics.json"));
    CHECK(read_json(out / "eval" / "metrics.json").at("per_fold").size() == 2);

    e.checkpoint = out / "run" / "fold_1" / "best.bin";
    CHECK_THROWS_AS(cmd_eval(e), PipelineError);
    CrossEvalOptions x;
    x.checkpoint = out / "run" / "fold_1";
    x.cache_dir = corpus().cache;
    x.protocol = "loo";
    x.out_dir = out / "cross";
    CHECK_THROWS_AS(cmd_cross_eval(x), PipelineError);
  }

  TEST_CASE("missing media names the sample") {
    TempDir dir("missing");
    SynthConfig c;
    c.n_subjects = 3;
    c.frames_per_subject = 1;
    c.out_dir = dir / "data";
    generate(c);
    fs::remove(dir / "data" / "s001" / "s001_print_f00.png");
    try {
      cmd_prepare({dir / "data" / "manifest.csv", std::nullopt, dir / "cache", {}});
      FAIL("expected a missing-media error");
    } catch (const PipelineError& e) {
      CHECK(std::string(e.what()).find("s001_print_f00") != std::string::npos);
    }
  }

  TEST_CASE("preview writes one file set per sample") {
    TempDir out("preview_n");
    PreviewOptions o;
    o.cache_dir = corpus().cache;
    o.seed = 1;
    o.n = 4;
    o.out_dir = out.path();
    cmd_stitch_preview(o);
    int pngs = 0, texts = 0, provs = 0;
    for (const auto& e : fs::directory_iterator(out.path())) {
      const std::string name = e.path().filename().string();
      if (name.ends_with("_labels.txt")) ++texts;
      else if (name.ends_with("_provenance.json")) ++provs;
      else if (name.ends_with(".png") && !name.ends_with("_labels.png")) ++pngs;
    }
    CHECK(pngs == 4);
    CHECK(texts == 4);
    CHECK(provs == 4);
  }

  TEST_CASE("training runs log every epoch and record their parameters") {
    TempDir out("train_log");
    TrainConfig tc = quick_train();
    tc.epochs = 5;
    tc.stitch_strategy = StitchStrategy::controlled;
    TrainOptions t{corpus().cache, "grandtest", tiny_model(), tc, out / "a"};
    const TrainRunResult a = cmd_train(t);
    t.out_dir = out / "b";
    const TrainRunResult b = cmd_train(t);
    CHECK(fs::exists(out / "a" / "best.bin"));
    const std::string log = slurp(out / "a" / "train.log");
    CHECK(std::count(log.begin(), log.end(), '\n') == 5);
    CHECK(log == slurp(out / "b" / "train.log"));
    std::vector<double> la, lb;
    for (const auto& e : a.states[0].history) la.push_back(e.train_loss);
    for (const auto& e : b.states[0].history) lb.push_back(e.train_loss);
    CHECK(la == lb);
    const auto run = read_json(out / "a" / "run.json");
    CHECK(run.at("parameters").at("train").at("stitch_strategy") == "controlled");
    CHECK(run.at("seeds").at("seed") == 3);
    CHECK(run.at("outputs").at("best.bin") == read_json(out / "b" / "run.json").at("outputs").at("best.bin"));
  }

  TEST_CASE("per-video scoring collapses frame-expanded videos") {
    TempDir dir("video");
    SynthConfig c;
    c.n_subjects = 3;
    c.frames_per_subject = 3;
    c.attack_pais = {"print"};
    c.out_dir = dir / "stills";
    const DatasetManifest stills = generate(c);
    // One directory per (subject, presentation type) holding its frames.
    DatasetManifest videos;
    videos.dataset_name = "video";
    for (const auto& r : stills.records) {
      const std::string video = r.subject_id + "_" + (r.label == Label::bona_fide ? "bona" : "print");
      fs::create_directories(dir / "videos" / video);
      const int frame = r.sample_id.back() - '0';
      fs::copy_file(dir / "stills" / r.media_path, dir / "videos" / video / ("f" + std::to_string(frame) + ".png"));
      SampleRecord v = r;
      v.media_path = video;
      v.frame_index = frame;
      videos.records.push_back(v);
    }
    write_manifest(dir / "videos" / "manifest.csv", videos);
    cmd_prepare({dir / "videos" / "manifest.csv", std::nullopt, dir / "cache", {}});

    TrainOptions t{dir / "cache", "grandtest", tiny_model(), quick_train(), dir / "run"};
    cmd_train(t);
    EvalOptions e;
    e.checkpoint = dir / "run";
    e.cache_dir = dir / "cache";
    e.out_dir = dir / "frames";
    const auto frames = cmd_eval(e);
    CHECK(frames.reports[0].n_bona_fide + frames.reports[0].n_attack == 6);
    e.per_video = true;
    e.out_dir = dir / "per_video";
    const auto per_video = cmd_eval(e);
    CHECK(per_video.reports[0].n_bona_fide == 1);
    CHECK(per_video.reports[0].n_attack == 1);
    const auto scores = read_scores(dir / "per_video" / "scores_test.csv");
    REQUIRE(scores.size() == 2);
    CHECK(scores[0].sample_id == "s002_bona");
  }

  TEST_CASE("recalibration changes only the threshold") {
    TempDir out("recal");
    TrainOptions t{corpus().cache, "grandtest", tiny_model(), quick_train(), out / "run"};
    cmd_train(t);
    CrossEvalOptions x;
    x.checkpoint = out / "run";
    x.cache_dir = corpus().cache;
    x.out_dir = out / "fixed";
    const auto fixed = cmd_cross_eval(x);
    x.recalibrate = true;
    x.out_dir = out / "recal";
    const auto recal = cmd_cross_eval(x);
    CHECK(slurp(out / "fixed" / "scores_test.csv") == slurp(out / "recal" / "scores_test.csv"));
    CHECK(fixed.reports[0].threshold_source != recal.reports[0].threshold_source);
    x.checkpoint = out / "absent.bin";
    CHECK_THROWS_AS(cmd_cross_eval(x), PipelineError);
  }

  TEST_CASE("without a domain shift the cross ACER tracks the intra ACER") {
    TempDir dir("same_law");
    SynthConfig c;
    c.n_subjects = 10;
    c.frames_per_subject = 2;
    c.domain_shift = 0.0;
    c.out_dir = dir.path();
    const SynthPair pair = generate_pair(c);
    cmd_prepare({pair.a_dir / "manifest.csv", std::nullopt, dir / "cache_a", {}});
    cmd_prepare({pair.b_dir / "manifest.csv", std::nullopt, dir / "cache_b", {}});
    TrainConfig tc;
    tc.epochs = 10;
    tc.seed = 1;
    cmd_train({dir / "cache_a", "grandtest", ModelConfig{}, tc, dir / "run"});
    EvalOptions e;
    e.checkpoint = dir / "run";
    e.cache_dir = dir / "cache_a";
    e.out_dir = dir / "intra";
    const double intra = cmd_eval(e).reports[0].acer;
    CrossEvalOptions x;
    x.checkpoint = dir / "run";
    x.cache_dir = dir / "cache_b";
    x.out_dir = dir / "cross";
    const double cross = cmd_cross_eval(x).reports[0].acer;
    CHECK_MESSAGE(std::abs(cross - intra) <= 2.0, "intra " << intra << " cross " << cross);
  }
}
