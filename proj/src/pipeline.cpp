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

#include "padkit/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "padkit/rng.hpp"

namespace padkit {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr std::string_view kVersion = "0.1.0";

fs::path default_cache_root() {
  if (const char* env = std::getenv("PADKIT_CACHE_DIR"); env && *env) return fs::path(env);
  return fs::path("padkit_cache");
}

fs::path default_cache_dir(const fs::path& manifest) {
  const fs::path abs = fs::absolute(manifest).lexically_normal();
  const std::string parent = abs.parent_path().filename().string();
  return default_cache_root() / ((parent.empty() ? std::string() : parent + "-") + abs.stem().string());
}

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PipelineError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PipelineError("cannot write '" + path.string() + "'");
  out << text;
}

/// Leaves the file untouched when the content is already identical.
void write_text_if_changed(const fs::path& path, const std::string& text) {
  if (fs::exists(path) && read_text(path) == text) return;
  write_text(path, text);
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("cannot read '" + path.string() + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::string fold_dir_name(int fold) { return "fold_" + std::to_string(fold); }

}  // namespace

// ---------------------------------------------------------------------------
// run.json

RunRecord::RunRecord(fs::path dir, std::string command, json parameters) : dir_(std::move(dir)) {
  doc_ = {{"command", std::move(command)},
          {"padkit_version", std::string(kVersion)},
          {"status", "running"},
          {"parameters", std::move(parameters)},
          {"inputs", json::object()},
          {"outputs", json::object()}};
}

void RunRecord::add_input(const std::string& name, const fs::path& path) {
  doc_["inputs"][name] = {{"path", path.string()}, {"fnv1a64", hex64(hash_file(path))}};
}

void RunRecord::add_output(const std::string& name, const fs::path& path) {
  doc_["outputs"][name] = {{"path", path.lexically_relative(dir_).string()}, {"fnv1a64", hex64(hash_file(path))}};
}

void RunRecord::set(const std::string& key, json value) { doc_[key] = std::move(value); }

void RunRecord::begin() {
  doc_["status"] = "running";
  write();
}

void RunRecord::complete() {
  doc_["status"] = "completed";
  write();
}

void RunRecord::write() const { write_text(dir_ / "run.json", doc_.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Face cache

FaceCache FaceCache::open(const fs::path& dir) {
  FaceCache cache;
  cache.dir_ = dir;
  if (!fs::exists(dir / "index.csv") || !fs::exists(dir / "manifest.csv")) {
    throw PipelineError("'" + dir.string() + "' is not a prepared face cache (run `padkit prepare` first)");
  }
  cache.manifest_ = load_manifest(dir / "manifest.csv");
  std::map<std::string, const SampleRecord*> records;
  for (const auto& r : cache.manifest_.records) records[r.sample_id] = &r;
  const auto lines = read_lines(dir / "index.csv");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::vector<std::string> f;
    std::stringstream ss(lines[i]);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 4) throw PipelineError("malformed cache index line " + std::to_string(i + 1));
    const auto it = records.find(f[0]);
    if (it == records.end()) throw PipelineError("cache index names unknown sample '" + f[0] + "'");
    cache.by_id_[f[0]] = cache.entries_.size();
    cache.entries_.push_back(CacheEntry{*it->second, f[1], f[2], f[3]});
  }
  return cache;
}

const CacheEntry& FaceCache::entry(const std::string& sample_id) const {
  const auto it = by_id_.find(sample_id);
  if (it == by_id_.end()) throw PipelineError("sample '" + sample_id + "' is not in the cache");
  return entries_[it->second];
}

std::vector<std::string> FaceCache::protocols() const {
  std::vector<std::string> out;
  if (!fs::is_directory(dir_ / "splits")) return out;
  for (const auto& e : fs::directory_iterator(dir_ / "splits")) {
    if (e.is_directory()) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> FaceCache::folds(const std::string& protocol) const {
  const fs::path root = dir_ / "splits" / protocol;
  if (!fs::is_directory(root)) throw PipelineError("protocol '" + protocol + "' is not prepared in this cache");
  std::vector<int> out;
  for (const auto& e : fs::directory_iterator(root)) {
    const std::string name = e.path().filename().string();
    if (e.is_directory() && name.rfind("fold_", 0) == 0) out.push_back(std::stoi(name.substr(5)));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<const CacheEntry*> FaceCache::split(const std::string& protocol, std::optional<int> fold,
                                                const std::string& role) const {
  std::vector<const CacheEntry*> out;
  if (role == "all") {
    for (const auto& e : entries_) out.push_back(&e);
    return out;
  }
  if (role != "train" && role != "dev" && role != "test") {
    throw PipelineError("unknown split '" + role + "' (expected train, dev, test or all)");
  }
  fs::path path = dir_ / "splits" / protocol;
  if (!fs::is_directory(path)) throw PipelineError("protocol '" + protocol + "' is not prepared in this cache");
  if (fold) path /= fold_dir_name(*fold);
  path /= role + ".txt";
  for (const auto& id : read_lines(path)) out.push_back(&entry(id));
  return out;
}

AlignedFace FaceCache::load_face(const CacheEntry& e) const {
  AlignedFace face;
  face.pixels = read_png(dir_ / e.face_path);
  face.label = e.record.label;
  face.pai = e.record.pai;
  face.subject_id = e.record.subject_id;
  face.sample_id = e.record.sample_id;
  return face;
}

std::vector<AlignedFace> FaceCache::load_faces(const std::vector<const CacheEntry*>& list) const {
  std::vector<AlignedFace> out;
  out.reserve(list.size());
  for (const CacheEntry* e : list) out.push_back(load_face(*e));
  return out;
}

// ---------------------------------------------------------------------------
// prepare

namespace {

fs::path frame_file(const fs::path& root, const SampleRecord& r) {
  fs::path media = r.media_path;
  if (media.is_relative()) media = root / media;
  if (fs::is_directory(media)) {
    std::vector<fs::path> frames;
    for (const auto& e : fs::directory_iterator(media)) {
      if (e.is_regular_file() && e.path().extension() == ".png") frames.push_back(e.path());
    }
    std::sort(frames.begin(), frames.end());
    if (r.frame_index < 0 || r.frame_index >= static_cast<int>(frames.size())) {
      throw PipelineError("sample '" + r.sample_id + "': frame " + std::to_string(r.frame_index) + " not found in '" +
                          media.string() + "'");
    }
    return frames[static_cast<std::size_t>(r.frame_index)];
  }
  if (!fs::is_regular_file(media)) {
    throw PipelineError("sample '" + r.sample_id + "': media '" + media.string() + "' not found");
  }
  return media;
}

std::uint64_t record_hash(const SampleRecord& r, std::uint64_t seed) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%s|%s|%d|%.17g|%.17g|%.17g|%.17g", r.sample_id.c_str(), r.media_path.c_str(),
                r.frame_index, r.left_eye.x, r.left_eye.y, r.right_eye.x, r.right_eye.y);
  const std::string s = buf;
  return fnv1a64(std::as_bytes(std::span(s.data(), s.size())), seed);
}

std::string join_ids(const std::vector<SampleRecord>& records) {
  std::string out;
  for (const auto& r : records) out += r.sample_id + "\n";
  return out;
}

}  // namespace

PrepareResult cmd_prepare(const PrepareOptions& options, std::ostream* log) {
  PrepareResult result;
  const DatasetManifest manifest = load_manifest(options.manifest);
  const ProtocolConfig protocols =
      options.protocol_config ? ProtocolConfig::load(*options.protocol_config) : ProtocolConfig::grandtest();
  std::map<std::string, std::vector<SplitSet>> listings;
  for (const auto& [name, _] : protocols.protocols) listings[name] = split_protocol(manifest, name, protocols);

  result.cache_dir = options.cache_dir.empty() ? default_cache_dir(options.manifest) : options.cache_dir;
  const fs::path& cache = result.cache_dir;
  const fs::path media_root = options.media_root.empty() ? options.manifest.parent_path() : options.media_root;
  fs::create_directories(cache / "faces");

  RunRecord run(cache, "prepare",
                {{"manifest", options.manifest.string()},
                 {"protocol", options.protocol_config ? options.protocol_config->string() : std::string("grandtest")},
                 {"media_root", media_root.string()}});
  run.add_input("manifest", options.manifest);
  if (options.protocol_config) run.add_input("protocol", *options.protocol_config);
  run.begin();

  std::map<std::string, std::vector<std::string>> previous;
  if (fs::exists(cache / "index.csv")) {
    const auto lines = read_lines(cache / "index.csv");
    for (std::size_t i = 1; i < lines.size(); ++i) {
      std::vector<std::string> f;
      std::stringstream ss(lines[i]);
      std::string field;
      while (std::getline(ss, field, ',')) f.push_back(field);
      if (f.size() == 4) previous[f[0]] = f;
    }
  }

  const ImageDirectorySource source(media_root);
  std::string index = "sample_id,face_path,face_hash,source_hash\n";
  for (const auto& r : manifest.records) {
    const std::string source_hash = hex64(record_hash(r, hash_file(frame_file(media_root, r))));
    const std::string face_rel = "faces/" + r.sample_id + ".png";
    const fs::path face_path = cache / face_rel;
    std::string face_hash;
    const auto prev = previous.find(r.sample_id);
    if (prev != previous.end() && prev->second[3] == source_hash && prev->second[1] == face_rel &&
        fs::exists(face_path) && hex64(hash_file(face_path)) == prev->second[2]) {
      face_hash = prev->second[2];
      ++result.n_reused;
    } else {
      const AlignedFace face = align_record(source, r);
      write_png(face_path, face.pixels);
      face_hash = hex64(hash_file(face_path));
      ++result.n_written;
    }
    index += r.sample_id + "," + face_rel + "," + face_hash + "," + source_hash + "\n";
    ++result.n_records;
  }

  {
    const fs::path tmp = cache / "manifest.csv.tmp";
    write_manifest(tmp, manifest);
    write_text_if_changed(cache / "manifest.csv", read_text(tmp));
    fs::remove(tmp);
  }
  write_text_if_changed(cache / "index.csv", index);
  write_text_if_changed(cache / "protocols.json", protocols.to_json() + "\n");
  for (const auto& [name, sets] : listings) {
    for (const auto& set : sets) {
      fs::path dir = cache / "splits" / name;
      if (set.fold) dir /= fold_dir_name(*set.fold);
      write_text_if_changed(dir / "train.txt", join_ids(set.train));
      write_text_if_changed(dir / "dev.txt", join_ids(set.dev));
      write_text_if_changed(dir / "test.txt", join_ids(set.test));
    }
  }
  if (log) {
    *log << "prepared " << result.n_records << " faces in " << cache.string() << " (" << result.n_written
         << " aligned, " << result.n_reused << " reused)\n";
  }
  run.set("summary", {{"records", result.n_records}, {"written", result.n_written}, {"reused", result.n_reused}});
  run.add_output("index", cache / "index.csv");
  run.complete();
  return result;
}

// ---------------------------------------------------------------------------
// stitch-preview

std::string label_map_text(const LabelMap& map) {
  std::string out;
  for (int r = 0; r < kMapSize; ++r) {
    for (int c = 0; c < kMapSize; ++c) {
      if (c) out += ' ';
      out += static_cast<char>('0' + map.at(r, c));
    }
    out += '\n';
  }
  return out;
}

LabelMap parse_label_map_text(const std::string& text) {
  LabelMap map;
  std::istringstream in(text);
  for (auto& v : map.values) {
    int x = -1;
    if (!(in >> x) || (x != 0 && x != 1)) throw PipelineError("label map text must hold 196 values of 0 or 1");
    v = static_cast<std::uint8_t>(x);
  }
  std::string rest;
  if (in >> rest) throw PipelineError("label map text has trailing content");
  return map;
}

json provenance_json(const StitchedSample& sample) {
  json slots = json::array();
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      const PatchRef& ref = sample.provenance[static_cast<std::size_t>(r * kGridSize + c)];
      slots.push_back({{"slot_row", r},
                       {"slot_col", c},
                       {"source_sample_id", ref.source_sample_id},
                       {"grid_row", ref.grid_row},
                       {"grid_col", ref.grid_col},
                       {"label", std::string(to_string(ref.label))}});
    }
  }
  return {{"mirrored", sample.mirrored}, {"slots", slots}};
}

void cmd_stitch_preview(const PreviewOptions& options) {
  if (options.n <= 0) throw PipelineError("--n must be positive");
  const FaceCache cache = FaceCache::open(options.cache_dir);
  const auto list = options.protocol ? cache.split(*options.protocol, std::nullopt, "train") : cache.split("", {}, "all");
  if (list.empty()) throw PipelineError("the face cache is empty");
  RunRecord run(options.out_dir, "stitch-preview",
                {{"cache", options.cache_dir.string()},
                 {"protocol", options.protocol ? json(*options.protocol) : json(nullptr)},
                 {"stitch", std::string(to_string(options.strategy))},
                 {"bona_fide_fraction", options.bona_fide_fraction},
                 {"seed", options.seed},
                 {"n", options.n}});
  run.begin();
  std::vector<PatchGrid> pool;
  for (const CacheEntry* e : list) pool.push_back(decompose(cache.load_face(*e)));
  const StitchPolicy policy{options.bona_fide_fraction};
  for (int i = 0; i < options.n; ++i) {
    Rng rng(derive_seed(options.seed, {kStreamPreview, static_cast<std::uint64_t>(i)}));
    const StitchedSample s = stitch(options.strategy, pool, rng, policy);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "preview_%03d", i);
    const fs::path base = options.out_dir / stem;
    write_png(base.string() + ".png", s.pixels);
    write_text(base.string() + "_labels.txt", label_map_text(s.label_map));
    Image labels(kMapSize, kMapSize, 1);
    for (std::size_t k = 0; k < s.label_map.values.size(); ++k) labels.data[k] = s.label_map.values[k];
    write_png(base.string() + "_labels.png", labels);
    write_text(base.string() + "_provenance.json", provenance_json(s).dump(2) + "\n");
    run.add_output(std::string(stem), base.string() + ".png");
  }
  run.complete();
}

// ---------------------------------------------------------------------------
// train

namespace {

class TeeBuf : public std::streambuf {
 public:
  TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

 protected:
  int overflow(int c) override {
    if (c == EOF) return !EOF;
    const int ra = a_->sputc(static_cast<char>(c));
    const int rb = b_ ? b_->sputc(static_cast<char>(c)) : c;
    return ra == EOF || rb == EOF ? EOF : c;
  }
  int sync() override {
    const int ra = a_->pubsync();
    const int rb = b_ ? b_->pubsync() : 0;
    return ra == 0 && rb == 0 ? 0 : -1;
  }

 private:
  std::streambuf* a_;
  std::streambuf* b_;
};

std::vector<std::optional<int>> split_sets(const FaceCache& cache, const std::string& protocol) {
  std::vector<std::optional<int>> out;
  const auto folds = cache.folds(protocol);
  if (folds.empty()) {
    out.emplace_back(std::nullopt);
  } else {
    out.assign(folds.begin(), folds.end());
  }
  return out;
}

}  // namespace

TrainRunResult cmd_train(const TrainOptions& options, std::ostream* log) {
  options.train.validate();
  const FaceCache cache = FaceCache::open(options.cache_dir);
  TrainRunResult result;
  result.run_dir = options.out_dir;
  result.folds = split_sets(cache, options.protocol);

  RunRecord run(options.out_dir, "train",
                {{"cache", options.cache_dir.string()},
                 {"protocol", options.protocol},
                 {"model", options.model.to_json()},
                 {"train", options.train.to_json()}});
  run.set("seeds", {{"seed", options.train.seed},
                    {"model_init", derive_seed(options.model.seed, {kStreamInit})},
                    {"model_seed", options.model.seed}});
  run.add_input("cache_index", options.cache_dir / "index.csv");
  if (!options.model.pretrained_weights.empty()) run.add_input("pretrained_weights", options.model.pretrained_weights);
  run.begin();

  for (const auto& fold : result.folds) {
    const fs::path dir = fold ? options.out_dir / fold_dir_name(*fold) : options.out_dir;
    fs::create_directories(dir);
    const auto train_faces = cache.load_faces(cache.split(options.protocol, fold, "train"));
    const auto dev_faces = cache.load_faces(cache.split(options.protocol, fold, "dev"));
    Model model = Model::build(options.model);
    TrainConfig cfg = options.train;
    cfg.checkpoint_dir = dir;
    std::ofstream log_file(dir / "train.log", std::ios::trunc);
    TeeBuf tee(log_file.rdbuf(), log ? log->rdbuf() : nullptr);
    std::ostream out(&tee);
    const TrainResult r = train(model, train_faces, dev_faces, cfg, TrainHooks{&out, {}});
    out.flush();
    result.states.push_back(r.state);
    const std::string tag = fold ? fold_dir_name(*fold) + "/" : std::string();
    run.add_output(tag + "best.bin", dir / "best.bin");
    run.add_output(tag + "train.log", dir / "train.log");
  }
  run.complete();
  return result;
}

// ---------------------------------------------------------------------------
// eval / cross-eval / metrics

namespace {

std::vector<ScoreRecord> score_entries(const Model& model, const FaceCache& cache,
                                       const std::vector<const CacheEntry*>& list, bool per_video,
                                       VideoAggregation aggregation, int batch_size) {
  std::vector<ScoreRecord> records;
  records.reserve(list.size());
  const std::size_t chunk = 256;
  for (std::size_t start = 0; start < list.size(); start += chunk) {
    const std::vector<const CacheEntry*> part(list.begin() + static_cast<std::ptrdiff_t>(start),
                                              list.begin() + static_cast<std::ptrdiff_t>(std::min(list.size(), start + chunk)));
    const auto faces = cache.load_faces(part);
    for (auto& r : score_records(model, faces, batch_size)) records.push_back(std::move(r));
  }
  if (!per_video) return records;
  std::vector<std::string> keys;
  keys.reserve(list.size());
  for (const CacheEntry* e : list) keys.push_back(e->record.media_path);
  return aggregate_per_video(records, keys, aggregation);
}

fs::path resolve_single_checkpoint(const fs::path& path) {
  if (fs::is_regular_file(path)) return path;
  if (fs::is_directory(path) && fs::is_regular_file(path / "best.bin")) return path / "best.bin";
  throw PipelineError("checkpoint '" + path.string() + "' not found");
}

std::vector<std::pair<std::optional<int>, fs::path>> resolve_checkpoints(const fs::path& path,
                                                                         const std::vector<std::optional<int>>& sets) {
  std::vector<std::pair<std::optional<int>, fs::path>> out;
  if (sets.size() == 1 && !sets.front()) {
    out.emplace_back(std::nullopt, resolve_single_checkpoint(path));
    return out;
  }
  if (!fs::is_directory(path)) {
    throw PipelineError("a folded protocol needs a run directory with fold_<k>/best.bin, got '" + path.string() + "'");
  }
  for (const auto& fold : sets) {
    const fs::path p = path / fold_dir_name(*fold) / "best.bin";
    if (!fs::is_regular_file(p)) throw PipelineError("checkpoint '" + p.string() + "' not found");
    out.emplace_back(fold, p);
  }
  return out;
}

void write_report(const fs::path& dir, const json& j, const std::string& text, RunRecord* run) {
  if (dir.empty()) return;
  write_text(dir / "metrics.json", j.dump(2) + "\n");
  write_text(dir / "metrics.txt", text);
  if (run) {
    run->add_output("metrics.json", dir / "metrics.json");
    run->add_output("metrics.txt", dir / "metrics.txt");
  }
}

json eval_parameters(const fs::path& checkpoint, const fs::path& cache, const std::string& protocol,
                     const std::string& split, bool per_video, VideoAggregation agg, ApcerConvention apcer) {
  return {{"checkpoint", checkpoint.string()},   {"cache", cache.string()},
          {"protocol", protocol},                {"split", split},
          {"per_video", per_video},              {"video_aggregation", std::string(to_string(agg))},
          {"apcer", std::string(to_string(apcer))}};
}

}  // namespace

EvalResult cmd_eval(const EvalOptions& options) {
  const FaceCache cache = FaceCache::open(options.cache_dir);
  const auto sets = split_sets(cache, options.protocol);
  const auto checkpoints = resolve_checkpoints(options.checkpoint, sets);
  RunRecord run(options.out_dir, "eval",
                eval_parameters(options.checkpoint, options.cache_dir, options.protocol, options.split,
                                options.per_video, options.video_aggregation, options.apcer));
  run.add_input("cache_index", options.cache_dir / "index.csv");
  for (const auto& [fold, path] : checkpoints) {
    run.add_input(fold ? fold_dir_name(*fold) + "/checkpoint" : std::string("checkpoint"), path);
  }
  run.begin();

  EvalResult result;
  EvaluateOptions eopts{options.apcer, cache.manifest().pai_vocabulary};
  for (const auto& [fold, path] : checkpoints) {
    const Model model = load_checkpoint(path);
    const auto dev = score_entries(model, cache, cache.split(options.protocol, fold, "dev"), options.per_video,
                                   options.video_aggregation, options.batch_size);
    const auto test = score_entries(model, cache, cache.split(options.protocol, fold, options.split),
                                    options.per_video, options.video_aggregation, options.batch_size);
    const EerResult eer = eer_threshold(dev);
    MetricsReport report = evaluate(test, eer.threshold, eopts);
    report.eer_dev = eer.eer;
    report.threshold_source = "dev_eer";
    const fs::path dir = fold ? options.out_dir / fold_dir_name(*fold) : options.out_dir;
    write_scores(dir / "scores_dev.csv", dev);
    write_scores(dir / ("scores_" + options.split + ".csv"), test);
    const std::string tag = fold ? fold_dir_name(*fold) + "/" : std::string();
    run.add_output(tag + "scores_dev.csv", dir / "scores_dev.csv");
    run.add_output(tag + "scores_" + options.split + ".csv", dir / ("scores_" + options.split + ".csv"));
    if (fold) write_report(dir, to_json(report), render_table(report), nullptr);
    result.reports.push_back(std::move(report));
  }
  if (checkpoints.size() == 1 && !checkpoints.front().first) {
    result.text = render_table(result.reports.front());
    write_report(options.out_dir, to_json(result.reports.front()), result.text, &run);
  } else {
    result.folded = aggregate_folds(result.reports);
    result.text = render_table(*result.folded);
    write_report(options.out_dir, to_json(*result.folded), result.text, &run);
  }
  run.complete();
  return result;
}

EvalResult cmd_cross_eval(const CrossEvalOptions& options) {
  const fs::path path = resolve_single_checkpoint(options.checkpoint);
  const FaceCache cache = FaceCache::open(options.cache_dir);
  if (!cache.folds(options.protocol).empty()) {
    throw PipelineError("cross-eval expects a single-split protocol on the target cache");
  }
  RunRecord run(options.out_dir, "cross-eval",
                eval_parameters(options.checkpoint, options.cache_dir, options.protocol, options.split,
                                options.per_video, options.video_aggregation, options.apcer));
  run.parameters()["recalibrate"] = options.recalibrate;
  run.add_input("checkpoint", path);
  run.add_input("cache_index", options.cache_dir / "index.csv");
  run.begin();

  Checkpoint meta;
  const Model model = load_checkpoint(path, &meta);
  const auto test = score_entries(model, cache, cache.split(options.protocol, std::nullopt, options.split),
                                  options.per_video, options.video_aggregation, options.batch_size);
  double threshold = 0.0;
  std::optional<double> eer_dev;
  std::string source;
  if (options.recalibrate) {
    const auto dev = score_entries(model, cache, cache.split(options.protocol, std::nullopt, "dev"),
                                   options.per_video, options.video_aggregation, options.batch_size);
    const EerResult eer = eer_threshold(dev);
    threshold = eer.threshold;
    eer_dev = eer.eer;
    source = "target_dev_eer";
    write_scores(options.out_dir / "scores_dev.csv", dev);
    run.add_output("scores_dev.csv", options.out_dir / "scores_dev.csv");
  } else {
    if (!meta.metrics.contains("dev_threshold")) {
      throw PipelineError("checkpoint '" + path.string() + "' records no dev threshold; use --recalibrate");
    }
    threshold = meta.metrics["dev_threshold"].get<double>();
    eer_dev = meta.dev_eer_at_save;
    source = "source_dev_eer";
  }
  MetricsReport report = evaluate(test, threshold, {options.apcer, cache.manifest().pai_vocabulary});
  report.eer_dev = eer_dev;
  report.threshold_source = source;
  const fs::path scores = options.out_dir / ("scores_" + options.split + ".csv");
  write_scores(scores, test);
  run.add_output("scores_" + options.split + ".csv", scores);

  EvalResult result;
  result.text = render_table(report);
  write_report(options.out_dir, to_json(report), result.text, &run);
  result.reports.push_back(std::move(report));
  run.complete();
  return result;
}

EvalResult cmd_metrics(const MetricsOptions& options) {
  const auto test = read_scores(options.scores);
  double threshold = 0.0;
  std::optional<double> eer_dev;
  std::string source;
  if (options.threshold) {
    threshold = *options.threshold;
    source = "fixed";
  } else if (options.dev_scores) {
    const EerResult eer = eer_threshold(read_scores(*options.dev_scores));
    threshold = eer.threshold;
    eer_dev = eer.eer;
    source = "dev_eer";
  } else {
    throw PipelineError("metrics needs --dev-scores or --threshold");
  }
  std::unique_ptr<RunRecord> run;
  if (!options.out_dir.empty()) {
    run = std::make_unique<RunRecord>(options.out_dir, "metrics",
                                      json{{"scores", options.scores.string()},
                                           {"dev_scores", options.dev_scores ? json(options.dev_scores->string())
                                                                             : json(nullptr)},
                                           {"threshold", options.threshold ? json(*options.threshold) : json(nullptr)},
                                           {"apcer", std::string(to_string(options.apcer))}});
    run->add_input("scores", options.scores);
    if (options.dev_scores) run->add_input("dev_scores", *options.dev_scores);
    run->begin();
  }
  MetricsReport report = evaluate(test, threshold, {options.apcer, {}});
  report.eer_dev = eer_dev;
  report.threshold_source = source;
  EvalResult result;
  result.text = render_table(report);
  write_report(options.out_dir, to_json(report), result.text, run.get());
  result.reports.push_back(std::move(report));
  if (run) run->complete();
  return result;
}

// ---------------------------------------------------------------------------
// cross-compare

CrossCompareResult cmd_cross_compare(const CrossCompareOptions& options, std::ostream* log) {
  struct Variant {
    const char* name;
    StitchStrategy strategy;
    double unstitched_fraction;
  };
  static constexpr Variant kVariants[] = {{"stitched-random", StitchStrategy::random, 0.0},
                                          {"stitched-controlled", StitchStrategy::controlled, 0.0},
                                          {"unstitched", StitchStrategy::random, 1.0}};
  FaceCache::open(options.source_cache);
  FaceCache::open(options.target_cache);
  RunRecord run(options.out_dir, "cross-compare",
                {{"source_cache", options.source_cache.string()},
                 {"target_cache", options.target_cache.string()},
                 {"protocol", options.protocol},
                 {"model", options.model.to_json()},
                 {"train", options.train.to_json()}});
  run.add_input("source_index", options.source_cache / "index.csv");
  run.add_input("target_index", options.target_cache / "index.csv");
  run.begin();

  CrossCompareResult result;
  json rows = json::array();
  for (const Variant& v : kVariants) {
    if (log) *log << "== " << v.name << '\n';
    const fs::path dir = options.out_dir / v.name;
    TrainOptions topts{options.source_cache, options.protocol, options.model, options.train, dir / "train"};
    topts.train.stitch_strategy = v.strategy;
    topts.train.unstitched_fraction = v.unstitched_fraction;
    cmd_train(topts, log);
    EvalOptions eopts;
    eopts.checkpoint = dir / "train";
    eopts.cache_dir = options.source_cache;
    eopts.protocol = options.protocol;
    eopts.out_dir = dir / "eval_source";
    const EvalResult intra = cmd_eval(eopts);
    CrossEvalOptions copts;
    copts.checkpoint = dir / "train";
    copts.cache_dir = options.target_cache;
    copts.protocol = options.protocol;
    copts.out_dir = dir / "eval_target";
    const EvalResult cross = cmd_cross_eval(copts);
    const double intra_acer =
        intra.folded ? intra.folded->summary.at("acer").mean : intra.reports.front().acer;
    result.rows.push_back({v.name, intra_acer, cross.reports.front().acer});
    rows.push_back({{"name", v.name},
                    {"intra_acer", intra_acer},
                    {"cross_acer", cross.reports.front().acer},
                    {"cross_hter", cross.reports.front().hter}});
  }
  const auto name_of = [](const fs::path& p) {
    const fs::path n = fs::absolute(p).lexically_normal();
    return (n.has_filename() ? n.filename() : n.parent_path().filename()).string();
  };
  const std::string src = name_of(options.source_cache);
  const std::string dst = name_of(options.target_cache);
  result.table = render_comparison(result.rows, src, dst);
  write_text(options.out_dir / "comparison.txt", result.table);
  write_text(options.out_dir / "comparison.json", json{{"source", src}, {"target", dst}, {"rows", rows}}.dump(2) + "\n");
  run.add_output("comparison.txt", options.out_dir / "comparison.txt");
  run.add_output("comparison.json", options.out_dir / "comparison.json");
  run.complete();
  return result;
}

}  // namespace padkit
