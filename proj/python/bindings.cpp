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


#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "padkit/metrics.hpp"
#include "padkit/model.hpp"
#include "padkit/patcher.hpp"
#include "padkit/pipeline.hpp"
#include "padkit/rng.hpp"
#include "padkit/scorer.hpp"
#include "padkit/synthdata.hpp"
#include "padkit/trainer.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace padkit;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

std::vector<Image> to_images(const FloatArray& batch) {
  if (batch.ndim() != 4 || batch.shape(3) != kChannels) {
    throw py::value_error("expected an (N, H, W, 3) float array");
  }
  const auto n = batch.shape(0), h = batch.shape(1), w = batch.shape(2);
  std::vector<Image> images;
  images.reserve(static_cast<std::size_t>(n));
  const float* src = batch.data();
  const std::size_t per = static_cast<std::size_t>(h * w * kChannels);
  for (py::ssize_t i = 0; i < n; ++i) {
    Image img(static_cast<int>(h), static_cast<int>(w));
    std::memcpy(img.data.data(), src + i * per, per * sizeof(float));
    images.push_back(std::move(img));
  }
  return images;
}

FloatArray from_image(const Image& img) {
  FloatArray out({img.height, img.width, img.channels});
  std::memcpy(out.mutable_data(), img.data.data(), img.data.size() * sizeof(float));
  return out;
}

py::array_t<std::uint8_t> from_label_map(const LabelMap& map) {
  py::array_t<std::uint8_t> out({kMapSize, kMapSize});
  std::memcpy(out.mutable_data(), map.values.data(), map.values.size());
  return out;
}

py::dict eer_dict(const EerResult& r) {
  py::dict d;
  d["threshold"] = r.threshold;
  d["eer"] = r.eer;
  d["far"] = r.far;
  d["frr"] = r.frr;
  return d;
}

py::dict eval_dict(const EvalResult& r) {
  py::dict d;
  py::list reports;
  for (const auto& rep : r.reports) reports.append(to_python(to_json(rep)));
  d["reports"] = reports;
  d["folded"] = r.folded ? to_python(to_json(*r.folded)) : py::none();
  d["text"] = r.text;
  return d;
}

ModelConfig model_config(const std::string& backbone, std::uint64_t seed, const std::string& pretrained_weights,
                         int dense_prefix_layers, std::array<int, 4> tiny_widths) {
  ModelConfig c;
  c.backbone = parse_backbone(backbone);
  c.seed = seed;
  c.pretrained = !pretrained_weights.empty();
  c.pretrained_weights = pretrained_weights;
  c.dense_prefix_layers = dense_prefix_layers;
  c.tiny_widths = tiny_widths;
  return c;
}

class PyModel {
 public:
  explicit PyModel(Model model) : model_(std::move(model)) {}

  py::array_t<float> predict(const FloatArray& batch) const {
    const auto images = to_images(batch);
    std::vector<ProbabilityMap> maps;
    {
      py::gil_scoped_release release;
      maps = model_.predict(images);
    }
    py::array_t<float> out({static_cast<py::ssize_t>(maps.size()), py::ssize_t{kMapSize}, py::ssize_t{kMapSize}});
    float* dst = out.mutable_data();
    for (const auto& m : maps) {
      std::memcpy(dst, m.values.data(), m.values.size() * sizeof(float));
      dst += m.values.size();
    }
    return out;
  }

  std::vector<double> score(const FloatArray& batch) const {
    const auto images = to_images(batch);
    py::gil_scoped_release release;
    std::vector<double> scores;
    for (const auto& m : model_.predict(images)) scores.push_back(score_map(m));
    return scores;
  }

  py::dict state_dict() {
    py::dict d;
    for (auto& [name, p] : model_.parameters()) {
      std::vector<py::ssize_t> shape(p->shape.begin(), p->shape.end());
      py::array_t<float> a(shape);
      std::memcpy(a.mutable_data(), p->value.data(), p->value.size() * sizeof(float));
      d[py::str(name)] = a;
    }
    return d;
  }

  void load_state_dict(const py::dict& arrays, bool strict) {
    std::vector<NamedArray> named;
    for (auto& [name, p] : model_.parameters()) {
      if (!arrays.contains(name)) {
        if (strict) throw ModelError("state dict lacks '" + name + "'");
        continue;
      }
      const auto a = arrays[py::str(name)].cast<FloatArray>();
      NamedArray na{name, std::vector<int>(a.shape(), a.shape() + a.ndim()), {}};
      na.values.assign(a.data(), a.data() + a.size());
      named.push_back(std::move(na));
    }
    if (strict) {
      load_parameters(model_, named);
      return;
    }
    for (auto& [name, p] : model_.parameters()) {
      for (const auto& na : named) {
        if (na.name != name) continue;
        if (na.shape != p->shape) throw ModelError("tensor '" + name + "' has the wrong shape");
        p->value.assign(na.values.begin(), na.values.end());
      }
    }
  }

  void save(const fs::path& path, int training_epoch, double dev_eer) {
    save_checkpoint(path, make_checkpoint(model_, training_epoch, dev_eer));
  }

  std::size_t trainable_parameter_count() { return model_.trainable_parameter_count(); }
  std::string backbone() const { return std::string(to_string(model_.config().backbone)); }
  py::object config() const { return to_python(model_.config().to_json()); }

 private:
  Model model_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Patch-stitching presentation attack detection: native core.";

  static py::exception<Error> padkit_error(m, "PadkitError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(padkit_error, e.what());
    }
  });

  m.attr("FACE_SIZE") = kFaceSize;
  m.attr("GRID_SIZE") = kGridSize;
  m.attr("PATCH_SIZE") = kPatchSize;
  m.attr("MAP_SIZE") = kMapSize;

  m.def("derive_seed", [](std::uint64_t base, const std::vector<std::uint64_t>& path) {
    std::uint64_t s = base;
    for (auto tag : path) s = derive_seed(s, {tag});
    return s;
  }, py::arg("base"), py::arg("path"), "Folds each tag of `path` into `base`, one level at a time.");

  // Metrics ------------------------------------------------------------------

  py::class_<ScoreRecord>(m, "ScoreRecord")
      .def(py::init([](std::string sample_id, std::string subject_id, double score, const std::string& label,
                       std::string pai) {
             ScoreRecord r{std::move(sample_id), std::move(subject_id), score, parse_label(label), std::move(pai)};
             if (r.label == Label::bona_fide) r.pai = kBonaFidePai;
             return r;
           }),
           py::arg("sample_id"), py::arg("subject_id"), py::arg("score"), py::arg("label"),
           py::arg("pai") = std::string(kBonaFidePai))
      .def_readwrite("sample_id", &ScoreRecord::sample_id)
      .def_readwrite("subject_id", &ScoreRecord::subject_id)
      .def_readwrite("score", &ScoreRecord::score)
      .def_property("label", [](const ScoreRecord& r) { return std::string(to_string(r.label)); },
                    [](ScoreRecord& r, const std::string& v) { r.label = parse_label(v); })
      .def_readwrite("pai", &ScoreRecord::pai)
      .def("__repr__", [](const ScoreRecord& r) {
        std::ostringstream os;
        os << "ScoreRecord(" << r.sample_id << ", score=" << r.score << ", " << to_string(r.label) << ", " << r.pai
           << ")";
        return os.str();
      });

  m.def("eer_threshold", [](const std::vector<ScoreRecord>& dev) { return eer_dict(eer_threshold(dev)); },
        py::arg("dev_scores"), "EER operating point of a dev score set; rates in percent.");

  m.def("evaluate",
        [](const std::vector<ScoreRecord>& test, double threshold, const std::string& apcer,
           const std::vector<std::string>& pai_vocabulary) {
          EvaluateOptions o;
          o.apcer = parse_apcer_convention(apcer);
          o.pai_vocabulary = pai_vocabulary;
          return to_python(to_json(evaluate(test, threshold, o)));
        },
        py::arg("test_scores"), py::arg("threshold"), py::arg("apcer") = "max",
        py::arg("pai_vocabulary") = std::vector<std::string>{},
        "APCER, BPCER, ACER, FAR, FRR and HTER at a fixed threshold.");

  m.def("read_scores", &read_scores, py::arg("path"));
  m.def("write_scores", [](const fs::path& path, const std::vector<ScoreRecord>& r) { write_scores(path, r); },
        py::arg("path"), py::arg("records"));

  // Training math ------------------------------------------------------------

  m.def("pixelwise_bce",
        [](const FloatArray& pred, const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& target) {
          if (pred.ndim() != 3 || pred.shape(1) != kMapSize || pred.shape(2) != kMapSize) {
            throw py::value_error("pred must have shape (N, 14, 14)");
          }
          if (target.ndim() != 3 || target.shape(0) != pred.shape(0) || target.shape(1) != kMapSize ||
              target.shape(2) != kMapSize) {
            throw py::value_error("target must match pred");
          }
          const auto n = static_cast<std::size_t>(pred.shape(0));
          std::vector<ProbabilityMap> p(n);
          std::vector<LabelMap> t(n);
          for (std::size_t i = 0; i < n; ++i) {
            std::memcpy(p[i].values.data(), pred.data() + i * kMapSize * kMapSize, sizeof(p[i].values));
            std::memcpy(t[i].values.data(), target.data() + i * kMapSize * kMapSize, sizeof(t[i].values));
          }
          return pixelwise_bce(p, t);
        },
        py::arg("pred"), py::arg("target"), "Mean binary cross-entropy over every map cell.");

  m.def("lr_at_epoch",
        [](int epoch, double initial_lr, int halving_period) {
          TrainConfig c;
          c.initial_lr = initial_lr;
          c.lr_halving_period_epochs = halving_period;
          return lr_at_epoch(c, epoch);
        },
        py::arg("epoch"), py::arg("initial_lr") = 0.001, py::arg("halving_period") = 10);

  m.def("score_map",
        [](const FloatArray& map) {
          if (map.ndim() != 2 || map.shape(0) != kMapSize || map.shape(1) != kMapSize) {
            throw py::value_error("map must have shape (14, 14)");
          }
          ProbabilityMap pm;
          std::memcpy(pm.values.data(), map.data(), sizeof(pm.values));
          return score_map(pm);
        },
        py::arg("map"));

  // Stitching ----------------------------------------------------------------

  m.def("stitch",
        [](const FloatArray& faces, const std::vector<std::string>& labels, const std::string& strategy,
           double bona_fide_fraction, std::uint64_t seed) {
          const auto images = to_images(faces);
          if (labels.size() != images.size()) throw py::value_error("one label per face");
          std::vector<PatchGrid> pool;
          for (std::size_t i = 0; i < images.size(); ++i) {
            AlignedFace f;
            f.pixels = images[i];
            f.label = parse_label(labels[i]);
            f.sample_id = "face" + std::to_string(i);
            pool.push_back(decompose(f));
          }
          Rng rng(seed);
          const auto s = stitch(parse_stitch_strategy(strategy), pool, rng, StitchPolicy{bona_fide_fraction});
          py::dict d;
          d["pixels"] = from_image(s.pixels);
          d["label_map"] = from_label_map(s.label_map);
          d["provenance"] = to_python(provenance_json(s));
          return d;
        },
        py::arg("faces"), py::arg("labels"), py::arg("strategy") = "random", py::arg("bona_fide_fraction") = 0.5,
        py::arg("seed") = 0, "Stitches one 224x224 composite from a pool of aligned faces.");

  // Model --------------------------------------------------------------------

  py::class_<PyModel>(m, "Model")
      .def(py::init([](const std::string& backbone, std::uint64_t seed, const std::string& pretrained_weights,
                       int dense_prefix_layers, std::array<int, 4> tiny_widths) {
             return PyModel(Model::build(
                 model_config(backbone, seed, pretrained_weights, dense_prefix_layers, tiny_widths)));
           }),
           py::arg("backbone") = "tiny", py::arg("seed") = 0, py::arg("pretrained_weights") = "",
           py::arg("dense_prefix_layers") = 8, py::arg("tiny_widths") = std::array<int, 4>{16, 32, 48, 64})
      .def_static("load", [](const fs::path& path) { return PyModel(load_checkpoint(path)); }, py::arg("path"))
      .def_property_readonly("backbone", &PyModel::backbone)
      .def_property_readonly("config", &PyModel::config)
      .def("predict", &PyModel::predict, py::arg("images"),
           "(N, 224, 224, 3) floats in [0, 1] to (N, 14, 14) bona fide probabilities.")
      .def("score", &PyModel::score, py::arg("images"), "Mean map value per image.")
      .def("state_dict", &PyModel::state_dict)
      .def("load_state_dict", &PyModel::load_state_dict, py::arg("arrays"), py::arg("strict") = true)
      .def("trainable_parameter_count", &PyModel::trainable_parameter_count)
      .def("save", &PyModel::save, py::arg("path"), py::arg("training_epoch") = -1, py::arg("dev_eer") = -1.0);

  m.def("save_weights",
        [](const fs::path& path, const py::dict& arrays) {
          std::vector<NamedArray> named;
          for (const auto& [key, value] : arrays) {
            const auto a = value.cast<FloatArray>();
            NamedArray na{key.cast<std::string>(), std::vector<int>(a.shape(), a.shape() + a.ndim()), {}};
            na.values.assign(a.data(), a.data() + a.size());
            named.push_back(std::move(na));
          }
          save_weights(path, named);
        },
        py::arg("path"), py::arg("arrays"), "Writes a backbone weight container from name -> float array.");

  // Pipeline -----------------------------------------------------------------

  m.def("synth_generate",
        [](const fs::path& out_dir, int n_subjects, int frames_per_subject, const std::vector<std::string>& attack_pais,
           double texture_strength, double domain_shift, double noise_sigma, int n_folds, std::uint64_t seed,
           bool pair) {
          SynthConfig c;
          c.out_dir = out_dir;
          c.n_subjects = n_subjects;
          c.frames_per_subject = frames_per_subject;
          c.attack_pais = attack_pais;
          c.texture_strength = texture_strength;
          c.domain_shift = domain_shift;
          c.noise_sigma = noise_sigma;
          c.n_folds = n_folds;
          c.seed = seed;
          py::gil_scoped_release release;
          if (pair) {
            const auto p = generate_pair(c);
            return std::vector<fs::path>{p.a_dir / "manifest.csv", p.b_dir / "manifest.csv"};
          }
          generate(c);
          return std::vector<fs::path>{out_dir / "manifest.csv"};
        },
        py::arg("out_dir"), py::arg("n_subjects") = 20, py::arg("frames_per_subject") = 4,
        py::arg("attack_pais") = std::vector<std::string>{"print", "replay"}, py::arg("texture_strength") = 0.3,
        py::arg("domain_shift") = 0.0, py::arg("noise_sigma") = 0.02, py::arg("n_folds") = 5, py::arg("seed") = 7,
        py::arg("pair") = false, "Writes a synthetic corpus; returns the manifest path(s).");

  m.def("prepare",
        [](const fs::path& manifest, const std::optional<fs::path>& cache_dir, std::optional<fs::path> protocol_config,
           const std::optional<fs::path>& media_root) {
          PrepareOptions o{manifest, std::move(protocol_config), cache_dir.value_or(fs::path()),
                           media_root.value_or(fs::path())};
          PrepareResult r;
          {
            py::gil_scoped_release release;
            r = cmd_prepare(o);
          }
          py::dict d;
          d["cache_dir"] = r.cache_dir;
          d["n_records"] = r.n_records;
          d["n_written"] = r.n_written;
          d["n_reused"] = r.n_reused;
          return d;
        },
        py::arg("manifest"), py::arg("cache_dir") = py::none(), py::arg("protocol_config") = py::none(),
        py::arg("media_root") = py::none(), "Aligns every manifest record into a face cache.");

  m.def("train",
        [](const fs::path& cache_dir, const fs::path& out_dir, const std::string& protocol,
           const std::string& backbone, const std::string& pretrained_weights, int epochs, int batch_size,
           double lr, std::uint64_t seed, const std::string& stitch_strategy, double bona_fide_fraction,
           double unstitched_fraction, const std::string& stitch_pool, const std::string& augment_stage,
           bool augment) {
          TrainOptions o;
          o.cache_dir = cache_dir;
          o.out_dir = out_dir;
          o.protocol = protocol;
          o.model = model_config(backbone, seed, pretrained_weights, 8, {16, 32, 48, 64});
          o.train.seed = seed;
          o.train.epochs = epochs;
          o.train.batch_size = batch_size;
          o.train.initial_lr = lr;
          o.train.stitch_strategy = parse_stitch_strategy(stitch_strategy);
          o.train.stitch_policy.bona_fide_fraction = bona_fide_fraction;
          o.train.unstitched_fraction = unstitched_fraction;
          o.train.stitch_pool = parse_stitch_pool(stitch_pool);
          o.train.augment_stage = parse_augment_stage(augment_stage);
          if (!augment) o.train.augment = AugmentConfig{0.0, 0.0, 0.0, 0.0};
          TrainRunResult r;
          {
            py::gil_scoped_release release;
            r = cmd_train(o);
          }
          py::list runs;
          for (std::size_t i = 0; i < r.states.size(); ++i) {
            const auto& s = r.states[i];
            py::dict d;
            d["fold"] = r.folds[i] ? py::cast(*r.folds[i]) : py::none();
            d["best_epoch"] = s.best_epoch;
            d["best_dev_eer"] = s.best_dev_eer;
            py::list history;
            for (const auto& e : s.history) history.append(to_python(e.to_json()));
            d["history"] = history;
            runs.append(d);
          }
          return runs;
        },
        py::arg("cache_dir"), py::arg("out_dir"), py::arg("protocol") = "grandtest", py::arg("backbone") = "tiny",
        py::arg("pretrained_weights") = "", py::arg("epochs") = 30, py::arg("batch_size") = 32,
        py::arg("lr") = 0.001, py::arg("seed") = 0, py::arg("stitch_strategy") = "random",
        py::arg("bona_fide_fraction") = 0.5, py::arg("unstitched_fraction") = 0.0, py::arg("stitch_pool") = "batch",
        py::arg("augment_stage") = "composite", py::arg("augment") = true,
        "Trains on a prepared cache; one entry per fold with the epoch history.");

  m.def("evaluate_checkpoint",
        [](const fs::path& checkpoint, const fs::path& cache_dir, const std::string& protocol,
           const std::string& split, bool per_video, const std::string& aggregation, const std::string& apcer,
           const std::optional<fs::path>& out, bool cross, bool recalibrate) {
          const fs::path out_dir = out.value_or(fs::path());
          EvalResult r;
          if (cross) {
            CrossEvalOptions o;
            o.checkpoint = checkpoint;
            o.cache_dir = cache_dir;
            o.protocol = protocol;
            o.split = split;
            o.recalibrate = recalibrate;
            o.per_video = per_video;
            o.video_aggregation = parse_video_aggregation(aggregation);
            o.apcer = parse_apcer_convention(apcer);
            o.out_dir = out_dir;
            py::gil_scoped_release release;
            r = cmd_cross_eval(o);
          } else {
            EvalOptions o;
            o.checkpoint = checkpoint;
            o.cache_dir = cache_dir;
            o.protocol = protocol;
            o.split = split;
            o.per_video = per_video;
            o.video_aggregation = parse_video_aggregation(aggregation);
            o.apcer = parse_apcer_convention(apcer);
            o.out_dir = out_dir;
            py::gil_scoped_release release;
            r = cmd_eval(o);
          }
          return eval_dict(r);
        },
        py::arg("checkpoint"), py::arg("cache_dir"), py::arg("protocol") = "grandtest", py::arg("split") = "test",
        py::arg("per_video") = false, py::arg("aggregation") = "mean", py::arg("apcer") = "max",
        py::arg("out_dir") = py::none(), py::arg("cross") = false, py::arg("recalibrate") = false,
        "Dev-EER threshold, then rates on `split`. cross=True keeps the checkpoint's source threshold.");

  m.def("metrics_from_scores",
        [](const fs::path& scores, std::optional<fs::path> dev_scores, std::optional<double> threshold,
           const std::string& apcer, const std::optional<fs::path>& out_dir) {
          MetricsOptions o{scores, std::move(dev_scores), threshold, parse_apcer_convention(apcer),
                           out_dir.value_or(fs::path())};
          return eval_dict(cmd_metrics(o));
        },
        py::arg("scores"), py::arg("dev_scores") = py::none(), py::arg("threshold") = py::none(),
        py::arg("apcer") = "max", py::arg("out_dir") = py::none());
}
