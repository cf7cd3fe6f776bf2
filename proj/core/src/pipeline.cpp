#include "motionduet/pipeline.hpp"

#include <cstdio>
#include <fstream>

#include "motionduet/errors.hpp"
#include "motionduet/motion_io.hpp"

namespace motionduet::pipeline {

namespace nk = numkit;
using nk::Param;
using nk::Tensor;
using nlohmann::json;

namespace {

template <typename F>
void eachKey(const json& j, const std::string& section, F&& handle) {
  if (!j.is_object()) throw UsageError("config section '" + section + "' must be an object");
  for (const auto& [key, v] : j.items()) {
    if (!handle(key, v)) throw UsageError(section + " config: unknown key '" + key + "'");
  }
}

std::string indexed(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05zu.bin", prefix, i);
  return buf;
}

std::vector<double> flatten(const std::vector<nk::Tensor>& parts) {
  std::vector<double> out;
  for (const auto& t : parts) out.insert(out.end(), t.data().begin(), t.data().end());
  return out;
}

Tensor readTensor(const std::vector<float>& payload, std::size_t& offset, const nk::Shape& shape) {
  Tensor t(shape);
  if (offset + t.size() > payload.size()) throw FormatError("payload too short for tensor " + nk::shapeString(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = payload[offset + i];
  offset += t.size();
  return t;
}

}  // namespace

void RunConfig::validate() const {
  data.synth.validate();
  duet.validate();
  dash.validate();
  guidance.validate();
  clean.validate();
  metrics.eval.validate();
  if (!(data.videoFraction >= 0.0 && data.videoFraction <= 1.0)) throw UsageError("data: video_fraction must lie in [0, 1]");
  if (data.videoStride == 0) throw UsageError("data: video_stride must be positive");
  const std::size_t videoTokens = (data.synth.frames + data.videoStride - 1) / data.videoStride;
  if (videoTokens != duet.videoTokens) {
    throw UsageError("config: data yields " + std::to_string(videoTokens) + " video tokens but duet.video_tokens is " +
                     std::to_string(duet.videoTokens));
  }
  if (metrics.samples < 2) throw UsageError("metrics: samples must be >= 2");
  modelConfig().validate();
  trainConfig().validate();
}

json RunConfig::toJson() const {
  const auto& s = data.synth;
  return {{"data",
           {{"classes", s.classes},
            {"samples_per_class", s.samplesPerClass},
            {"frames", s.frames},
            {"dims", s.dims},
            {"harmonics", s.harmonics},
            {"noise", s.noise},
            {"fps", s.fps},
            {"seed", s.seed},
            {"text_seed", data.textSeed},
            {"video_seed", data.videoSeed},
            {"video_stride", data.videoStride},
            {"video_fraction", data.videoFraction}}},
          {"duet", duet.toJson()},
          {"dash", dash.toJson()},
          {"guidance", guidance.toJson()},
          {"diffusion",
           {{"diffusion_steps", diffusion.diffusionSteps},
            {"target", diffusion::targetName(diffusion.target)},
            {"patch", diffusion.patch},
            {"layers", diffusion.layers},
            {"heads", diffusion.heads},
            {"mlp_width", diffusion.mlpWidth},
            {"train_steps", diffusion.trainSteps},
            {"batch", diffusion.batch},
            {"lr", diffusion.learningRate},
            {"weight_decay", diffusion.weightDecay},
            {"video_drop_prob", diffusion.videoDropProb},
            {"context_drop_prob", diffusion.contextDropProb},
            {"seed", diffusion.seed}}},
          {"metrics",
           [&] {
             json m = metrics.eval.toJson();
             m["samples"] = metrics.samples;
             m["sample_seed"] = metrics.sampleSeed;
             return m;
           }()},
          {"clean", clean.toJson()}};
}

namespace {

RunConfig parseRunConfig(const json& j) {
  RunConfig c;
  eachKey(j, "top-level", [&](const std::string& section, const json& v) {
    if (section == "data") {
      auto& s = c.data.synth;
      eachKey(v, "data", [&](const std::string& k, const json& x) {
        if (k == "classes") s.classes = x.get<std::size_t>();
        else if (k == "samples_per_class") s.samplesPerClass = x.get<std::size_t>();
        else if (k == "frames") s.frames = x.get<std::size_t>();
        else if (k == "dims") s.dims = x.get<std::size_t>();
        else if (k == "harmonics") s.harmonics = x.get<std::size_t>();
        else if (k == "noise") s.noise = x.get<double>();
        else if (k == "fps") s.fps = x.get<double>();
        else if (k == "seed") s.seed = x.get<std::uint64_t>();
        else if (k == "text_seed") c.data.textSeed = x.get<std::uint64_t>();
        else if (k == "video_seed") c.data.videoSeed = x.get<std::uint64_t>();
        else if (k == "video_stride") c.data.videoStride = x.get<std::size_t>();
        else if (k == "video_fraction") c.data.videoFraction = x.get<double>();
        else return false;
        return true;
      });
    } else if (section == "duet") {
      c.duet = duet::DuetConfig::fromJson(v);
    } else if (section == "dash") {
      c.dash = dash::DashConfig::fromJson(v);
    } else if (section == "guidance") {
      c.guidance = guidance::GuidanceSpec::fromJson(v);
    } else if (section == "diffusion") {
      auto& d = c.diffusion;
      eachKey(v, "diffusion", [&](const std::string& k, const json& x) {
        if (k == "diffusion_steps") d.diffusionSteps = x.get<std::size_t>();
        else if (k == "target") d.target = diffusion::parseTarget(x.get<std::string>());
        else if (k == "patch") d.patch = x.get<std::size_t>();
        else if (k == "layers") d.layers = x.get<std::size_t>();
        else if (k == "heads") d.heads = x.get<std::size_t>();
        else if (k == "mlp_width") d.mlpWidth = x.get<std::size_t>();
        else if (k == "train_steps") d.trainSteps = x.get<std::size_t>();
        else if (k == "batch") d.batch = x.get<std::size_t>();
        else if (k == "lr") d.learningRate = x.get<double>();
        else if (k == "weight_decay") d.weightDecay = x.get<double>();
        else if (k == "video_drop_prob") d.videoDropProb = x.get<double>();
        else if (k == "context_drop_prob") d.contextDropProb = x.get<double>();
        else if (k == "seed") d.seed = x.get<std::uint64_t>();
        else return false;
        return true;
      });
    } else if (section == "metrics") {
      json rest = json::object();
      eachKey(v, "metrics", [&](const std::string& k, const json& x) {
        if (k == "samples") c.metrics.samples = x.get<std::size_t>();
        else if (k == "sample_seed") c.metrics.sampleSeed = x.get<std::uint64_t>();
        else rest[k] = x;
        return true;
      });
      c.metrics.eval = metrics::EvalConfig::fromJson(rest);
    } else if (section == "clean") {
      c.clean = pose::CleanConfig::fromJson(v);
    } else {
      return false;
    }
    return true;
  });
  c.validate();
  return c;
}

}  // namespace

RunConfig RunConfig::fromJson(const json& j) {
  try {
    return parseRunConfig(j);
  } catch (const json::type_error& e) {
    throw UsageError(std::string("config: wrong value type: ") + e.what());
  }
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("config " + path.string() + ": malformed JSON at byte " + std::to_string(e.byte));
  }
  return fromJson(j);
}

void RunConfig::overrideSeed(std::uint64_t seed) {
  data.synth.seed = seed;
  diffusion.seed = seed;
  metrics.eval.seed = nk::Rng::derive(seed, 1);
  metrics.sampleSeed = nk::Rng::derive(seed, 2);
}

diffusion::ModelConfig RunConfig::modelConfig() const {
  diffusion::ModelConfig m;
  m.duet = duet;
  m.denoiser.frames = data.synth.frames;
  m.denoiser.dims = data.synth.dims;
  m.denoiser.patch = diffusion.patch;
  m.denoiser.hidden = duet.hidden;
  m.denoiser.layers = diffusion.layers;
  m.denoiser.heads = diffusion.heads;
  m.denoiser.mlpWidth = diffusion.mlpWidth;
  m.denoiser.contextTokens = duet.contextTokens();
  m.denoiser.alignWidth = duet.videoWidth;
  m.diffusionSteps = diffusion.diffusionSteps;
  m.target = diffusion.target;
  m.alignLayer = dash.layer;
  m.seed = diffusion.seed;
  return m;
}

diffusion::TrainConfig RunConfig::trainConfig() const {
  diffusion::TrainConfig t;
  t.steps = diffusion.trainSteps;
  t.batch = diffusion.batch;
  t.learningRate = diffusion.learningRate;
  t.weightDecay = diffusion.weightDecay;
  t.videoDropProb = diffusion.videoDropProb;
  t.contextDropProb = diffusion.contextDropProb;
  t.seed = diffusion.seed;
  t.dash = dash;
  return t;
}

Dataset buildDataset(const RunConfig& cfg) {
  cfg.validate();
  Dataset out;
  out.motions = synthdata::synthesizeMotion(cfg.data.synth);
  const auto map = synthdata::GapMap::create(cfg.data.synth.dims, cfg.duet.videoWidth, cfg.data.videoSeed,
                                             cfg.data.videoStride);
  const synthdata::TextSpec text{cfg.data.synth.classes, cfg.duet.textTokens, cfg.duet.textWidth, cfg.data.textSeed};
  nk::Rng rng(nk::Rng::derive(cfg.data.synth.seed, 0xC0DEu));
  for (std::size_t i = 0; i < out.motions.size(); ++i) {
    const auto& m = out.motions[i];
    synthdata::ConditionBundle b;
    b.text = synthdata::textFeatures(static_cast<std::size_t>(m.label), text);
    if (rng.uniform() < cfg.data.videoFraction) b.video = synthdata::videoFeatures(m, map);
    b.sourceId = "synth:" + std::to_string(i);
    out.conditions.push_back(std::move(b));
  }
  return out;
}

void saveDataset(const fs::path& dir, const Dataset& data) {
  fs::create_directories(dir);
  json files = json::array();
  for (std::size_t i = 0; i < data.motions.size(); ++i) {
    const auto motionName = indexed("motion", i);
    const auto condName = indexed("cond", i);
    io::writeMotionFile(dir / motionName, data.motions[i]);
    const auto& c = data.conditions[i];
    std::vector<double> payload(c.text.data().begin(), c.text.data().end());
    json header = {{"kind", "condition"},
                   {"text_tokens", c.text.rows()},
                   {"text_width", c.text.cols()},
                   {"has_video", c.video.has_value()},
                   {"video_tokens", c.video ? c.video->rows() : 0},
                   {"video_width", c.video ? c.video->cols() : 0},
                   {"source", c.sourceId}};
    if (c.video) payload.insert(payload.end(), c.video->data().begin(), c.video->data().end());
    io::writeContainer(dir / condName, header, payload);
    files.push_back({{"motion", motionName}, {"condition", condName}, {"label", data.motions[i].label}});
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << json{{"count", data.motions.size()}, {"files", files}}.dump(2) << '\n';
  if (!out) throw FormatError("cannot write manifest in " + dir.string());
}

Dataset loadDataset(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw FormatError("no manifest.json in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError((dir / "manifest.json").string() + ": malformed JSON at byte " + std::to_string(e.byte));
  }
  Dataset out;
  try {
    for (const auto& f : manifest.at("files")) {
      out.motions.push_back(io::readMotionFile(dir / f.at("motion").get<std::string>()));
      const auto c = io::readContainer(dir / f.at("condition").get<std::string>(), [](const json& h) {
        return h.at("text_tokens").get<std::size_t>() * h.at("text_width").get<std::size_t>() +
               h.at("video_tokens").get<std::size_t>() * h.at("video_width").get<std::size_t>();
      });
      const auto& h = c.header;
      std::size_t offset = 0;
      synthdata::ConditionBundle b;
      b.text = readTensor(c.payload, offset, {h.at("text_tokens").get<std::size_t>(), h.at("text_width").get<std::size_t>()});
      if (h.at("has_video").get<bool>()) {
        b.video = readTensor(c.payload, offset,
                             {h.at("video_tokens").get<std::size_t>(), h.at("video_width").get<std::size_t>()});
      }
      b.sourceId = h.value("source", std::string());
      out.conditions.push_back(std::move(b));
    }
  } catch (const json::exception& e) {
    throw FormatError((dir / "manifest.json").string() + ": invalid manifest: " + e.what());
  }
  if (manifest.value("count", out.motions.size()) != out.motions.size()) {
    throw FormatError((dir / "manifest.json").string() + ": count does not match the file list");
  }
  return out;
}

std::vector<diffusion::TrainingExample> trainingExamples(const diffusion::Model& model, const Dataset& data) {
  std::vector<diffusion::TrainingExample> out;
  for (std::size_t i = 0; i < data.motions.size(); ++i) {
    out.push_back({model.normalize(data.motions[i].values), data.conditions[i]});
  }
  return out;
}

void saveCheckpoint(const fs::path& path, diffusion::Model& model, diffusion::Adam& adam, std::size_t step) {
  const auto params = model.parameters();
  json entries = json::array();
  std::vector<Tensor> parts;
  std::size_t offset = 0;
  for (const Param* p : params) {
    entries.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"offset", offset}});
    parts.push_back(p->value);
    offset += p->value.size();
  }
  const bool hasMoments = adam.firstMoments().size() == params.size();
  if (hasMoments) {
    for (const auto& m : adam.firstMoments()) parts.push_back(m);
    for (const auto& v : adam.secondMoments()) parts.push_back(v);
  }
  json header = {{"format", "motionduet-checkpoint"},
                 {"version", 1},
                 {"config", model.config.toJson()},
                 {"step", step},
                 {"normalization", {{"mean", model.latentMean.values()}, {"std", model.latentStd.values()}}},
                 {"params", entries},
                 {"param_floats", offset},
                 {"adam", {{"iterations", adam.iterations()}, {"has_moments", hasMoments}}}};
  io::writeContainer(path, header, flatten(parts));
}

Checkpoint loadCheckpoint(const fs::path& path) {
  const auto c = io::readContainer(path, [](const json& h) {
    if (h.at("format").get<std::string>() != "motionduet-checkpoint") throw FormatError("not a checkpoint");
    const std::size_t n = h.at("param_floats").get<std::size_t>();
    return h.at("adam").at("has_moments").get<bool>() ? 3 * n : n;
  });
  const json& h = c.header;
  try {
    Checkpoint ck{diffusion::Model::create(diffusion::ModelConfig::fromJson(h.at("config"))), {}, h.at("step").get<std::size_t>()};
    const auto mean = h.at("normalization").at("mean").get<std::vector<double>>();
    const auto sd = h.at("normalization").at("std").get<std::vector<double>>();
    ck.model.latentMean = Tensor({mean.size()}, mean);
    ck.model.latentStd = Tensor({sd.size()}, sd);
    const auto params = ck.model.parameters();
    const auto& entries = h.at("params");
    if (entries.size() != params.size()) {
      throw FormatError(path.string() + ": checkpoint has " + std::to_string(entries.size()) + " tensors, model expects " +
                        std::to_string(params.size()));
    }
    std::size_t offset = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (entries[i].at("name").get<std::string>() != params[i]->name ||
          entries[i].at("shape").get<nk::Shape>() != params[i]->value.shape()) {
        throw FormatError(path.string() + ": tensor " + std::to_string(i) + " (" +
                          entries[i].at("name").get<std::string>() + ") does not match parameter " + params[i]->name);
      }
      params[i]->value = readTensor(c.payload, offset, params[i]->value.shape());
    }
    if (h.at("adam").at("has_moments").get<bool>()) {
      for (const Param* p : params) ck.adam.firstMoments().push_back(readTensor(c.payload, offset, p->value.shape()));
      for (const Param* p : params) ck.adam.secondMoments().push_back(readTensor(c.payload, offset, p->value.shape()));
    }
    ck.adam.setIterations(h.at("adam").at("iterations").get<std::size_t>());
    return ck;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": invalid checkpoint header: " + e.what());
  }
}

synthdata::ConditionBundle conditionForLabel(const RunConfig& cfg, int label, bool withVideo, std::uint64_t seed) {
  if (label < 0 || static_cast<std::size_t>(label) >= cfg.data.synth.classes) {
    throw UsageError("label " + std::to_string(label) + " outside [0, " + std::to_string(cfg.data.synth.classes) + ")");
  }
  const synthdata::TextSpec text{cfg.data.synth.classes, cfg.duet.textTokens, cfg.duet.textWidth, cfg.data.textSeed};
  synthdata::ConditionBundle b;
  b.text = synthdata::textFeatures(static_cast<std::size_t>(label), text);
  b.sourceId = "label:" + std::to_string(label);
  if (withVideo) {
    synthdata::MotionSequence m{synthdata::classTemplate(cfg.data.synth, static_cast<std::size_t>(label)),
                                cfg.data.synth.fps, label};
    nk::Rng rng(seed);
    for (auto& v : m.values.data()) v += cfg.data.synth.noise * rng.normal();
    const auto map = synthdata::GapMap::create(cfg.data.synth.dims, cfg.duet.videoWidth, cfg.data.videoSeed,
                                               cfg.data.videoStride);
    b.video = synthdata::videoFeatures(m, map);
  }
  return b;
}

Generated generate(diffusion::Model& model, const RunConfig& cfg, const guidance::GuidanceSpec& spec, bool withVideo,
                   std::size_t count, std::uint64_t seed) {
  Generated out;
  const auto classes = static_cast<int>(cfg.data.synth.classes);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t s = nk::Rng::derive(seed, i);
    const int label = static_cast<int>(i) % classes;
    auto condition = conditionForLabel(cfg, label, withVideo, s);
    auto result = diffusion::sample(model, condition, spec, s);
    result.motion.label = label;
    result.motion.fps = cfg.data.synth.fps;
    out.data.motions.push_back(std::move(result.motion));
    out.data.conditions.push_back(std::move(condition));
    out.aligned.push_back(std::move(result.aligned));
  }
  return out;
}

metrics::EvalInput evalInput(const RunConfig& cfg, const Dataset& real, const Dataset& generated) {
  const auto& e = cfg.metrics.eval;
  const auto fx = metrics::FeatureExtractor::create(cfg.data.synth.dims, e.extractorSeed, e.featureDim, e.segments);
  metrics::EvalInput in;
  in.realFeatures = fx.batch(real.motions);
  in.generatedFeatures = fx.batch(generated.motions);
  std::vector<int> labels;
  for (const auto& m : generated.motions) {
    if (m.label < 0) throw FormatError("evaluation needs labelled generated motions");
    labels.push_back(m.label);
  }
  in.generatedText = metrics::textFeatures(fx, cfg.data.synth, labels);
  for (std::size_t k = 0; k < cfg.data.synth.classes; ++k) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (static_cast<std::size_t>(labels[i]) == k) rows.push_back(i);
    if (rows.size() < 2) continue;
    Tensor group({rows.size(), fx.featureDim()});
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto src = in.generatedFeatures.row(rows[r]);
      std::copy(src.begin(), src.end(), group.row(r).begin());
    }
    in.perCondition.push_back(std::move(group));
  }
  return in;
}

}  // namespace motionduet::pipeline
