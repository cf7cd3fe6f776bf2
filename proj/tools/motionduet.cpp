#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "motionduet/errors.hpp"
#include "motionduet/metrics.hpp"
#include "motionduet/motion_io.hpp"
#include "motionduet/numkit/tensor.hpp"
#include "motionduet/pipeline.hpp"
#include "motionduet/pose_clean.hpp"
#include "motionduet/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace motionduet;

namespace {

constexpr const char* kConfigEnv = "MOTIONDUET_CONFIG";

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
};

pipeline::RunConfig resolveConfig(const Common& c) {
  std::string path = c.config;
  if (path.empty()) {
    if (const char* env = std::getenv(kConfigEnv); env != nullptr && *env != '\0') path = env;
  }
  pipeline::RunConfig cfg = path.empty() ? pipeline::RunConfig{} : pipeline::RunConfig::load(path);
  if (c.seed) cfg.overrideSeed(*c.seed);
  cfg.validate();
  return cfg;
}

void addCommon(CLI::App* cmd, Common& c, bool seedFlag = true) {
  cmd->add_option("--config", c.config, std::string("JSON run config (default: $") + kConfigEnv + " or built-in defaults)");
  if (seedFlag) cmd->add_option("--seed", c.seed, "Override every seed in the config");
}

void writeJson(const fs::path& path, const json& doc) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
}

struct GuidanceFlags {
  std::string guidance;
  std::string perturb;
  std::optional<double> strength;
  std::optional<double> omega;
};

void addGuidance(CLI::App* cmd, GuidanceFlags& g) {
  cmd->add_option("--guidance", g.guidance, "none|cfg|dual_cfg|auto (default: config)");
  cmd->add_option("--perturb", g.perturb, "Auto-guidance perturbation: dropout|gaussian");
  cmd->add_option("--strength", g.strength, "Perturbation strength in [0, 1]");
  cmd->add_option("--omega", g.omega, "Guidance weight");
}

guidance::GuidanceSpec resolveGuidance(const pipeline::RunConfig& cfg, const GuidanceFlags& g) {
  guidance::GuidanceSpec spec = cfg.guidance;
  if (!g.guidance.empty()) spec.mode = guidance::parseMode(g.guidance);
  if (!g.perturb.empty()) spec.perturbation.kind = guidance::parseKind(g.perturb);
  if (g.strength) spec.perturbation.strength = *g.strength;
  if (g.omega) spec.omega = *g.omega;
  spec.validate();
  return spec;
}

bool parseConditionMode(const std::string& mode) {
  if (mode == "text") return false;
  if (mode == "dual") return true;
  throw UsageError("unknown --mode '" + mode + "' (expected text|dual)");
}

// ---- synth ------------------------------------------------------------

int runSynth(const Common& c, const std::string& out) {
  const auto cfg = resolveConfig(c);
  const auto data = pipeline::buildDataset(cfg);
  pipeline::saveDataset(out, data);
  writeJson(fs::path(out) / "config.json", cfg.toJson());
  std::cout << "wrote " << data.motions.size() << " motions to " << out << '\n';
  return 0;
}

// ---- clean ------------------------------------------------------------

int runClean(const Common& c, const std::string& input, const std::string& reportPath) {
  const auto cfg = resolveConfig(c);
  std::vector<fs::path> files;
  if (fs::is_directory(input)) {
    for (const auto& e : fs::directory_iterator(input))
      if (e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    if (!fs::exists(input)) throw FormatError("input " + input + " does not exist");
    files.push_back(input);
  }
  json videos = json::array();
  std::size_t accepted = 0;
  for (const auto& f : files) {
    auto report = pose::videoValidity(pose::readLandmarksJsonl(f), cfg.clean);
    report.path = f.filename().string();
    accepted += report.accepted ? 1 : 0;
    videos.push_back(pose::toJson(report));
  }
  writeJson(reportPath, {{"config", cfg.clean.toJson()},
                         {"videos", videos},
                         {"accepted", accepted},
                         {"rejected", files.size() - accepted}});
  std::cout << accepted << "/" << files.size() << " videos accepted\n";
  return 0;
}

// ---- train ------------------------------------------------------------

int runTrain(const Common& c, const std::string& dataDir, const std::string& outDir, bool resume) {
  const auto cfg = resolveConfig(c);
  const pipeline::Dataset data = dataDir.empty() ? pipeline::buildDataset(cfg) : pipeline::loadDataset(dataDir);
  const fs::path ckptPath = fs::path(outDir) / "model.ckpt";
  const fs::path logPath = fs::path(outDir) / "train_log.jsonl";
  fs::create_directories(outDir);

  std::optional<pipeline::Checkpoint> ck;
  std::vector<std::string> keptLog;
  if (resume) {
    if (!fs::exists(ckptPath)) throw UsageError("--resume: no checkpoint at " + ckptPath.string());
    ck.emplace(pipeline::loadCheckpoint(ckptPath));
    std::ifstream in(logPath);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (json::parse(line).at("step").get<std::size_t>() <= ck->step) keptLog.push_back(line);
    }
  } else {
    ck.emplace(pipeline::Checkpoint{diffusion::Model::create(cfg.modelConfig()), {}, 0});
    ck->model.fitNormalization(data.motions);
  }
  const auto tcfg = cfg.trainConfig();
  if (resume) std::cout << "resuming at step " << ck->step << '\n';
  diffusion::Adam adam(tcfg.beta1, tcfg.beta2, tcfg.epsilon, tcfg.weightDecay);
  adam.firstMoments() = std::move(ck->adam.firstMoments());
  adam.secondMoments() = std::move(ck->adam.secondMoments());
  adam.setIterations(ck->adam.iterations());
  ck->adam = std::move(adam);
  const auto examples = pipeline::trainingExamples(ck->model, data);

  std::ofstream log(logPath, std::ios::trunc);
  if (!log) throw FormatError("cannot open " + logPath.string());
  for (const auto& l : keptLog) log << l << '\n';
  std::size_t last = ck->step;
  diffusion::train(ck->model, examples, tcfg, ck->adam, ck->step, [&](const diffusion::StepLosses& l) {
    log << json{{"step", l.step}, {"l_mld", l.mld}, {"l_dash", l.dash}, {"l_total", l.total}}.dump() << '\n';
    last = l.step;
  });
  log.close();
  pipeline::saveCheckpoint(ckptPath, ck->model, ck->adam, last);
  std::cout << "trained to step " << last << "; checkpoint " << ckptPath.string() << '\n';
  return 0;
}

// ---- sample -----------------------------------------------------------

int runSample(const Common& c, const std::string& ckptPath, const std::string& mode, const GuidanceFlags& gf,
              std::uint64_t seed, const std::string& out, int label, std::size_t count, const std::string& videoPath) {
  const auto cfg = resolveConfig(c);
  auto ck = pipeline::loadCheckpoint(ckptPath);
  const bool withVideo = parseConditionMode(mode);
  const auto spec = resolveGuidance(cfg, gf);
  if (!videoPath.empty() && !withVideo) throw UsageError("--video requires --mode dual");
  if (count == 0) throw UsageError("--count must be positive");

  if (count == 1) {
    auto condition = pipeline::conditionForLabel(cfg, label, withVideo && videoPath.empty(), seed);
    if (!videoPath.empty()) {
      const auto motion = io::readMotionFile(videoPath);
      const auto map = synthdata::GapMap::create(motion.dims(), cfg.duet.videoWidth, cfg.data.videoSeed,
                                                 cfg.data.videoStride);
      condition.video = synthdata::videoFeatures(motion, map);
    }
    auto result = diffusion::sample(ck.model, condition, spec, seed);
    result.motion.label = label;
    result.motion.fps = cfg.data.synth.fps;
    io::writeMotionFile(out, result.motion);
    std::cout << "wrote " << out << '\n';
    return 0;
  }
  if (!videoPath.empty()) throw UsageError("--video supports --count 1 only");
  const auto gen = pipeline::generate(ck.model, cfg, spec, withVideo, count, seed);
  pipeline::saveDataset(out, gen.data);
  std::cout << "wrote " << count << " samples to " << out << '\n';
  return 0;
}

// ---- eval -------------------------------------------------------------

int runEval(const Common& c, const std::string& ckptPath, const std::string& dataDir, const std::string& reportPath,
            const std::string& generatedDir, const std::string& mode, const GuidanceFlags& gf,
            const std::vector<std::uint64_t>& sampleSeeds) {
  const auto cfg = resolveConfig(c);
  const auto real = pipeline::loadDataset(dataDir);
  const bool withVideo = parseConditionMode(mode);
  std::optional<pipeline::Checkpoint> ck;
  if (!ckptPath.empty()) ck.emplace(pipeline::loadCheckpoint(ckptPath));
  if (generatedDir.empty() && !ck) throw UsageError("eval needs --ckpt or --generated");
  const auto spec = resolveGuidance(cfg, gf);

  auto generatedFor = [&](std::uint64_t seed) {
    return pipeline::generate(ck->model, cfg, spec, withVideo, cfg.metrics.samples, seed).data;
  };
  const pipeline::Dataset generated =
      generatedDir.empty() ? generatedFor(sampleSeeds.empty() ? cfg.metrics.sampleSeed : sampleSeeds.front())
                           : pipeline::loadDataset(generatedDir);
  json report = metrics::evaluate(pipeline::evalInput(cfg, real, generated), cfg.metrics.eval);

  if (sampleSeeds.size() > 1) {
    if (!ck || !generatedDir.empty()) throw UsageError("--sample-seeds needs --ckpt and no --generated");
    // Fidelity per sampling seed, for the across-seed variance of guidance.
    const auto fx = metrics::FeatureExtractor::create(cfg.data.synth.dims, cfg.metrics.eval.extractorSeed,
                                                      cfg.metrics.eval.featureDim, cfg.metrics.eval.segments);
    const auto realSummary = metrics::GaussianSummary::fromSamples(fx.batch(real.motions));
    std::vector<double> fids;
    for (std::size_t i = 0; i < sampleSeeds.size(); ++i) {
      const auto gen = i == 0 ? generated : generatedFor(sampleSeeds[i]);
      fids.push_back(metrics::fid(realSummary, metrics::GaussianSummary::fromSamples(fx.batch(gen.motions))));
    }
    double mean = 0.0;
    for (double f : fids) mean += f / static_cast<double>(fids.size());
    double var = 0.0;
    for (double f : fids) var += (f - mean) * (f - mean) / static_cast<double>(fids.size() - 1);
    report["stability"] = {{"sample_seeds", sampleSeeds}, {"fid", fids}, {"mean", mean}, {"variance", var}};
  }
  writeJson(reportPath, report);
  std::cout << "fid " << report["fid"]["mean"].get<double>() << " top3 "
            << report["r_precision_top3"]["mean"].get<double>() << "; report " << reportPath << '\n';
  return 0;
}

// ---- gradcheck --------------------------------------------------------

int runGradcheck(const std::string& fault, std::size_t points, std::uint64_t seed) {
  verify::SuiteOptions opt;
  opt.points = points;
  opt.seed = seed;
  if (fault == "pair_sign") opt.flipPairSign = true;
  else if (!fault.empty()) throw UsageError("unknown --inject-fault '" + fault + "' (expected pair_sign)");
  const auto start = std::chrono::steady_clock::now();
  const auto results = verify::runGradcheckSuite(opt);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  bool ok = true;
  for (const auto& r : results) {
    char line[160];
    std::snprintf(line, sizeof line, "%s %-24s points=%zu max_rel_err=%.3e", r.passed ? "PASS" : "FAIL",
                  r.name.c_str(), r.points, r.maxRelError);
    std::cout << line << '\n';
    ok = ok && r.passed;
  }
  std::cout << (ok ? "gradcheck passed" : "gradcheck FAILED") << " in " << secs << " s\n";
  return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video+text conditioned motion diffusion toolkit"};
  app.require_subcommand(1);

  Common common;

  std::string synthOut;
  auto* synth = app.add_subcommand("synth", "Synthesize the toy motion dataset with condition features");
  addCommon(synth, common);
  synth->add_option("--out", synthOut, "Output directory")->required();

  std::string cleanInput, cleanReport;
  auto* clean = app.add_subcommand("clean", "Score pose-landmark sequences for geometric validity");
  addCommon(clean, common);
  clean->add_option("--input", cleanInput, "Landmark JSONL file or directory of them")->required();
  clean->add_option("--report", cleanReport, "Report JSON path")->required();

  std::string trainData, trainOut = "run";
  bool resume = false;
  auto* trainCmd = app.add_subcommand("train", "Train the toy diffusion model");
  addCommon(trainCmd, common);
  trainCmd->add_option("--data", trainData, "Dataset directory from `synth` (default: synthesize in memory)");
  trainCmd->add_option("--out", trainOut, "Output directory for model.ckpt and train_log.jsonl");
  trainCmd->add_flag("--resume", resume, "Continue from <out>/model.ckpt");

  std::string sampleCkpt, sampleMode = "text", sampleOut, sampleVideo;
  std::uint64_t sampleSeed = 0;
  int sampleLabel = 0;
  std::size_t sampleCount = 1;
  GuidanceFlags sampleGuidance;
  auto* sampleCmd = app.add_subcommand("sample", "Generate motion from a checkpoint");
  addCommon(sampleCmd, common, false);
  sampleCmd->add_option("--ckpt", sampleCkpt, "Checkpoint file")->required();
  sampleCmd->add_option("--mode", sampleMode, "text|dual");
  addGuidance(sampleCmd, sampleGuidance);
  sampleCmd->add_option("--seed", sampleSeed, "Sampling seed (trajectory noise, perturbation and video draw)");
  sampleCmd->add_option("--out", sampleOut, "Motion file (count 1) or dataset directory")->required();
  sampleCmd->add_option("--label", sampleLabel, "Class label of the text condition");
  sampleCmd->add_option("--count", sampleCount, "Number of samples");
  sampleCmd->add_option("--video", sampleVideo, "Motion file whose surrogate video features condition the sample");

  std::string evalCkpt, evalData, evalReport, evalGenerated, evalMode = "text";
  std::vector<std::uint64_t> evalSeeds;
  GuidanceFlags evalGuidance;
  auto* evalCmd = app.add_subcommand("eval", "Compute FID, diversity, multimodality, MM Dist and R-precision");
  addCommon(evalCmd, common);
  evalCmd->add_option("--ckpt", evalCkpt, "Checkpoint to sample from");
  evalCmd->add_option("--data", evalData, "Real dataset directory")->required();
  evalCmd->add_option("--report", evalReport, "Report JSON path")->required();
  evalCmd->add_option("--generated", evalGenerated, "Evaluate this dataset directory instead of sampling");
  evalCmd->add_option("--mode", evalMode, "text|dual conditioning when sampling");
  evalCmd->add_option("--sample-seeds", evalSeeds, "Sampling seeds; more than one adds a stability section")
      ->delimiter(',');
  addGuidance(evalCmd, evalGuidance);

  std::string fault;
  std::size_t gcPoints = 10;
  std::uint64_t gcSeed = 2024;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of all analytic gradients");
  gc->add_option("--inject-fault", fault, "Deliberately break a gradient (pair_sign)");
  gc->add_option("--points", gcPoints, "Random points per check");
  gc->add_option("--seed", gcSeed, "Seed for the random points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*synth) return runSynth(common, synthOut);
    if (*clean) return runClean(common, cleanInput, cleanReport);
    if (*trainCmd) return runTrain(common, trainData, trainOut, resume);
    if (*sampleCmd) {
      return runSample(common, sampleCkpt, sampleMode, sampleGuidance, sampleSeed, sampleOut, sampleLabel, sampleCount,
                       sampleVideo);
    }
    if (*evalCmd) {
      return runEval(common, evalCkpt, evalData, evalReport, evalGenerated, evalMode, evalGuidance, evalSeeds);
    }
    if (*gc) return runGradcheck(fault, gcPoints, gcSeed);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const numkit::NonFiniteError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::out_of_range& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
