// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.
//
//   motionduet_acceptance --cli <path to motionduet> --work <scratch dir> [--only 1,4,9]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "motionduet/diffusion.hpp"
#include "motionduet/metrics.hpp"
#include "motionduet/numkit/ops.hpp"
#include "motionduet/pipeline.hpp"
#include "motionduet/pose_clean.hpp"
#include "motionduet/verify.hpp"

namespace fs = std::filesystem;
namespace nk = motionduet::numkit;
namespace pl = motionduet::pipeline;
namespace df = motionduet::diffusion;
namespace gd = motionduet::guidance;
namespace mt = motionduet::metrics;
namespace pose = motionduet::pose;
using nk::Rng;
using nk::Tensor;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Env {
  fs::path cli;
  fs::path work;
  fs::path fixtures;
};

using Clock = std::chrono::steady_clock;

double secondsSince(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream o;
  o.precision(precision);
  o << v;
  return o.str();
}

void progress(const std::string& msg) { std::cerr << "  .. " << msg << std::endl; }

int run(const std::string& cmd) {
  progress(cmd);
  const int rc = std::system((cmd + " > /dev/null").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void writeJson(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2) << '\n'; }

json readJson(const fs::path& p) { return json::parse(std::ifstream(p)); }

// ---- 1 ----------------------------------------------------------------

Outcome gradientFidelity(const Env&) {
  const auto t0 = Clock::now();
  motionduet::verify::SuiteOptions opt;  // 10 points, tolerance 1e-5
  const auto results = motionduet::verify::runGradcheckSuite(opt);
  const double secs = secondsSince(t0);
  const std::set<std::string> required{"dash.token", "dash.pair", "dash.total", "duet.fourier_w_even",
                                       "duet.fourier_w_odd", "duet.conv_kernel", "denoiser.end_to_end"};
  bool ok = secs < 60.0;
  double worst = 0.0;
  std::set<std::string> seen;
  std::string failed;
  for (const auto& r : results) {
    seen.insert(r.name);
    worst = std::max(worst, r.maxRelError);
    if (!r.passed || r.points < 10) {
      ok = false;
      failed += " " + r.name;
    }
  }
  for (const auto& n : required) ok = ok && seen.count(n);
  return {ok, std::to_string(results.size()) + " checks, max rel err " + fmt(worst, 3) + ", " + fmt(secs, 3) + " s" +
                  (failed.empty() ? "" : ", failed:" + failed)};
}

// ---- 2 ----------------------------------------------------------------

Outcome fidOracle(const Env&) {
  Rng rng(2024);
  const std::size_t n = 50000;
  Tensor a({n, 2}), b({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    a(i, 0) = rng.normal();
    a(i, 1) = rng.normal();
    b(i, 0) = 3.0 + rng.normal();
    b(i, 1) = rng.normal();
  }
  const auto sa = mt::GaussianSummary::fromSamples(a);
  const double shifted = mt::fid(sa, mt::GaussianSummary::fromSamples(b));
  const double same = mt::fid(sa, mt::GaussianSummary::fromSamples(a));
  const bool ok = std::abs(shifted - 9.0) <= 0.05 * 9.0 && same < 1e-2;
  return {ok, "shifted " + fmt(shifted, 6) + " (target 9 +/- 5%), identical " + fmt(same, 3)};
}

// ---- 3 ----------------------------------------------------------------

double rad(double d) { return d * std::numbers::pi / 180.0; }

// Upright frame with the face at `faceDeg` and the body axis at `bodyDeg`
// from +y (both in the x-y plane), feet at `footDeg` from the hip-knee axis.
pose::LandmarkFrame frameWith(double faceDeg, double bodyDeg, double footDeg) {
  using pose::Joint;
  pose::LandmarkFrame f;
  const double bx = std::sin(rad(bodyDeg)), by = std::cos(rad(bodyDeg));
  f[Joint::LShoulder] = {-0.2 * bx, 1.5 - 0.2 * by, 0.0};
  f[Joint::RShoulder] = {0.2 * bx, 1.5 + 0.2 * by, 0.0};
  f[Joint::Nose] = {0.25 * std::sin(rad(faceDeg)), 1.5 + 0.25 * std::cos(rad(faceDeg)), 0.0};
  for (auto [hip, knee, ankle, foot, sh] :
       {std::tuple{Joint::LHip, Joint::LKnee, Joint::LAnkle, Joint::LFoot, Joint::LShoulder},
        std::tuple{Joint::RHip, Joint::RKnee, Joint::RAnkle, Joint::RFoot, Joint::RShoulder}}) {
    const auto s = f[sh];
    f[hip] = {s[0], s[1] - 0.6, 0.0};
    f[knee] = {s[0], s[1] - 1.05, 0.0};
    f[ankle] = {s[0], s[1] - 1.5, 0.0};
    // hip − knee points along +y; rotate the foot vector away from it in y-z.
    f[foot] = {s[0], s[1] - 1.5 + 0.15 * std::cos(rad(footDeg)), 0.15 * std::sin(rad(footDeg))};
  }
  return f;
}

Outcome poseExactness(const Env& env) {
  const pose::CleanConfig cfg;
  struct Case {
    double face, body, foot;
    double wantBackFace, wantHead, wantFoot;
    bool valid;
  };
  const std::vector<Case> cases{
      {25, 25, 90, 0, 25, 90, true},      // parallel body and face
      {0, 90, 90, 90, 0, 90, false},      // orthogonal body and face
      {30, 20, 90, 10, 30, 90, true},     // head exactly at the 30° threshold
      {30, 50, 90, 20, 30, 90, true},     // back-face exactly at the 20° threshold
      {40, 40, 90, 0, 40, 90, false},     // head past its threshold
      {10, 10, 75, 0, 10, 75, true},      // foot-knee exactly at 75°
      {10, 10, 74, 0, 10, 74, false},     // foot-knee just below range
      {10, 10, 180, 0, 10, 180, true},    // antiparallel foot
      {10, 10, 0, 0, 10, 0, false},       // foot along the shin axis upward
  };
  double worst = 0.0;
  bool ok = true;
  for (const auto& c : cases) {
    const auto f = frameWith(c.face, c.body, c.foot);
    const auto fk = pose::footKneeAngles(f);
    worst = std::max({worst, std::abs(pose::backFaceAngle(f) - c.wantBackFace),
                      std::abs(pose::headTiltAngle(f) - c.wantHead), std::abs(fk.left - c.wantFoot),
                      std::abs(fk.right - c.wantFoot)});
    ok = ok && pose::frameVerdict(f, cfg).valid == c.valid;
  }
  ok = ok && worst <= 1e-6;

  // Video-level decisions at ρ = 0.7 with N = 12.
  auto videoOf = [&](std::size_t bad) {
    std::vector<pose::LandmarkFrame> frames;
    for (std::size_t i = 0; i < 12; ++i) frames.push_back(i < bad ? frameWith(80, 70, 90) : frameWith(25, 40, 90));
    return pose::videoValidity(frames, cfg).accepted;
  };
  const bool videos = videoOf(3) && !videoOf(4) && videoOf(0) && !videoOf(12);
  const bool fixtures =
      pose::videoValidity(pose::readLandmarksJsonl(env.fixtures / "pose/all_valid.jsonl"), cfg).accepted &&
      !pose::videoValidity(pose::readLandmarksJsonl(env.fixtures / "pose/eight_of_twelve.jsonl"), cfg).accepted &&
      pose::videoValidity(pose::readLandmarksJsonl(env.fixtures / "pose/nine_of_twelve.jsonl"), cfg).accepted;

  // Invariance under translation and positive scaling.
  Rng rng(3);
  double drift = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    pose::LandmarkFrame f;
    for (auto& j : f.joints) j = {rng.normal(), rng.normal(), rng.normal()};
    pose::LandmarkFrame g = f;
    const double s = 0.01 + 100.0 * rng.uniform();
    const std::array<double, 3> t{100 * rng.normal(), 100 * rng.normal(), 100 * rng.normal()};
    for (auto& j : g.joints)
      for (int k = 0; k < 3; ++k) j[k] = s * j[k] + t[k];
    drift = std::max({drift, std::abs(pose::backFaceAngle(f) - pose::backFaceAngle(g)),
                      std::abs(pose::headTiltAngle(f) - pose::headTiltAngle(g)),
                      std::abs(pose::footKneeAngles(f).left - pose::footKneeAngles(g).left),
                      std::abs(pose::footKneeAngles(f).right - pose::footKneeAngles(g).right)});
  }
  ok = ok && videos && fixtures && drift <= 1e-9;
  return {ok, std::to_string(cases.size()) + " geometries, max angle err " + fmt(worst, 3) + " deg; video decisions " +
                  (videos ? "ok" : "WRONG") + "; fixtures " + (fixtures ? "ok" : "WRONG") + "; invariance drift " +
                  fmt(drift, 3) + " deg"};
}

// ---- shared toy model helpers -------------------------------------------

df::ModelConfig smallModelConfig(std::uint64_t seed) {
  df::ModelConfig mc;
  mc.duet.textTokens = 4;
  mc.duet.textWidth = 8;
  mc.duet.videoTokens = 4;
  mc.duet.videoWidth = 8;
  mc.duet.hidden = 16;
  mc.denoiser.frames = 16;
  mc.denoiser.dims = 4;
  mc.denoiser.patch = 4;
  mc.denoiser.hidden = 16;
  mc.denoiser.layers = 2;
  mc.denoiser.heads = 2;
  mc.denoiser.mlpWidth = 24;
  mc.denoiser.contextTokens = 4;
  mc.denoiser.alignWidth = 8;
  mc.diffusionSteps = 20;
  mc.alignLayer = 1;
  mc.seed = seed;
  return mc;
}

void jitter(df::Model& m, Rng& rng, double scale) {
  for (auto* p : m.parameters())
    for (auto& v : p->value.data()) v += scale * rng.normal();
}

// ---- 4 ----------------------------------------------------------------

Outcome dmmFallback(const Env&) {
  Rng rng(4);
  std::size_t tokens = 0, toText = 0;
  bool pathsMatch = true, zerosMatchAbsent = true;
  for (int trial = 0; trial < 10; ++trial) {
    auto m = df::Model::create(smallModelConfig(rng.next()));
    jitter(m, rng, 0.3);  // away from initialization, including the projection biases
    const Tensor text = nk::randomNormal({4, 8}, rng);
    nk::Tape tape(false);
    const auto out = motionduet::duet::duetForward(tape, m.duet, m.config.duet, Tensor::matrix(4, 8), text);
    tokens += out.mask.size();
    toText += static_cast<std::size_t>(std::count(out.mask.begin(), out.mask.end(), true));

    motionduet::synthdata::ConditionBundle dual{nk::randomNormal({4, 8}, rng), text, "dual"};
    motionduet::synthdata::ConditionBundle textOnly{std::nullopt, text, "text"};
    motionduet::synthdata::ConditionBundle zeros{Tensor::matrix(4, 8), text, "zeros"};
    gd::GuidanceSpec spec;
    motionduet::PathTrace a, b;
    df::sample(m, dual, spec, 11, &a);
    const auto textResult = df::sample(m, textOnly, spec, 11, &b);
    pathsMatch = pathsMatch && a.stages() == b.stages() && !a.stages().empty();
    zerosMatchAbsent = zerosMatchAbsent && df::sample(m, zeros, spec, 11).motion.values == textResult.motion.values;
  }
  const bool ok = tokens > 0 && toText == tokens && pathsMatch && zerosMatchAbsent;
  return {ok, std::to_string(toText) + "/" + std::to_string(tokens) + " tokens routed to text; stage traces " +
                  (pathsMatch ? "identical" : "DIFFER") + "; text-only equals zero-video output " +
                  (zerosMatchAbsent ? "bit-exactly" : "NOT bit-exactly")};
}

// ---- 5 ----------------------------------------------------------------

Outcome guidanceIdentities(const Env&) {
  Rng rng(5);
  bool fixed = true;
  double formGap = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor s = nk::randomNormal({16, 8}, rng);
    const Tensor w = nk::randomNormal({16, 8}, rng);
    for (double omega : {0.0, 0.75, 1.25, 6.5}) {
      fixed = fixed && gd::autoGuide(s, s, omega) == s;
      const Tensor fused = gd::cfgFused(s, w, omega);  // c + ω(c − u)
      const Tensor extrap = gd::autoGuide(s, w, omega);  // (1 + ω)s − ωw
      for (std::size_t i = 0; i < s.size(); ++i) {
        const double closed = (1.0 + omega) * s[i] - omega * w[i];
        const double scale = std::max({1.0, std::abs(s[i]) * (1 + omega), std::abs(w[i]) * omega});
        formGap = std::max({formGap, std::abs(fused[i] - extrap[i]) / scale, std::abs(extrap[i] - closed) / scale});
      }
    }
  }
  auto m = df::Model::create(smallModelConfig(55));
  jitter(m, rng, 0.2);
  motionduet::synthdata::ConditionBundle c{nk::randomNormal({4, 8}, rng), nk::randomNormal({4, 8}, rng), "c"};
  gd::GuidanceSpec none;
  none.mode = gd::Mode::none;
  gd::GuidanceSpec autoZero;
  autoZero.mode = gd::Mode::autoGuide;
  autoZero.omega = 6.5;
  autoZero.perturbation.strength = 0.0;
  bool strengthZero = true;
  for (auto kind : {gd::PerturbKind::dropout, gd::PerturbKind::gaussian}) {
    autoZero.perturbation.kind = kind;
    strengthZero = strengthZero && df::sample(m, c, autoZero, 3).motion.values == df::sample(m, c, none, 3).motion.values;
  }
  const bool ok = fixed && formGap <= 1e-15 && strengthZero;
  return {ok, std::string("fixed point ") + (fixed ? "exact" : "BROKEN") + "; form gap " + fmt(formGap, 3) +
                  " (relative); strength-0 auto-guidance " + (strengthZero ? "bit-exact" : "DIFFERS")};
}

// ---- toy training experiments (6, 7) -------------------------------------

// Reduced toy setup shared by the trend experiments; every arm gets the same
// step budget, batch and learning rate.
pl::RunConfig trendConfig(std::uint64_t seed) {
  pl::RunConfig c;
  c.data.synth.samplesPerClass = 16;
  c.data.synth.frames = 32;
  c.duet.videoTokens = 8;
  c.diffusion.layers = 2;
  c.diffusion.trainSteps = 1500;
  c.diffusion.batch = 16;
  c.diffusion.learningRate = 1e-3;
  c.diffusion.diffusionSteps = 50;
  c.metrics.eval.repeats = 5;
  c.overrideSeed(seed);
  c.validate();
  return c;
}

df::Model trainToy(const pl::RunConfig& cfg, const pl::Dataset& data) {
  auto model = df::Model::create(cfg.modelConfig());
  model.fitNormalization(data.motions);
  const auto tc = cfg.trainConfig();
  df::Adam adam(tc.beta1, tc.beta2, tc.epsilon, tc.weightDecay);
  const auto ex = pl::trainingExamples(model, data);
  df::train(model, ex, tc, adam, 0);
  return model;
}

Tensor stackRows(const std::vector<Tensor>& parts) {
  std::size_t rows = 0;
  for (const auto& p : parts) rows += p.rows();
  Tensor out({rows, parts.front().cols()});
  std::size_t r = 0;
  for (const auto& p : parts)
    for (std::size_t i = 0; i < p.rows(); ++i, ++r) std::copy(p.row(i).begin(), p.row(i).end(), out.row(r).begin());
  return out;
}

// Fréchet distance between unit-normalized aligned tokens of generated
// samples and the video tokens that conditioned them.
double alignmentFrechet(df::Model& model, const pl::RunConfig& cfg, std::uint64_t seed) {
  gd::GuidanceSpec spec;
  spec.mode = gd::Mode::none;
  const auto gen = pl::generate(model, cfg, spec, true, 32, seed);
  std::vector<Tensor> video;
  for (const auto& c : gen.data.conditions) video.push_back(*c.video);
  return mt::frechetRows(stackRows(gen.aligned), stackRows(video), true);
}

Outcome dashDirection(const Env&) {
  std::size_t wins = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    double fd[2];
    for (int arm = 0; arm < 2; ++arm) {
      auto cfg = trendConfig(seed);
      cfg.dash.lambda = arm == 0 ? 0.0 : 0.1;
      const auto data = pl::buildDataset(cfg);
      progress("criterion 6: seed " + std::to_string(seed) + " lambda " + fmt(cfg.dash.lambda));
      auto model = trainToy(cfg, data);
      fd[arm] = alignmentFrechet(model, cfg, cfg.metrics.sampleSeed);
    }
    wins += fd[1] < fd[0] ? 1 : 0;
    detail += (seed > 1 ? ", " : "") + fmt(fd[0], 3) + "->" + fmt(fd[1], 3);
  }
  return {wins >= 4, std::to_string(wins) + "/5 seeds lower with lambda 0.1 (lambda 0 -> 0.1: " + detail + ")"};
}

double toyTop3(df::Model& model, const pl::RunConfig& cfg, const pl::Dataset& real) {
  gd::GuidanceSpec spec;
  spec.mode = gd::Mode::none;
  const auto gen = pl::generate(model, cfg, spec, false, 64, cfg.metrics.sampleSeed);
  const auto report = mt::evaluate(pl::evalInput(cfg, real, gen.data), cfg.metrics.eval);
  return report["r_precision_top3"]["mean"].get<double>();
}

Outcome lambdaSweep(const Env&) {
  const std::vector<double> lambdas{0.1, 1.0, 50.0};
  std::size_t votes = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    std::vector<double> top3;
    for (double lambda : lambdas) {
      auto cfg = trendConfig(seed);
      cfg.dash.lambda = lambda;
      const auto data = pl::buildDataset(cfg);
      progress("criterion 7: seed " + std::to_string(seed) + " lambda " + fmt(lambda));
      auto model = trainToy(cfg, data);
      top3.push_back(toyTop3(model, cfg, data));
    }
    votes += top3.back() < top3.front() ? 1 : 0;
    detail += (seed > 1 ? "; " : "") + fmt(top3[0], 3) + "/" + fmt(top3[1], 3) + "/" + fmt(top3[2], 3);
  }
  return {votes >= 2, std::to_string(votes) + "/3 seeds with Top-3 at lambda 50 below lambda 0.1 (Top-3 at 0.1/1/50: " +
                          detail + ")"};
}

// ---- 9 ----------------------------------------------------------------

std::string fileBytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Relative path -> contents for every regular file under `dir`.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = fileBytes(e.path());
  return out;
}

Outcome determinism(const Env& env) {
  pl::RunConfig small;
  small.data.synth.samplesPerClass = 4;
  small.data.synth.frames = 16;
  small.duet.videoTokens = 4;
  small.diffusion.layers = 2;
  small.diffusion.trainSteps = 6;
  small.diffusion.batch = 4;
  small.diffusion.diffusionSteps = 10;
  small.metrics.samples = 16;
  small.metrics.eval.repeats = 3;
  const fs::path root = env.work / "determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  writeJson(root / "config.json", small.toJson());
  fs::create_directories(root / "landmarks");
  for (const char* f : {"all_valid.jsonl", "eight_of_twelve.jsonl", "nine_of_twelve.jsonl"})
    fs::copy_file(env.fixtures / "pose" / f, root / "landmarks" / f);

  const std::string cli = env.cli.string();
  const std::string cfg = " --config " + (root / "config.json").string();
  std::vector<std::string> commands;
  int failures = 0;
  for (const char* run_ : {"a", "b"}) {
    const fs::path d = root / run_;
    fs::create_directories(d);
    const std::string D = d.string();
    const std::vector<std::string> steps{
        cli + " synth" + cfg + " --seed 3 --out " + D + "/data",
        cli + " clean --input " + (root / "landmarks").string() + " --report " + D + "/clean.json",
        cli + " train" + cfg + " --seed 3 --data " + D + "/data --out " + D + "/run",
        cli + " sample" + cfg + " --ckpt " + D + "/run/model.ckpt --mode text --guidance auto --seed 5 --out " + D +
            "/one.bin",
        cli + " sample" + cfg + " --ckpt " + D + "/run/model.ckpt --mode dual --guidance cfg --seed 5 --count 4 --out " +
            D + "/many",
        cli + " eval" + cfg + " --ckpt " + D + "/run/model.ckpt --data " + D + "/data --report " + D +
            "/eval.json --sample-seeds 1,2",
    };
    for (const auto& s : steps) failures += run(s) != 0 ? 1 : 0;
  }
  const auto a = snapshot(root / "a");
  const auto b = snapshot(root / "b");
  std::size_t differing = 0;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != bytes) {
      ++differing;
      progress("differs: " + name);
    }
  }
  const bool ok = failures == 0 && differing == 0 && a.size() == b.size() && a.size() >= 8;
  return {ok, std::to_string(a.size()) + " output files compared, " + std::to_string(differing) + " differ, " +
                  std::to_string(failures) + " command failures"};
}

// ---- 10 and 8 -----------------------------------------------------------

fs::path pipelineDir(const Env& env) { return env.work / "pipeline"; }

Outcome deskBudget(const Env& env) {
  const fs::path root = pipelineDir(env);
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cli = env.cli.string();
  const std::string R = root.string();
  const auto t0 = Clock::now();
  int failures = 0;
  failures += run(cli + " synth --out " + R + "/data") != 0;
  const double tSynth = secondsSince(t0);
  failures += run(cli + " train --data " + R + "/data --out " + R + "/run") != 0;
  const double tTrain = secondsSince(t0);
  failures += run(cli + " sample --ckpt " + R + "/run/model.ckpt --count 256 --seed 17 --out " + R + "/generated") != 0;
  const double tSample = secondsSince(t0);
  failures += run(cli + " eval --data " + R + "/data --generated " + R + "/generated --report " + R + "/eval.json") != 0;
  const double total = secondsSince(t0);

  std::size_t generated = 0;
  double fid = NAN, top3 = NAN;
  if (failures == 0) {
    generated = readJson(R + "/generated/manifest.json").at("count").get<std::size_t>();
    const auto report = readJson(R + "/eval.json");
    fid = report["fid"]["mean"].get<double>();
    top3 = report["r_precision_top3"]["mean"].get<double>();
  }
  std::ifstream log(R + "/run/train_log.jsonl");
  std::size_t lines = 0;
  for (std::string l; std::getline(log, l);) lines += !l.empty();
  const bool ok = failures == 0 && total < 1200.0 && lines == 3000 && generated == 256;
  return {ok, "total " + fmt(total, 4) + " s (synth " + fmt(tSynth, 3) + ", train " + fmt(tTrain - tSynth, 4) +
                  ", sample " + fmt(tSample - tTrain, 4) + ", eval " + fmt(total - tSample, 3) + "); " +
                  std::to_string(lines) + " steps, " + std::to_string(generated) + " samples; FID " + fmt(fid, 4) +
                  ", Top-3 " + fmt(top3, 3)};
}

Outcome guidanceStability(const Env& env) {
  const fs::path root = pipelineDir(env);
  const fs::path ckpt = root / "run/model.ckpt";
  if (!fs::exists(ckpt)) return {false, "no toy checkpoint (criterion 10 did not produce one)"};
  pl::RunConfig cfg;
  cfg.metrics.samples = 64;
  cfg.metrics.eval.repeats = 5;
  writeJson(root / "stability.json", cfg.toJson());
  const std::string base = env.cli.string() + " eval --config " + (root / "stability.json").string() + " --ckpt " +
                           ckpt.string() + " --data " + (root / "data").string() +
                           " --guidance auto --strength 0.05 --sample-seeds 1,2,3,4,5";
  double variance[2];
  const char* kinds[2] = {"dropout", "gaussian"};
  for (int k = 0; k < 2; ++k) {
    const fs::path report = root / (std::string("stability_") + kinds[k] + ".json");
    if (run(base + " --perturb " + kinds[k] + " --report " + report.string()) != 0)
      return {false, std::string("eval failed for ") + kinds[k]};
    variance[k] = readJson(report)["stability"]["variance"].get<double>();
  }
  return {variance[0] <= variance[1], "across-seed FID variance: dropout " + fmt(variance[0], 4) + ", gaussian " +
                                          fmt(variance[1], 4)};
}

}  // namespace

int main(int argc, char** argv) {
  Env env;
  env.fixtures = MOTIONDUET_FIXTURE_DIR;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) env.cli = argv[++i];
    else if (a == "--work" && i + 1 < argc) env.work = argv[++i];
    else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    } else {
      std::cerr << "usage: " << argv[0] << " --cli <motionduet> --work <dir> [--only 1,2,...]\n";
      return 1;
    }
  }
  if (env.cli.empty() || env.work.empty()) {
    std::cerr << "--cli and --work are required\n";
    return 1;
  }
  env.cli = fs::absolute(env.cli);
  env.work = fs::absolute(env.work);
  fs::create_directories(env.work);

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome(const Env&)> fn;
  };
  // 8 reuses the checkpoint trained by 10, so 10 runs first.
  const std::vector<Criterion> order{
      {1, "gradient fidelity", gradientFidelity},   {2, "FID analytic oracle", fidOracle},
      {3, "pose-clean exactness", poseExactness},   {4, "DMM text fallback", dmmFallback},
      {5, "guidance identities", guidanceIdentities}, {6, "DASH directional effect", dashDirection},
      {7, "lambda sweep trend", lambdaSweep},        {9, "CLI determinism", determinism},
      {10, "desk-scale budget", deskBudget},         {8, "guidance stability trend", guidanceStability},
  };
  std::map<int, std::pair<std::string, Outcome>> results;
  for (const auto& c : order) {
    if (!only.empty() && !only.count(c.id)) continue;
    std::cerr << "criterion " << c.id << ": " << c.name << std::endl;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.fn(env);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cerr << "  done in " << fmt(secondsSince(t0), 4) << " s" << std::endl;
    results[c.id] = {c.name, o};
  }
  bool all = true;
  for (const auto& [id, r] : results) {
    std::cout << "criterion " << id << " " << (r.second.pass ? "PASS" : "FAIL") << " " << r.first << ": "
              << r.second.detail << std::endl;
    all = all && r.second.pass;
  }
  return all ? 0 : 1;
}
