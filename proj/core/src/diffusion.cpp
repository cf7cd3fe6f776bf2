#include "motionduet/diffusion.hpp"

#include <cmath>

#include "motionduet/errors.hpp"

namespace motionduet::diffusion {

namespace nk = numkit;

Schedule Schedule::linear(std::size_t steps, double betaStart, double betaEnd) {
  if (steps < 1) throw UsageError("schedule: at least one diffusion step required");
  if (!(betaStart > 0.0 && betaEnd < 1.0 && betaStart <= betaEnd)) throw UsageError("schedule: need 0 < β_1 <= β_T < 1");
  Schedule s;
  double bar = 1.0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    const double beta = betaStart + (betaEnd - betaStart) * frac;
    s.betas.push_back(beta);
    s.alphas.push_back(1.0 - beta);
    bar *= 1.0 - beta;
    s.alphaBars.push_back(bar);
  }
  return s;
}

Schedule Schedule::respaced(std::size_t steps, std::size_t referenceSteps, double betaStart, double betaEnd) {
  if (steps >= referenceSteps) return linear(steps, betaStart, betaEnd);
  if (steps < 1) throw UsageError("schedule: at least one diffusion step required");
  const Schedule ref = linear(referenceSteps, betaStart, betaEnd);
  Schedule s;
  double prev = 1.0;
  for (std::size_t k = 1; k <= steps; ++k) {
    const auto idx = static_cast<std::size_t>(std::llround(static_cast<double>(k * referenceSteps) / static_cast<double>(steps)));
    const double bar = ref.alphaBar(std::max<std::size_t>(idx, 1));
    s.betas.push_back(1.0 - bar / prev);
    s.alphas.push_back(bar / prev);
    s.alphaBars.push_back(bar);
    prev = bar;
  }
  return s;
}

void Schedule::requireStep(std::size_t t) const {
  if (t < 1 || t > steps()) {
    throw std::out_of_range("diffusion step " + std::to_string(t) + " outside [1, " + std::to_string(steps()) + "]");
  }
}

Noised forwardDiffuse(const Schedule& schedule, const Tensor& x0, std::size_t t, Rng& rng) {
  schedule.requireStep(t);
  const double a = std::sqrt(schedule.alphaBar(t));
  const double b = std::sqrt(1.0 - schedule.alphaBar(t));
  Noised out{x0, nk::randomNormal(x0.shape(), rng)};
  for (std::size_t i = 0; i < x0.size(); ++i) out.xt[i] = a * x0[i] + b * out.noise[i];
  return out;
}

Noised forwardDiffuse(const Schedule& schedule, const Tensor& x0, std::size_t t, std::uint64_t seed) {
  Rng rng(seed);
  return forwardDiffuse(schedule, x0, t, rng);
}

Target parseTarget(const std::string& name) {
  if (name == "epsilon") return Target::epsilon;
  if (name == "sample") return Target::sample;
  throw UsageError("unknown prediction target '" + name + "' (expected epsilon|sample)");
}

std::string targetName(Target t) { return t == Target::epsilon ? "epsilon" : "sample"; }

void DenoiserConfig::validate() const {
  if (patch == 0 || frames % patch != 0) throw UsageError("denoiser: frames must be a multiple of patch");
  if (hidden == 0 || heads == 0 || hidden % heads != 0) throw UsageError("denoiser: hidden must be divisible by heads");
  if (layers == 0) throw UsageError("denoiser: at least one layer required");
  if (hidden % 2 != 0) throw UsageError("denoiser: hidden width must be even for sinusoidal embeddings");
}

void Block::collect(std::vector<Param*>& dst) {
  norm1.collect(dst);
  query.collect(dst);
  key.collect(dst);
  value.collect(dst);
  out.collect(dst);
  norm2.collect(dst);
  fc1.collect(dst);
  fc2.collect(dst);
}

DenoiserParams DenoiserParams::create(const DenoiserConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(Rng::derive(seed, 0xDE0Eu));
  DenoiserParams p;
  p.patchEmbed = nn::Linear::create("den.patch_embed", cfg.patch * cfg.dims, cfg.hidden, rng);
  p.timeEmbed = nn::Linear::create("den.time_embed", cfg.hidden, cfg.hidden, rng);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string n = "den.block" + std::to_string(l);
    p.blocks.push_back(Block{nn::LayerNorm::create(n + ".norm1", cfg.hidden),
                             nn::Linear::create(n + ".query", cfg.hidden, cfg.hidden, rng),
                             nn::Linear::create(n + ".key", cfg.hidden, cfg.hidden, rng),
                             nn::Linear::create(n + ".value", cfg.hidden, cfg.hidden, rng),
                             nn::Linear::create(n + ".out", cfg.hidden, cfg.hidden, rng, 0.5),
                             nn::LayerNorm::create(n + ".norm2", cfg.hidden),
                             nn::Linear::create(n + ".fc1", cfg.hidden, cfg.mlpWidth, rng),
                             nn::Linear::create(n + ".fc2", cfg.mlpWidth, cfg.hidden, rng, 0.5)});
  }
  p.normOut = nn::LayerNorm::create("den.norm_out", cfg.hidden);
  p.head = nn::Linear::create("den.head", cfg.hidden, cfg.patch * cfg.dims, rng, 0.5);
  p.alignAdapter = nn::Linear::create("den.align_adapter", cfg.hidden, cfg.alignWidth, rng);
  p.skip = nn::Linear::create("den.skip", cfg.patch * cfg.dims, cfg.patch * cfg.dims, rng, 0.5);
  p.positions = nn::sinusoidalTable(cfg.contextTokens + cfg.latentTokens(), cfg.hidden);
  return p;
}

void DenoiserParams::collect(std::vector<Param*>& dst) {
  patchEmbed.collect(dst);
  timeEmbed.collect(dst);
  for (auto& b : blocks) b.collect(dst);
  normOut.collect(dst);
  head.collect(dst);
  alignAdapter.collect(dst);
  skip.collect(dst);
}

namespace {

Var attention(Tape& tape, Block& b, Var x, std::size_t heads) {
  const std::size_t width = x.cols();
  const std::size_t dk = width / heads;
  Var q = b.query(tape, x);
  Var k = b.key(tape, x);
  Var v = b.value(tape, x);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Var merged;
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = nk::sliceCols(q, h * dk, dk);
    Var kh = nk::sliceCols(k, h * dk, dk);
    Var vh = nk::sliceCols(v, h * dk, dk);
    Var weights = nk::softmaxRows(nk::scale(nk::matmul(qh, nk::transpose(kh)), scale));
    Var head = nk::matmul(weights, vh);
    merged = h == 0 ? head : nk::concatCols(merged, head);
  }
  return b.out(tape, merged);
}

}  // namespace

DenoiseOutput denoise(Tape& tape, DenoiserParams& params, const DenoiserConfig& cfg, Var xt, std::size_t t, Var context,
                      std::size_t alignLayer, PathTrace* trace) {
  traceHit(trace, "denoiser.forward");
  const std::size_t latentTokens = cfg.latentTokens();
  if (xt.rows() != cfg.frames || xt.cols() != cfg.dims) {
    throw nk::ShapeError("denoise: latent " + nk::shapeString(xt.shape()) + " expected " + std::to_string(cfg.frames) +
                         "x" + std::to_string(cfg.dims));
  }
  if (context.rows() != cfg.contextTokens || context.cols() != cfg.hidden) {
    throw nk::ShapeError("denoise: context " + nk::shapeString(context.shape()) + " expected " +
                         std::to_string(cfg.contextTokens) + "x" + std::to_string(cfg.hidden));
  }
  Var patches = nk::reshape(xt, {latentTokens, cfg.patch * cfg.dims});
  Var tokens = nk::concatRows(context, params.patchEmbed(tape, patches));
  tokens = nk::add(tokens, tape.constant(params.positions));
  Var temb = nk::gelu(params.timeEmbed(tape, tape.constant(nn::sinusoidalEmbedding(static_cast<double>(t) * cfg.timeScale, cfg.hidden))));
  tokens = nk::addRowVector(tokens, temb);

  DenoiseOutput out;
  for (std::size_t l = 0; l < params.blocks.size(); ++l) {
    Block& b = params.blocks[l];
    tokens = nk::add(tokens, attention(tape, b, b.norm1(tape, tokens), cfg.heads));
    tokens = nk::add(tokens, b.fc2(tape, nk::gelu(b.fc1(tape, b.norm2(tape, tokens)))));
    if (l + 1 == alignLayer) {
      out.aligned = params.alignAdapter(tape, nk::sliceRows(tokens, cfg.contextTokens, latentTokens));
    }
  }
  Var latent = nk::sliceRows(tokens, cfg.contextTokens, latentTokens);
  Var pred = nk::add(params.head(tape, params.normOut(tape, latent)), params.skip(tape, patches));
  out.prediction = nk::reshape(pred, {cfg.frames, cfg.dims});
  return out;
}

void ModelConfig::validate() const {
  duet.validate();
  denoiser.validate();
  if (denoiser.contextTokens != duet.contextTokens() || denoiser.hidden != duet.hidden) {
    throw UsageError("model: denoiser context must match DUET output (" + std::to_string(duet.contextTokens()) + "x" +
                     std::to_string(duet.hidden) + ")");
  }
  if (denoiser.alignWidth != duet.videoWidth) throw UsageError("model: align width must equal video feature width");
  if (diffusionSteps < 1) throw UsageError("model: diffusion steps must be >= 1");
  if (alignLayer > denoiser.layers) throw UsageError("model: dash_layer exceeds denoiser depth");
}

nlohmann::json ModelConfig::toJson() const {
  return {{"duet", duet.toJson()},
          {"denoiser",
           {{"frames", denoiser.frames},
            {"dims", denoiser.dims},
            {"patch", denoiser.patch},
            {"hidden", denoiser.hidden},
            {"layers", denoiser.layers},
            {"heads", denoiser.heads},
            {"mlp_width", denoiser.mlpWidth},
            {"context_tokens", denoiser.contextTokens},
            {"align_width", denoiser.alignWidth}}},
          {"diffusion_steps", diffusionSteps},
          {"target", targetName(target)},
          {"align_layer", alignLayer},
          {"seed", seed}};
}

ModelConfig ModelConfig::fromJson(const nlohmann::json& j) {
  ModelConfig c;
  c.duet = duet::DuetConfig::fromJson(j.at("duet"));
  const auto& d = j.at("denoiser");
  c.denoiser.frames = d.at("frames").get<std::size_t>();
  c.denoiser.dims = d.at("dims").get<std::size_t>();
  c.denoiser.patch = d.at("patch").get<std::size_t>();
  c.denoiser.hidden = d.at("hidden").get<std::size_t>();
  c.denoiser.layers = d.at("layers").get<std::size_t>();
  c.denoiser.heads = d.at("heads").get<std::size_t>();
  c.denoiser.mlpWidth = d.at("mlp_width").get<std::size_t>();
  c.denoiser.contextTokens = d.at("context_tokens").get<std::size_t>();
  c.denoiser.alignWidth = d.at("align_width").get<std::size_t>();
  c.diffusionSteps = j.at("diffusion_steps").get<std::size_t>();
  c.target = parseTarget(j.at("target").get<std::string>());
  c.alignLayer = j.at("align_layer").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

Model Model::create(const ModelConfig& cfg) {
  cfg.validate();
  Model m{cfg,
          duet::DuetParams::create(cfg.duet, cfg.seed),
          DenoiserParams::create(cfg.denoiser, cfg.seed),
          Schedule::respaced(cfg.diffusionSteps),
          Tensor({cfg.denoiser.dims}, 0.0),
          Tensor({cfg.denoiser.dims}, 1.0)};
  // Embed steps on the 1000-step reference scale so short chains still span
  // the embedding frequencies.
  m.config.denoiser.timeScale = 1000.0 / static_cast<double>(cfg.diffusionSteps);
  return m;
}

std::vector<Param*> Model::parameters() {
  std::vector<Param*> out;
  duet.collect(out);
  denoiser.collect(out);
  return out;
}

Tensor Model::normalize(const Tensor& motion) const {
  Tensor out = motion;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = (out(r, c) - latentMean[c]) / latentStd[c];
  return out;
}

Tensor Model::denormalize(const Tensor& latent) const {
  Tensor out = latent;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = out(r, c) * latentStd[c] + latentMean[c];
  return out;
}

void Model::fitNormalization(std::span<const synthdata::MotionSequence> data) {
  const std::size_t dims = config.denoiser.dims;
  std::vector<double> sum(dims, 0.0), sq(dims, 0.0);
  double count = 0.0;
  for (const auto& m : data) {
    if (m.dims() != dims) throw nk::ShapeError("fitNormalization: motion dims differ from model dims");
    for (std::size_t r = 0; r < m.frames(); ++r)
      for (std::size_t c = 0; c < dims; ++c) {
        sum[c] += m.values(r, c);
        sq[c] += m.values(r, c) * m.values(r, c);
      }
    count += static_cast<double>(m.frames());
  }
  if (count == 0.0) throw std::invalid_argument("fitNormalization: no frames");
  for (std::size_t c = 0; c < dims; ++c) {
    const double mu = sum[c] / count;
    const double var = std::max(sq[c] / count - mu * mu, 0.0);
    latentMean[c] = mu;
    latentStd[c] = std::sqrt(var) > 1e-8 ? std::sqrt(var) : 1.0;
  }
}

void TrainConfig::validate() const {
  if (batch == 0) throw UsageError("train: batch size must be positive");
  if (!(learningRate > 0.0)) throw UsageError("train: learning rate must be positive");
  if (!(videoDropProb >= 0.0 && videoDropProb <= 1.0)) throw UsageError("train: video_drop_prob must lie in [0, 1]");
  if (!(contextDropProb >= 0.0 && contextDropProb <= 1.0)) throw UsageError("train: context_drop_prob must lie in [0, 1]");
  dash.validate();
}

Adam::Adam(double beta1, double beta2, double epsilon, double weightDecay)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon), weightDecay_(weightDecay) {}

void Adam::step(const std::vector<Param*>& params, double learningRate) {
  if (m_.size() != params.size()) {
    m_.clear();
    v_.clear();
    for (const Param* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }
  ++iterations_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(iterations_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(iterations_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    if (p.grad.shape() != p.value.shape()) continue;
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
      const double update = (m[k] / c1) / (std::sqrt(v[k] / c2) + epsilon_);
      p.value[k] -= learningRate * (update + weightDecay_ * p.value[k]);
    }
  }
}

namespace {

struct SamplePlan {
  std::size_t t = 1;
  Tensor noise;
  bool withVideo = false;
  bool dropContext = false;
};

// Draws every random decision for the batch up front so the stream consumed
// is independent of the branches taken later.
std::vector<SamplePlan> planBatch(const Model& model, std::span<const TrainingExample* const> batch,
                                  const TrainConfig& cfg, Rng& rng) {
  std::vector<SamplePlan> plans;
  for (const TrainingExample* ex : batch) {
    SamplePlan p;
    p.t = 1 + rng.below(model.schedule.steps());
    p.noise = nk::randomNormal(ex->latent.shape(), rng);
    const bool keepVideo = rng.uniform() >= cfg.videoDropProb;
    p.withVideo = ex->condition.video.has_value() && keepVideo;
    p.dropContext = rng.uniform() < cfg.contextDropProb;
    plans.push_back(std::move(p));
  }
  return plans;
}

StepLosses runBatch(Model& model, std::span<const TrainingExample* const> batch, const TrainConfig& cfg, Rng& rng,
                    bool backward) {
  if (batch.empty()) throw std::invalid_argument("trainStep: empty batch");
  const auto plans = planBatch(model, batch, cfg, rng);
  std::size_t withVideo = 0;
  for (const auto& p : plans) withVideo += p.withVideo ? 1 : 0;

  const auto& mc = model.config;
  const double invBatch = 1.0 / static_cast<double>(batch.size());
  const double invVideo = withVideo ? 1.0 / static_cast<double>(withVideo) : 0.0;
  const bool needDash = cfg.dash.lambda > 0.0 || !backward;
  StepLosses losses;
  losses.dashSamples = withVideo;

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const TrainingExample& ex = *batch[i];
    const SamplePlan& plan = plans[i];
    Tape tape(backward);
    const double a = std::sqrt(model.schedule.alphaBar(plan.t));
    const double b = std::sqrt(1.0 - model.schedule.alphaBar(plan.t));
    Tensor xt = ex.latent;
    for (std::size_t k = 0; k < xt.size(); ++k) xt[k] = a * ex.latent[k] + b * plan.noise[k];

    const Tensor zeroVideo = Tensor::matrix(mc.duet.videoTokens, mc.duet.videoWidth);
    const Tensor& video = plan.withVideo ? *ex.condition.video : zeroVideo;
    Var context = plan.dropContext ? tape.constant(Tensor::matrix(mc.duet.contextTokens(), mc.duet.hidden))
                                   : duet::duetForward(tape, model.duet, mc.duet, video, ex.condition.text).context;
    const bool alignHere = plan.withVideo && needDash;
    DenoiseOutput out = denoise(tape, model.denoiser, mc.denoiser, tape.constant(xt), plan.t, context,
                                alignHere ? mc.alignLayer : 0);
    const Tensor& target = mc.target == Target::epsilon ? plan.noise : ex.latent;
    Var mld = nk::mse(out.prediction, target);
    Var objective = nk::scale(mld, invBatch);
    losses.mld += mld.value()[0] * invBatch;
    if (alignHere) {
      Var d = dash::dashLossVar(out.aligned, video, cfg.dash);
      losses.dash += d.value()[0] * invVideo;
      objective = nk::add(objective, nk::scale(d, cfg.dash.lambda * invVideo));
    }
    if (!std::isfinite(objective.value()[0])) {
      throw NumericalError("train: non-finite loss at sample " + std::to_string(i) + " (t=" + std::to_string(plan.t) +
                           ", L_MLD=" + std::to_string(mld.value()[0]) + ")");
    }
    if (backward) tape.backward(objective);
  }
  losses.total = dash::totalLoss(losses.mld, losses.dash, cfg.dash.lambda);
  return losses;
}

}  // namespace

StepLosses trainStep(Model& model, std::span<const TrainingExample* const> batch, const TrainConfig& cfg, Adam& adam,
                     Rng& rng) {
  auto params = model.parameters();
  for (Param* p : params) p->zeroGrad();
  StepLosses losses = runBatch(model, batch, cfg, rng, true);
  adam.step(params, cfg.learningRate);
  losses.step = adam.iterations();
  return losses;
}

StepLosses evaluateLosses(Model& model, std::span<const TrainingExample* const> batch, const TrainConfig& cfg, Rng& rng) {
  return runBatch(model, batch, cfg, rng, false);
}

void train(Model& model, std::span<const TrainingExample> data, const TrainConfig& cfg, Adam& adam,
           std::size_t startStep, const std::function<void(const StepLosses&)>& onStep) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train: no training examples");
  std::vector<const TrainingExample*> batch(cfg.batch);
  for (std::size_t step = startStep; step < cfg.steps; ++step) {
    Rng rng(Rng::derive(cfg.seed, step));
    for (auto& slot : batch) slot = &data[rng.below(data.size())];
    StepLosses l = trainStep(model, batch, cfg, adam, rng);
    l.step = step + 1;
    if (onStep) onStep(l);
  }
}

SampleResult sample(Model& model, const synthdata::ConditionBundle& condition, const guidance::GuidanceSpec& spec,
                    std::uint64_t seed, PathTrace* trace) {
  spec.validate();
  const auto& mc = model.config;
  traceHit(trace, "sample.materialize_video");
  const Tensor video = condition.videoOrZeros(mc.duet.videoTokens, mc.duet.videoWidth);

  guidance::GuidanceContexts contexts{duet::fuse(model.duet, mc.duet, video, condition.text, trace), {}, {}};
  if (spec.mode == guidance::Mode::dualCfg) {
    contexts.videoOnly = duet::fuse(model.duet, mc.duet, video, Tensor(condition.text.shape()));
    contexts.textOnly = duet::fuse(model.duet, mc.duet, Tensor(video.shape()), condition.text);
  }
  guidance::GuidanceSpec stepSpec = spec;
  stepSpec.perturbation.seed = Rng::derive(seed, spec.perturbation.seed);

  Rng rng(Rng::derive(seed, 0x5A4Du));
  Tensor x = nk::randomNormal({mc.denoiser.frames, mc.denoiser.dims}, rng);
  const Schedule& s = model.schedule;
  for (std::size_t t = s.steps(); t >= 1; --t) {
    traceHit(trace, "sample.step");
    auto predict = [&](const Tensor& ctx) {
      Tape tape(false);
      return denoise(tape, model.denoiser, mc.denoiser, tape.constant(x), t, tape.constant(ctx), 0).prediction.value();
    };
    Tensor pred = guidance::guidedPrediction(predict, contexts, stepSpec);
    const double ab = s.alphaBar(t);
    if (mc.target == Target::sample) {
      for (std::size_t k = 0; k < pred.size(); ++k) pred[k] = (x[k] - std::sqrt(ab) * pred[k]) / std::sqrt(1.0 - ab);
    }
    const double coef = s.beta(t) / std::sqrt(1.0 - ab);
    const double invSqrtAlpha = 1.0 / std::sqrt(s.alpha(t));
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = invSqrtAlpha * (x[k] - coef * pred[k]);
    if (t > 1) {
      const double var = s.beta(t) * (1.0 - s.alphaBar(t - 1)) / (1.0 - ab);
      const double sd = std::sqrt(var);
      for (auto& v : x.data()) v += sd * rng.normal();
    }
  }

  Tape tape(false);
  DenoiseOutput final = denoise(tape, model.denoiser, mc.denoiser, tape.constant(x), 1, tape.constant(contexts.fused),
                                mc.alignLayer == 0 ? 1 : mc.alignLayer);
  SampleResult result;
  result.latent = x;
  result.aligned = final.aligned.value();
  result.motion = synthdata::MotionSequence{model.denormalize(x), 20.0, -1};
  return result;
}

}  // namespace motionduet::diffusion
