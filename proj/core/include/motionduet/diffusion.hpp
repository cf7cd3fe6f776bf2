#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "motionduet/dash.hpp"
#include "motionduet/duet.hpp"
#include "motionduet/guidance.hpp"
#include "motionduet/nn.hpp"
#include "motionduet/synthdata.hpp"
#include "motionduet/trace.hpp"

namespace motionduet::diffusion {

using numkit::Param;
using numkit::Rng;
using numkit::Tape;
using numkit::Tensor;
using numkit::Var;

/// β schedule; all accessors take the 1-based step t ∈ [1, steps].
struct Schedule {
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alphaBars;

  static Schedule linear(std::size_t steps, double betaStart = 1e-4, double betaEnd = 2e-2);
  /// The linear schedule defined on `referenceSteps` steps, subsampled to
  /// `steps` evenly spaced noise levels (ᾱ at every referenceSteps/steps-th
  /// step). Equals linear() when steps >= referenceSteps.
  static Schedule respaced(std::size_t steps, std::size_t referenceSteps = 1000, double betaStart = 1e-4,
                           double betaEnd = 2e-2);
  std::size_t steps() const noexcept { return betas.size(); }
  double beta(std::size_t t) const { return betas.at(t - 1); }
  double alpha(std::size_t t) const { return alphas.at(t - 1); }
  double alphaBar(std::size_t t) const { return alphaBars.at(t - 1); }
  void requireStep(std::size_t t) const;
};

struct Noised {
  Tensor xt;
  Tensor noise;
};

/// x_t = √ᾱ_t·x_0 + √(1−ᾱ_t)·ε with ε drawn from `seed`.
Noised forwardDiffuse(const Schedule& schedule, const Tensor& x0, std::size_t t, std::uint64_t seed);
Noised forwardDiffuse(const Schedule& schedule, const Tensor& x0, std::size_t t, Rng& rng);

/// What the denoiser regresses: the injected noise or the clean latent.
enum class Target { epsilon, sample };
Target parseTarget(const std::string& name);
std::string targetName(Target t);

struct DenoiserConfig {
  std::size_t frames = 64;
  std::size_t dims = 8;
  std::size_t patch = 4;  // frames per latent token
  std::size_t hidden = 32;
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t mlpWidth = 64;
  std::size_t contextTokens = 16;
  std::size_t alignWidth = 16;  // adapter output width (video feature width)
  double timeScale = 1.0;  // t is embedded as t·timeScale; set from the step count

  std::size_t latentTokens() const { return frames / patch; }
  void validate() const;
};

struct Block {
  nn::LayerNorm norm1;
  nn::Linear query, key, value, out;
  nn::LayerNorm norm2;
  nn::Linear fc1, fc2;

  void collect(std::vector<Param*>& dst);
};

/// Transformer over [H ; latent tokens] with fixed sinusoidal positions and an
/// additive timestep embedding.
struct DenoiserParams {
  nn::Linear patchEmbed;
  nn::Linear timeEmbed;
  std::vector<Block> blocks;
  nn::LayerNorm normOut;
  nn::Linear head;
  nn::Linear skip;  // latent patch → head output, added to the head
  nn::Linear alignAdapter;  // hidden → alignWidth, feeds the DASH loss
  Tensor positions;         // fixed, (contextTokens + latentTokens) × hidden

  static DenoiserParams create(const DenoiserConfig& cfg, std::uint64_t seed);
  void collect(std::vector<Param*>& dst);
};

struct DenoiseOutput {
  Var prediction;  // frames × dims
  Var aligned;     // latentTokens × alignWidth, from block `alignLayer`
};

/// `alignLayer` is 1-based; 0 skips the adapter.
DenoiseOutput denoise(Tape& tape, DenoiserParams& params, const DenoiserConfig& cfg, Var xt, std::size_t t, Var context,
                      std::size_t alignLayer, PathTrace* trace = nullptr);

struct ModelConfig {
  duet::DuetConfig duet;
  DenoiserConfig denoiser;
  std::size_t diffusionSteps = 100;
  Target target = Target::epsilon;
  std::size_t alignLayer = 2;
  std::uint64_t seed = 1;

  void validate() const;
  nlohmann::json toJson() const;
  static ModelConfig fromJson(const nlohmann::json& j);
};

struct Model {
  ModelConfig config;
  duet::DuetParams duet;
  DenoiserParams denoiser;
  Schedule schedule;
  Tensor latentMean;  // per motion dim
  Tensor latentStd;

  static Model create(const ModelConfig& cfg);
  std::vector<Param*> parameters();

  Tensor normalize(const Tensor& motion) const;
  Tensor denormalize(const Tensor& latent) const;
  void fitNormalization(std::span<const synthdata::MotionSequence> data);
};

struct TrainConfig {
  std::size_t steps = 3000;
  std::size_t batch = 32;
  double learningRate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weightDecay = 0.0;
  double videoDropProb = 0.1;
  double contextDropProb = 0.1;
  std::uint64_t seed = 1;
  dash::DashConfig dash;

  void validate() const;
};

/// First/second-moment adaptive step with optional decoupled weight decay.
class Adam {
 public:
  Adam() = default;
  Adam(double beta1, double beta2, double epsilon, double weightDecay);

  void step(const std::vector<Param*>& params, double learningRate);
  std::size_t iterations() const noexcept { return iterations_; }

  std::vector<Tensor>& firstMoments() { return m_; }
  std::vector<Tensor>& secondMoments() { return v_; }
  void setIterations(std::size_t n) { iterations_ = n; }

 private:
  double beta1_ = 0.9, beta2_ = 0.999, epsilon_ = 1e-8, weightDecay_ = 0.0;
  std::size_t iterations_ = 0;
  std::vector<Tensor> m_, v_;
};

struct TrainingExample {
  Tensor latent;  // normalized motion
  synthdata::ConditionBundle condition;
};

struct StepLosses {
  std::size_t step = 0;
  double mld = 0.0;
  double dash = 0.0;
  double total = 0.0;
  std::size_t dashSamples = 0;
};

/// One optimizer step over the batch: L = L_MLD + λ·L_DASH, where L_MLD is the
/// batch mean of the per-sample MSE and L_DASH the mean over samples that
/// carry video. Throws NumericalError on a non-finite loss.
StepLosses trainStep(Model& model, std::span<const TrainingExample* const> batch, const TrainConfig& cfg, Adam& adam,
                     Rng& rng);

/// The losses trainStep would report for the same generator state, without
/// touching parameters or gradients.
StepLosses evaluateLosses(Model& model, std::span<const TrainingExample* const> batch, const TrainConfig& cfg, Rng& rng);

/// Runs steps [startStep, cfg.steps). Batches are drawn from a generator
/// seeded by (cfg.seed, step), so a resumed run sees the same batches.
void train(Model& model, std::span<const TrainingExample> data, const TrainConfig& cfg, Adam& adam,
           std::size_t startStep, const std::function<void(const StepLosses&)>& onStep = {});

struct SampleResult {
  synthdata::MotionSequence motion;  // denormalized
  Tensor latent;                     // normalized latent x_0
  Tensor aligned;                    // adapter tokens at the final step
};

/// Ancestral DDPM sampling from t = T_d down to 1, each prediction routed
/// through guidance::guidedPrediction. Absent video is materialized as zeros;
/// the remaining flow does not depend on it.
SampleResult sample(Model& model, const synthdata::ConditionBundle& condition, const guidance::GuidanceSpec& spec,
                    std::uint64_t seed, PathTrace* trace = nullptr);

}  // namespace motionduet::diffusion
