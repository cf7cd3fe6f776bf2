#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "motionduet/dash.hpp"
#include "motionduet/diffusion.hpp"
#include "motionduet/duet.hpp"
#include "motionduet/guidance.hpp"
#include "motionduet/metrics.hpp"
#include "motionduet/pose_clean.hpp"
#include "motionduet/synthdata.hpp"

namespace motionduet::pipeline {

namespace fs = std::filesystem;
using numkit::Tensor;

struct DataSection {
  synthdata::SynthSpec synth;
  std::uint64_t textSeed = 11;
  std::uint64_t videoSeed = 5;
  std::size_t videoStride = 4;
  double videoFraction = 1.0;  // share of samples that carry video features
};

struct DiffusionSection {
  std::size_t diffusionSteps = 100;
  diffusion::Target target = diffusion::Target::epsilon;
  std::size_t patch = 4;
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t mlpWidth = 64;
  std::size_t trainSteps = 3000;
  std::size_t batch = 32;
  double learningRate = 1e-4;
  double weightDecay = 0.0;
  double videoDropProb = 0.1;
  double contextDropProb = 0.1;
  std::uint64_t seed = 1;
};

struct MetricsSection {
  metrics::EvalConfig eval;
  std::size_t samples = 256;
  std::uint64_t sampleSeed = 17;
};

/// One JSON document with sections data/duet/dash/guidance/diffusion/metrics/
/// clean. Every key is optional; unknown keys are rejected.
struct RunConfig {
  DataSection data;
  duet::DuetConfig duet;
  dash::DashConfig dash;
  guidance::GuidanceSpec guidance;
  DiffusionSection diffusion;
  MetricsSection metrics;
  pose::CleanConfig clean;

  void validate() const;
  nlohmann::json toJson() const;
  static RunConfig fromJson(const nlohmann::json& j);
  static RunConfig load(const fs::path& path);
  /// Replaces every seed in the document with values derived from `seed`.
  void overrideSeed(std::uint64_t seed);

  diffusion::ModelConfig modelConfig() const;
  diffusion::TrainConfig trainConfig() const;
};

struct Dataset {
  std::vector<synthdata::MotionSequence> motions;
  std::vector<synthdata::ConditionBundle> conditions;
};

/// Synthesizes motion and the matching text/video condition features.
Dataset buildDataset(const RunConfig& cfg);

/// motion_NNNNN.bin and cond_NNNNN.bin per sample plus manifest.json.
void saveDataset(const fs::path& dir, const Dataset& data);
Dataset loadDataset(const fs::path& dir);

std::vector<diffusion::TrainingExample> trainingExamples(const diffusion::Model& model, const Dataset& data);

struct Checkpoint {
  diffusion::Model model;
  diffusion::Adam adam;
  std::size_t step = 0;
};

/// Single container: header {format, config, step, normalization, params,
/// adam} and a float32 payload of parameters followed by Adam moments.
void saveCheckpoint(const fs::path& path, diffusion::Model& model, diffusion::Adam& adam, std::size_t step);
Checkpoint loadCheckpoint(const fs::path& path);

/// Text-conditioned bundle for a class label; video when `withVideo`.
synthdata::ConditionBundle conditionForLabel(const RunConfig& cfg, int label, bool withVideo, std::uint64_t seed);

struct Generated {
  Dataset data;  // sampled motions (labelled) with the conditions used
  std::vector<Tensor> aligned;  // adapter tokens per sample
};

/// `count` samples with labels cycling through the classes; sample i uses
/// seed derive(seed, i) for both its condition and its trajectory.
Generated generate(diffusion::Model& model, const RunConfig& cfg, const guidance::GuidanceSpec& spec, bool withVideo,
                   std::size_t count, std::uint64_t seed);

/// Features of real and generated motions under the frozen extractor, text
/// features for the generated labels, and generations grouped by label.
metrics::EvalInput evalInput(const RunConfig& cfg, const Dataset& real, const Dataset& generated);

}  // namespace motionduet::pipeline
