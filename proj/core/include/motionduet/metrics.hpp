#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "motionduet/synthdata.hpp"

namespace motionduet::metrics {

using numkit::Tensor;

/// Frozen map from a motion sequence to a D_f-dim feature: mean-pool into
/// `segments` equal temporal segments, flatten, then tanh(A·x + b).
class FeatureExtractor {
 public:
  static FeatureExtractor create(std::size_t dims, std::uint64_t seed, std::size_t featureDim = 16,
                                 std::size_t segments = 8);

  std::size_t featureDim() const { return weight_.rows(); }
  Tensor operator()(const Tensor& motion) const;  // [D_f]
  Tensor batch(std::span<const synthdata::MotionSequence> motions) const;  // [M × D_f]

 private:
  Tensor weight_;  // D_f × (segments·dims)
  Tensor bias_;
  std::size_t dims_ = 0;
  std::size_t segments_ = 0;
};

/// Companion text features: the extractor applied to each label's noiseless
/// class template.
Tensor textFeatures(const FeatureExtractor& fx, const synthdata::SynthSpec& spec, std::span<const int> labels);

struct GaussianSummary {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // symmetrized, eigenvalues clamped at 0

  /// Rows are samples; covariance uses the unbiased 1/(n−1) normalizer.
  static GaussianSummary fromSamples(const Tensor& rows);
  /// Throws if an eigenvalue of the symmetrized matrix is below −tolerance.
  static GaussianSummary fromMoments(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);
};

/// ‖μa−μb‖² + Tr(Σa + Σb − 2(√Σa·Σb·√Σa)^{1/2}).
double fid(const GaussianSummary& a, const GaussianSummary& b);

/// Fréchet distance between the row distributions of two token sets, each
/// row optionally scaled to unit norm first (zero rows stay zero).
double frechetRows(const Tensor& a, const Tensor& b, bool unitRows);

double diversity(const Tensor& features, std::size_t pairs, std::uint64_t seed);
double multimodality(std::span<const Tensor> perCondition, std::size_t pairs, std::uint64_t seed);
double mmDist(const Tensor& text, const Tensor& motion);

struct RPrecision {
  double top1 = 0.0;
  double top2 = 0.0;
  double top3 = 0.0;
};

/// For each query motion, its true text plus poolSize−1 distractors drawn
/// without replacement from items whose text differs. Rank ties go to the
/// lower item index.
RPrecision rPrecision(const Tensor& text, const Tensor& motion, std::size_t poolSize, std::uint64_t seed);

struct Interval {
  double mean = 0.0;
  double ci95 = 0.0;
  std::vector<std::uint64_t> seeds;
};

/// mean ± 1.96·sd/√R over repeated values.
Interval summarize(const std::vector<double>& values, std::vector<std::uint64_t> seeds);

struct EvalConfig {
  std::size_t repeats = 20;
  std::size_t poolSize = 8;
  std::size_t diversityPairs = 64;
  std::size_t multimodalityPairs = 4;
  std::size_t featureDim = 16;
  std::size_t segments = 8;
  std::uint64_t seed = 3;
  std::uint64_t extractorSeed = 99;

  void validate() const;
  nlohmann::json toJson() const;
  static EvalConfig fromJson(const nlohmann::json& j);
};

struct EvalInput {
  Tensor realFeatures;             // [N × D_f]
  Tensor generatedFeatures;        // [M × D_f]
  Tensor generatedText;            // [M × D_f], paired with generatedFeatures
  std::vector<Tensor> perCondition;  // groups of generations sharing a condition
};

/// All five metrics, each over `repeats` seeded repeats. FID and MM Dist
/// repeat over bootstrap resamples; the others over their pair/pool seeds.
nlohmann::json evaluate(const EvalInput& input, const EvalConfig& cfg);

}  // namespace motionduet::metrics
