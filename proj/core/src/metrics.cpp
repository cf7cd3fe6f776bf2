#include "motionduet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "motionduet/errors.hpp"

namespace motionduet::metrics {

namespace nk = numkit;
using nk::Rng;

namespace {

constexpr double kClamp = 1e-10;

double psdTolerance(const Eigen::MatrixXd& m) { return 1e-8 * std::max(1.0, m.cwiseAbs().maxCoeff()); }

Eigen::MatrixXd toEigen(const Tensor& rows) {
  Eigen::MatrixXd m(rows.rows(), rows.cols());
  for (std::size_t r = 0; r < rows.rows(); ++r)
    for (std::size_t c = 0; c < rows.cols(); ++c) m(r, c) = rows(r, c);
  return m;
}

// Canonical row order, so seeded index draws do not depend on input order.
std::vector<std::size_t> sortedOrder(const Tensor& t) {
  std::vector<std::size_t> idx(t.rows());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto ra = t.row(a);
    const auto rb = t.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  return idx;
}

Tensor takeRows(const Tensor& t, const std::vector<std::size_t>& idx) {
  Tensor out({idx.size(), t.cols()});
  for (std::size_t r = 0; r < idx.size(); ++r) std::copy(t.row(idx[r]).begin(), t.row(idx[r]).end(), out.row(r).begin());
  return out;
}

Tensor canonical(const Tensor& t) { return takeRows(t, sortedOrder(t)); }

double rowDistance(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    const double d = a(i, c) - b(j, c);
    s += d * d;
  }
  return std::sqrt(s);
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

// Mean distance over `pairs` seeded pairs of a canonically ordered set.
// Pairs are disjoint when the set is large enough, otherwise drawn
// independently (two distinct members each).
double meanPairDistance(const Tensor& sorted, std::size_t pairs, Rng& rng) {
  const std::size_t m = sorted.rows();
  double total = 0.0;
  if (2 * pairs <= m) {
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(perm, rng);
    for (std::size_t p = 0; p < pairs; ++p) total += rowDistance(sorted, perm[2 * p], sorted, perm[2 * p + 1]);
  } else {
    for (std::size_t p = 0; p < pairs; ++p) {
      const std::size_t i = rng.below(m);
      std::size_t j = rng.below(m - 1);
      if (j >= i) ++j;
      total += rowDistance(sorted, i, sorted, j);
    }
  }
  return total / static_cast<double>(pairs);
}

Eigen::MatrixXd symmetricSqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd root = es.eigenvalues().unaryExpr([](double v) { return v > kClamp ? std::sqrt(v) : 0.0; });
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

std::vector<std::size_t> bootstrap(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = rng.below(n);
  return idx;
}

}  // namespace

FeatureExtractor FeatureExtractor::create(std::size_t dims, std::uint64_t seed, std::size_t featureDim,
                                          std::size_t segments) {
  if (dims == 0 || featureDim == 0 || segments == 0) throw UsageError("feature extractor: sizes must be positive");
  Rng rng(Rng::derive(seed, 0xFEA7u));
  FeatureExtractor fx;
  fx.dims_ = dims;
  fx.segments_ = segments;
  const double in = static_cast<double>(segments * dims);
  fx.weight_ = nk::randomNormal({featureDim, segments * dims}, rng, 1.0 / std::sqrt(in));
  fx.bias_ = nk::randomNormal({featureDim}, rng, 0.1);
  return fx;
}

Tensor FeatureExtractor::operator()(const Tensor& motion) const {
  if (motion.cols() != dims_) {
    throw nk::ShapeError("feature extractor: motion has " + std::to_string(motion.cols()) + " dims, expected " +
                         std::to_string(dims_));
  }
  const std::size_t frames = motion.rows();
  if (frames < segments_) throw nk::ShapeError("feature extractor: fewer frames than segments");
  std::vector<double> pooled(segments_ * dims_, 0.0);
  for (std::size_t s = 0; s < segments_; ++s) {
    const std::size_t lo = s * frames / segments_;
    const std::size_t hi = (s + 1) * frames / segments_;
    for (std::size_t f = lo; f < hi; ++f)
      for (std::size_t d = 0; d < dims_; ++d) pooled[s * dims_ + d] += motion(f, d);
    for (std::size_t d = 0; d < dims_; ++d) pooled[s * dims_ + d] /= static_cast<double>(hi - lo);
  }
  Tensor out({featureDim()});
  for (std::size_t k = 0; k < featureDim(); ++k) {
    double acc = bias_[k];
    for (std::size_t i = 0; i < pooled.size(); ++i) acc += weight_(k, i) * pooled[i];
    out[k] = std::tanh(acc);
  }
  return out;
}

Tensor FeatureExtractor::batch(std::span<const synthdata::MotionSequence> motions) const {
  Tensor out({motions.size(), featureDim()});
  for (std::size_t i = 0; i < motions.size(); ++i) {
    const Tensor f = (*this)(motions[i].values);
    std::copy(f.data().begin(), f.data().end(), out.row(i).begin());
  }
  return out;
}

Tensor textFeatures(const FeatureExtractor& fx, const synthdata::SynthSpec& spec, std::span<const int> labels) {
  Tensor out({labels.size(), fx.featureDim()});
  std::vector<Tensor> cache(spec.classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= spec.classes) {
      throw UsageError("text features: label " + std::to_string(labels[i]) + " outside [0, " +
                       std::to_string(spec.classes) + ")");
    }
    Tensor& f = cache[static_cast<std::size_t>(labels[i])];
    if (f.empty()) f = fx(synthdata::classTemplate(spec, static_cast<std::size_t>(labels[i])));
    std::copy(f.data().begin(), f.data().end(), out.row(i).begin());
  }
  return out;
}

GaussianSummary GaussianSummary::fromSamples(const Tensor& rows) {
  if (rows.rows() < 2) throw std::invalid_argument("gaussian summary: need at least 2 samples");
  const Eigen::MatrixXd x = toEigen(rows);
  const Eigen::VectorXd mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(rows.rows() - 1);
  return fromMoments(mean, cov);
}

GaussianSummary GaussianSummary::fromMoments(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols() || cov.rows() != mean.size()) {
    throw nk::ShapeError("gaussian summary: covariance must be square and match the mean");
  }
  const Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.eigenvalues().size() > 0 && es.eigenvalues().minCoeff() < -psdTolerance(sym)) {
    throw NumericalError("gaussian summary: covariance is not positive semidefinite (eigenvalue " +
                         std::to_string(es.eigenvalues().minCoeff()) + ")");
  }
  const Eigen::VectorXd clamped = es.eigenvalues().cwiseMax(0.0);
  return {mean, es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose()};
}

double fid(const GaussianSummary& a, const GaussianSummary& b) {
  if (a.mean.size() != b.mean.size()) {
    throw nk::ShapeError("fid: dimension mismatch (" + std::to_string(a.mean.size()) + " vs " +
                         std::to_string(b.mean.size()) + ")");
  }
  const Eigen::MatrixXd ra = symmetricSqrt(a.cov);
  Eigen::MatrixXd inner = ra * b.cov * ra;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner, Eigen::EigenvaluesOnly);
  double traceRoot = 0.0;
  for (double v : es.eigenvalues()) {
    if (v < -psdTolerance(inner)) throw NumericalError("fid: product covariance has eigenvalue " + std::to_string(v));
    if (v > kClamp) traceRoot += std::sqrt(v);
  }
  const double meanTerm = (a.mean - b.mean).squaredNorm();
  return std::max(0.0, meanTerm + a.cov.trace() + b.cov.trace() - 2.0 * traceRoot);
}

double frechetRows(const Tensor& a, const Tensor& b, bool unitRows) {
  auto prep = [unitRows](Tensor t) {
    if (!unitRows) return t;
    for (std::size_t r = 0; r < t.rows(); ++r) {
      double n = 0.0;
      for (double v : t.row(r)) n += v * v;
      n = std::sqrt(n);
      if (n > 0.0)
        for (double& v : t.row(r)) v /= n;
    }
    return t;
  };
  return fid(GaussianSummary::fromSamples(prep(a)), GaussianSummary::fromSamples(prep(b)));
}

double diversity(const Tensor& features, std::size_t pairs, std::uint64_t seed) {
  if (features.rows() < 2) throw std::invalid_argument("diversity: need at least 2 feature rows");
  if (pairs == 0) throw UsageError("diversity: pair count must be positive");
  Rng rng(Rng::derive(seed, 0xD1Fu));
  return meanPairDistance(canonical(features), pairs, rng);
}

double multimodality(std::span<const Tensor> perCondition, std::size_t pairs, std::uint64_t seed) {
  if (perCondition.empty()) throw std::invalid_argument("multimodality: no conditions");
  if (pairs == 0) throw UsageError("multimodality: pair count must be positive");
  std::vector<Tensor> groups;
  for (std::size_t c = 0; c < perCondition.size(); ++c) {
    if (perCondition[c].rows() < 2) {
      throw std::invalid_argument("multimodality: condition " + std::to_string(c) + " has fewer than 2 generations");
    }
    groups.push_back(canonical(perCondition[c]));
  }
  std::sort(groups.begin(), groups.end(), [](const Tensor& a, const Tensor& b) {
    return std::lexicographical_compare(a.data().begin(), a.data().end(), b.data().begin(), b.data().end());
  });
  Rng rng(Rng::derive(seed, 0x3A3Au));
  double total = 0.0;
  for (const Tensor& g : groups) total += meanPairDistance(g, pairs, rng);
  return total / static_cast<double>(groups.size());
}

double mmDist(const Tensor& text, const Tensor& motion) {
  nk::requireSameShape(text, motion, "mmDist");
  if (text.rows() == 0) throw std::invalid_argument("mmDist: no pairs");
  double total = 0.0;
  for (std::size_t i = 0; i < text.rows(); ++i) total += rowDistance(text, i, motion, i);
  return total / static_cast<double>(text.rows());
}

RPrecision rPrecision(const Tensor& text, const Tensor& motion, std::size_t poolSize, std::uint64_t seed) {
  if (text.rows() != motion.rows()) throw nk::ShapeError("rPrecision: text and motion counts differ");
  if (poolSize < 1) throw UsageError("rPrecision: pool size must be positive");
  if (text.rows() < poolSize) {
    throw std::invalid_argument("rPrecision: " + std::to_string(text.rows()) + " items is fewer than pool size " +
                                std::to_string(poolSize));
  }
  const std::size_t n = text.rows();
  Tensor joint({n, text.cols() + motion.cols()});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(text.row(i).begin(), text.row(i).end(), joint.row(i).begin());
    std::copy(motion.row(i).begin(), motion.row(i).end(), joint.row(i).begin() + static_cast<long>(text.cols()));
  }
  const auto order = sortedOrder(joint);
  const Tensor t = takeRows(text, order);
  const Tensor m = takeRows(motion, order);

  Rng rng(Rng::derive(seed, 0x2E1Cu));
  std::size_t hits[3] = {0, 0, 0};
  for (std::size_t q = 0; q < n; ++q) {
    std::vector<std::size_t> candidates;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == q) continue;
      const auto a = t.row(j);
      const auto b = t.row(q);
      if (!std::equal(a.begin(), a.end(), b.begin())) candidates.push_back(j);
    }
    if (candidates.size() < poolSize - 1) {
      throw std::invalid_argument("rPrecision: only " + std::to_string(candidates.size()) +
                                  " items with a different text, pool needs " + std::to_string(poolSize - 1));
    }
    // Partial Fisher-Yates draws poolSize−1 distinct distractors.
    for (std::size_t k = 0; k + 1 < poolSize; ++k) std::swap(candidates[k], candidates[k + rng.below(candidates.size() - k)]);
    const double truth = rowDistance(m, q, t, q);
    std::size_t rank = 1;
    for (std::size_t k = 0; k + 1 < poolSize; ++k) {
      const std::size_t j = candidates[k];
      const double d = rowDistance(m, q, t, j);
      if (d < truth || (d == truth && j < q)) ++rank;
    }
    for (std::size_t k = 0; k < 3; ++k)
      if (rank <= k + 1) ++hits[k];
  }
  const double inv = 1.0 / static_cast<double>(n);
  return {hits[0] * inv, hits[1] * inv, hits[2] * inv};
}

Interval summarize(const std::vector<double>& values, std::vector<std::uint64_t> seeds) {
  if (values.empty()) throw std::invalid_argument("summarize: no values");
  Interval out;
  const double r = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / r;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.ci95 = 1.96 * std::sqrt(ss / (r - 1.0)) / std::sqrt(r);
  }
  out.seeds = std::move(seeds);
  return out;
}

void EvalConfig::validate() const {
  if (repeats == 0) throw UsageError("metrics: repeats must be positive");
  if (poolSize == 0) throw UsageError("metrics: pool_size must be positive");
  if (diversityPairs == 0 || multimodalityPairs == 0) throw UsageError("metrics: pair counts must be positive");
  if (featureDim == 0 || segments == 0) throw UsageError("metrics: feature sizes must be positive");
}

nlohmann::json EvalConfig::toJson() const {
  return {{"repeats", repeats},
          {"pool_size", poolSize},
          {"diversity_pairs", diversityPairs},
          {"multimodality_pairs", multimodalityPairs},
          {"feature_dim", featureDim},
          {"segments", segments},
          {"seed", seed},
          {"extractor_seed", extractorSeed}};
}

EvalConfig EvalConfig::fromJson(const nlohmann::json& j) {
  EvalConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "repeats") c.repeats = v.get<std::size_t>();
    else if (key == "pool_size") c.poolSize = v.get<std::size_t>();
    else if (key == "diversity_pairs") c.diversityPairs = v.get<std::size_t>();
    else if (key == "multimodality_pairs") c.multimodalityPairs = v.get<std::size_t>();
    else if (key == "feature_dim") c.featureDim = v.get<std::size_t>();
    else if (key == "segments") c.segments = v.get<std::size_t>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "extractor_seed") c.extractorSeed = v.get<std::uint64_t>();
    else throw UsageError("metrics config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

nlohmann::json evaluate(const EvalInput& input, const EvalConfig& cfg) {
  cfg.validate();
  nk::requireSameShape(input.generatedFeatures, input.generatedText, "evaluate");
  const Tensor real = canonical(input.realFeatures);
  Tensor joint({input.generatedFeatures.rows(), 2 * input.generatedFeatures.cols()});
  for (std::size_t i = 0; i < joint.rows(); ++i) {
    std::copy(input.generatedFeatures.row(i).begin(), input.generatedFeatures.row(i).end(), joint.row(i).begin());
    std::copy(input.generatedText.row(i).begin(), input.generatedText.row(i).end(),
              joint.row(i).begin() + static_cast<long>(input.generatedFeatures.cols()));
  }
  const auto order = sortedOrder(joint);
  const Tensor gen = takeRows(input.generatedFeatures, order);
  const Tensor text = takeRows(input.generatedText, order);

  std::vector<double> fids, divs, mms, mmds, top1, top2, top3;
  std::vector<std::uint64_t> seeds;
  for (std::size_t r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t s = Rng::derive(cfg.seed, r);
    seeds.push_back(s);
    // Both sets are resampled from one stream so identical inputs produce
    // identical resamples.
    Rng boot(s);
    Rng bootGen(s);
    const Tensor realB = takeRows(real, bootstrap(real.rows(), boot));
    const auto genIdx = bootstrap(gen.rows(), bootGen);
    fids.push_back(fid(GaussianSummary::fromSamples(realB), GaussianSummary::fromSamples(takeRows(gen, genIdx))));
    mmds.push_back(mmDist(takeRows(text, genIdx), takeRows(gen, genIdx)));
    divs.push_back(diversity(gen, cfg.diversityPairs, s));
    if (!input.perCondition.empty()) mms.push_back(multimodality(input.perCondition, cfg.multimodalityPairs, s));
    const RPrecision rp = rPrecision(text, gen, cfg.poolSize, s);
    top1.push_back(rp.top1);
    top2.push_back(rp.top2);
    top3.push_back(rp.top3);
  }
  auto entry = [&](const std::vector<double>& v) {
    const Interval iv = summarize(v, seeds);
    return nlohmann::json{{"mean", iv.mean}, {"ci95", iv.ci95}, {"seeds", iv.seeds}};
  };
  nlohmann::json report = {{"fid", entry(fids)},           {"diversity", entry(divs)},
                           {"mm_dist", entry(mmds)},       {"r_precision_top1", entry(top1)},
                           {"r_precision_top2", entry(top2)}, {"r_precision_top3", entry(top3)}};
  if (!mms.empty()) report["multimodality"] = entry(mms);
  return report;
}

}  // namespace motionduet::metrics
