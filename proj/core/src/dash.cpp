#include "motionduet/dash.hpp"

#include <cmath>
#include <vector>

#include "motionduet/errors.hpp"
#include "motionduet/numkit/ops.hpp"

namespace motionduet::dash {

namespace nk = numkit;

namespace {

double rowNorm(const Tensor& t, std::size_t r) {
  double s = 0.0;
  for (double v : t.row(r)) s += v * v;
  return std::sqrt(s);
}

Tensor unitRows(const Tensor& t, const std::vector<double>& norms) {
  Tensor u = t;
  for (std::size_t r = 0; r < t.rows(); ++r)
    if (norms[r] > 0.0)
      for (double& v : u.row(r)) v /= norms[r];
  return u;
}

double dotRows(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) s += a(i, c) * b(j, c);
  return s;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void checkBatch(const AlignedPairBatch& batch) {
  nk::requireSameShape(batch.motion, batch.video, "dash batch");
}

}  // namespace

void DashConfig::validate() const {
  if (!(marginCos >= 0.0 && marginCos < 1.0)) throw UsageError("dash: m_cos must lie in [0, 1)");
  if (!(marginPair >= 0.0 && marginPair < 1.0)) throw UsageError("dash: m_pair must lie in [0, 1)");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw UsageError("dash: lambda_dash must be finite and >= 0");
  if (layer < 1) throw UsageError("dash: dash_layer is 1-based and must be >= 1");
}

nlohmann::json DashConfig::toJson() const {
  return {{"m_cos", marginCos}, {"m_pair", marginPair}, {"lambda_dash", lambda}, {"dash_layer", layer}};
}

DashConfig DashConfig::fromJson(const nlohmann::json& j) {
  DashConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "m_cos") c.marginCos = v.get<double>();
    else if (key == "m_pair") c.marginPair = v.get<double>();
    else if (key == "lambda_dash") c.lambda = v.get<double>();
    else if (key == "dash_layer") c.layer = v.get<std::size_t>();
    else throw UsageError("dash config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

LossTerms tokenMarginLoss(const AlignedPairBatch& batch, double marginCos) {
  checkBatch(batch);
  const Tensor& z = batch.motion;
  const Tensor& v = batch.video;
  const std::size_t n = z.rows();
  LossTerms out;
  out.grad = Tensor(z.shape());

  std::vector<double> nz(n), nv(n);
  std::size_t used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    nz[i] = rowNorm(z, i);
    nv[i] = rowNorm(v, i);
    if (nz[i] > 0.0 && nv[i] > 0.0) ++used;
  }
  out.skipped = n - used;
  if (used == 0) return out;
  const Tensor uz = unitRows(z, nz);
  const Tensor uv = unitRows(v, nv);
  const double inv = 1.0 / static_cast<double>(used);

  for (std::size_t i = 0; i < n; ++i) {
    if (!(nz[i] > 0.0 && nv[i] > 0.0)) continue;
    const double c = dotRows(uz, i, uv, i);
    const double r = 1.0 - marginCos - c;
    if (r <= 0.0) continue;
    out.value += r * inv;
    for (std::size_t k = 0; k < z.cols(); ++k) out.grad(i, k) -= inv * (uv(i, k) - c * uz(i, k)) / nz[i];
  }
  return out;
}

LossTerms pairStructureLoss(const AlignedPairBatch& batch, double marginPair) {
  checkBatch(batch);
  const Tensor& z = batch.motion;
  const Tensor& v = batch.video;
  const std::size_t n = z.rows();
  LossTerms out;
  out.grad = Tensor(z.shape());

  std::vector<double> nz(n), nv(n);
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < n; ++i) {
    nz[i] = rowNorm(z, i);
    nv[i] = rowNorm(v, i);
    if (nz[i] > 0.0 && nv[i] > 0.0) usable.push_back(i);
  }
  out.skipped = n - usable.size();
  if (usable.size() < 2) {
    out.degenerate = true;
    return out;
  }
  const Tensor uz = unitRows(z, nz);
  const Tensor uv = unitRows(v, nv);
  const double inv = 1.0 / static_cast<double>(usable.size() * usable.size());

  // Diagonal terms are ReLU(|1 − 1| − m) = 0, and cos(z, z) has zero gradient.
  // Off-diagonal terms appear twice (ij and ji) with equal value.
  for (std::size_t a = 0; a < usable.size(); ++a) {
    const std::size_t i = usable[a];
    for (std::size_t b = a + 1; b < usable.size(); ++b) {
      const std::size_t j = usable[b];
      const double cz = dotRows(uz, i, uz, j);
      const double cv = dotRows(uv, i, uv, j);
      const double r = std::abs(cz - cv) - marginPair;
      if (r <= 0.0) continue;
      out.value += 2.0 * r * inv;
      const double coef = 2.0 * inv * sign(cz - cv);
      for (std::size_t k = 0; k < z.cols(); ++k) {
        out.grad(i, k) += coef * (uz(j, k) - cz * uz(i, k)) / nz[i];
        out.grad(j, k) += coef * (uz(i, k) - cz * uz(j, k)) / nz[j];
      }
    }
  }
  return out;
}

LossTerms dashLoss(const AlignedPairBatch& batch, const DashConfig& cfg) {
  LossTerms token = tokenMarginLoss(batch, cfg.marginCos);
  const LossTerms pair = pairStructureLoss(batch, cfg.marginPair);
  token.value += pair.value;
  for (std::size_t i = 0; i < token.grad.size(); ++i) token.grad[i] += pair.grad[i];
  token.skipped = std::max(token.skipped, pair.skipped);
  token.degenerate = pair.degenerate;
  return token;
}

double totalLoss(double mld, double dashValue, double lambda) {
  if (!std::isfinite(mld) || !std::isfinite(dashValue) || !std::isfinite(lambda)) {
    throw NumericalError("total loss: non-finite input (L_MLD=" + std::to_string(mld) +
                         ", L_DASH=" + std::to_string(dashValue) + ", lambda=" + std::to_string(lambda) + ")");
  }
  return mld + lambda * dashValue;
}

Var dashLossVar(Var motionTokens, const Tensor& videoTokens, const DashConfig& cfg) {
  const Tensor& z = motionTokens.value();
  Tensor video = videoTokens;
  if (video.rows() != z.rows()) {
    const auto idx = nk::nearestIndices(video.rows(), z.rows());
    Tensor resampled({z.rows(), video.cols()});
    for (std::size_t r = 0; r < z.rows(); ++r)
      for (std::size_t c = 0; c < video.cols(); ++c) resampled(r, c) = videoTokens(idx[r], c);
    video = std::move(resampled);
  }
  LossTerms terms = dashLoss({z, video}, cfg);
  return motionTokens.tape->record(Tensor::scalar(terms.value), {motionTokens},
                                   [motionTokens, grad = std::move(terms.grad)](nk::Tape& tape, const Tensor& g) {
                                     if (!tape.requiresGrad(motionTokens)) return;
                                     Tensor& dz = tape.gradBuffer(motionTokens.id);
                                     for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += g[0] * grad[i];
                                   });
}

}  // namespace motionduet::dash
