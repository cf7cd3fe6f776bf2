#include "motionduet/duet.hpp"

#include <cmath>

#include "motionduet/errors.hpp"

namespace motionduet::duet {

namespace nk = numkit;

DmmPolicy parsePolicy(const std::string& name) {
  if (name == "select_closer") return DmmPolicy::selectCloser;
  if (name == "literal_eq8") return DmmPolicy::literalEq8;
  throw UsageError("unknown DMM policy '" + name + "' (expected select_closer|literal_eq8)");
}

std::string policyName(DmmPolicy p) { return p == DmmPolicy::selectCloser ? "select_closer" : "literal_eq8"; }

void DuetConfig::validate() const {
  if (textTokens == 0 || textWidth == 0) throw UsageError("duet: text stream must be non-empty");
  if (videoTokens == 0 || videoWidth == 0) throw UsageError("duet: video stream extents must be positive");
  if (hidden == 0) throw UsageError("duet: hidden width must be positive");
  if (kernelWidth % 2 == 0) throw UsageError("duet: conv kernel width must be odd");
}

nlohmann::json DuetConfig::toJson() const {
  return {{"text_tokens", textTokens},   {"text_width", textWidth}, {"video_tokens", videoTokens},
          {"video_width", videoWidth},   {"hidden", hidden},        {"kernel_width", kernelWidth},
          {"policy", policyName(policy)}, {"use_fft", useFft},       {"use_conv", useConv},
          {"use_identity", useIdentity}, {"use_dmm", useDmm}};
}

DuetConfig DuetConfig::fromJson(const nlohmann::json& j) {
  DuetConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "text_tokens") c.textTokens = v.get<std::size_t>();
    else if (key == "text_width") c.textWidth = v.get<std::size_t>();
    else if (key == "video_tokens") c.videoTokens = v.get<std::size_t>();
    else if (key == "video_width") c.videoWidth = v.get<std::size_t>();
    else if (key == "hidden") c.hidden = v.get<std::size_t>();
    else if (key == "kernel_width") c.kernelWidth = v.get<std::size_t>();
    else if (key == "policy") c.policy = parsePolicy(v.get<std::string>());
    else if (key == "use_fft") c.useFft = v.get<bool>();
    else if (key == "use_conv") c.useConv = v.get<bool>();
    else if (key == "use_identity") c.useIdentity = v.get<bool>();
    else if (key == "use_dmm") c.useDmm = v.get<bool>();
    else throw UsageError("duet config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

DuetParams DuetParams::create(const DuetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  nk::Rng rng(nk::Rng::derive(seed, 0xD0E7u));
  const std::size_t bins = cfg.contextTokens() / 2 + 1;
  DuetParams p{nn::Linear::create("duet.proj_text", cfg.textWidth, cfg.hidden, rng),
               Param("duet.proj_video.weight",
                     nk::randomNormal({cfg.videoWidth, cfg.hidden}, rng, 1.0 / std::sqrt(static_cast<double>(cfg.videoWidth)))),
               Param("duet.filter_root", Tensor({bins, cfg.hidden}, 1.0)),
               Param("duet.conv_kernel", nk::randomNormal({cfg.kernelWidth, cfg.hidden}, rng, 0.1)),
               nn::Linear::create("duet.out_proj", 2 * cfg.hidden, cfg.hidden, rng)};
  return p;
}

void DuetParams::collect(std::vector<Param*>& out) {
  projText.collect(out);
  out.push_back(&projVideo);
  out.push_back(&filterRoot);
  out.push_back(&convKernel);
  outProj.collect(out);
}

Tensor DuetParams::magnitude() const {
  Tensor w = filterRoot.value;
  for (auto& v : w.data()) v *= v;
  return w;
}

void DuetParams::setMagnitude(const Tensor& w) {
  nk::requireSameShape(w, filterRoot.value, "setMagnitude");
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] < 0.0) throw std::invalid_argument("setMagnitude: magnitude filter must be nonnegative");
    filterRoot.value[i] = std::sqrt(w[i]);
  }
}

FusionStreams baseFusion(Tape& tape, DuetParams& params, const DuetConfig& cfg, const Tensor& video, const Tensor& text) {
  if (text.empty() || text.rows() == 0) throw std::invalid_argument("baseFusion: text embedding is required");
  if (text.cols() != cfg.textWidth || video.cols() != cfg.videoWidth) {
    throw nk::ShapeError("baseFusion: text " + nk::shapeString(text.shape()) + " / video " +
                         nk::shapeString(video.shape()) + " do not match configured widths");
  }
  const std::size_t tokens = std::max(text.rows(), video.rows());
  Var t = params.projText(tape, tape.constant(text));
  Var v = nk::matmul(tape.constant(video), tape.param(params.projVideo));
  if (t.rows() != tokens) t = nk::gatherRows(t, nk::nearestIndices(t.rows(), tokens));
  if (v.rows() != tokens) v = nk::gatherRows(v, nk::nearestIndices(v.rows(), tokens));
  return {t, v, nk::add(t, v)};
}

Var fourierBranch(Var r, Var magnitude) { return nk::spectralFilter(r, magnitude); }

std::vector<bool> dmmMask(const Tensor& text, const Tensor& video, const Tensor& fusion, DmmPolicy policy) {
  nk::requireSameShape(text, fusion, "dmm");
  nk::requireSameShape(video, fusion, "dmm");
  std::vector<bool> takeText(fusion.rows());
  for (std::size_t l = 0; l < fusion.rows(); ++l) {
    double dText = 0.0, dVideo = 0.0;
    for (std::size_t c = 0; c < fusion.cols(); ++c) {
      const double a = fusion(l, c) - text(l, c);
      const double b = fusion(l, c) - video(l, c);
      dText += a * a;
      dVideo += b * b;
    }
    dText = std::sqrt(dText);
    dVideo = std::sqrt(dVideo);
    takeText[l] = policy == DmmPolicy::selectCloser ? dText <= dVideo : dText > dVideo;
  }
  return takeText;
}

DmmResult dmm(Var text, Var video, Var fusion, DmmPolicy policy) {
  auto mask = dmmMask(text.value(), video.value(), fusion.value(), policy);
  Var selected = nk::selectRows(text, video, mask);
  return {selected, nk::concatCols(selected, fusion), std::move(mask)};
}

DuetOutput duetForward(Tape& tape, DuetParams& params, const DuetConfig& cfg, const Tensor& video, const Tensor& text,
                       PathTrace* trace) {
  traceHit(trace, "duet.base_fusion");
  FusionStreams s = baseFusion(tape, params, cfg, video, text);

  std::vector<bool> mask(s.fusion.rows(), true);
  Var selected = s.fusion;
  if (cfg.useDmm) {
    traceHit(trace, "duet.dmm");
    DmmResult d = dmm(s.text, s.video, s.fusion, cfg.policy);
    selected = d.selected;
    mask = std::move(d.mask);
  }

  Var enhanced = s.fusion;
  if (cfg.useFft) {
    traceHit(trace, "duet.fft");
    Var root = tape.param(params.filterRoot);
    enhanced = nk::add(enhanced, fourierBranch(s.fusion, nk::mul(root, root)));
  }
  if (cfg.useConv) {
    traceHit(trace, "duet.conv");
    enhanced = nk::add(enhanced, nk::conv1d(s.fusion, tape.param(params.convKernel)));
  }
  if (cfg.useIdentity) {
    traceHit(trace, "duet.identity");
    enhanced = nk::add(enhanced, s.fusion);
  }

  traceHit(trace, "duet.out_proj");
  Var context = params.outProj(tape, nk::concatCols(selected, enhanced));
  return {context, s, std::move(mask)};
}

Tensor fuse(DuetParams& params, const DuetConfig& cfg, const Tensor& video, const Tensor& text, PathTrace* trace) {
  Tape tape(false);
  return duetForward(tape, params, cfg, video, text, trace).context.value();
}

}  // namespace motionduet::duet
