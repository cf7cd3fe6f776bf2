#include <benchmark/benchmark.h>

#include "motionduet/diffusion.hpp"
#include "motionduet/duet.hpp"
#include "motionduet/metrics.hpp"
#include "motionduet/numkit/fft.hpp"
#include "motionduet/numkit/ops.hpp"

namespace nk = motionduet::numkit;
namespace md = motionduet;

static void BM_Rfft(benchmark::State& state) {
  nk::Rng rng(1);
  const nk::Tensor x = nk::randomNormal({static_cast<std::size_t>(state.range(0)), 16}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nk::rfft(x));
}
BENCHMARK(BM_Rfft)->Arg(16)->Arg(64)->Arg(63)->Arg(256);

static void BM_DuetFuse(benchmark::State& state) {
  md::duet::DuetConfig cfg;
  auto params = md::duet::DuetParams::create(cfg, 1);
  nk::Rng rng(2);
  const nk::Tensor video = nk::randomNormal({cfg.videoTokens, cfg.videoWidth}, rng);
  const nk::Tensor text = nk::randomNormal({cfg.textTokens, cfg.textWidth}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(md::duet::fuse(params, cfg, video, text));
}
BENCHMARK(BM_DuetFuse);

static void BM_DenoiserForward(benchmark::State& state) {
  md::diffusion::ModelConfig mc;
  mc.denoiser.contextTokens = mc.duet.contextTokens();
  mc.denoiser.hidden = mc.duet.hidden;
  mc.denoiser.alignWidth = mc.duet.videoWidth;
  auto model = md::diffusion::Model::create(mc);
  nk::Rng rng(3);
  const nk::Tensor x = nk::randomNormal({mc.denoiser.frames, mc.denoiser.dims}, rng);
  const nk::Tensor ctx = nk::randomNormal({mc.denoiser.contextTokens, mc.denoiser.hidden}, rng);
  const auto& dc = model.config.denoiser;
  for (auto _ : state) {
    nk::Tape tape(false);
    auto out = md::diffusion::denoise(tape, model.denoiser, dc, tape.constant(x), 10, tape.constant(ctx), 0);
    benchmark::DoNotOptimize(out.prediction.value());
  }
}
BENCHMARK(BM_DenoiserForward);

static void BM_Fid(benchmark::State& state) {
  nk::Rng rng(4);
  const auto n = static_cast<std::size_t>(state.range(0));
  const nk::Tensor a = nk::randomNormal({n, 16}, rng);
  const nk::Tensor b = nk::randomNormal({n, 16}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(md::metrics::fid(md::metrics::GaussianSummary::fromSamples(a),
                                              md::metrics::GaussianSummary::fromSamples(b)));
  }
}
BENCHMARK(BM_Fid)->Arg(256)->Arg(4096);
BENCHMARK_MAIN();
