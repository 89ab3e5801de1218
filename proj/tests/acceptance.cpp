// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fmlab/cond/modulation.hpp"
#include "fmlab/core/flow_matching.hpp"
#include "fmlab/mask/morphology.hpp"
#include "fmlab/metrics/distribution.hpp"
#include "fmlab/metrics/losses.hpp"
#include "fmlab/metrics/segmentation.hpp"
#include "fmlab/nn/trainer.hpp"
#include "fmlab/ode/integrator.hpp"
#include "fmlab/pipeline/commands.hpp"
#include "fmlab/pipeline/toy_data.hpp"

using namespace fmlab;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using Eigen::MatrixXd;

namespace {

// Pinned tolerances.
constexpr int kFdTrials = 1000;
constexpr double kFdStep = 1e-5;
constexpr double kFdRel = 1e-4;
constexpr double kFdSeconds = 1.0;
constexpr double kEulerBand = 0.15;
constexpr double kHeunBand = 0.20;
constexpr double kTrainSeconds = 60.0;
constexpr double kMeanTol = 0.2;
constexpr double kSeparationSigmas = 3.0;
constexpr double kInjectGap = 0.3;
constexpr double kInjectDeviation = 0.1;
constexpr double kMorphSeconds = 10.0;
constexpr double kFidSelf = 1e-8;
constexpr double kFid1d = 1e-6;
constexpr double kTverskyFd = 1e-4;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

Sample random_sample(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = 6.0 * uniform01(rng) - 3.0;
  return Sample(std::move(v));
}

bool close_rel(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// ---------------------------------------------------------------------------

Outcome interpolant_consistency() {
  Rng rng(101);
  const auto t0 = Clock::now();
  std::size_t bad = 0, checks = 0;
  for (int trial = 0; trial < kFdTrials; ++trial) {
    const auto x0 = random_sample(rng, 4), x1 = random_sample(rng, 4), xi = random_sample(rng, 4);
    const double t = kFdStep + (1.0 - 2 * kFdStep) * uniform01(rng);
    const auto lin = PathSchedule::linear();
    const auto v = fm::target_velocity(lin, x0, x1, xi, t);
    const auto up = fm::interpolate(lin, x0, x1, xi, t + kFdStep);
    const auto dn = fm::interpolate(lin, x0, x1, xi, t - kFdStep);
    // Rectified path at sigma = 0: its noise term is a fixed draw, so the velocity
    // is the derivative of the mean path.
    const RectifiedSchedule rs(0.0);
    const auto r = fm::rectified_interpolate(rs, x0, x1, xi, t);
    const auto rup = fm::rectified_interpolate(rs, x0, x1, xi, t + kFdStep).x_t;
    const auto rdn = fm::rectified_interpolate(rs, x0, x1, xi, t - kFdStep).x_t;
    for (std::size_t i = 0; i < 4; ++i) {
      bad += !close_rel(v[i], (up[i] - dn[i]) / (2 * kFdStep), kFdRel);
      bad += !close_rel(r.u_t[i], (rup[i] - rdn[i]) / (2 * kFdStep), kFdRel);
      checks += 2;
    }
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < kFdSeconds, std::to_string(checks - bad) + "/" + std::to_string(checks) +
                                            " components within " + num(kFdRel) + " relative, " + num(secs) + " s"};
}

struct Growth {
  MatrixXd velocity(const MatrixXd& x, double, std::span<const Condition>) const { return x; }
};

Outcome ode_order() {
  const double exact = std::exp(1.0);
  auto err = [&](ode::Method m, int k) {
    ode::IntegratorConfig c;
    c.method = m;
    c.steps = k;
    return std::abs(ode::integrate(Growth{}, Sample({1.0}), Condition::none(), c)[0] - exact);
  };
  bool ok = true;
  std::string detail = "euler ratios";
  for (int k : {25, 50, 100}) {
    const double r = err(ode::Method::euler, k) / err(ode::Method::euler, 2 * k);
    ok = ok && std::abs(r - 2.0) <= kEulerBand * 2.0;
    detail += " " + num(r);
  }
  detail += ", heun ratios";
  for (int k : {25, 50, 100}) {
    const double r = err(ode::Method::heun, k) / err(ode::Method::heun, 2 * k);
    ok = ok && std::abs(r - 4.0) <= kHeunBand * 4.0;
    detail += " " + num(r);
  }
  return {ok, detail};
}

// Shared two-Gaussian model for the transport and guidance criteria.
struct ClassStats {
  Eigen::Vector2d mean[2];
  double sd = 0.0;
  double separation() const { return (mean[1] - mean[0]).norm() / sd; }
};

struct TwoGaussians {
  nn::ModelConfig config;
  nn::VelocityModel model;
  double train_seconds = 0.0;

  TwoGaussians() : config(make_config()), model(config) {
    const auto data = toy::two_gaussians(2000, 1);
    nn::TrainConfig tc;
    tc.steps = 2000;
    tc.batch_size = 256;
    tc.seed = 5;
    const auto t0 = Clock::now();
    nn::train_fm(model, data, PathSchedule::linear(), tc);
    train_seconds = seconds_since(t0);
  }

  static nn::ModelConfig make_config() {
    nn::ModelConfig c;
    c.num_classes = 2;
    c.init_seed = 3;
    return c;
  }

  MatrixXd sample(int y, std::optional<double> omega) const {
    ode::IntegratorConfig ic;
    ic.cfg_omega = omega;
    std::vector<Condition> ys(1000, Condition::label(y));
    return ode::integrate_many(model, ode::noise_batch(2, 1000, 7 + static_cast<std::uint64_t>(y)), ys, ic);
  }

  ClassStats stats(std::optional<double> omega) const {
    ClassStats s;
    double ss = 0.0;
    for (int y = 0; y < 2; ++y) {
      const MatrixXd x = sample(y, omega);
      s.mean[y] = x.rowwise().mean();
      ss += (x.colwise() - s.mean[y]).squaredNorm();
    }
    s.sd = std::sqrt(ss / (2.0 * 2.0 * 999.0));
    return s;
  }
};

Outcome toy_transport(const TwoGaussians& tg) {
  const ClassStats s = tg.stats(std::nullopt);
  const Eigen::Vector2d target0(-2.0, -2.0), target1(2.0, 2.0);
  const double e0 = (s.mean[0] - target0).cwiseAbs().maxCoeff();
  const double e1 = (s.mean[1] - target1).cwiseAbs().maxCoeff();
  const bool ok = tg.train_seconds < kTrainSeconds && e0 <= kMeanTol && e1 <= kMeanTol &&
                  s.separation() > kSeparationSigmas;
  return {ok, "train " + num(tg.train_seconds) + " s, mean error " + num(e0) + " / " + num(e1) + ", separation " +
                  num(s.separation()) + " sd"};
}

Outcome cfg_sanity(const TwoGaussians& tg) {
  bool identical = true;
  for (int y = 0; y < 2; ++y) identical = identical && tg.sample(y, 1.0) == tg.sample(y, std::nullopt);
  const double plain = tg.stats(std::nullopt).separation();
  const double guided = tg.stats(1.2).separation();
  return {identical && guided >= plain, std::string("omega=1 ") + (identical ? "bit-identical" : "differs") +
                                            ", separation " + num(plain) + " -> " + num(guided) + " at omega=1.2"};
}

Outcome rectified_injection() {
  const auto task = toy::dark_line_task(8, 500, 11);
  nn::ModelConfig mc;
  mc.mode = nn::ConditioningMode::mask_conditional;
  mc.data_shape = Shape::image(8, 8, 1);
  mc.cond_dim = 128;
  mc.init_seed = 2;
  nn::VelocityModel model(mc);
  nn::TrainConfig tc;
  tc.steps = 2000;
  tc.batch_size = 128;
  tc.p_drop = 0.0;
  tc.seed = 4;
  nn::train_rf_injector(model, task.pairs, task.backgrounds, RectifiedSchedule(), tc);

  const auto test = toy::dark_line_task(8, 200, 99);
  double masked = 0.0, unmasked = 0.0, deviation = 0.0;
  std::size_t nm = 0, nu = 0;
  const ode::IntegratorConfig ic;
  for (std::size_t i = 0; i < test.backgrounds.size(); ++i) {
    const auto& bg = test.backgrounds[i];
    const auto& m = test.pairs[i].mask;
    const Sample out = ode::integrate_from_background(model, bg, m, ic);
    for (std::size_t p = 0; p < m.size(); ++p) {
      if (m.bits()[p]) {
        masked += out[p];
        ++nm;
      } else {
        unmasked += out[p];
        deviation += std::abs(out[p] - bg[p]);
        ++nu;
      }
    }
  }
  const double gap = unmasked / static_cast<double>(nu) - masked / static_cast<double>(nm);
  const double dev = deviation / static_cast<double>(nu);
  return {gap >= kInjectGap && dev <= kInjectDeviation, "gap " + num(gap) + ", background deviation " + num(dev)};
}

mask::BinaryMask from_bits(std::uint32_t bits) {
  mask::BinaryMask m(4, 4);
  for (std::size_t i = 0; i < 16; ++i) m.set(i % 4, i / 4, (bits >> i) & 1u);
  return m;
}

Outcome morphology_oracle() {
  const auto t0 = Clock::now();
  std::size_t bad = 0;
  for (std::uint32_t bits = 0; bits < (1u << 16); ++bits) {
    const auto m = from_bits(bits);
    mask::BinaryMask dil(4, 4), ero(4, 4);
    std::vector<double> grad(16);
    for (long y = 0; y < 4; ++y) {
      for (long x = 0; x < 4; ++x) {
        bool any = false, all = true;
        for (long dy = -1; dy <= 1; ++dy) {
          for (long dx = -1; dx <= 1; ++dx) {
            const bool v = m.at_padded(x + dx, y + dy);
            any = any || v;
            all = all && v;
          }
        }
        dil.set(static_cast<std::size_t>(x), static_cast<std::size_t>(y), any);
        ero.set(static_cast<std::size_t>(x), static_cast<std::size_t>(y), all);
        grad[static_cast<std::size_t>(y * 4 + x)] = (any ? 1.0 : 0.0) - (all ? 1.0 : 0.0);
      }
    }
    if (mask::dilate(m) != dil || mask::erode(m) != ero || cond::boundary_map(m).values != grad) ++bad;
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < kMorphSeconds,
          std::to_string((1u << 16) - bad) + "/65536 masks agree, " + num(secs) + " s"};
}

Outcome conditioning_identity() {
  Rng rng(7);
  std::size_t norm_mismatch = 0, gate_mismatch = 0;
  for (int trial = 0; trial < 50; ++trial) {
    cond::FeatureMap h(4, 6, 6);
    for (auto& v : h.data()) v = 4.0 * uniform01(rng) - 2.0;
    mask::BinaryMask m(6, 6);
    for (std::size_t i = 0; i < m.size(); ++i) m.set(i % 6, i / 6, uniform01(rng) < 0.3);
    const cond::ConditionedNorm stage{cond::SpadeParams::identity(4, 3, 2)};
    if (stage(h, m).data() != cond::group_norm(h, 2).data()) ++norm_mismatch;

    cond::Raster g{6, 6, std::vector<double>(36)};
    for (auto& v : g.values) v = uniform01(rng);
    const double omega = 4.0 * uniform01(rng) - 2.0;
    const auto gated = cond::boundary_gate(h, g, omega);
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t y = 0; y < 6; ++y)
        for (std::size_t x = 0; x < 6; ++x) {
          const double expect = h.at(c, y, x) * (1.0 + omega * g.values[y * 6 + x]);
          if (std::abs(gated.at(c, y, x) - expect) > 4 * std::numeric_limits<double>::epsilon() * std::abs(expect)) {
            ++gate_mismatch;
          }
        }
  }
  return {norm_mismatch == 0 && gate_mismatch == 0, "identity stack mismatches " + std::to_string(norm_mismatch) +
                                                        "/50, gate mismatches " + std::to_string(gate_mismatch)};
}

MatrixXd gaussian_rows(Eigen::Index n, Eigen::Index dim, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd m(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) m(i, j) = normal(rng);
  return m;
}

MatrixXd rows_at(const MatrixXd& m, const std::vector<std::size_t>& idx, std::size_t begin, std::size_t count) {
  MatrixXd out(static_cast<Eigen::Index>(count), m.cols());
  for (std::size_t i = 0; i < count; ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[begin + i]));
  }
  return out;
}

Outcome metrics_bundle() {
  using namespace metrics;
  Rng rng(9);
  std::size_t f1_bad = 0;
  for (int i = 0; i < 10000; ++i) {
    ConfusionCounts c{std::floor(1000 * uniform01(rng)), std::floor(1000 * uniform01(rng)),
                      std::floor(1000 * uniform01(rng)), 0};
    if (c.tp + c.fp + c.fn == 0) continue;
    const double j = iou(c);
    f1_bad += std::abs(f1(c) - 2.0 * j / (1.0 + j)) > 1e-12;
  }

  const MatrixXd a = gaussian_rows(200, 5, 3);
  const double self = fid(FeatureSet(a), FeatureSet(a));
  const double r = std::sqrt(0.5);
  const double one_d = fid(FeatureSet::from_rows({{-r}, {r}}), FeatureSet::from_rows({{1.0 - r}, {1.0 + r}}));

  const MatrixXd all = gaussian_rows(1000, 4, 2024);
  const double observed = kid(FeatureSet(all.topRows(500)), FeatureSet(all.bottomRows(500)));
  std::vector<double> null;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto perm = pipeline::seeded_permutation(1000, s + 1);
    null.push_back(kid(FeatureSet(rows_at(all, perm, 0, 500)), FeatureSet(rows_at(all, perm, 500, 500))));
  }
  double mean = 0.0, var = 0.0;
  for (double v : null) mean += v / 20.0;
  for (double v : null) var += (v - mean) * (v - mean) / 19.0;
  const bool kid_ok = std::abs(observed) <= 3.0 * std::sqrt(var);

  mask::BinaryMask gt(8, 8);
  for (std::size_t i = 0; i < 64; ++i) gt.set(i % 8, i / 8, uniform01(rng) < 0.2);
  Field p{8, 8, std::vector<double>(64)};
  for (auto& v : p.values) v = 0.05 + 0.9 * uniform01(rng);
  const TverskyParams prm{0.3, 0.75, 1.33};
  const auto g = focal_tversky_grad(p, gt, prm);
  std::size_t ft_bad = 0;
  for (std::size_t i = 0; i < 64; ++i) {
    Field up = p, dn = p;
    up.values[i] += kFdStep;
    dn.values[i] -= kFdStep;
    const double fd = (focal_tversky(up, gt, prm) - focal_tversky(dn, gt, prm)) / (2 * kFdStep);
    ft_bad += std::abs(g[i] - fd) > kTverskyFd * std::max(1.0, std::abs(fd));
  }

  const bool ok = f1_bad == 0 && self <= kFidSelf && std::abs(one_d - 1.0) <= kFid1d && kid_ok && ft_bad == 0;
  return {ok, "f1/iou violations " + std::to_string(f1_bad) + ", fid(a,a) " + num(self) + ", 1-D fid " +
                  num(one_d) + ", kid " + num(observed) + " vs band " + num(3.0 * std::sqrt(var)) +
                  ", tversky grad mismatches " + std::to_string(ft_bad)};
}

Outcome policy_arithmetic() {
  const auto in = pipeline::indomain_count(400, 16);
  const auto cross = pipeline::crossdomain_count(400, 4.0);
  const auto split = pipeline::split_counts(50000, {0.8, 0.1, 0.1});
  const bool ok = in == 6400 && cross == 1600 && split == std::vector<std::size_t>{40000, 5000, 5000};
  return {ok, "in-domain " + std::to_string(in) + ", cross-domain " + std::to_string(cross) + ", split " +
                  std::to_string(split[0]) + "/" + std::to_string(split[1]) + "/" + std::to_string(split[2])};
}

// Full toy pipeline through the command-line entry point.
bool pipeline_run(const fs::path& dir, unsigned threads, std::string& why) {
  const std::string th = std::to_string(threads);
  fs::create_directories(dir);
  spit(dir / "mask.cfg",
       "task = mask_generator\ndata = toy\nbin_edges = 0,0.05,0.1,0.15,0.2\nhidden = 32\ntime_dim = 8\nsteps = 100\n"
       "batch_size = 32\nema_decay = 0.9\nseed = 1\nout = models/mask.ckpt\n");
  spit(dir / "render.cfg",
       "task = renderer\ndata = toy\nhidden = 32\ntime_dim = 8\nsteps = 100\nbatch_size = 32\nema_decay = 0.9\n"
       "seed = 2\nout = models/render.ckpt\n");
  const auto p = [&dir](const char* rel) { return (dir / rel).string(); };
  const std::vector<std::vector<std::string>> steps{
      {"toy-data", "--kind", "cracks", "--count", "24", "--side", "16", "--out", p("toy")},
      {"train", p("mask.cfg")},
      {"train", p("render.cfg")},
      {"synthesize-indomain", "--mask-model", p("models/mask.ckpt"), "--render-model", p("models/render.ckpt"),
       "--real-count", "24", "--k", "1", "--steps", "20", "--threads", th, "--out", p("syn")},
      {"split", "--manifest", p("syn/manifest.tsv")},
      {"evaluate", "--pred", p("syn/masks"), "--gt", p("toy/masks"), "--out", p("eval")},
  };
  for (const auto& args : steps) {
    std::ostringstream out, err;
    const int code = pipeline::run(args, out, err);
    if (code != 0) {
      why = args[0] + " exited " + std::to_string(code) + ": " + err.str();
      return false;
    }
  }
  return true;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("fmlab_accept_" + std::to_string(std::random_device{}()));
  setenv("FMLAB_SEED", "20240611", 1);
  std::string why;
  const bool ran = pipeline_run(root / "a", 1, why) && pipeline_run(root / "b", 2, why);
  unsetenv("FMLAB_SEED");
  if (!ran) {
    fs::remove_all(root);
    return {false, why};
  }
  const std::vector<std::string> files{"syn/manifest.tsv",     "models/mask.ckpt",   "models/mask.ckpt.cfg",
                                       "models/render.ckpt",   "models/render.ckpt.cfg", "eval/summary.tsv",
                                       "eval/per_image.tsv",   "toy/manifest.tsv"};
  std::size_t same = 0;
  std::string differs;
  for (const auto& f : files) {
    const std::string a = slurp(root / "a" / f), b = slurp(root / "b" / f);
    if (!a.empty() && a == b) {
      ++same;
    } else {
      differs += " " + f;
    }
  }
  fs::remove_all(root);
  return {same == files.size(), std::to_string(same) + "/" + std::to_string(files.size()) +
                                    " artifacts byte-identical" + (differs.empty() ? "" : "; differ:" + differs)};
}

}  // namespace

int main() {
  std::printf("fmlab acceptance\n");
  std::fflush(stdout);
  int failures = 0;
  auto report = [&failures](int id, const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s [%2d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "interpolant/velocity consistency", interpolant_consistency);
  report(2, "ODE order", ode_order);
  std::optional<TwoGaussians> tg;
  report(3, "toy conditional transport", [&tg] {
    tg.emplace();
    return toy_transport(*tg);
  });
  report(4, "guidance sanity", [&tg] {
    if (!tg) return Outcome{false, "toy model unavailable"};
    return cfg_sanity(*tg);
  });
  report(5, "rectified injection", rectified_injection);
  report(6, "morphology oracle", morphology_oracle);
  report(7, "conditioning identity stack", conditioning_identity);
  report(8, "metrics", metrics_bundle);
  report(9, "policy arithmetic", policy_arithmetic);
  report(10, "end-to-end determinism", determinism);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
