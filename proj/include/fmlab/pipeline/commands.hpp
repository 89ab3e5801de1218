#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fmlab/core/error.hpp"
#include "fmlab/core/random.hpp"
#include "fmlab/io/config.hpp"
#include "fmlab/io/pnm.hpp"
#include "fmlab/io/tsv.hpp"
#include "fmlab/mask/coverage.hpp"
#include "fmlab/mask/propagate.hpp"
#include "fmlab/mask/target_stats.hpp"
#include "fmlab/metrics/distribution.hpp"
#include "fmlab/metrics/segmentation.hpp"
#include "fmlab/nn/checkpoint.hpp"
#include "fmlab/nn/trainer.hpp"
#include "fmlab/ode/integrator.hpp"
#include "fmlab/pipeline/manifest.hpp"
#include "fmlab/pipeline/policy.hpp"
#include "fmlab/pipeline/toy_data.hpp"

namespace fmlab::pipeline {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kEvalMismatch = 3 };

/// Raised by evaluate when prediction and ground-truth sets do not line up.
class EvaluationMismatch : public Error {
 public:
  using Error::Error;
};

/// FMLAB_SEED, when set, replaces every configured seed.
inline std::uint64_t resolve_seed(std::uint64_t configured) {
  const char* env = std::getenv("FMLAB_SEED");
  if (!env || !*env) return configured;
  std::uint64_t v = 0;
  const std::string s(env);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ConfigError("FMLAB_SEED is not an integer: " + s);
  return v;
}

namespace detail {

inline std::string numbered(std::size_t i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu.%s", i, ext);
  return buf;
}

/// Raster files (.pgm/.ppm) in a directory, sorted by name.
inline std::vector<fs::path> list_rasters(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<mask::BinaryMask> load_masks(const fs::path& dir) {
  std::vector<mask::BinaryMask> out;
  for (const auto& p : list_rasters(dir)) out.push_back(io::read_mask(p.string()));
  return out;
}

struct ImageMaskSet {
  std::vector<Sample> images;
  std::vector<mask::BinaryMask> masks;
};

/// `dir/images` and `dir/masks`, paired by file stem.
inline ImageMaskSet load_pairs(const fs::path& dir) {
  std::map<std::string, fs::path> masks;
  for (const auto& p : list_rasters(dir / "masks")) masks[p.stem().string()] = p;
  ImageMaskSet set;
  for (const auto& p : list_rasters(dir / "images")) {
    const auto it = masks.find(p.stem().string());
    if (it == masks.end()) throw IoError("image " + p.string() + " has no mask");
    set.images.push_back(io::read_image(p.string()));
    set.masks.push_back(io::read_mask(it->second.string()));
  }
  if (set.images.empty()) throw IoError("no image/mask pairs under " + dir.string());
  return set;
}

inline std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + io::format_double(v[i]);
  return out;
}

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& part : io::split(s, ',')) {
    const std::string t = io::trim(part);
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size()) throw ConfigError("not a number list: " + s);
    out.push_back(v);
  }
  return out;
}

inline mask::CoverageBinning bins_from(const nn::Checkpoint& ck) {
  const auto it = ck.extra.find("bins.edges");
  if (it == ck.extra.end()) throw ConfigError("mask model checkpoint has no coverage bins");
  return mask::CoverageBinning(parse_list(it->second));
}

inline std::vector<double> histogram_from(const nn::Checkpoint& ck) {
  const auto it = ck.extra.find("data.class_histogram");
  if (it == ck.extra.end()) throw ConfigError("mask model checkpoint has no class histogram");
  return parse_list(it->second);
}

inline void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

struct Sampling {
  int steps = 50;
  std::optional<double> cfg_omega = 1.2;
  bool use_ema = true;
  unsigned threads = 1;

  ode::IntegratorConfig integrator(bool guided) const {
    ode::IntegratorConfig c;
    c.steps = steps;
    if (guided) c.cfg_omega = cfg_omega;
    return c;
  }
};

inline std::vector<Sample> columns(const Eigen::MatrixXd& x, const Shape& shape) {
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    out.emplace_back(shape, std::vector<double>(x.col(j).data(), x.col(j).data() + x.rows()));
  }
  return out;
}

/// Per-sample seeds: sample i owns derive_seed(seed, i); its mask and image draws
/// use sub-streams 0 and 1 of that seed.
inline std::vector<std::uint64_t> sample_seeds(std::uint64_t seed, std::size_t n) {
  std::vector<std::uint64_t> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = derive_seed(seed, i);
  return s;
}

inline std::vector<std::uint64_t> substream(const std::vector<std::uint64_t>& seeds, std::uint64_t k) {
  std::vector<std::uint64_t> out(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) out[i] = derive_seed(seeds[i], k);
  return out;
}

/// Class-conditional mask sampling, binarized at 0.5.
inline std::vector<mask::BinaryMask> sample_masks(const nn::VelocityModel& model, const std::vector<int>& labels,
                                                  const std::vector<std::uint64_t>& seeds, const Sampling& s) {
  const Shape& shape = model.config().data_shape;
  if (model.config().mode != nn::ConditioningMode::class_conditional || shape.rank() != 3 || shape[2] != 1) {
    throw DimensionError("mask model must be class-conditional over (H, W, 1) rasters");
  }
  std::vector<Condition> ys;
  ys.reserve(labels.size());
  for (int y : labels) ys.push_back(Condition::label(y));
  const Eigen::MatrixXd x =
      ode::integrate_many(model, ode::noise_batch(shape.size(), substream(seeds, 0)), ys, s.integrator(true), s.threads);
  std::vector<mask::BinaryMask> out;
  out.reserve(labels.size());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const std::vector<double> v(x.col(j).data(), x.col(j).data() + x.rows());
    out.push_back(mask::binarize(v, shape[1], shape[0], 0.5));
  }
  return out;
}

inline std::vector<Sample> render_images(const nn::VelocityModel& model, const std::vector<mask::BinaryMask>& masks,
                                         const std::vector<std::uint64_t>& seeds, const Sampling& s) {
  const Shape& shape = model.config().data_shape;
  if (model.config().mode != nn::ConditioningMode::mask_conditional) {
    throw DimensionError("render model must be mask-conditioned");
  }
  std::vector<Condition> ys;
  ys.reserve(masks.size());
  for (const auto& m : masks) ys.push_back(ode::mask_condition(shape, m));
  const Eigen::MatrixXd x =
      ode::integrate_many(model, ode::noise_batch(shape.size(), substream(seeds, 1)), ys, s.integrator(true), s.threads);
  return columns(x, shape);
}

inline const char* image_ext(const Shape& s) { return s[2] == 1 ? "pgm" : "ppm"; }

inline void add_sampling_options(CLI::App* sub, Sampling& s, std::optional<double>& omega, bool& no_cfg, bool& raw) {
  sub->add_option("--steps", s.steps, "ODE steps")->check(CLI::PositiveNumber);
  sub->add_option("--cfg-omega", omega, "guidance scale (default 1.2)");
  sub->add_flag("--no-cfg", no_cfg, "sample without classifier-free guidance");
  sub->add_flag("--raw-weights", raw, "sample with the raw instead of the EMA weights");
  sub->add_option("--threads", s.threads, "worker threads")->check(CLI::PositiveNumber);
}

inline void finish_sampling(Sampling& s, const std::optional<double>& omega, bool no_cfg, bool raw) {
  if (omega) s.cfg_omega = *omega;
  if (no_cfg) s.cfg_omega.reset();
  s.use_ema = !raw;
}

inline std::string fmt(double v) { return io::format_double(v); }

}  // namespace detail

// ---------------------------------------------------------------------------
// train

struct TrainOutcome {
  std::string checkpoint;
  std::string log;
  double final_loss = 0.0;
};

inline TrainOutcome cmd_train(const std::string& config_path, std::ostream& out) {
  const auto cfg = io::KeyValueConfig::load(config_path);
  const fs::path base = fs::path(config_path).parent_path();
  auto resolve = [&base](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  const std::string task = cfg.get("task");
  const std::uint64_t seed = resolve_seed(cfg.get_u64("seed", 0));
  nn::TrainConfig tc;
  tc.steps = cfg.get_u64("steps", 2000);
  tc.batch_size = cfg.get_u64("batch_size", 64);
  tc.lr = cfg.get_double("lr", 1e-3);
  tc.ema_decay = cfg.get_double("ema_decay", 0.9999);
  tc.p_drop = cfg.get_double("p_drop", 0.1);
  tc.seed = derive_seed(seed, 1);
  tc.validate();

  nn::ModelConfig mc;
  mc.time_dim = cfg.get_u64("time_dim", 32);
  mc.hidden = cfg.get_u64("hidden", 128);
  mc.hidden_layers = static_cast<int>(cfg.get_int("hidden_layers", 3));
  mc.gated_skip = cfg.get_bool("gated_skip", true);
  mc.init_seed = derive_seed(seed, 0);

  std::map<std::string, std::string> extra{{"train.task", task}, {"train.seed", std::to_string(seed)}};
  std::vector<nn::TrainingPair> fm_data;
  nn::TrainResult result;
  std::optional<nn::VelocityModel> model;

  if (task == "two_gaussians") {
    mc.mode = nn::ConditioningMode::class_conditional;
    mc.data_shape = Shape::vector(2);
    mc.num_classes = 2;
    fm_data = toy::two_gaussians(cfg.get_u64("count", 2000), derive_seed(seed, 2), cfg.get_double("center", 2.0),
                                 cfg.get_double("spread", 0.1));
    model.emplace(mc);
    result = nn::train_fm(*model, fm_data, PathSchedule::linear(), tc);
  } else if (task == "mask_generator") {
    const auto masks = detail::load_masks(resolve(cfg.get("data")) / "masks");
    if (masks.empty()) throw IoError("no masks under " + resolve(cfg.get("data")).string());
    const auto bins = cfg.has("bin_edges")
                          ? mask::CoverageBinning(cfg.get_doubles("bin_edges"))
                          : mask::CoverageBinning::uniform(static_cast<int>(cfg.get_int("classes", 10)),
                                                           cfg.get_double("bin_width", 0.005));
    std::vector<double> hist(static_cast<std::size_t>(bins.classes()), 0.0);
    for (const auto& m : masks) {
      if (m.width() != masks.front().width() || m.height() != masks.front().height()) {
        throw DimensionError("training masks differ in size");
      }
      const int c = bins.assign(mask::coverage(m));
      hist[static_cast<std::size_t>(c)] += 1.0;
      fm_data.push_back({toy::mask_sample(m), Condition::label(c)});
    }
    for (auto& h : hist) h /= static_cast<double>(masks.size());
    mc.mode = nn::ConditioningMode::class_conditional;
    mc.data_shape = Shape::image(masks.front().height(), masks.front().width(), 1);
    mc.num_classes = bins.classes();
    extra["bins.edges"] = detail::join(bins.edges());
    extra["data.class_histogram"] = detail::join(hist);
    extra["data.count"] = std::to_string(masks.size());
    model.emplace(mc);
    result = nn::train_fm(*model, fm_data, PathSchedule::linear(), tc);
  } else if (task == "renderer" || task == "injector") {
    auto set = detail::load_pairs(resolve(cfg.get("data")));
    const Shape shape = set.images.front().shape();
    for (std::size_t i = 0; i < set.images.size(); ++i) {
      if (!(set.images[i].shape() == shape)) throw DimensionError("training images differ in shape");
      ode::mask_condition(shape, set.masks[i]);
    }
    mc.mode = nn::ConditioningMode::mask_conditional;
    mc.data_shape = shape;
    mc.num_classes = 0;
    mc.cond_dim = 2 * shape[0] * shape[1];
    extra["data.count"] = std::to_string(set.images.size());
    model.emplace(mc);
    if (task == "renderer") {
      for (std::size_t i = 0; i < set.images.size(); ++i) {
        fm_data.push_back({set.images[i], Condition::map(mask::one_hot(set.masks[i]))});
      }
      result = nn::train_fm(*model, fm_data, PathSchedule::linear(), tc);
    } else {
      std::vector<nn::InjectionPair> pairs;
      for (std::size_t i = 0; i < set.images.size(); ++i) pairs.push_back({set.images[i], set.masks[i]});
      std::vector<Sample> backgrounds;
      for (const auto& p : detail::list_rasters(resolve(cfg.get("backgrounds")))) {
        backgrounds.push_back(io::read_image(p.string()));
      }
      const double sigma = cfg.get_double("sigma", RectifiedSchedule::kDefaultSigma);
      extra["train.sigma"] = io::format_double(sigma);
      result = nn::train_rf_injector(*model, pairs, backgrounds, RectifiedSchedule(sigma), tc);
    }
  } else {
    throw ConfigError("unknown task '" + task + "' (two_gaussians, mask_generator, renderer, injector)");
  }

  TrainOutcome o;
  o.checkpoint = resolve(cfg.get("out")).string();
  o.log = cfg.has("log") ? resolve(cfg.get("log")).string() : o.checkpoint + ".log.tsv";
  detail::ensure_dir(fs::path(o.checkpoint).parent_path().empty() ? fs::path(".") : fs::path(o.checkpoint).parent_path());
  nn::Checkpoint ck{mc, result.state.params, result.state.ema_params, extra};
  nn::save_checkpoint(o.checkpoint, ck);
  io::Table log;
  log.header = {"step", "loss"};
  for (const auto& r : result.log) log.rows.push_back({std::to_string(r.step), detail::fmt(r.loss)});
  io::write_tsv(o.log, log);
  o.final_loss = result.log.empty() ? 0.0 : result.log.back().loss;
  out << "trained " << task << ": " << result.log.size() << " steps, final loss " << o.final_loss << " -> "
      << o.checkpoint << "\n";
  return o;
}

// ---------------------------------------------------------------------------
// synthesis

struct SynthesisOutcome {
  std::string manifest;
  std::size_t records = 0;
  std::size_t stats_masks = 0;
};

namespace detail {

inline SynthesisOutcome write_synthetic(const fs::path& out_dir, const std::vector<mask::BinaryMask>& masks,
                                        const std::vector<Sample>& images, const std::vector<int>& labels,
                                        const std::vector<std::uint64_t>& seeds,
                                        const std::vector<std::string>& provenance,
                                        const mask::CoverageBinning& bins, std::vector<std::string> comments) {
  ensure_dir(out_dir / "images");
  ensure_dir(out_dir / "masks");
  Manifest m;
  m.comments = std::move(comments);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const std::string img = "images/" + numbered(i, image_ext(images[i].shape()));
    const std::string msk = "masks/" + numbered(i, "pgm");
    io::write_image((out_dir / img).string(), images[i]);
    io::write_mask((out_dir / msk).string(), masks[i]);
    ManifestRecord r;
    r.image_path = img;
    r.mask_path = msk;
    r.coverage_class = bins.assign(mask::coverage(masks[i]));
    r.strategy = Strategy::mask_gen;
    r.seed = seeds[i];
    r.provenance = "label=" + std::to_string(labels[i]) + (provenance[i].empty() ? "" : "; " + provenance[i]);
    m.records.push_back(std::move(r));
  }
  SynthesisOutcome o;
  o.manifest = (out_dir / "manifest.tsv").string();
  o.records = m.records.size();
  save_manifest(o.manifest, m);
  return o;
}

struct Models {
  nn::Checkpoint mask_ck;
  nn::VelocityModel mask_model;
  nn::VelocityModel render_model;
};

inline Models load_models(const std::string& mask_path, const std::string& render_path, bool use_ema) {
  nn::Checkpoint mck = nn::load_checkpoint(mask_path);
  nn::Checkpoint rck = nn::load_checkpoint(render_path);
  nn::VelocityModel mm = mck.model(use_ema);
  nn::VelocityModel rm = rck.model(use_ema);
  const Shape& ms = mm.config().data_shape;
  const Shape& rs = rm.config().data_shape;
  if (ms.rank() != 3 || rs.rank() != 3 || ms[0] != rs[0] || ms[1] != rs[1]) {
    throw DimensionError("mask model " + ms.to_string() + " and render model " + rs.to_string() +
                         " disagree on raster size");
  }
  return {std::move(mck), std::move(mm), std::move(rm)};
}

}  // namespace detail

inline SynthesisOutcome cmd_synthesize_indomain(const std::string& mask_ckpt, const std::string& render_ckpt,
                                                std::uint64_t real_count, std::uint64_t k, const std::string& out_dir,
                                                std::uint64_t seed, const detail::Sampling& s, std::ostream& out) {
  const std::uint64_t total = indomain_count(real_count, k);
  auto models = detail::load_models(mask_ckpt, render_ckpt, s.use_ema);
  const auto bins = detail::bins_from(models.mask_ck);
  const auto labels = class_plan(detail::histogram_from(models.mask_ck), static_cast<std::size_t>(total));
  const auto seeds = detail::sample_seeds(seed, labels.size());
  const auto masks = detail::sample_masks(models.mask_model, labels, seeds, s);
  const auto images = detail::render_images(models.render_model, masks, seeds, s);
  std::vector<std::string> comments{
      "in-domain synthesis: x=" + std::to_string(real_count) + " k=" + std::to_string(k) + " pairs=" +
          std::to_string(total),
      "ode steps=" + std::to_string(s.steps) + " cfg_omega=" + (s.cfg_omega ? detail::fmt(*s.cfg_omega) : "none") +
          " seed=" + std::to_string(seed)};
  auto o = detail::write_synthetic(out_dir, masks, images, labels, seeds, std::vector<std::string>(labels.size()), bins,
                                   std::move(comments));
  out << "synthesized " << o.records << " pairs -> " << o.manifest << "\n";
  return o;
}

inline SynthesisOutcome cmd_synthesize_crossdomain(const std::string& mask_ckpt, const std::string& render_ckpt,
                                                   const std::string& target_dir, double fraction, double multiplier,
                                                   bool width_perturb, const std::string& out_dir, std::uint64_t seed,
                                                   const detail::Sampling& s, std::ostream& out) {
  const auto targets = detail::load_masks(target_dir);
  if (targets.empty()) throw IoError("no target masks under " + target_dir);
  auto models = detail::load_models(mask_ckpt, render_ckpt, s.use_ema);
  const auto bins = detail::bins_from(models.mask_ck);
  const auto stats = mask::estimate_target_stats(targets, fraction, bins, derive_seed(seed, 2));
  const std::uint64_t total = crossdomain_count(targets.size(), multiplier);
  out << "target statistics from " << stats.used.size() << " of " << targets.size() << " masks\n";

  const auto labels = class_plan(stats.histogram, static_cast<std::size_t>(total));
  const auto seeds = detail::sample_seeds(seed, labels.size());
  auto masks = detail::sample_masks(models.mask_model, labels, seeds, s);
  std::vector<std::string> provenance(labels.size());
  if (width_perturb) {
    mask::PropagationPolicy pol;
    pol.variants = 1;
    pol.jitter_px = 0;
    for (std::size_t i = 0; i < masks.size(); ++i) {
      if (masks[i].empty()) continue;
      pol.seed = derive_seed(seeds[i], 2);
      auto v = mask::propagate_one(masks[i], pol, 0);
      masks[i] = std::move(v.mask);
      provenance[i] = "width: " + v.provenance;
    }
  }
  const auto images = detail::render_images(models.render_model, masks, seeds, s);
  std::vector<std::string> comments{
      "cross-domain synthesis: x_target=" + std::to_string(targets.size()) + " multiplier=" + detail::fmt(multiplier) +
          " pairs=" + std::to_string(total),
      "target statistics from " + std::to_string(stats.used.size()) + " masks (fraction " + detail::fmt(fraction) +
          "): histogram=" + detail::join(stats.histogram) + " mean_width=" + detail::fmt(stats.mean_width) +
          " mean_coverage=" + detail::fmt(stats.mean_coverage),
      "ode steps=" + std::to_string(s.steps) + " cfg_omega=" + (s.cfg_omega ? detail::fmt(*s.cfg_omega) : "none") +
          " seed=" + std::to_string(seed)};
  auto o = detail::write_synthetic(out_dir, masks, images, labels, seeds, provenance, bins, std::move(comments));
  o.stats_masks = stats.used.size();
  out << "synthesized " << o.records << " pairs -> " << o.manifest << "\n";
  return o;
}

// ---------------------------------------------------------------------------
// inject

struct InjectOutcome {
  std::string manifest;
  std::size_t records = 0;
  std::size_t skipped = 0;
};

inline InjectOutcome cmd_inject(const std::string& ckpt, const std::string& backgrounds_dir,
                                const std::string& masks_dir, const std::string& out_dir, bool cartesian,
                                const detail::Sampling& s, std::ostream& out, std::ostream& err) {
  const nn::Checkpoint ck = nn::load_checkpoint(ckpt);
  const nn::VelocityModel model = ck.model(s.use_ema);
  if (model.config().mode != nn::ConditioningMode::mask_conditional) throw ConfigError("injector must be mask-conditioned");
  const auto bg_files = detail::list_rasters(backgrounds_dir);
  const auto mask_files = detail::list_rasters(masks_dir);
  if (bg_files.empty() || mask_files.empty()) throw IoError("inject needs at least one background and one mask");

  std::vector<std::pair<std::size_t, std::size_t>> plan;
  if (cartesian) {
    for (std::size_t b = 0; b < bg_files.size(); ++b)
      for (std::size_t m = 0; m < mask_files.size(); ++m) plan.emplace_back(b, m);
  } else {
    for (std::size_t i = 0; i < std::min(bg_files.size(), mask_files.size()); ++i) plan.emplace_back(i, i);
  }

  const Shape& shape = model.config().data_shape;
  Manifest man;
  man.comments.push_back(std::string("background injection: pairing=") + (cartesian ? "cartesian" : "zip") +
                         " ode steps=" + std::to_string(s.steps));
  std::vector<Sample> starts;
  std::vector<mask::BinaryMask> masks;
  std::vector<std::pair<std::size_t, std::size_t>> kept;
  InjectOutcome o;
  for (const auto& [b, m] : plan) {
    Sample bg = io::read_image(bg_files[b].string());
    mask::BinaryMask mk = io::read_mask(mask_files[m].string());
    if (!(bg.shape() == shape) || mk.height() != shape[0] || mk.width() != shape[1]) {
      const std::string msg = "skipped " + bg_files[b].filename().string() + " + " + mask_files[m].filename().string() +
                              ": dims do not match model shape " + shape.to_string();
      err << "warning: " << msg << "\n";
      man.comments.push_back(msg);
      ++o.skipped;
      continue;
    }
    starts.push_back(std::move(bg));
    masks.push_back(std::move(mk));
    kept.emplace_back(b, m);
  }

  detail::ensure_dir(fs::path(out_dir) / "images");
  detail::ensure_dir(fs::path(out_dir) / "masks");
  if (!starts.empty()) {
    Eigen::MatrixXd x0(static_cast<Eigen::Index>(shape.size()), static_cast<Eigen::Index>(starts.size()));
    std::vector<Condition> ys;
    for (std::size_t i = 0; i < starts.size(); ++i) {
      x0.col(static_cast<Eigen::Index>(i)) =
          Eigen::Map<const Eigen::VectorXd>(starts[i].data().data(), static_cast<Eigen::Index>(shape.size()));
      ys.push_back(ode::mask_condition(shape, masks[i]));
    }
    ode::IntegratorConfig ic;
    ic.steps = s.steps;
    const auto outputs = detail::columns(ode::integrate_many(model, x0, ys, ic, s.threads), shape);
    const auto bins = ck.extra.count("bins.edges") ? detail::bins_from(ck) : mask::CoverageBinning::standard();
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      const std::string img = "images/" + detail::numbered(i, detail::image_ext(shape));
      const std::string msk = "masks/" + detail::numbered(i, "pgm");
      io::write_image((fs::path(out_dir) / img).string(), outputs[i]);
      io::write_mask((fs::path(out_dir) / msk).string(), masks[i]);
      ManifestRecord r;
      r.image_path = img;
      r.mask_path = msk;
      r.coverage_class = bins.assign(mask::coverage(masks[i]));
      r.strategy = Strategy::background_injected;
      r.seed = 0;
      r.provenance = "background=" + bg_files[kept[i].first].filename().string() +
                     "; mask=" + mask_files[kept[i].second].filename().string();
      man.records.push_back(std::move(r));
    }
  }
  o.manifest = (fs::path(out_dir) / "manifest.tsv").string();
  o.records = man.records.size();
  save_manifest(o.manifest, man);
  out << "injected " << o.records << " pairs (" << o.skipped << " skipped) -> " << o.manifest << "\n";
  return o;
}

// ---------------------------------------------------------------------------
// split

inline std::vector<std::size_t> cmd_split(const std::string& manifest_in, const std::vector<double>& fractions,
                                          std::uint64_t seed, const std::string& manifest_out, std::ostream& out) {
  if (fractions.size() > 3) throw ConfigError("at most three split fractions (train, val, test)");
  Manifest m = load_manifest(manifest_in);
  const auto counts = split_counts(m.records.size(), fractions);
  static const char* names[] = {"train", "val", "test"};
  const auto perm = seeded_permutation(m.records.size(), seed);
  std::size_t pos = 0;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    for (std::size_t j = 0; j < counts[s]; ++j) m.records[perm[pos++]].split = names[s];
  }
  std::erase_if(m.comments, [](const std::string& c) { return c.rfind("split", 0) == 0; });
  m.comments.push_back(kSplitRule);
  std::string tally = "split seed=" + std::to_string(seed);
  for (std::size_t s = 0; s < counts.size(); ++s) tally += " " + std::string(names[s]) + "=" + std::to_string(counts[s]);
  m.comments.push_back(tally);
  save_manifest(manifest_out, m);
  out << tally << "\n";
  return counts;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOutcome {
  std::size_t images = 0;
  double miou = 0.0;
  double mf1 = 0.0;
  std::optional<double> fid;
  std::optional<double> kid;
};

inline metrics::FeatureSet read_features(const std::string& path) {
  const io::Table t = io::read_tsv(path);
  std::vector<std::vector<double>> rows;
  for (const auto& r : t.rows) {
    std::vector<double> v;
    for (const auto& c : r) v.push_back(detail::parse_list(c).at(0));
    rows.push_back(std::move(v));
  }
  if (rows.empty()) throw IoError(path + ": no feature rows");
  return metrics::FeatureSet::from_rows(rows);
}

inline EvaluateOutcome cmd_evaluate(const std::string& pred_dir, const std::string& gt_dir, double threshold,
                                    const std::string& out_dir, const std::string& real_features,
                                    const std::string& syn_features, std::ostream& out, std::ostream& err) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
  std::map<std::string, fs::path> preds, gts;
  for (const auto& p : detail::list_rasters(pred_dir)) preds[p.filename().string()] = p;
  for (const auto& p : detail::list_rasters(gt_dir)) gts[p.filename().string()] = p;
  std::vector<std::string> missing;
  for (const auto& [name, p] : preds)
    if (!gts.count(name)) missing.push_back("no ground truth for prediction " + name);
  for (const auto& [name, p] : gts)
    if (!preds.count(name)) missing.push_back("no prediction for ground truth " + name);
  if (gts.empty()) missing.push_back("no ground-truth masks under " + gt_dir);
  if (!missing.empty()) {
    for (const auto& m : missing) err << m << "\n";
    throw EvaluationMismatch(std::to_string(missing.size()) + " unmatched file(s)");
  }

  io::Table per;
  per.header = {"image", "tp", "fp", "fn", "iou", "f1"};
  EvaluateOutcome o;
  for (const auto& [name, gt_path] : gts) {
    const mask::BinaryMask gt = io::read_mask(gt_path.string());
    const io::Raster8 raw = io::read_pnm(preds[name].string());
    if (raw.channels != 1 || raw.width != gt.width() || raw.height != gt.height()) {
      err << name << ": prediction raster does not match ground truth dims\n";
      throw EvaluationMismatch("dimension mismatch for " + name);
    }
    std::vector<double> probs(raw.pixels.size());
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = raw.pixels[i] / 255.0;
    const auto pred = mask::binarize(probs, gt.width(), gt.height(), threshold);
    const auto c = metrics::confusion(pred, gt);
    const double iou = metrics::iou(c), f1 = metrics::f1(c);
    o.miou += iou;
    o.mf1 += f1;
    per.rows.push_back({name, detail::fmt(c.tp), detail::fmt(c.fp), detail::fmt(c.fn), detail::fmt(iou),
                        detail::fmt(f1)});
  }
  o.images = gts.size();
  o.miou /= static_cast<double>(o.images);
  o.mf1 /= static_cast<double>(o.images);
  if (real_features.empty() != syn_features.empty()) {
    throw ConfigError("--real-features and --syn-features go together");
  }
  if (!real_features.empty()) {
    const auto a = read_features(real_features);
    const auto b = read_features(syn_features);
    o.fid = metrics::fid(a, b);
    o.kid = metrics::kid(a, b);
  }

  detail::ensure_dir(out_dir);
  io::write_tsv((fs::path(out_dir) / "per_image.tsv").string(), per);
  io::Table sum;
  sum.comments.push_back("threshold=" + detail::fmt(threshold));
  sum.header = {"images", "miou", "f1", "fid", "kid_x1000"};
  sum.rows.push_back({std::to_string(o.images), detail::fmt(o.miou), detail::fmt(o.mf1),
                      o.fid ? detail::fmt(*o.fid) : "NA", o.kid ? detail::fmt(1000.0 * *o.kid) : "NA"});
  io::write_tsv((fs::path(out_dir) / "summary.tsv").string(), sum);
  out << "evaluated " << o.images << " images: mIoU " << o.miou << ", F1 " << o.mf1 << "\n";
  return o;
}

// ---------------------------------------------------------------------------
// propagate / stats

inline std::size_t cmd_propagate(const std::string& masks_dir, const mask::PropagationPolicy& policy,
                                 const std::string& render_ckpt, const std::string& out_dir,
                                 const detail::Sampling& s, std::ostream& out) {
  const auto files = detail::list_rasters(masks_dir);
  if (files.empty()) throw IoError("no masks under " + masks_dir);
  detail::ensure_dir(fs::path(out_dir) / "masks");
  std::vector<mask::BinaryMask> variants;
  std::vector<std::string> provenance;
  std::vector<std::uint64_t> seeds;
  for (std::size_t f = 0; f < files.size(); ++f) {
    mask::PropagationPolicy pol = policy;
    pol.seed = derive_seed(policy.seed, f);
    const auto m = io::read_mask(files[f].string());
    if (m.empty()) {
      out << "skipping empty mask " << files[f].filename().string() << "\n";
      continue;
    }
    auto vs = mask::propagate(m, pol);
    for (std::size_t j = 0; j < vs.size(); ++j) {
      variants.push_back(std::move(vs[j].mask));
      provenance.push_back("source=" + files[f].filename().string() + "; variant=" + std::to_string(j) + "; " +
                           vs[j].provenance);
      seeds.push_back(derive_seed(pol.seed, j));
    }
  }
  Manifest man;
  man.comments.push_back("mask propagation: variants=" + std::to_string(policy.variants) +
                         " seed=" + std::to_string(policy.seed));
  if (render_ckpt.empty()) {
    io::Table t;
    t.comments = man.comments;
    t.header = {"mask_path", "seed", "provenance"};
    for (std::size_t i = 0; i < variants.size(); ++i) {
      const std::string msk = "masks/" + detail::numbered(i, "pgm");
      io::write_mask((fs::path(out_dir) / msk).string(), variants[i]);
      t.rows.push_back({msk, std::to_string(seeds[i]), provenance[i]});
    }
    io::write_tsv((fs::path(out_dir) / "variants.tsv").string(), t);
  } else {
    const nn::Checkpoint ck = nn::load_checkpoint(render_ckpt);
    const auto model = ck.model(s.use_ema);
    const auto images = detail::render_images(model, variants, seeds, s);
    detail::ensure_dir(fs::path(out_dir) / "images");
    for (std::size_t i = 0; i < variants.size(); ++i) {
      const std::string img = "images/" + detail::numbered(i, detail::image_ext(images[i].shape()));
      const std::string msk = "masks/" + detail::numbered(i, "pgm");
      io::write_image((fs::path(out_dir) / img).string(), images[i]);
      io::write_mask((fs::path(out_dir) / msk).string(), variants[i]);
      ManifestRecord r;
      r.image_path = img;
      r.mask_path = msk;
      r.coverage_class = mask::CoverageBinning::standard().assign(mask::coverage(variants[i]));
      r.strategy = Strategy::propagated;
      r.seed = seeds[i];
      r.provenance = provenance[i];
      man.records.push_back(std::move(r));
    }
    save_manifest((fs::path(out_dir) / "manifest.tsv").string(), man);
  }
  out << "propagated " << files.size() << " masks into " << variants.size() << " variants -> " << out_dir << "\n";
  return variants.size();
}

inline mask::TargetStats cmd_stats(const std::string& masks_dir, double fraction, const mask::CoverageBinning& bins,
                                   std::uint64_t seed, const std::string& out_path, std::ostream& out) {
  const auto masks = detail::load_masks(masks_dir);
  if (masks.empty()) throw IoError("no masks under " + masks_dir);
  const auto st = mask::estimate_target_stats(masks, fraction, bins, seed);
  io::Table t;
  t.comments.push_back("statistics from " + std::to_string(st.used.size()) + " of " + std::to_string(masks.size()) +
                       " masks; mean_width=" + detail::fmt(st.mean_width) +
                       " mean_coverage=" + detail::fmt(st.mean_coverage));
  t.header = {"class", "low", "high", "fraction"};
  for (std::size_t c = 0; c < st.histogram.size(); ++c) {
    t.rows.push_back({std::to_string(c), detail::fmt(bins.edges()[c]), detail::fmt(bins.edges()[c + 1]),
                      detail::fmt(st.histogram[c])});
  }
  if (!out_path.empty()) io::write_tsv(out_path, t);
  out << io::to_tsv(t);
  return st;
}

// ---------------------------------------------------------------------------
// toy data

inline std::size_t cmd_toy_data(const std::string& kind, std::size_t count, std::size_t side, std::uint64_t seed,
                                const std::string& out_dir, std::ostream& out) {
  const fs::path dir(out_dir);
  detail::ensure_dir(dir / "images");
  detail::ensure_dir(dir / "masks");
  Manifest man;
  man.comments.push_back("toy data: kind=" + kind + " count=" + std::to_string(count) + " side=" +
                         std::to_string(side) + " seed=" + std::to_string(seed));
  auto record = [&](std::size_t i, const Sample& img, const mask::BinaryMask& m) {
    const std::string ip = "images/" + detail::numbered(i, "pgm");
    const std::string mp = "masks/" + detail::numbered(i, "pgm");
    io::write_image((dir / ip).string(), img);
    io::write_mask((dir / mp).string(), m);
    man.records.push_back({ip, mp, mask::CoverageBinning::standard().assign(mask::coverage(m)), Strategy::real,
                           kNoSplit, seed, kind});
  };
  if (kind == "cracks") {
    const auto masks = toy::crack_masks(side, count, seed);
    Rng rng(derive_seed(seed, 1));
    for (std::size_t i = 0; i < masks.size(); ++i) record(i, toy::render_crack_image(masks[i], rng), masks[i]);
  } else if (kind == "dark-line") {
    const auto task = toy::dark_line_task(side, count, seed);
    detail::ensure_dir(dir / "backgrounds");
    for (std::size_t i = 0; i < task.pairs.size(); ++i) record(i, task.pairs[i].image, task.pairs[i].mask);
    for (std::size_t i = 0; i < task.backgrounds.size(); ++i) {
      io::write_image((dir / "backgrounds" / detail::numbered(i, "pgm")).string(), task.backgrounds[i]);
    }
  } else {
    throw ConfigError("unknown toy data kind '" + kind + "' (cracks, dark-line)");
  }
  save_manifest((dir / "manifest.tsv").string(), man);
  out << "wrote " << man.records.size() << " toy pairs -> " << out_dir << "\n";
  return man.records.size();
}

// ---------------------------------------------------------------------------
// command line

/// Parses and runs one command line (args excludes the program name). Returns the
/// process exit code; messages go to out / err.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conditional flow-matching toolkit for crack mask and image synthesis", "fmlab"};
  app.require_subcommand(1);
  detail::Sampling sampling;
  std::optional<double> omega;
  bool no_cfg = false, raw = false;
  std::uint64_t seed = 0;
  std::string config, mask_ckpt, render_ckpt, ckpt, out_dir, manifest_in, manifest_out, fractions = "0.8,0.1,0.1";
  std::string backgrounds, masks_dir, pred_dir, gt_dir, real_feat, syn_feat, target_dir, kind, out_path;
  std::uint64_t real_count = 0, k = 16, count = 500;
  std::size_t side = 16;
  double fraction = 0.1, multiplier = 4.0, threshold = 0.5, bin_width = 0.005;
  int classes = 10;
  bool width_perturb = false, cartesian = false;
  mask::PropagationPolicy policy;

  auto* train = app.add_subcommand("train", "train a model from a key=value config");
  train->add_option("config", config, "config file")->required();

  auto* indomain = app.add_subcommand("synthesize-indomain", "sample k*x mask/image pairs");
  indomain->add_option("--mask-model", mask_ckpt)->required();
  indomain->add_option("--render-model", render_ckpt)->required();
  indomain->add_option("--real-count", real_count, "x, the number of real training pairs")->required();
  indomain->add_option("--k", k, "synthetic pairs per real pair");
  indomain->add_option("--out", out_dir)->required();
  indomain->add_option("--seed", seed);
  detail::add_sampling_options(indomain, sampling, omega, no_cfg, raw);

  auto* cross = app.add_subcommand("synthesize-crossdomain", "target-guided synthesis from target mask statistics");
  cross->add_option("--mask-model", mask_ckpt)->required();
  cross->add_option("--render-model", render_ckpt)->required();
  cross->add_option("--target-masks", target_dir)->required();
  cross->add_option("--fraction", fraction, "share of target masks inspected");
  cross->add_option("--multiplier", multiplier, "pairs per target mask");
  cross->add_flag("--width-perturb", width_perturb, "apply a light dilation/erosion to every sampled mask");
  cross->add_option("--out", out_dir)->required();
  cross->add_option("--seed", seed);
  detail::add_sampling_options(cross, sampling, omega, no_cfg, raw);

  auto* inject = app.add_subcommand("inject", "inject masks onto backgrounds with a rectified-flow model");
  inject->add_option("--model", ckpt)->required();
  inject->add_option("--backgrounds", backgrounds)->required();
  inject->add_option("--masks", masks_dir)->required();
  inject->add_option("--out", out_dir)->required();
  inject->add_flag("--cartesian", cartesian, "pair every background with every mask");
  detail::add_sampling_options(inject, sampling, omega, no_cfg, raw);

  auto* split = app.add_subcommand("split", "assign train/val/test splits");
  split->add_option("--manifest", manifest_in)->required();
  split->add_option("--fractions", fractions, "comma-separated train,val,test fractions");
  split->add_option("--seed", seed);
  split->add_option("--out", manifest_out, "output manifest (default: overwrite input)");

  auto* evaluate = app.add_subcommand("evaluate", "IoU/F1 of predicted masks, optional FID/KID");
  evaluate->add_option("--pred", pred_dir)->required();
  evaluate->add_option("--gt", gt_dir)->required();
  evaluate->add_option("--threshold", threshold, "probability threshold for soft predictions");
  evaluate->add_option("--out", out_dir)->required();
  evaluate->add_option("--real-features", real_feat);
  evaluate->add_option("--syn-features", syn_feat);

  auto* propagate = app.add_subcommand("propagate", "structure-preserving mask variants");
  propagate->add_option("--masks", masks_dir)->required();
  propagate->add_option("--variants", policy.variants);
  propagate->add_option("--max-dilate", policy.max_dilate);
  propagate->add_option("--max-erode", policy.max_erode);
  propagate->add_option("--jitter", policy.jitter_px);
  propagate->add_option("--render-model", render_ckpt, "render an image for every variant");
  propagate->add_option("--out", out_dir)->required();
  propagate->add_option("--seed", seed);
  detail::add_sampling_options(propagate, sampling, omega, no_cfg, raw);

  auto* stats = app.add_subcommand("stats", "coverage-class histogram and width summary of a mask set");
  stats->add_option("--masks", masks_dir)->required();
  stats->add_option("--fraction", fraction);
  stats->add_option("--classes", classes);
  stats->add_option("--bin-width", bin_width);
  stats->add_option("--seed", seed);
  stats->add_option("--out", out_path);

  auto* toy_data = app.add_subcommand("toy-data", "write a synthetic toy dataset");
  toy_data->add_option("--kind", kind, "cracks or dark-line")->required();
  toy_data->add_option("--count", count);
  toy_data->add_option("--side", side);
  toy_data->add_option("--seed", seed);
  toy_data->add_option("--out", out_dir)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    detail::finish_sampling(sampling, omega, no_cfg, raw);
    if (*train) {
      cmd_train(config, out);
    } else if (*indomain) {
      cmd_synthesize_indomain(mask_ckpt, render_ckpt, real_count, k, out_dir, resolve_seed(seed), sampling, out);
    } else if (*cross) {
      cmd_synthesize_crossdomain(mask_ckpt, render_ckpt, target_dir, fraction, multiplier, width_perturb, out_dir,
                                 resolve_seed(seed), sampling, out);
    } else if (*inject) {
      cmd_inject(ckpt, backgrounds, masks_dir, out_dir, cartesian, sampling, out, err);
    } else if (*split) {
      cmd_split(manifest_in, detail::parse_list(fractions), resolve_seed(seed),
                manifest_out.empty() ? manifest_in : manifest_out, out);
    } else if (*evaluate) {
      cmd_evaluate(pred_dir, gt_dir, threshold, out_dir, real_feat, syn_feat, out, err);
    } else if (*propagate) {
      policy.seed = resolve_seed(seed);
      cmd_propagate(masks_dir, policy, render_ckpt, out_dir, sampling, out);
    } else if (*stats) {
      cmd_stats(masks_dir, fraction, mask::CoverageBinning::uniform(classes, bin_width), resolve_seed(seed), out_path,
                out);
    } else if (*toy_data) {
      cmd_toy_data(kind, count, side, resolve_seed(seed), out_dir, out);
    }
  } catch (const EvaluationMismatch& e) {
    err << "error: " << e.what() << "\n";
    return kEvalMismatch;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}

}  // namespace fmlab::pipeline
