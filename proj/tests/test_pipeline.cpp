#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fmlab/pipeline/commands.hpp"

using namespace fmlab;
using namespace fmlab::pipeline;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("fmlab_pipe_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

int cli(const std::vector<std::string>& args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

mask::BinaryMask rows(const std::vector<std::string>& r) { return mask::BinaryMask::from_rows(r); }

class ScopedSeed {
 public:
  explicit ScopedSeed(const char* value) { setenv("FMLAB_SEED", value, 1); }
  ~ScopedSeed() { unsetenv("FMLAB_SEED"); }
};

Manifest blank_manifest(std::size_t n) {
  Manifest m;
  for (std::size_t i = 0; i < n; ++i) {
    ManifestRecord r;
    r.image_path = "images/" + std::to_string(i) + ".pgm";
    r.mask_path = "masks/" + std::to_string(i) + ".pgm";
    m.records.push_back(r);
  }
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// policy arithmetic

TEST(Policy, ReferenceCardinalities) {
  EXPECT_EQ(indomain_count(400, 16), 6400u);
  EXPECT_EQ(indomain_count(400, 1), 400u);
  EXPECT_EQ(crossdomain_count(400, 4.0), 1600u);
  EXPECT_EQ(stats_count(400, 0.1), 40u);
  EXPECT_EQ(split_counts(50000, {0.8, 0.1, 0.1}), (std::vector<std::size_t>{40000, 5000, 5000}));
  EXPECT_EQ(split_counts(500, {0.8, 0.1, 0.1}), (std::vector<std::size_t>{400, 50, 50}));
}

TEST(Policy, Errors) {
  EXPECT_THROW(indomain_count(10, 0), ConfigError);
  EXPECT_THROW(crossdomain_count(10, 0.0), ConfigError);
  EXPECT_THROW(stats_count(10, 0.0), ConfigError);
  EXPECT_THROW(stats_count(10, 1.5), ConfigError);
  EXPECT_THROW(split_counts(10, {0.5, 0.4}), ConfigError);
  EXPECT_THROW(split_counts(10, {1.2, -0.2}), ConfigError);
  EXPECT_THROW(split_counts(10, {}), ConfigError);
  PolicyConfig p;
  EXPECT_NO_THROW(p.validate());
  p.k = 0;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Policy, RandomizedCardinalities) {
  Rng rng(31);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::uint64_t x = std::uniform_int_distribution<std::uint64_t>(0, 100000)(rng);
    const std::uint64_t k = std::uniform_int_distribution<std::uint64_t>(1, 64)(rng);
    ASSERT_EQ(indomain_count(x, k), x * k);

    // Quarter-step multipliers keep the exact answer an integer ratio.
    const std::uint64_t q = std::uniform_int_distribution<std::uint64_t>(1, 40)(rng);
    const std::uint64_t expect = (q * x + 3) / 4;
    ASSERT_EQ(crossdomain_count(x, static_cast<double>(q) / 4.0), expect) << "x=" << x << " q=" << q;

    // Percent fractions: ceil(p * x / 100), at least one mask.
    const std::uint64_t pct = std::uniform_int_distribution<std::uint64_t>(1, 100)(rng);
    ASSERT_EQ(stats_count(x, static_cast<double>(pct) / 100.0), std::max<std::uint64_t>(1, (pct * x + 99) / 100));

    const std::size_t n = static_cast<std::size_t>(x % 5000);
    const double a = uniform01(rng), b = uniform01(rng) * (1.0 - a);
    const std::vector<double> fr{a, b, 1.0 - a - b};
    const auto c = split_counts(n, fr);
    ASSERT_EQ(c.size(), 3u);
    ASSERT_EQ(c[0] + c[1] + c[2], n);
    for (std::size_t s = 0; s < 3; ++s) {
      ASSERT_LT(std::abs(static_cast<double>(c[s]) - fr[s] * static_cast<double>(n)), 1.0);
    }
  }
}

TEST(Policy, ClassPlanFollowsHistogram) {
  const auto labels = class_plan({0.5, 0.0, 0.25, 0.25}, 8);
  EXPECT_EQ(labels, (std::vector<int>{0, 0, 0, 0, 2, 2, 3, 3}));
  EXPECT_TRUE(class_plan({1.0}, 0).empty());
}

TEST(Policy, SeededPermutation) {
  const auto p = seeded_permutation(1000, 9);
  std::vector<std::size_t> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) ASSERT_EQ(sorted[i], i);
  EXPECT_EQ(p, seeded_permutation(1000, 9));
  EXPECT_NE(p, seeded_permutation(1000, 10));
}

// ---------------------------------------------------------------------------
// seed override

TEST(Seed, EnvironmentOverride) {
  unsetenv("FMLAB_SEED");
  EXPECT_EQ(resolve_seed(7), 7u);
  {
    ScopedSeed s("123");
    EXPECT_EQ(resolve_seed(7), 123u);
  }
  {
    ScopedSeed s("12x");
    EXPECT_THROW(resolve_seed(7), ConfigError);
  }
  EXPECT_EQ(resolve_seed(7), 7u);
}

// ---------------------------------------------------------------------------
// command line

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli({}), kConfigError);
  EXPECT_EQ(cli({"no-such-command"}), kConfigError);
  EXPECT_EQ(cli({"split"}), kConfigError);
  std::ostringstream out, err;
  EXPECT_EQ(run({"--help"}, out, err), kOk);
  EXPECT_NE(out.str().find("synthesize-indomain"), std::string::npos);
}

TEST(Cli, MissingTrainingDataExitsTwo) {
  TempDir d;
  spit(d.file("train.cfg"), "task = mask_generator\ndata = nowhere\nout = m.ckpt\n");
  std::string err;
  EXPECT_EQ(cli({"train", d.file("train.cfg")}, &err), kConfigError);
  EXPECT_NE(err.find("nowhere"), std::string::npos);
  EXPECT_EQ(cli({"train", d.file("missing.cfg")}), kConfigError);
  spit(d.file("bad.cfg"), "task = painting\nout = m.ckpt\n");
  EXPECT_EQ(cli({"train", d.file("bad.cfg")}), kConfigError);
}

TEST(Cli, InvalidFractionsExitTwo) {
  TempDir d;
  save_manifest(d.file("m.tsv"), blank_manifest(10));
  EXPECT_EQ(cli({"split", "--manifest", d.file("m.tsv"), "--fractions", "0.5,0.4"}), kConfigError);
  EXPECT_EQ(cli({"split", "--manifest", d.file("m.tsv"), "--fractions", "0.8,abc"}), kConfigError);
  EXPECT_EQ(cli({"split", "--manifest", d.file("m.tsv"), "--fractions", "0.25,0.25,0.25,0.25"}), kConfigError);
  EXPECT_EQ(cli({"split", "--manifest", d.file("m.tsv"), "--fractions", "0.6,0.2,0.2", "--out", d.file("o.tsv")}), kOk);
}

TEST(Cli, UnknownToyKindExitsTwo) {
  TempDir d;
  EXPECT_EQ(cli({"toy-data", "--kind", "zebras", "--out", d.file("t")}), kConfigError);
}

TEST(Cli, EvaluateWithMissingCounterpartExitsThree) {
  TempDir d;
  fs::create_directories(d.path() / "pred");
  fs::create_directories(d.path() / "gt");
  const auto m = rows({"0110", "0000"});
  io::write_mask(d.file("pred/a.pgm"), m);
  io::write_mask(d.file("gt/a.pgm"), m);
  io::write_mask(d.file("gt/b.pgm"), m);
  io::write_mask(d.file("pred/c.pgm"), m);
  std::string err;
  EXPECT_EQ(cli({"evaluate", "--pred", d.file("pred"), "--gt", d.file("gt"), "--out", d.file("ev")}, &err),
            kEvalMismatch);
  EXPECT_NE(err.find("no prediction for ground truth b.pgm"), std::string::npos);
  EXPECT_NE(err.find("no ground truth for prediction c.pgm"), std::string::npos);
}

// ---------------------------------------------------------------------------
// split

TEST(Split, FiveHundredRecords) {
  TempDir d;
  Manifest m = blank_manifest(500);
  m.comments.push_back("source: test");
  save_manifest(d.file("in.tsv"), m);
  std::ostringstream out;
  EXPECT_EQ(cmd_split(d.file("in.tsv"), {0.8, 0.1, 0.1}, 3, d.file("a.tsv"), out),
            (std::vector<std::size_t>{400, 50, 50}));
  const Manifest a = load_manifest(d.file("a.tsv"));
  std::map<std::string, std::size_t> tally;
  for (const auto& r : a.records) ++tally[r.split];
  EXPECT_EQ(tally["train"], 400u);
  EXPECT_EQ(tally["val"], 50u);
  EXPECT_EQ(tally["test"], 50u);
  EXPECT_NE(std::find(a.comments.begin(), a.comments.end(), std::string(kSplitRule)), a.comments.end());
  EXPECT_NE(std::find(a.comments.begin(), a.comments.end(), "source: test"), a.comments.end());

  // Contiguous assignment over the seeded permutation.
  const auto perm = seeded_permutation(500, 3);
  for (std::size_t i = 0; i < 500; ++i) {
    ASSERT_EQ(a.records[perm[i]].split, i < 400 ? "train" : (i < 450 ? "val" : "test"));
  }

  cmd_split(d.file("in.tsv"), {0.8, 0.1, 0.1}, 3, d.file("b.tsv"), out);
  EXPECT_EQ(slurp(d.file("a.tsv")), slurp(d.file("b.tsv")));
  cmd_split(d.file("in.tsv"), {0.8, 0.1, 0.1}, 4, d.file("c.tsv"), out);
  EXPECT_NE(slurp(d.file("a.tsv")), slurp(d.file("c.tsv")));

  // Resplitting replaces the earlier tally instead of stacking comments.
  cmd_split(d.file("a.tsv"), {0.8, 0.1, 0.1}, 3, d.file("a2.tsv"), out);
  EXPECT_EQ(slurp(d.file("a.tsv")), slurp(d.file("a2.tsv")));
}

// ---------------------------------------------------------------------------
// evaluate

TEST(Evaluate, IdenticalAndInvertedPredictions) {
  TempDir d;
  for (const char* sub : {"gt", "same", "inv"}) fs::create_directories(d.path() / sub);
  const std::vector<mask::BinaryMask> gts{rows({"0110", "0110", "0000"}), rows({"1000", "0100", "0010"}),
                                          rows({"1111", "0000", "0001"})};
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const std::string name = std::to_string(i) + ".pgm";
    io::write_mask(d.file("gt/" + name), gts[i]);
    io::write_mask(d.file("same/" + name), gts[i]);
    mask::BinaryMask inv(gts[i].width(), gts[i].height());
    for (std::size_t y = 0; y < inv.height(); ++y)
      for (std::size_t x = 0; x < inv.width(); ++x) inv.set(x, y, !gts[i].at(x, y));
    io::write_mask(d.file("inv/" + name), inv);
  }
  std::ostringstream out, err;
  const auto same = cmd_evaluate(d.file("same"), d.file("gt"), 0.5, d.file("ev1"), "", "", out, err);
  EXPECT_EQ(same.images, 3u);
  EXPECT_EQ(same.miou, 1.0);
  EXPECT_EQ(same.mf1, 1.0);
  EXPECT_FALSE(same.fid.has_value());
  const auto inv = cmd_evaluate(d.file("inv"), d.file("gt"), 0.5, d.file("ev2"), "", "", out, err);
  EXPECT_EQ(inv.miou, 0.0);
  EXPECT_EQ(inv.mf1, 0.0);
}

TEST(Evaluate, HandBuiltCounts) {
  TempDir d;
  fs::create_directories(d.path() / "gt");
  fs::create_directories(d.path() / "pred");
  // a: tp 3, fp 1, fn 1 -> IoU 3/5, F1 6/8
  io::write_mask(d.file("gt/a.pgm"), rows({"1111", "0000", "0000"}));
  io::write_mask(d.file("pred/a.pgm"), rows({"1110", "0001", "0000"}));
  // b: tp 0, fp 0, fn 2 -> 0, 0
  io::write_mask(d.file("gt/b.pgm"), rows({"0000", "0110", "0000"}));
  io::write_mask(d.file("pred/b.pgm"), rows({"0000", "0000", "0000"}));
  // c: tp 2, fp 2, fn 0 -> IoU 2/4, F1 4/6
  io::write_mask(d.file("gt/c.pgm"), rows({"0000", "0000", "1100"}));
  io::write_mask(d.file("pred/c.pgm"), rows({"0000", "1100", "1100"}));
  std::ostringstream out, err;
  const auto o = cmd_evaluate(d.file("pred"), d.file("gt"), 0.5, d.file("ev"), "", "", out, err);
  EXPECT_NEAR(o.miou, (0.6 + 0.0 + 0.5) / 3.0, 1e-15);
  EXPECT_NEAR(o.mf1, (0.75 + 0.0 + 4.0 / 6.0) / 3.0, 1e-15);

  const io::Table per = io::read_tsv(d.file("ev/per_image.tsv"));
  ASSERT_EQ(per.rows.size(), 3u);
  EXPECT_EQ(per.rows[0], (std::vector<std::string>{"a.pgm", "3", "1", "1", "0.6", "0.75"}));
  EXPECT_EQ(per.rows[1][1], "0");
  EXPECT_EQ(per.rows[1][3], "2");
  const io::Table sum = io::read_tsv(d.file("ev/summary.tsv"));
  ASSERT_EQ(sum.rows.size(), 1u);
  EXPECT_EQ(sum.rows[0][0], "3");
  EXPECT_EQ(sum.rows[0][3], "NA");
}

TEST(Evaluate, ThresholdAppliesToSoftPredictions) {
  TempDir d;
  fs::create_directories(d.path() / "gt");
  fs::create_directories(d.path() / "pred");
  io::write_mask(d.file("gt/a.pgm"), rows({"1100"}));
  io::Raster8 soft{4, 1, 1, {230, 140, 100, 20}};
  io::write_pnm(d.file("pred/a.pgm"), soft);
  std::ostringstream out, err;
  // 0.5 keeps 230 and 140 (0.549); 0.6 keeps only 230.
  EXPECT_EQ(cmd_evaluate(d.file("pred"), d.file("gt"), 0.5, d.file("e1"), "", "", out, err).miou, 1.0);
  EXPECT_EQ(cmd_evaluate(d.file("pred"), d.file("gt"), 0.6, d.file("e2"), "", "", out, err).miou, 0.5);
  EXPECT_EQ(cmd_evaluate(d.file("pred"), d.file("gt"), 0.3, d.file("e3"), "", "", out, err).miou, 2.0 / 3.0);
  EXPECT_THROW(cmd_evaluate(d.file("pred"), d.file("gt"), 1.5, d.file("e4"), "", "", out, err), ConfigError);
}

TEST(Evaluate, DimensionMismatchIsEvaluationError) {
  TempDir d;
  fs::create_directories(d.path() / "gt");
  fs::create_directories(d.path() / "pred");
  io::write_mask(d.file("gt/a.pgm"), rows({"1100"}));
  io::write_mask(d.file("pred/a.pgm"), rows({"110", "000"}));
  EXPECT_EQ(cli({"evaluate", "--pred", d.file("pred"), "--gt", d.file("gt"), "--out", d.file("ev")}), kEvalMismatch);
}

TEST(Evaluate, FeatureDistances) {
  TempDir d;
  fs::create_directories(d.path() / "gt");
  fs::create_directories(d.path() / "pred");
  io::write_mask(d.file("gt/a.pgm"), rows({"1100"}));
  io::write_mask(d.file("pred/a.pgm"), rows({"1100"}));
  // 1D features: means 0 and 1, both with population variance 1/2.
  spit(d.file("real.tsv"), "f\n-0.7071067811865476\n0.7071067811865476\n");
  spit(d.file("syn.tsv"), "f\n0.2928932188134524\n1.7071067811865475\n");
  std::ostringstream out, err;
  const auto o =
      cmd_evaluate(d.file("pred"), d.file("gt"), 0.5, d.file("ev"), d.file("real.tsv"), d.file("syn.tsv"), out, err);
  ASSERT_TRUE(o.fid.has_value());
  EXPECT_NEAR(*o.fid, 1.0, 1e-9);
  EXPECT_THROW(cmd_evaluate(d.file("pred"), d.file("gt"), 0.5, d.file("ev"), d.file("real.tsv"), "", out, err),
               ConfigError);
}

// ---------------------------------------------------------------------------
// inject

namespace {

nn::Checkpoint zero_injector(std::size_t side) {
  nn::ModelConfig c;
  c.mode = nn::ConditioningMode::mask_conditional;
  c.data_shape = Shape::image(side, side, 1);
  c.cond_dim = 2 * side * side;
  c.hidden = 8;
  c.time_dim = 4;
  c.hidden_layers = 1;
  nn::VelocityModel m(c);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.param_count()));
  return {c, zero, zero, {}};
}

}  // namespace

TEST(Inject, ZeroVelocityKeepsBackgrounds) {
  TempDir d;
  std::ostringstream out, err;
  cmd_toy_data("dark-line", 3, 8, 4, d.file("toy"), out);
  nn::save_checkpoint(d.file("zero.ckpt"), zero_injector(8));
  detail::Sampling s;
  s.steps = 10;
  const auto o =
      cmd_inject(d.file("zero.ckpt"), d.file("toy/backgrounds"), d.file("toy/masks"), d.file("out"), false, s, out, err);
  EXPECT_EQ(o.records, 3u);
  EXPECT_EQ(o.skipped, 0u);
  const Manifest m = load_manifest(o.manifest);
  EXPECT_TRUE(manifest_problems(m, d.file("out")).empty());
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string name = detail::numbered(i, "pgm");
    EXPECT_EQ(slurp(d.file("out/images/" + name)), slurp(d.file("toy/backgrounds/" + name)));
    EXPECT_EQ(slurp(d.file("out/masks/" + name)), slurp(d.file("toy/masks/" + name)));
    EXPECT_EQ(m.records[i].strategy, Strategy::background_injected);
    EXPECT_EQ(m.records[i].provenance, "background=" + name + "; mask=" + name);
  }
}

TEST(Inject, CartesianPairingAndSkips) {
  TempDir d;
  std::ostringstream out, err;
  cmd_toy_data("dark-line", 3, 8, 4, d.file("toy"), out);
  fs::create_directories(d.path() / "masks");
  Rng rng(1);
  io::write_mask(d.file("masks/a.pgm"), toy::random_line_mask(8, 8, rng));
  io::write_mask(d.file("masks/b.pgm"), toy::random_line_mask(8, 8, rng));
  nn::save_checkpoint(d.file("zero.ckpt"), zero_injector(8));
  detail::Sampling s;
  s.steps = 4;
  const auto o =
      cmd_inject(d.file("zero.ckpt"), d.file("toy/backgrounds"), d.file("masks"), d.file("cart"), true, s, out, err);
  EXPECT_EQ(o.records, 6u);
  EXPECT_TRUE(manifest_problems(load_manifest(o.manifest), d.file("cart")).empty());
  const auto zip =
      cmd_inject(d.file("zero.ckpt"), d.file("toy/backgrounds"), d.file("masks"), d.file("zip"), false, s, out, err);
  EXPECT_EQ(zip.records, 2u);

  io::write_mask(d.file("masks/c.pgm"), mask::BinaryMask(5, 5));
  std::ostringstream warn;
  const auto skip =
      cmd_inject(d.file("zero.ckpt"), d.file("toy/backgrounds"), d.file("masks"), d.file("skip"), true, s, out, warn);
  EXPECT_EQ(skip.records, 6u);
  EXPECT_EQ(skip.skipped, 3u);
  EXPECT_NE(warn.str().find("warning: skipped"), std::string::npos);
  const Manifest m = load_manifest(skip.manifest);
  std::size_t noted = 0;
  for (const auto& c : m.comments) noted += c.find("dims do not match") != std::string::npos;
  EXPECT_EQ(noted, 3u);
}

// ---------------------------------------------------------------------------
// toy data, propagate, stats

TEST(ToyData, ManifestClosure) {
  TempDir d;
  std::ostringstream out;
  EXPECT_EQ(cmd_toy_data("cracks", 12, 16, 2, d.file("t"), out), 12u);
  const Manifest m = load_manifest(d.file("t/manifest.tsv"));
  EXPECT_TRUE(manifest_problems(m, d.file("t")).empty());
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(d.path() / "t")) files += e.path().extension() == ".pgm";
  EXPECT_EQ(files, 2 * m.records.size());
  for (const auto& r : m.records) EXPECT_EQ(r.strategy, Strategy::real);
}

TEST(Propagate, VariantsTable) {
  TempDir d;
  std::ostringstream out;
  cmd_toy_data("cracks", 4, 16, 3, d.file("t"), out);
  mask::PropagationPolicy pol;
  pol.seed = 5;
  detail::Sampling s;
  EXPECT_EQ(cmd_propagate(d.file("t/masks"), pol, "", d.file("p"), s, out), 12u);
  const io::Table t = io::read_tsv(d.file("p/variants.tsv"));
  ASSERT_EQ(t.rows.size(), 12u);
  for (const auto& r : t.rows) EXPECT_TRUE(fs::exists(d.path() / "p" / r[0]));
  EXPECT_EQ(t.rows[4][2].rfind("source=00001.pgm; variant=1; ", 0), 0u);
  const auto again = d.file("q");
  cmd_propagate(d.file("t/masks"), pol, "", again, s, out);
  EXPECT_EQ(slurp(d.file("p/variants.tsv")), slurp(d.file("q/variants.tsv")));
}

TEST(Stats, TenPercentOfFourHundred) {
  TempDir d;
  std::ostringstream out;
  cmd_toy_data("cracks", 400, 8, 6, d.file("t"), out);
  std::ostringstream log;
  const auto st = cmd_stats(d.file("t/masks"), 0.1, mask::CoverageBinning::standard(), 1, d.file("stats.tsv"), log);
  EXPECT_EQ(st.used.size(), 40u);
  EXPECT_NE(log.str().find("statistics from 40 of 400 masks"), std::string::npos);
  const io::Table t = io::read_tsv(d.file("stats.tsv"));
  EXPECT_EQ(t.rows.size(), 10u);
}

// ---------------------------------------------------------------------------
// training and synthesis on toy models

class ToyPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir;
    std::ostringstream out;
    cmd_toy_data("cracks", 2000, 16, 5, dir_->file("cracks"), out);
    spit(dir_->file("mask.cfg"),
         "task = mask_generator\ndata = cracks\nbin_edges = 0,0.05,0.1,0.15,0.2\nhidden = 128\nsteps = 2000\n"
         "batch_size = 128\nema_decay = 0.995\nseed = 11\nout = models/mask.ckpt\n");
    spit(dir_->file("render.cfg"),
         "task = renderer\ndata = cracks\nhidden = 32\nsteps = 60\nbatch_size = 32\nema_decay = 0.9\nseed = 12\n"
         "out = models/render.ckpt\n");
    cmd_train(dir_->file("mask.cfg"), out);
    cmd_train(dir_->file("render.cfg"), out);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::string mask_ckpt() { return dir_->file("models/mask.ckpt"); }
  static std::string render_ckpt() { return dir_->file("models/render.ckpt"); }
  static TempDir* dir_;
};

TempDir* ToyPipeline::dir_ = nullptr;

TEST_F(ToyPipeline, TrainingWritesCheckpointAndLog) {
  const nn::Checkpoint ck = nn::load_checkpoint(mask_ckpt());
  EXPECT_EQ(ck.config.num_classes, 4);
  EXPECT_EQ(ck.extra.at("bins.edges"), "0,0.05,0.1,0.15,0.2");
  EXPECT_EQ(ck.extra.at("data.count"), "2000");
  const io::Table log = io::read_tsv(mask_ckpt() + ".log.tsv");
  EXPECT_EQ(log.header, (std::vector<std::string>{"step", "loss"}));
  EXPECT_FALSE(log.rows.empty());
}

TEST_F(ToyPipeline, InDomainSynthesis) {
  TempDir d;
  std::ostringstream out;
  detail::Sampling s;
  s.steps = 20;
  const auto o = cmd_synthesize_indomain(mask_ckpt(), render_ckpt(), 5, 3, d.file("syn"), 8, s, out);
  EXPECT_EQ(o.records, 15u);
  const Manifest m = load_manifest(o.manifest);
  ASSERT_EQ(m.records.size(), 15u);
  EXPECT_TRUE(manifest_problems(m, d.file("syn")).empty());
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(d.path() / "syn")) files += e.path().extension() == ".pgm";
  EXPECT_EQ(files, 30u);
  std::set<std::uint64_t> seeds;
  for (const auto& r : m.records) {
    EXPECT_EQ(r.strategy, Strategy::mask_gen);
    seeds.insert(r.seed);
    const std::string path = d.file("syn/" + r.mask_path);
    const auto mk = io::read_mask(path);
    io::write_mask(d.file("roundtrip.pgm"), mk);
    EXPECT_EQ(slurp(path), slurp(d.file("roundtrip.pgm")));
  }
  EXPECT_EQ(seeds.size(), 15u);
}

TEST_F(ToyPipeline, CrossDomainClosedLoop) {
  TempDir d;
  fs::create_directories(d.path() / "target");
  Rng rng(17);
  for (std::size_t i = 0; i < 400; ++i) {
    const std::size_t len = std::uniform_int_distribution<std::size_t>(4, 10)(rng);
    io::write_mask(d.file("target/" + detail::numbered(i, "pgm")), toy::random_crack(16, 16, len, false, rng));
  }
  std::ostringstream out;
  detail::Sampling s;
  const auto o =
      cmd_synthesize_crossdomain(mask_ckpt(), render_ckpt(), d.file("target"), 0.1, 1.0, false, d.file("x"), 3, s, out);
  EXPECT_EQ(o.stats_masks, 40u);
  EXPECT_NE(out.str().find("target statistics from 40 of 400 masks"), std::string::npos);
  ASSERT_EQ(o.records, 400u);
  const Manifest m = load_manifest(o.manifest);
  EXPECT_TRUE(manifest_problems(m, d.file("x")).empty());
  std::size_t class0 = 0;
  for (const auto& r : m.records) {
    EXPECT_EQ(r.provenance, "label=0");
    class0 += r.coverage_class == 0;
  }
  EXPECT_GE(static_cast<double>(class0) / 400.0, 0.95) << class0 << " of 400";
}

TEST_F(ToyPipeline, CrossDomainCardinalityAndWidthPerturbation) {
  TempDir d;
  std::ostringstream out;
  cmd_toy_data("cracks", 10, 16, 9, d.file("t"), out);
  detail::Sampling s;
  s.steps = 10;
  const auto o = cmd_synthesize_crossdomain(mask_ckpt(), render_ckpt(), d.file("t/masks"), 0.5, 2.5, true,
                                            d.file("x"), 3, s, out);
  EXPECT_EQ(o.records, 25u);
  EXPECT_EQ(o.stats_masks, 5u);
  const Manifest m = load_manifest(o.manifest);
  EXPECT_TRUE(manifest_problems(m, d.file("x")).empty());
  std::size_t perturbed = 0;
  for (const auto& r : m.records) perturbed += r.provenance.find("width: ") != std::string::npos;
  EXPECT_GT(perturbed, 0u);
  EXPECT_THROW(cmd_synthesize_crossdomain(mask_ckpt(), render_ckpt(), d.file("t/images/none"), 0.1, 4.0, false,
                                          d.file("y"), 3, s, out),
               IoError);
}

TEST_F(ToyPipeline, ModelShapeMismatchIsRejected) {
  TempDir d;
  nn::save_checkpoint(d.file("small.ckpt"), zero_injector(8));
  std::ostringstream out;
  detail::Sampling s;
  EXPECT_THROW(cmd_synthesize_indomain(mask_ckpt(), d.file("small.ckpt"), 2, 1, d.file("syn"), 1, s, out),
               DimensionError);
  EXPECT_THROW(cmd_synthesize_indomain(render_ckpt(), render_ckpt(), 2, 1, d.file("syn"), 1, s, out), ConfigError);
}

TEST(Train, SameConfigSameBytes) {
  TempDir d;
  const std::string cfg = "task = two_gaussians\ncount = 200\nhidden = 16\ntime_dim = 8\nsteps = 30\nseed = 4\n";
  spit(d.file("a.cfg"), cfg + "out = a.ckpt\n");
  spit(d.file("b.cfg"), cfg + "out = b.ckpt\n");
  spit(d.file("c.cfg"), cfg + "out = c.ckpt\n");
  EXPECT_EQ(cli({"train", d.file("a.cfg")}), kOk);
  EXPECT_EQ(cli({"train", d.file("b.cfg")}), kOk);
  EXPECT_EQ(slurp(d.file("a.ckpt")), slurp(d.file("b.ckpt")));
  EXPECT_EQ(slurp(d.file("a.ckpt.log.tsv")), slurp(d.file("b.ckpt.log.tsv")));
  {
    ScopedSeed s("99");
    EXPECT_EQ(cli({"train", d.file("c.cfg")}), kOk);
  }
  EXPECT_NE(slurp(d.file("a.ckpt")), slurp(d.file("c.ckpt")));
  EXPECT_NE(slurp(d.file("c.ckpt.cfg")).find("train.seed = 99"), std::string::npos);
}
