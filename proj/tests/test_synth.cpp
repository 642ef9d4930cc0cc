#include <doctest.h>

#include <fstream>

#include "mgn/errors.hpp"
#include "mgn/synth.hpp"
#include "support/helpers.hpp"

using namespace mgn;
using testsupport::RidgeOracle;
using testsupport::TempDir;

namespace {

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
}

// Assembles per-frame (features, labels) matrices for a modality subset.
void assemble(const Dataset& ds, Split split,
              const std::vector<std::string>& modalities,
              nn::Mat<double>& x, nn::Mat<double>& y) {
  const auto videos = ds.split_videos(split);
  int dim = 0, rows = 0;
  for (const auto& m : modalities) dim += videos[0]->track(m).dim();
  for (const auto* v : videos) rows += v->frames();
  x = nn::Mat<double>(rows, dim);
  y = nn::Mat<double>(rows, kNumExpressions);
  int r = 0;
  for (const auto* v : videos)
    for (int f = 0; f < v->frames(); ++f, ++r) {
      AlignedSample s = align_sample(*v, f, modalities);
      int c = 0;
      for (const auto& feat : s.features)
        for (float val : feat) x(r, c++) = val;
      for (int j = 0; j < kNumExpressions; ++j) y(r, j) = s.label[j];
    }
}

// Mean per-video per-expression correlation of a ridge probe fit on the
// train split and scored on validation, using the independent reference
// correlation. This is the recoverability oracle for the generator.
double ridge_probe(const Dataset& ds,
                   const std::vector<std::string>& modalities) {
  nn::Mat<double> xtr, ytr, xva, yva;
  assemble(ds, Split::Train, modalities, xtr, ytr);
  assemble(ds, Split::Validation, modalities, xva, yva);
  RidgeOracle oracle;
  oracle.fit(xtr, ytr);
  nn::Mat<double> pred = oracle.predict(xva);

  const auto videos = ds.split_videos(Split::Validation);
  int row = 0;
  double total = 0.0;
  for (const auto* v : videos) {
    const int t = v->frames();
    double vsum = 0.0;
    std::vector<double> px(t), py(t);
    for (int j = 0; j < kNumExpressions; ++j) {
      for (int i = 0; i < t; ++i) {
        px[i] = pred(row + i, j);
        py[i] = yva(row + i, j);
      }
      vsum += testsupport::reference_pearson(px, py);
    }
    total += vsum / kNumExpressions;
    row += t;
  }
  return total / static_cast<double>(videos.size());
}

SynthSpec tiny_spec(uint64_t seed) {
  SynthSpec s = SynthSpec::small(seed);
  s.n_videos = 16;
  s.frames_per_video = 60;
  return s;
}

}  // namespace

TEST_CASE("generation is deterministic: same spec, same seed, same bytes") {
  TempDir a("synth_a"), b("synth_b");
  SynthSpec spec = tiny_spec(7);
  generate(spec, a.path());
  generate(spec, b.path());

  int files = 0;
  for (const auto& e : std::filesystem::directory_iterator(a.path())) {
    ++files;
    const auto other = b.path() / e.path().filename();
    REQUIRE(std::filesystem::exists(other));
    CHECK(slurp(e.path()) == slurp(other));
  }
  CHECK(files == 16 * 7 + 1);  // 6 tracks + labels per video, one manifest

  SynthSpec other_seed = tiny_spec(8);
  TempDir c("synth_c");
  generate(other_seed, c.path());
  CHECK(slurp(a.path() / "v000_labels.mgf") !=
        slurp(c.path() / "v000_labels.mgf"));
}

TEST_CASE("per-video streams are independent of generation order") {
  TempDir dir("synth");
  SynthSpec spec = tiny_spec(3);
  generate(spec, dir.path());

  // Regenerating one video in isolation matches the file from the full run.
  auto tracks = generate_video_tracks(spec, 5);
  FeatureTrack from_disk = read_track(dir.path() / "v005_audio.mgf");
  CHECK(tracks.at("audio").values.v == from_disk.values.v);
  FeatureTrack labels_disk = read_track(dir.path() / "v005_labels.mgf");
  CHECK(tracks.at("labels").values.v == labels_disk.values.v);
}

TEST_CASE("generated tracks have the declared shapes and valid labels") {
  TempDir dir("synth");
  SynthSpec spec = tiny_spec(9);
  generate(spec, dir.path());
  Dataset ds = load_dataset(dir.path() / "manifest.json");

  REQUIRE(ds.videos.size() == 16);
  int train = 0, val = 0;
  for (const auto& v : ds.videos) {
    (v.split == Split::Train ? train : val) += 1;
    CHECK(v.frames() == 60);
    CHECK(v.track("image").dim() == 16);
    CHECK(v.track("audio").dim() == 8);
    CHECK(v.track("title").frames() == 1);
    CHECK(v.track("video_theme").frames() == 1);
    for (float x : v.labels().values.v) {
      CHECK(x >= 0.0f);
      CHECK(x <= 1.0f);
    }
  }
  CHECK(train == 12);
  CHECK(val == 4);
}

TEST_CASE("invalid specs are rejected") {
  SynthSpec s = SynthSpec::small(1);
  s.modalities["image"].strength = 0.9;  // pushes the sum over 1
  CHECK_THROWS_AS(s.validate(), InvariantError);

  SynthSpec d = SynthSpec::small(1);
  d.modalities["audio"].dim = 0;
  CHECK_THROWS_AS(d.validate(), InvariantError);

  SynthSpec v = SynthSpec::small(1);
  v.n_videos = 0;
  CHECK_THROWS_AS(v.validate(), InvariantError);

  SynthSpec u = SynthSpec::small(1);
  u.modalities["extra"] = {4, 0.1};
  CHECK_THROWS_AS(u.validate(), InvariantError);
}

TEST_CASE("spec json round trip") {
  SynthSpec s = SynthSpec::small(42);
  s.n_videos = 11;
  s.noise_floor = 0.07;
  SynthSpec back = SynthSpec::from_json(s.to_json());
  CHECK(back.n_videos == 11);
  CHECK(back.seed == 42);
  CHECK(back.noise_floor == doctest::Approx(0.07));
  CHECK(back.modalities.at("image").dim == 16);
  CHECK(back.modalities.at("audio").strength == doctest::Approx(0.14));
}

TEST_CASE("zero signal means nothing is recoverable") {
  TempDir dir("synth");
  SynthSpec spec = tiny_spec(11);
  for (auto& [name, m] : spec.modalities) m.strength = 0.0;
  generate(spec, dir.path());
  Dataset ds = load_dataset(dir.path() / "manifest.json");

  const double corr = ridge_probe(
      ds, {"image", "audio", "action", "subtitle", "video_theme"});
  CHECK(std::abs(corr) < 0.1);
}

TEST_CASE("stronger planted signal wins the per-modality probe") {
  TempDir dir("synth");
  SynthSpec spec = tiny_spec(13);
  spec.n_videos = 24;
  for (auto& [name, m] : spec.modalities) m.strength = 0.0;
  spec.modalities["audio"].strength = 0.3;
  spec.modalities["image"].strength = 0.1;
  generate(spec, dir.path());
  Dataset ds = load_dataset(dir.path() / "manifest.json");

  const double audio_only = ridge_probe(ds, {"audio"});
  const double image_only = ridge_probe(ds, {"image"});
  CHECK(audio_only > image_only);
  CHECK(audio_only > 0.3);
}

TEST_CASE(
    "ridge oracle recovers >= 0.5 when strengths sum >= 0.6 at low noise") {
  SUBCASE("small preset (sum 0.65, noise 0.15)") {
    TempDir dir("synth");
    generate(SynthSpec::small(17), dir.path());
    Dataset ds = load_dataset(dir.path() / "manifest.json");
    CHECK(ridge_probe(ds, {"image", "audio", "action", "subtitle", "title",
                           "video_theme"}) >= 0.5);
  }

  SUBCASE("signal concentrated in one modality, noise at the 0.2 bound") {
    TempDir dir("synth");
    SynthSpec spec = tiny_spec(19);
    spec.n_videos = 24;
    spec.noise_floor = 0.2;
    for (auto& [name, m] : spec.modalities) m.strength = 0.0;
    spec.modalities["subtitle"].strength = 0.6;
    generate(spec, dir.path());
    Dataset ds = load_dataset(dir.path() / "manifest.json");
    CHECK(ridge_probe(ds, {"subtitle"}) >= 0.5);
  }
}
