#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <fstream>

#include "mgn/dataset.hpp"
#include "mgn/errors.hpp"
#include "mgn/rng.hpp"
#include "mgn/track.hpp"
#include "support/helpers.hpp"

using namespace mgn;
using testsupport::TempDir;

namespace {

FeatureTrack make_track(const std::string& name, int t, int dim,
                        float fill = 0.0f) {
  FeatureTrack track;
  track.modality = name;
  track.values = nn::Mat<float>(t, dim, fill);
  return track;
}

FeatureTrack random_track(Rng& rng) {
  const bool labels = rng.bernoulli(0.2);
  const int t = 1 + static_cast<int>(rng.index(50));
  const int dim = labels ? kNumExpressions : 1 + static_cast<int>(rng.index(40));
  const char* names[] = {"image", "audio", "action", "subtitle",
                         "title", "video_theme", "custom"};
  FeatureTrack track =
      make_track(labels ? "labels" : names[rng.index(7)], t, dim);
  for (auto& x : track.values.v)
    x = labels ? static_cast<float>(rng.uniform())
               : static_cast<float>(rng.normal(0.0, 10.0));
  track.rate = rng.bernoulli(0.8) ? frame_rate()
                                  : Rate{1 + static_cast<uint32_t>(rng.index(30)),
                                         1 + static_cast<uint32_t>(rng.index(4))};
  return track;
}

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("track container layout: 90 bytes for a 1x15 labels track") {
  TempDir dir("track");
  auto path = dir.path() / "labels.mgf";
  write_track(make_track("labels", 1, kNumExpressions), path);
  CHECK(std::filesystem::file_size(path) == 90);

  FeatureTrack back = read_track(path);
  CHECK(back.modality == "labels");
  CHECK(back.frames() == 1);
  CHECK(back.dim() == 15);
  for (float x : back.values.v) CHECK(x == 0.0f);
}

TEST_CASE("track round trip is bit exact") {
  TempDir dir("track");
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    FeatureTrack track = random_track(rng);
    auto path = dir.path() / "t.mgf";
    write_track(track, path);
    FeatureTrack back = read_track(path);
    CHECK(back.modality == track.modality);
    CHECK(back.rate == track.rate);
    REQUIRE(back.values.same_shape(track.values));
    CHECK(std::memcmp(back.values.v.data(), track.values.v.data(),
                      track.values.size() * sizeof(float)) == 0);
  }
}

TEST_CASE("write_track rejects invariant violations before writing") {
  TempDir dir("track");
  auto path = dir.path() / "bad.mgf";

  FeatureTrack nan_track = make_track("image", 2, 3);
  nan_track.values(1, 1) = std::nanf("");
  CHECK_THROWS_AS(write_track(nan_track, path), InvariantError);
  CHECK_FALSE(std::filesystem::exists(path));

  FeatureTrack range_track = make_track("labels", 2, kNumExpressions);
  range_track.values(0, 0) = 1.5f;
  CHECK_THROWS_AS(write_track(range_track, path), InvariantError);

  FeatureTrack dim_track = make_track("labels", 2, 14);
  CHECK_THROWS_AS(write_track(dim_track, path), InvariantError);
}

TEST_CASE("read_track raises a distinct error per malformation") {
  TempDir dir("track");
  auto good = dir.path() / "good.mgf";
  FeatureTrack track = make_track("image", 10, 4, 1.0f);
  write_track(track, good);
  auto bytes = slurp(good);

  auto write_bytes = [&](const std::vector<char>& b) {
    auto p = dir.path() / "mut.mgf";
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
    return p;
  };

  SUBCASE("bad magic") {
    auto b = bytes;
    b[0] = 'X';
    b[1] = 'X';
    try {
      read_track(write_bytes(b));
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.kind() == FormatError::Kind::BadMagic);
    }
  }

  SUBCASE("truncated payload: header says 10 rows, file holds 9") {
    auto b = bytes;
    b.resize(b.size() - 4 * sizeof(float));  // drop one row of floats
    try {
      read_track(write_bytes(b));
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.kind() == FormatError::Kind::Truncated);
    }
  }

  SUBCASE("trailing bytes") {
    auto b = bytes;
    b.push_back('\0');
    try {
      read_track(write_bytes(b));
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.kind() == FormatError::Kind::TrailingBytes);
    }
  }

  SUBCASE("NaN payload") {
    auto b = bytes;
    const uint32_t quiet_nan = 0x7FC00000u;
    std::memcpy(b.data() + b.size() - 4, &quiet_nan, 4);
    try {
      read_track(write_bytes(b));
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.kind() == FormatError::Kind::NonFinite);
    }
  }

  SUBCASE("labels out of range") {
    FeatureTrack lab = make_track("labels", 1, kNumExpressions, 0.5f);
    write_track(lab, good);
    auto b = slurp(good);
    const float big = 2.0f;
    std::memcpy(b.data() + b.size() - 4, &big, 4);
    try {
      read_track(write_bytes(b));
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.kind() == FormatError::Kind::LabelRange);
    }
  }

  SUBCASE("missing file is an IoError") {
    CHECK_THROWS_AS(read_track(dir.path() / "absent.mgf"), IoError);
  }
}

TEST_CASE("align_sample broadcasts T=1 tracks and validates the index") {
  VideoRecord record;
  record.video_id = "v";
  const int frames = 100;

  FeatureTrack labels = make_track("labels", frames, kNumExpressions, 0.25f);
  FeatureTrack image = make_track("image", frames, 4);
  for (int t = 0; t < frames; ++t)
    for (int j = 0; j < 4; ++j) image.values(t, j) = static_cast<float>(t);
  FeatureTrack theme = make_track("video_theme", 1, 6, 3.5f);

  record.tracks["labels"] = labels;
  record.tracks["image"] = image;
  record.tracks["video_theme"] = theme;

  AlignedSample first = align_sample(record, 0, {"video_theme", "image"});
  AlignedSample last = align_sample(record, 99, {"video_theme", "image"});
  CHECK(first.features[0][0] == 3.5f);
  CHECK(last.features[0][0] == 3.5f);  // same single row everywhere
  CHECK(first.features[1][0] == 0.0f);
  CHECK(last.features[1][0] == 99.0f);
  CHECK(first.label.size() == kNumExpressions);

  // Order-preserving over the modality list.
  AlignedSample swapped = align_sample(record, 5, {"image", "video_theme"});
  CHECK(swapped.features[0][0] == 5.0f);
  CHECK(swapped.features[1][0] == 3.5f);

  CHECK_THROWS_AS(align_sample(record, frames, {"image"}), InvariantError);
  CHECK_THROWS_AS(align_sample(record, -1, {"image"}), InvariantError);
  CHECK_THROWS_AS(align_sample(record, 0, {"audio"}), InvariantError);
}

TEST_CASE("off-rate alignment picks the nearest row, ties rounding down") {
  FeatureTrack half = make_track("action", 50, 2);
  half.rate = Rate{3, 1};  // half the frame rate
  // Frame 1 sits at 1/6 s, equidistant from source rows 0 (0 s) and 1 (1/3 s).
  CHECK(map_frame_index(half, 0) == 0);
  CHECK(map_frame_index(half, 1) == 0);
  CHECK(map_frame_index(half, 2) == 1);
  CHECK(map_frame_index(half, 3) == 1);  // 0.5 s, tie between rows 1 and 2
  CHECK(map_frame_index(half, 4) == 2);

  // Clamps when the source track is shorter than the rate suggests.
  FeatureTrack series = make_track("action", 3, 2);
  series.rate = Rate{3, 1};
  CHECK(map_frame_index(series, 40) == 2);
}

TEST_CASE("uniform_subsample: identity, endpoints, repetition") {
  FeatureTrack track = make_track("image", 80, 1);
  for (int t = 0; t < 80; ++t) track.values(t, 0) = static_cast<float>(t);

  SUBCASE("n == T is the identity") {
    FeatureTrack s = uniform_subsample(track, 80);
    for (int t = 0; t < 80; ++t) CHECK(s.values(t, 0) == track.values(t, 0));
  }

  SUBCASE("T=3, n=2 returns the endpoints") {
    FeatureTrack three = make_track("image", 3, 1);
    three.values(0, 0) = 10;
    three.values(1, 0) = 20;
    three.values(2, 0) = 30;
    FeatureTrack s = uniform_subsample(three, 2);
    REQUIRE(s.frames() == 2);
    CHECK(s.values(0, 0) == 10);
    CHECK(s.values(1, 0) == 30);
  }

  SUBCASE("T=5, n=80 repeats rows per the index formula") {
    FeatureTrack five = make_track("image", 5, 1);
    for (int t = 0; t < 5; ++t) five.values(t, 0) = static_cast<float>(t);
    FeatureTrack s = uniform_subsample(five, 80);
    REQUIRE(s.frames() == 80);
    // Oracle: enumerate round(i * (T-1) / (n-1)) independently.
    for (int i = 0; i < 80; ++i) {
      const int expected =
          static_cast<int>(std::floor(i * 4.0 / 79.0 + 0.5));
      CHECK(s.values(i, 0) == static_cast<float>(expected));
    }
    CHECK(s.values(0, 0) == 0.0f);
    CHECK(s.values(79, 0) == 4.0f);
  }

  SUBCASE("n=1 takes the middle row") {
    FeatureTrack s = uniform_subsample(track, 1);
    REQUIRE(s.frames() == 1);
    CHECK(s.values(0, 0) == std::floor((80 - 1) / 2.0 + 0.5));
  }

  SUBCASE("always n rows, first and last included (property)") {
    Rng rng(3);
    for (int rep = 0; rep < 200; ++rep) {
      const int t = 2 + static_cast<int>(rng.index(60));
      const int n = 2 + static_cast<int>(rng.index(120));
      FeatureTrack v = make_track("image", t, 1);
      for (int i = 0; i < t; ++i) v.values(i, 0) = static_cast<float>(i);
      FeatureTrack s = uniform_subsample(v, n);
      REQUIRE(s.frames() == n);
      CHECK(s.values(0, 0) == 0.0f);
      CHECK(s.values(n - 1, 0) == static_cast<float>(t - 1));
    }
  }

  CHECK_THROWS_AS(uniform_subsample(track, 0), InvariantError);
}

TEST_CASE("manifest round trip and validation") {
  TempDir dir("manifest");
  FeatureTrack labels = make_track("labels", 4, kNumExpressions, 0.5f);
  FeatureTrack image = make_track("image", 4, 3, 1.0f);
  write_track(labels, dir.path() / "v0_labels.mgf");
  write_track(image, dir.path() / "v0_image.mgf");

  Manifest m;
  m.dataset_name = "unit";
  ManifestEntry e;
  e.video_id = "v0";
  e.split = Split::Train;
  e.tracks["labels"] =
      ManifestEntry::TrackRef{"v0_labels.mgf", kNumExpressions, frame_rate()};
  e.tracks["image"] = ManifestEntry::TrackRef{"v0_image.mgf", 3, frame_rate()};
  m.entries.push_back(e);
  save_manifest(m, dir.path() / "manifest.json");

  Manifest back = load_manifest(dir.path() / "manifest.json");
  CHECK(back.dataset_name == "unit");
  REQUIRE(back.entries.size() == 1);
  CHECK(back.entries[0].tracks.at("image").dim == 3);

  Dataset ds = load_dataset(dir.path() / "manifest.json");
  REQUIRE(ds.videos.size() == 1);
  CHECK(ds.videos[0].frames() == 4);
  CHECK(ds.find("v0") != nullptr);
  CHECK(ds.find("nope") == nullptr);

  SUBCASE("duplicate ids rejected") {
    m.entries.push_back(e);
    save_manifest(m, dir.path() / "dup.json");
    CHECK_THROWS_AS(load_manifest(dir.path() / "dup.json"), InvariantError);
  }

  SUBCASE("missing file rejected") {
    m.entries[0].tracks["image"].path = "gone.mgf";
    save_manifest(m, dir.path() / "gone.json");
    CHECK_THROWS_AS(load_manifest(dir.path() / "gone.json"), IoError);
  }

  SUBCASE("declared dim must match the file") {
    m.entries[0].tracks["image"].dim = 7;
    save_manifest(m, dir.path() / "dim.json");
    CHECK_THROWS_AS(load_dataset(dir.path() / "dim.json"), InvariantError);
  }

  SUBCASE("frame-aligned track with mismatched T rejected") {
    write_track(make_track("image", 9, 3, 1.0f), dir.path() / "v0_image.mgf");
    CHECK_THROWS_AS(load_dataset(dir.path() / "manifest.json"),
                    InvariantError);
  }
}
