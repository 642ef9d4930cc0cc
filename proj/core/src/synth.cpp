#include "mgn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "mgn/errors.hpp"
#include "mgn/rng.hpp"

namespace mgn {

using nlohmann::json;

namespace {

// Canonical generation order; also fixes the rng stream assignment.
const std::vector<std::string> kOrder = {"image",    "audio", "action",
                                         "subtitle", "title", "video_theme"};

enum class Granularity { Frame, Clip, Theme };

Granularity granularity_of(const std::string& m) {
  if (m == "image" || m == "audio") return Granularity::Frame;
  if (m == "action" || m == "subtitle") return Granularity::Clip;
  return Granularity::Theme;
}

constexpr int kClipHalfWindow = 16;
constexpr double kSquashGain = 0.8;

// A per-video constant only shifts a video's label mean, which the per-video
// correlation metric cannot see. The theme therefore also selects, per video
// and class, the mixing of the temporal components between two fixed mixers
// (a rotation by +/- this angle, sign taken from the video_theme stream).
// Models that read the video_theme track can undo the rotation; models that
// cannot are limited to the cos^2 share of the temporal variance.
constexpr double kThemeGateAngle = 0.7;

int component_rank(int dim) { return std::clamp(dim / 2, 1, kNumExpressions); }

struct ModalityParams {
  std::vector<int> signal_dims;          // which track dims carry signal (q)
  std::vector<double> rotation;          // q x q orthonormal, row-major
  std::vector<double> offset;            // per-dim affine offset (D)
  std::vector<double> label_mixer;       // 15 x q, unit-norm rows
  std::vector<double> label_mixer_alt;   // 15 x q, the rotated-in mixer
  std::vector<double> corrupt_dir;       // unit artifact direction (D)
};

struct DatasetParams {
  std::vector<std::string> order;        // present modalities, canonical order
  std::vector<ModalityParams> modal;
  std::vector<double> class_offsets;     // 15 pre-squash per-class offsets
  std::vector<double> gate_rows;         // 15 x q(video_theme), unit rows
  int gate_rank = 0;                     // 0 when video_theme is absent
};

// Orthonormalizes q random Gaussian q-vectors (modified Gram-Schmidt).
std::vector<double> random_rotation(int q, Rng& rng) {
  std::vector<double> r(static_cast<size_t>(q) * q);
  for (auto& x : r) x = rng.normal();
  for (int i = 0; i < q; ++i) {
    double* ri = r.data() + static_cast<size_t>(i) * q;
    for (int j = 0; j < i; ++j) {
      const double* rj = r.data() + static_cast<size_t>(j) * q;
      double d = 0.0;
      for (int k = 0; k < q; ++k) d += ri[k] * rj[k];
      for (int k = 0; k < q; ++k) ri[k] -= d * rj[k];
    }
    double norm = 0.0;
    for (int k = 0; k < q; ++k) norm += ri[k] * ri[k];
    norm = std::sqrt(std::max(norm, 1e-12));
    for (int k = 0; k < q; ++k) ri[k] /= norm;
  }
  return r;
}

DatasetParams derive_dataset_params(const SynthSpec& spec) {
  DatasetParams p;
  Rng base(spec.seed);

  Rng label_rng = base.derive(1);
  for (int j = 0; j < kNumExpressions; ++j)
    p.class_offsets.push_back(label_rng.normal(0.0, 0.25));

  for (size_t im = 0; im < kOrder.size(); ++im) {
    auto it = spec.modalities.find(kOrder[im]);
    if (it == spec.modalities.end()) continue;
    const int dim = it->second.dim;
    const int q = component_rank(dim);
    Rng rng = base.derive(10 + im);

    ModalityParams mp;
    std::vector<int> all(dim);
    std::iota(all.begin(), all.end(), 0);
    for (int i = 0; i < q; ++i) {
      int j = i + static_cast<int>(rng.index(dim - i));
      std::swap(all[i], all[j]);
    }
    mp.signal_dims.assign(all.begin(), all.begin() + q);
    std::sort(mp.signal_dims.begin(), mp.signal_dims.end());

    mp.rotation = random_rotation(q, rng);
    mp.offset.resize(dim);
    for (auto& x : mp.offset) x = rng.normal(0.0, 0.5);
    auto unit_rows = [&rng, q](std::vector<double>& rows) {
      rows.resize(static_cast<size_t>(kNumExpressions) * q);
      for (int j = 0; j < kNumExpressions; ++j) {
        double* row = rows.data() + static_cast<size_t>(j) * q;
        double norm = 0.0;
        for (int k = 0; k < q; ++k) {
          row[k] = rng.normal();
          norm += row[k] * row[k];
        }
        norm = std::sqrt(std::max(norm, 1e-12));
        for (int k = 0; k < q; ++k) row[k] /= norm;
      }
    };
    unit_rows(mp.label_mixer);
    unit_rows(mp.label_mixer_alt);
    mp.corrupt_dir.resize(dim);
    double cnorm = 0.0;
    for (auto& x : mp.corrupt_dir) {
      x = rng.normal();
      cnorm += x * x;
    }
    cnorm = std::sqrt(std::max(cnorm, 1e-12));
    for (auto& x : mp.corrupt_dir) x /= cnorm;

    p.order.push_back(kOrder[im]);
    p.modal.push_back(std::move(mp));
  }

  auto theme = spec.modalities.find("video_theme");
  if (theme != spec.modalities.end()) {
    p.gate_rank = component_rank(theme->second.dim);
    Rng rng = base.derive(2);
    p.gate_rows.resize(static_cast<size_t>(kNumExpressions) * p.gate_rank);
    for (int j = 0; j < kNumExpressions; ++j) {
      double* row = p.gate_rows.data() + static_cast<size_t>(j) * p.gate_rank;
      double norm = 0.0;
      for (int k = 0; k < p.gate_rank; ++k) {
        row[k] = rng.normal();
        norm += row[k] * row[k];
      }
      norm = std::sqrt(std::max(norm, 1e-12));
      for (int k = 0; k < p.gate_rank; ++k) row[k] /= norm;
    }
  }
  return p;
}

// Unit-variance moving average over +/-16 frames of a white stream; the
// divisor shrinks with the window at the edges so variance stays 1.
std::vector<double> smooth_clip(const std::vector<double>& white, int t_len,
                                int q) {
  std::vector<double> out(white.size());
  for (int k = 0; k < q; ++k) {
    for (int t = 0; t < t_len; ++t) {
      const int lo = std::max(0, t - kClipHalfWindow);
      const int hi = std::min(t_len - 1, t + kClipHalfWindow);
      double acc = 0.0;
      for (int s = lo; s <= hi; ++s)
        acc += white[static_cast<size_t>(k) * t_len + s];
      out[static_cast<size_t>(k) * t_len + t] =
          acc / std::sqrt(static_cast<double>(hi - lo + 1));
    }
  }
  return out;
}

}  // namespace

SynthSpec SynthSpec::small(uint64_t seed) {
  SynthSpec s;
  s.name = "synth-small";
  s.n_videos = 40;
  s.frames_per_video = 120;
  s.seed = seed;
  s.noise_floor = 0.15;
  s.track_noise = 0.1;
  s.modalities = {{"image", {16, 0.10}},    {"audio", {8, 0.14}},
                  {"action", {8, 0.12}},    {"subtitle", {8, 0.14}},
                  {"title", {8, 0.05}},     {"video_theme", {16, 0.10}}};
  return s;
}

SynthSpec SynthSpec::paper(uint64_t seed) {
  SynthSpec s = small(seed);
  s.name = "synth-paper-dims";
  s.n_videos = 24;
  s.frames_per_video = 360;
  s.modalities["image"].dim = 1536;
  s.modalities["audio"].dim = 128;
  s.modalities["action"].dim = 512;
  s.modalities["subtitle"].dim = 768;
  s.modalities["title"].dim = 768;
  s.modalities["video_theme"].dim = 1024;
  return s;
}

void SynthSpec::validate() const {
  if (n_videos < 1 || frames_per_video < 1)
    throw InvariantError("synth: need at least one video and one frame");
  if (modalities.empty()) throw InvariantError("synth: no modalities");
  double total = 0.0;
  for (const auto& [name, m] : modalities) {
    if (m.dim < 1) throw InvariantError("synth: dim must be >= 1 for " + name);
    if (m.strength < 0.0)
      throw InvariantError("synth: negative strength for " + name);
    if (std::find(kOrder.begin(), kOrder.end(), name) == kOrder.end())
      throw InvariantError("synth: unknown modality " + name);
    total += m.strength;
  }
  if (total > 1.0 + 1e-9)
    throw InvariantError("synth: signal strengths sum above 1");
  if (noise_floor < 0.0 || track_noise < 0.0)
    throw InvariantError("synth: negative noise level");
  if (validation_fraction < 0.0 || test_fraction < 0.0 ||
      validation_fraction + test_fraction >= 1.0 + 1e-9)
    throw InvariantError("synth: bad split fractions");
}

std::string synth_video_id(int video_index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "v%03d", video_index);
  return buf;
}

std::map<std::string, FeatureTrack> generate_video_tracks(
    const SynthSpec& spec, int video_index) {
  spec.validate();
  const DatasetParams params = derive_dataset_params(spec);
  const int t_len = spec.frames_per_video;

  Rng rng = Rng(spec.seed).derive(1000 + static_cast<uint64_t>(video_index));

  // Per-modality component streams (q x T, row-major per component), then
  // the raw tracks. Draw order is fixed by the canonical modality order.
  std::vector<std::vector<double>> components;
  std::map<std::string, FeatureTrack> tracks;

  for (size_t mi = 0; mi < params.order.size(); ++mi) {
    const std::string& name = params.order[mi];
    const ModalityParams& mp = params.modal[mi];
    const SynthSpec::Modality& ms = spec.modalities.at(name);
    const Granularity gran = granularity_of(name);
    const int q = static_cast<int>(mp.signal_dims.size());
    const int track_t = gran == Granularity::Theme ? 1 : t_len;

    std::vector<double> z(static_cast<size_t>(q) * t_len);
    switch (gran) {
      case Granularity::Theme: {
        for (int k = 0; k < q; ++k) {
          const double v = rng.normal();
          for (int t = 0; t < t_len; ++t)
            z[static_cast<size_t>(k) * t_len + t] = v;
        }
        break;
      }
      case Granularity::Clip: {
        std::vector<double> white(z.size());
        for (auto& x : white) x = rng.normal();
        z = smooth_clip(white, t_len, q);
        break;
      }
      case Granularity::Frame: {
        for (auto& x : z) x = rng.normal();
        break;
      }
    }

    FeatureTrack track;
    track.modality = name;
    track.rate = frame_rate();
    track.values = nn::Mat<float>(track_t, ms.dim);
    std::vector<char> is_signal(ms.dim, 0);
    for (int sd : mp.signal_dims) is_signal[sd] = 1;
    for (int t = 0; t < track_t; ++t) {
      // Rotate the component into the signal dims.
      std::vector<double> rotated(q, 0.0);
      for (int i = 0; i < q; ++i) {
        const double* rrow = mp.rotation.data() + static_cast<size_t>(i) * q;
        double acc = 0.0;
        for (int k = 0; k < q; ++k)
          acc += rrow[k] * z[static_cast<size_t>(k) * t_len + t];
        rotated[i] = acc;
      }
      int si = 0;
      for (int j = 0; j < ms.dim; ++j) {
        double val = mp.offset[j];
        val += is_signal[j] ? rotated[si++] : rng.normal();  // distractor dims
        val += spec.track_noise * rng.normal();
        track.values(t, j) = static_cast<float>(val);
      }
    }
    tracks.emplace(name, std::move(track));
    components.push_back(std::move(z));
  }

  // Per-(video, class) gate signs from the video_theme stream. They pick the
  // temporal mixing regime below; a model that reads the video_theme track
  // can recover them exactly.
  std::vector<double> gate(kNumExpressions, 0.0);
  if (params.gate_rank > 0) {
    size_t theme_index = 0;
    for (size_t mi = 0; mi < params.order.size(); ++mi)
      if (params.order[mi] == "video_theme") theme_index = mi;
    for (int j = 0; j < kNumExpressions; ++j) {
      const double* row =
          params.gate_rows.data() + static_cast<size_t>(j) * params.gate_rank;
      double acc = 0.0;
      for (int k = 0; k < params.gate_rank; ++k)
        acc += row[k] * components[theme_index][static_cast<size_t>(k) * t_len];
      gate[j] = acc >= 0.0 ? 1.0 : -1.0;
    }
  }
  const double mix_a = params.gate_rank > 0 ? std::cos(kThemeGateAngle) : 1.0;
  const double mix_b = params.gate_rank > 0 ? std::sin(kThemeGateAngle) : 0.0;

  // Labels: squashed sum of the scaled component mixes plus noise.
  FeatureTrack labels;
  labels.modality = "labels";
  labels.rate = frame_rate();
  labels.values = nn::Mat<float>(t_len, kNumExpressions);
  for (int t = 0; t < t_len; ++t)
    for (int j = 0; j < kNumExpressions; ++j) {
      double raw = params.class_offsets[j];
      for (size_t mi = 0; mi < params.order.size(); ++mi) {
        const ModalityParams& mp = params.modal[mi];
        const double s = spec.modalities.at(params.order[mi]).strength;
        if (s == 0.0) continue;
        const int q = static_cast<int>(mp.signal_dims.size());
        const double* qrow =
            mp.label_mixer.data() + static_cast<size_t>(j) * q;
        double acc = 0.0;
        for (int k = 0; k < q; ++k)
          acc += qrow[k] * components[mi][static_cast<size_t>(k) * t_len + t];
        if (granularity_of(params.order[mi]) == Granularity::Theme) {
          raw += std::sqrt(s) * acc;  // additive per-video offset
        } else {
          const double* arow =
              mp.label_mixer_alt.data() + static_cast<size_t>(j) * q;
          double alt = 0.0;
          for (int k = 0; k < q; ++k)
            alt +=
                arow[k] * components[mi][static_cast<size_t>(k) * t_len + t];
          raw += std::sqrt(s) * (mix_a * acc + mix_b * gate[j] * alt);
        }
      }
      raw += spec.noise_floor * rng.normal();
      labels.values(t, j) =
          static_cast<float>(0.5 + 0.5 * std::tanh(kSquashGain * raw));
    }
  tracks.emplace("labels", std::move(labels));
  return tracks;
}

Manifest generate(const SynthSpec& spec,
                  const std::filesystem::path& out_dir) {
  spec.validate();
  std::filesystem::create_directories(out_dir);

  const int n_val = static_cast<int>(
      std::lround(spec.validation_fraction * spec.n_videos));
  const int n_test =
      static_cast<int>(std::lround(spec.test_fraction * spec.n_videos));
  const int n_train = spec.n_videos - n_val - n_test;

  Manifest manifest;
  manifest.dataset_name = spec.name;
  for (int v = 0; v < spec.n_videos; ++v) {
    auto tracks = generate_video_tracks(spec, v);
    ManifestEntry entry;
    entry.video_id = synth_video_id(v);
    entry.split = v < n_train              ? Split::Train
                  : v < n_train + n_val    ? Split::Validation
                                           : Split::Test;
    for (const auto& [name, track] : tracks) {
      const std::string file = entry.video_id + "_" + name + ".mgf";
      write_track(track, out_dir / file);
      entry.tracks[name] =
          ManifestEntry::TrackRef{file, track.dim(), track.rate};
    }
    manifest.entries.push_back(std::move(entry));
  }
  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

std::string SynthSpec::to_json() const {
  json j;
  j["name"] = name;
  j["n_videos"] = n_videos;
  j["frames_per_video"] = frames_per_video;
  j["seed"] = seed;
  j["noise_floor"] = noise_floor;
  j["track_noise"] = track_noise;
  j["validation_fraction"] = validation_fraction;
  j["test_fraction"] = test_fraction;
  j["modalities"] = json::object();
  for (const auto& [n, m] : modalities)
    j["modalities"][n] = {{"dim", m.dim}, {"strength", m.strength}};
  return j.dump(2);
}

SynthSpec SynthSpec::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvariantError("synth spec parse error: " + std::string(e.what()));
  }
  SynthSpec s;
  s.modalities.clear();
  try {
    s.name = j.value("name", s.name);
    s.n_videos = j.value("n_videos", s.n_videos);
    s.frames_per_video = j.value("frames_per_video", s.frames_per_video);
    s.seed = j.value("seed", s.seed);
    s.noise_floor = j.value("noise_floor", s.noise_floor);
    s.track_noise = j.value("track_noise", s.track_noise);
    s.validation_fraction =
        j.value("validation_fraction", s.validation_fraction);
    s.test_fraction = j.value("test_fraction", s.test_fraction);
    for (const auto& [n, m] : j.at("modalities").items())
      s.modalities[n] = {m.at("dim").get<int>(), m.at("strength").get<double>()};
  } catch (const json::exception& e) {
    throw InvariantError("synth spec field error: " + std::string(e.what()));
  }
  s.validate();
  return s;
}

}  // namespace mgn
