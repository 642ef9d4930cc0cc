#include "mgn/nn/checkpoint.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "mgn/errors.hpp"
#include "mgn/track.hpp"

namespace mgn::nn {

using nlohmann::json;

namespace {

std::string tensor_file(const char* prefix, size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%03zu.mgf", prefix, i);
  return buf;
}

void write_tensor(const std::filesystem::path& dir, const std::string& file,
                  const std::string& name, const Mat<float>& m) {
  FeatureTrack t;
  t.modality = name;
  t.rate = Rate{1, 1};
  t.values = m;
  write_track(t, dir / file);
}

Mat<float> read_tensor(const std::filesystem::path& dir,
                       const std::string& file, const std::string& name,
                       int rows, int cols) {
  FeatureTrack t = read_track(dir / file);
  if (t.modality != name)
    throw InvariantError("checkpoint tensor name mismatch: expected '" + name +
                         "', file says '" + t.modality + "'");
  if (t.values.rows != rows || t.values.cols != cols)
    throw ShapeError("checkpoint tensor shape mismatch for " + name);
  return std::move(t.values);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir,
                     const std::vector<Param<float>*>& params,
                     const std::vector<Mat<float>*>& buffers,
                     const AdamSnapshot<float>* adam,
                     const std::string& model_config_json) {
  std::filesystem::create_directories(dir);
  json index;
  index["format"] = "mgn-checkpoint-v1";
  index["model"] = json::parse(model_config_json);

  index["params"] = json::array();
  for (size_t i = 0; i < params.size(); ++i) {
    const Param<float>& p = *params[i];
    const std::string file = tensor_file("t", i);
    write_tensor(dir, file, p.name, p.value);
    index["params"].push_back({{"name", p.name},
                               {"rows", p.value.rows},
                               {"cols", p.value.cols},
                               {"file", file}});
  }

  index["buffers"] = json::array();
  for (size_t i = 0; i < buffers.size(); ++i) {
    const std::string name = "buffer" + std::to_string(i);
    const std::string file = tensor_file("b", i);
    write_tensor(dir, file, name, *buffers[i]);
    index["buffers"].push_back({{"name", name},
                                {"rows", buffers[i]->rows},
                                {"cols", buffers[i]->cols},
                                {"file", file}});
  }

  if (adam && !adam->empty()) {
    if (adam->m.size() != params.size())
      throw InvariantError("checkpoint: adam moments do not match params");
    json ja;
    ja["step"] = adam->step;
    ja["learning_rate"] = adam->config.learning_rate;
    ja["beta1"] = adam->config.beta1;
    ja["beta2"] = adam->config.beta2;
    ja["epsilon"] = adam->config.epsilon;
    ja["m_files"] = json::array();
    ja["v_files"] = json::array();
    for (size_t i = 0; i < params.size(); ++i) {
      const std::string mf = tensor_file("m", i);
      const std::string vf = tensor_file("v", i);
      write_tensor(dir, mf, params[i]->name + ".m", adam->m[i]);
      write_tensor(dir, vf, params[i]->name + ".v", adam->v[i]);
      ja["m_files"].push_back(mf);
      ja["v_files"].push_back(vf);
    }
    index["adam"] = std::move(ja);
  }

  std::ofstream out(dir / "index.json", std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint index in " + dir.string());
  out << index.dump(2) << "\n";
}

std::optional<AdamSnapshot<float>> load_checkpoint(
    const std::filesystem::path& dir,
    const std::vector<Param<float>*>& params,
    const std::vector<Mat<float>*>& buffers) {
  std::ifstream in(dir / "index.json");
  if (!in) throw IoError("cannot open checkpoint index in " + dir.string());
  json index;
  try {
    in >> index;
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::BadHeader,
                      "checkpoint index parse error: " + std::string(e.what()));
  }

  const auto& jp = index.at("params");
  if (jp.size() != params.size())
    throw InvariantError("checkpoint: parameter count mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& e = jp[i];
    if (e.at("name").get<std::string>() != params[i]->name)
      throw InvariantError("checkpoint: parameter order mismatch at " +
                           params[i]->name);
    params[i]->value =
        read_tensor(dir, e.at("file").get<std::string>(), params[i]->name,
                    e.at("rows").get<int>(), e.at("cols").get<int>());
    params[i]->grad.zero();
  }

  const auto& jb = index.at("buffers");
  if (jb.size() != buffers.size())
    throw InvariantError("checkpoint: buffer count mismatch");
  for (size_t i = 0; i < buffers.size(); ++i) {
    const auto& e = jb[i];
    *buffers[i] =
        read_tensor(dir, e.at("file").get<std::string>(),
                    e.at("name").get<std::string>(), e.at("rows").get<int>(),
                    e.at("cols").get<int>());
  }

  if (!index.contains("adam")) return std::nullopt;
  const auto& ja = index.at("adam");
  AdamSnapshot<float> snap;
  snap.step = ja.at("step").get<int64_t>();
  snap.config.learning_rate = ja.at("learning_rate").get<float>();
  snap.config.beta1 = ja.at("beta1").get<float>();
  snap.config.beta2 = ja.at("beta2").get<float>();
  snap.config.epsilon = ja.at("epsilon").get<float>();
  for (size_t i = 0; i < params.size(); ++i) {
    snap.m.push_back(read_tensor(
        dir, ja.at("m_files")[i].get<std::string>(), params[i]->name + ".m",
        params[i]->value.rows, params[i]->value.cols));
    snap.v.push_back(read_tensor(
        dir, ja.at("v_files")[i].get<std::string>(), params[i]->name + ".v",
        params[i]->value.rows, params[i]->value.cols));
  }
  return snap;
}

std::string checkpoint_model_config(const std::filesystem::path& dir) {
  std::ifstream in(dir / "index.json");
  if (!in) throw IoError("cannot open checkpoint index in " + dir.string());
  json index;
  try {
    in >> index;
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::BadHeader,
                      "checkpoint index parse error: " + std::string(e.what()));
  }
  return index.at("model").dump();
}

}  // namespace mgn::nn
