#include "mgn/experiments.hpp"

#include <memory>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mgn/model/video_model.hpp"
#include "mgn/nn/loss.hpp"
#include "mgn/rng.hpp"

namespace mgn {

using nlohmann::json;
using nn::Mat;
using nn::Param;

std::vector<std::vector<std::string>> ablation_rungs() {
  return {{"image"},
          {"image", "audio"},
          {"image", "audio", "action"},
          {"image", "audio", "action", "subtitle"},
          {"image", "audio", "action", "subtitle", "video_theme"}};
}

TrainConfig small_preset_train_config() {
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.batch_size = 256;
  c.epochs = 30;
  c.fused_dim = 64;
  c.expert_hidden = 64;
  c.modal_dropout_p = 0.15;
  return c;
}

VideoTrainConfig small_preset_video_config() {
  VideoTrainConfig c;
  c.learning_rate = 3e-3;
  c.epochs = 200;
  c.clusters = 8;
  c.pooled_dim = 32;
  c.fused_dim = 64;
  return c;
}

namespace {

std::string rung_name(const std::vector<std::string>& rung) {
  std::string out;
  for (const auto& m : rung) {
    if (!out.empty()) out += "+";
    out += m;
  }
  return out;
}

}  // namespace

LadderResult run_ablation_ladder(const Dataset& dataset,
                                 const TrainConfig& base,
                                 const std::vector<uint64_t>& seeds) {
  LadderResult result;
  result.seeds = seeds;
  const auto rungs = ablation_rungs();
  for (const auto& rung : rungs) {
    result.rung_names.push_back(rung_name(rung));
    std::vector<double> row;
    for (uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.modalities = rung;
      cfg.seed = seed;
      row.push_back(train_frame_model(dataset, cfg).report.best_correlation);
    }
    result.rung_mean.push_back(
        std::accumulate(row.begin(), row.end(), 0.0) / row.size());
    result.correlation.push_back(std::move(row));
  }

  for (size_t s = 0; s < seeds.size(); ++s) {
    bool monotone = true;
    for (size_t r = 1; r < rungs.size(); ++r)
      if (result.correlation[r][s] + 1e-12 < result.correlation[r - 1][s])
        monotone = false;
    if (monotone) ++result.monotone_seeds;
  }
  return result;
}

std::string LadderResult::to_json() const {
  json j;
  j["seeds"] = seeds;
  j["rungs"] = json::array();
  for (size_t r = 0; r < rung_names.size(); ++r)
    j["rungs"].push_back({{"input", rung_names[r]},
                          {"correlation", correlation[r]},
                          {"mean", rung_mean[r]}});
  j["monotone_seeds"] = monotone_seeds;
  return j.dump(2);
}

std::string LadderResult::to_table() const {
  std::ostringstream out;
  size_t width = 8;
  for (const auto& n : rung_names) width = std::max(width, n.size());
  out << "Input";
  out << std::string(width - 4, ' ');
  for (uint64_t s : seeds) out << "  seed" << s;
  out << "    mean\n";
  out.setf(std::ios::fixed);
  out.precision(4);
  for (size_t r = 0; r < rung_names.size(); ++r) {
    out << rung_names[r] << std::string(width + 1 - rung_names[r].size(), ' ');
    for (double c : correlation[r]) out << " " << c;
    out << "  " << rung_mean[r] << "\n";
  }
  return out.str();
}

double MethodComparison::mean(const std::vector<double>& v) const {
  return v.empty() ? 0.0
                   : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

int MethodComparison::ensemble_wins() const {
  int wins = 0;
  for (const auto& t : trials)
    if (t.ensemble >= t.mean_single) ++wins;
  return wins;
}

MethodComparison run_method_comparison(const Dataset& dataset,
                                       const TrainConfig& base,
                                       const std::vector<uint64_t>& seeds,
                                       int n_trials) {
  MethodComparison result;
  result.seeds = seeds;

  TrainConfig mlp_cfg = base;
  mlp_cfg.use_attention = false;
  mlp_cfg.modal_dropout_p = 0.0;
  mlp_cfg.n_experts = 1;

  TrainConfig moe_cfg = base;
  moe_cfg.use_attention = false;
  moe_cfg.modal_dropout_p = 0.0;

  for (uint64_t seed : seeds) {
    TrainConfig a = mlp_cfg;
    a.seed = seed;
    result.mlp.push_back(train_frame_model(dataset, a).report.best_correlation);
    TrainConfig b = moe_cfg;
    b.seed = seed;
    result.moe.push_back(train_frame_model(dataset, b).report.best_correlation);
  }

  constexpr uint64_t kTrialStride = 1000;
  for (int trial = 0; trial < n_trials; ++trial) {
    MethodComparison::EnsembleTrial t;
    std::vector<PredictionSet> preds;
    for (uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.seed = seed + kTrialStride * static_cast<uint64_t>(trial);
      FrameTrainResult run = train_frame_model(dataset, cfg);
      PredictionSet p = predict_frame_model(run.model, dataset,
                                            Split::Validation, cfg.modalities);
      t.singles.push_back(evaluate(p, dataset, Split::Validation).overall);
      preds.push_back(std::move(p));
    }
    t.mean_single = result.mean(t.singles);
    t.ensemble =
        evaluate(ensemble(preds), dataset, Split::Validation).overall;
    if (trial == 0) result.maf_moe = t.singles;
    result.trials.push_back(std::move(t));
  }
  return result;
}

std::string MethodComparison::to_json() const {
  json j;
  j["seeds"] = seeds;
  j["mlp"] = {{"correlation", mlp}, {"mean", mean(mlp)}};
  j["moe"] = {{"correlation", moe}, {"mean", mean(moe)}};
  j["maf_moe"] = {{"correlation", maf_moe}, {"mean", mean(maf_moe)}};
  j["ensemble_trials"] = json::array();
  for (const auto& t : trials)
    j["ensemble_trials"].push_back({{"singles", t.singles},
                                    {"mean_single", t.mean_single},
                                    {"ensemble", t.ensemble}});
  j["ensemble_wins"] = ensemble_wins();
  return j.dump(2);
}

std::string MethodComparison::to_table() const {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << "Method    mean correlation\n";
  out << "MLP       " << mean(mlp) << "\n";
  out << "MOE       " << mean(moe) << "\n";
  out << "MAF+MOE   " << mean(maf_moe) << "\n";
  if (!trials.empty()) {
    double e = 0.0;
    for (const auto& t : trials) e += t.ensemble;
    out << "Ensemble  " << e / trials.size() << "  (wins " << ensemble_wins()
        << "/" << trials.size() << ")\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Gradient-check suite.
// ---------------------------------------------------------------------------

namespace {

Mat<double> random_mat(int r, int c, Rng& rng, double scale = 1.0) {
  Mat<double> m(r, c);
  for (auto& x : m.v) x = rng.normal(0.0, scale);
  return m;
}

Mat<double> random_probs(int r, int c, Rng& rng) {
  Mat<double> m(r, c);
  for (auto& x : m.v) x = rng.uniform(0.05, 0.95);
  return m;
}

// Holds a case's state alive inside the lambdas.
template <typename State>
GradCaseResult run_case(const std::string& name, std::shared_ptr<State> st,
                        std::vector<Param<double>*> params,
                        std::function<double()> loss,
                        std::function<void()> backward) {
  for (Param<double>* p : params) p->grad.zero();
  auto report = nn::grad_check(params, loss, backward);
  return {name, report};
}

GradCaseResult case_dense_sigmoid_bce() {
  struct State {
    Rng rng{101};
    nn::Dense<double> dense;
    Param<double> input{"input", 4, 5};
    Mat<double> target;
  };
  auto st = std::make_shared<State>();
  st->dense = nn::Dense<double>("dense", 5, 3, st->rng);
  st->input.value = random_mat(4, 5, st->rng);
  st->target = random_probs(4, 3, st->rng);

  auto loss = [st]() {
    Mat<double> p = sigmoid(st->dense.apply(st->input.value));
    return nn::bce_loss(p, st->target).loss;
  };
  auto backward = [st]() {
    st->dense.weight().grad.zero();
    st->dense.bias().grad.zero();
    Mat<double> p = sigmoid(st->dense.forward(st->input.value));
    auto bce = nn::bce_loss(p, st->target);
    Mat<double> dlogits(p.rows, p.cols);
    for (size_t i = 0; i < p.v.size(); ++i)
      dlogits.v[i] = bce.dp.v[i] * p.v[i] * (1.0 - p.v[i]);
    st->input.grad = st->dense.backward(dlogits);
  };
  std::vector<Param<double>*> params{&st->dense.weight(), &st->dense.bias(),
                                     &st->input};
  return run_case("dense+sigmoid+bce", st, params, loss, backward);
}

GradCaseResult case_softmax() {
  struct State {
    Rng rng{102};
    Param<double> input{"input", 3, 6};
    Mat<double> r;
  };
  auto st = std::make_shared<State>();
  st->input.value = random_mat(3, 6, st->rng);
  st->r = random_mat(3, 6, st->rng);

  auto loss = [st]() {
    Mat<double> s = softmax_rows(st->input.value);
    double acc = 0.0;
    for (size_t i = 0; i < s.v.size(); ++i) acc += s.v[i] * st->r.v[i];
    return acc;
  };
  auto backward = [st]() {
    Mat<double> s = softmax_rows(st->input.value);
    st->input.grad = softmax_backward_rows(s, st->r);
  };
  return run_case("softmax", st, {&st->input}, loss, backward);
}

GradCaseResult case_relu() {
  struct State {
    Rng rng{103};
    nn::Relu<double> relu;
    Param<double> input{"input", 4, 5};
    Mat<double> r;
  };
  auto st = std::make_shared<State>();
  // Keep values away from the kink at 0 (finite differences straddle it).
  st->input.value = random_mat(4, 5, st->rng);
  for (auto& x : st->input.value.v)
    if (std::abs(x) < 0.05) x = x < 0 ? x - 0.1 : x + 0.1;
  st->r = random_mat(4, 5, st->rng);

  auto loss = [st]() {
    Mat<double> y = st->relu.forward(st->input.value);
    double acc = 0.0;
    for (size_t i = 0; i < y.v.size(); ++i) acc += y.v[i] * st->r.v[i];
    return acc;
  };
  auto backward = [st]() {
    st->relu.forward(st->input.value);
    st->input.grad = st->relu.backward(st->r);
  };
  return run_case("relu", st, {&st->input}, loss, backward);
}

GradCaseResult case_batchnorm(nn::Mode mode) {
  struct State {
    Rng rng{104};
    nn::BatchNorm<double> bn;
    Param<double> input{"input", 6, 4};
    Mat<double> r;
    nn::Mode mode;
  };
  auto st = std::make_shared<State>();
  st->bn = nn::BatchNorm<double>("bn", 4);
  st->input.value = random_mat(6, 4, st->rng);
  st->r = random_mat(6, 4, st->rng);
  st->mode = mode;
  // Give gamma/beta and the running stats non-trivial values.
  for (int j = 0; j < 4; ++j) {
    st->bn.running_mean().v[j] = st->rng.normal(0.0, 0.3);
    st->bn.running_var().v[j] = 0.5 + st->rng.uniform();
  }
  Rng warm(105);
  st->bn.forward(random_mat(8, 4, warm), nn::Mode::Train);

  auto loss = [st]() {
    nn::BatchNorm<double> bn = st->bn;  // keep running stats untouched
    Mat<double> y = bn.forward(st->input.value, st->mode);
    double acc = 0.0;
    for (size_t i = 0; i < y.v.size(); ++i) acc += y.v[i] * st->r.v[i];
    return acc;
  };
  auto backward = [st]() {
    std::vector<Param<double>*> ps;
    st->bn.collect(ps);
    for (auto* p : ps) p->grad.zero();
    nn::BatchNorm<double> bn = st->bn;
    bn.forward(st->input.value, st->mode);
    st->input.grad = bn.backward(st->r);
    std::vector<Param<double>*> qs;
    bn.collect(qs);
    for (size_t i = 0; i < ps.size(); ++i) ps[i]->grad = qs[i]->grad;
  };
  std::vector<Param<double>*> params;
  st->bn.collect(params);
  params.push_back(&st->input);
  return run_case(mode == nn::Mode::Train ? "batchnorm(train)"
                                          : "batchnorm(eval)",
                  st, params, loss, backward);
}

GradCaseResult case_fusion() {
  struct State {
    Rng rng{106};
    model::ModalFusion<double> fusion;
    Param<double> a{"input.a", 3, 4};
    Param<double> b{"input.b", 3, 2};
    Mat<double> r;
  };
  auto st = std::make_shared<State>();
  model::FusionConfig fc;
  fc.modalities = {"a", "b"};
  fc.dims = {4, 2};
  fc.fused_dim = 5;
  fc.modal_dropout_p = 0.0;
  st->fusion = model::ModalFusion<double>(fc, st->rng);
  st->a.value = random_mat(3, 4, st->rng);
  st->b.value = random_mat(3, 2, st->rng);
  st->r = random_mat(3, 5, st->rng);

  auto loss = [st]() {
    model::ModalFusion<double> f = st->fusion;
    Mat<double> v =
        f.forward({st->a.value, st->b.value}, nn::Mode::Eval, nullptr);
    double acc = 0.0;
    for (size_t i = 0; i < v.v.size(); ++i) acc += v.v[i] * st->r.v[i];
    return acc;
  };
  auto backward = [st]() {
    std::vector<Param<double>*> ps;
    st->fusion.collect(ps);
    for (auto* p : ps) p->grad.zero();
    st->fusion.forward({st->a.value, st->b.value}, nn::Mode::Eval, nullptr);
    auto dfeats = st->fusion.backward(st->r);
    st->a.grad = dfeats[0];
    st->b.grad = dfeats[1];
  };
  std::vector<Param<double>*> params;
  st->fusion.collect(params);
  params.push_back(&st->a);
  params.push_back(&st->b);
  return run_case("fusion(dropout off)", st, params, loss, backward);
}

GradCaseResult case_netvlad() {
  struct State {
    Rng rng{107};
    model::NetVlad<double> vlad;
    Param<double> input{"input", 4, 3};
    Mat<double> r;
  };
  auto st = std::make_shared<State>();
  st->vlad = model::NetVlad<double>("vlad", model::NetVladConfig{3, 2, 3},
                                    st->rng);
  st->input.value = random_mat(4, 3, st->rng);
  st->r = random_mat(1, 3, st->rng);

  auto loss = [st]() {
    typename model::NetVlad<double>::Cache cache;
    Mat<double> out = st->vlad.forward(st->input.value, cache);
    double acc = 0.0;
    for (size_t i = 0; i < out.v.size(); ++i) acc += out.v[i] * st->r.v[i];
    return acc;
  };
  auto backward = [st]() {
    std::vector<Param<double>*> ps;
    st->vlad.collect(ps);
    for (auto* p : ps) p->grad.zero();
    typename model::NetVlad<double>::Cache cache;
    st->vlad.forward(st->input.value, cache);
    st->input.grad = st->vlad.backward(cache, st->r);
  };
  std::vector<Param<double>*> params;
  st->vlad.collect(params);
  params.push_back(&st->input);
  return run_case("netvlad", st, params, loss, backward);
}

GradCaseResult case_moe() {
  struct State {
    Rng rng{108};
    model::MoeHead<double> moe;
    Param<double> input{"input", 3, 6};
    Mat<double> target;
  };
  auto st = std::make_shared<State>();
  st->moe = model::MoeHead<double>(model::MoeConfig{6, 2, 4, 15}, st->rng);
  st->input.value = random_mat(3, 6, st->rng);
  st->target = random_probs(3, 15, st->rng);
  // Warm the batch-norm running stats, then check in eval mode.
  st->moe.forward(random_mat(8, 6, st->rng), nn::Mode::Train);

  auto loss = [st]() {
    model::MoeHead<double> m = st->moe;
    Mat<double> p = m.forward(st->input.value, nn::Mode::Eval);
    return nn::bce_loss(p, st->target).loss;
  };
  auto backward = [st]() {
    std::vector<Param<double>*> ps;
    st->moe.collect(ps);
    for (auto* p : ps) p->grad.zero();
    Mat<double> p = st->moe.forward(st->input.value, nn::Mode::Eval);
    auto bce = nn::bce_loss(p, st->target);
    st->input.grad = st->moe.backward(bce.dp);
  };
  std::vector<Param<double>*> params;
  st->moe.collect(params);
  params.push_back(&st->input);
  return run_case("moe(eval bn)", st, params, loss, backward);
}

GradCaseResult case_frame_model() {
  struct State {
    Rng rng{109};
    model::FrameModel<double> model;
    Param<double> a{"input.a", 4, 4};
    Param<double> b{"input.b", 4, 3};
    Mat<double> target;
  };
  auto st = std::make_shared<State>();
  model::FrameModelConfig mc;
  mc.fusion.modalities = {"a", "b"};
  mc.fusion.dims = {4, 3};
  mc.fusion.fused_dim = 5;
  mc.fusion.modal_dropout_p = 0.0;
  mc.n_experts = 2;
  mc.expert_hidden = 4;
  st->model = model::FrameModel<double>(mc, 77);
  st->a.value = random_mat(4, 4, st->rng);
  st->b.value = random_mat(4, 3, st->rng);
  st->target = random_probs(4, 15, st->rng);

  auto loss = [st]() {
    model::FrameModel<double> m = st->model;
    Mat<double> p =
        m.forward({st->a.value, st->b.value}, nn::Mode::Train, nullptr);
    return nn::bce_loss(p, st->target).loss;
  };
  auto backward = [st]() {
    for (auto* p : st->model.params()) p->grad.zero();
    Mat<double> p = st->model.forward({st->a.value, st->b.value},
                                      nn::Mode::Train, nullptr);
    auto bce = nn::bce_loss(p, st->target);
    auto dfeats = st->model.backward(bce.dp);
    st->a.grad = dfeats[0];
    st->b.grad = dfeats[1];
  };
  std::vector<Param<double>*> params = st->model.params();
  params.push_back(&st->a);
  params.push_back(&st->b);
  return run_case("frame model(train bn)", st, params, loss, backward);
}

GradCaseResult case_video_model() {
  struct State {
    Rng rng{110};
    model::VideoModel<double> model;
    Param<double> img0{"input.img0", 5, 3}, img1{"input.img1", 5, 3};
    Param<double> aud0{"input.aud0", 5, 2}, aud1{"input.aud1", 5, 2};
    Param<double> title{"input.title", 2, 2};
    Mat<double> target;
  };
  auto st = std::make_shared<State>();
  model::VideoModelConfig vc;
  vc.image_dim = 3;
  vc.audio_dim = 2;
  vc.title_dim = 2;
  vc.frames = 5;
  vc.clusters = 2;
  vc.pooled_dim = 3;
  vc.fused_dim = 4;
  vc.hidden_dim = 4;
  st->model = model::VideoModel<double>(vc, 55);
  st->img0.value = random_mat(5, 3, st->rng);
  st->img1.value = random_mat(5, 3, st->rng);
  st->aud0.value = random_mat(5, 2, st->rng);
  st->aud1.value = random_mat(5, 2, st->rng);
  st->title.value = random_mat(2, 2, st->rng);
  st->target = random_probs(2, 15, st->rng);

  auto forward = [st](model::VideoModel<double>& m) {
    return m.forward({&st->img0.value, &st->img1.value},
                     {&st->aud0.value, &st->aud1.value}, st->title.value,
                     nn::Mode::Train, nullptr);
  };
  auto loss = [st, forward]() {
    model::VideoModel<double> m = st->model;
    return nn::bce_loss(forward(m), st->target).loss;
  };
  auto backward = [st, forward]() {
    for (auto* p : st->model.params()) p->grad.zero();
    Mat<double> p = forward(st->model);
    auto bce = nn::bce_loss(p, st->target);
    auto grads = st->model.backward(bce.dp);
    st->img0.grad = grads.image[0];
    st->img1.grad = grads.image[1];
    st->aud0.grad = grads.audio[0];
    st->aud1.grad = grads.audio[1];
    st->title.grad = grads.title;
  };
  std::vector<Param<double>*> params = st->model.params();
  for (Param<double>* p :
       {&st->img0, &st->img1, &st->aud0, &st->aud1, &st->title})
    params.push_back(p);
  return run_case("video model(train bn)", st, params, loss, backward);
}

}  // namespace

std::vector<GradCaseResult> run_gradcheck_suite() {
  return {case_dense_sigmoid_bce(),
          case_softmax(),
          case_relu(),
          case_batchnorm(nn::Mode::Train),
          case_batchnorm(nn::Mode::Eval),
          case_fusion(),
          case_netvlad(),
          case_moe(),
          case_frame_model(),
          case_video_model()};
}

}  // namespace mgn
