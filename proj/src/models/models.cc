// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "aptsep/models/models.h"

#include <cmath>
#include <memory>

#include "aptsep/common/error.h"
#include "aptsep/common/rng.h"
#include "aptsep/dsp/mel.h"
#include "aptsep/dsp/stft.h"
#include "json.hpp"

namespace aptsep::models {
namespace {

using Json = nlohmann::json;
using grad::NodeId;
using grad::Shape;

constexpr float kFilmGain = 0.2f;

Json AudioJson(const AudioConfig& a) {
  return {{"sample_rate", a.sample_rate}, {"clip_length", a.clip_length},
          {"n_fft", a.n_fft},             {"hop", a.hop},
          {"n_mels", a.n_mels}};
}

AudioConfig ParseAudio(const Json& j) {
  AudioConfig a;
  a.sample_rate = j.at("sample_rate").get<int>();
  a.clip_length = j.at("clip_length").get<std::size_t>();
  a.n_fft = j.at("n_fft").get<std::size_t>();
  a.hop = j.at("hop").get<std::size_t>();
  a.n_mels = j.at("n_mels").get<std::size_t>();
  return a;
}

Json ParseConfigJson(const Checkpoint& ckpt, const std::string& model) {
  if (ckpt.model != model) {
    throw Error(Errc::kInvalidArgument, "expected a " + model +
                                            " checkpoint, got '" + ckpt.model +
                                            "'");
  }
  try {
    return Json::parse(ckpt.model_config);
  } catch (const Json::exception& e) {
    throw Error(Errc::kCorruptFile,
                std::string("malformed model config: ") + e.what());
  }
}

Checkpoint InitFrom(const ParamShapes& shapes, std::uint64_t seed) {
  Checkpoint ckpt;
  ckpt.seed = seed;
  const Rng root = Rng(seed).Child("init");
  for (const auto& [name, shape] : shapes) {
    grad::Tensor<float> t(shape);
    const bool is_weight = name.ends_with(".w");
    const bool is_film = name.starts_with("film");
    if (is_weight) {
      // Conv [Cout,Cin,KH,KW] and linear [in,out] weights.
      const std::size_t fan_in =
          shape.size() == 4 ? shape[1] * shape[2] * shape[3] : shape[0];
      float bound = static_cast<float>(std::sqrt(6.0 / fan_in));
      if (is_film) bound *= kFilmGain;
      Rng rng = root.Child(name);
      for (float& v : t.data()) {
        v = static_cast<float>(rng.Uniform(-bound, bound));
      }
    } else if (is_film) {
      const std::size_t ch = t.size() / 2;
      for (std::size_t c = 0; c < ch; ++c) t[c] = 1.0f;
    }
    ckpt.tensors.push_back({name, std::move(t), false});
  }
  return ckpt;
}

template <typename T>
NodeId Param(grad::Graph<T>& g,
             std::vector<std::pair<std::string, NodeId>>& params,
             const std::string& name) {
  const NodeId id = g.Leaf(name);
  params.push_back({name, id});
  return id;
}

std::size_t Half(std::size_t n) { return (n - 1) / 2 + 1; }

template <typename T>
void AccumulateParams(
    const std::vector<std::pair<std::string, NodeId>>& params,
    const std::map<NodeId, grad::Tensor<T>>& grads, Checkpoint& ckpt,
    float scale) {
  for (const auto& [name, id] : params) {
    auto it = grads.find(id);
    if (it == grads.end()) continue;
    ckpt.Mutable(name).AccumulateGrad(it->second.data(), scale);
  }
}

}  // namespace

ParamShapes SedParamShapes(const SedConfig& c) {
  const auto& ch = c.channels;
  return {
      {"conv1.w", {ch[0], 2, 3, 3}},   {"conv1.b", {ch[0]}},
      {"conv2.w", {ch[1], ch[0], 3, 3}}, {"conv2.b", {ch[1]}},
      {"conv3.w", {ch[2], ch[1], 3, 3}}, {"conv3.b", {ch[2]}},
      {"proj.w", {ch[2], c.embed_dim}},  {"proj.b", {c.embed_dim}},
      {"head.w", {c.embed_dim, c.class_ids.size()}},
      {"head.b", {c.class_ids.size()}},
  };
}

ParamShapes UssParamShapes(const UssConfig& c) {
  const auto& ch = c.channels;
  const std::size_t d = c.embed_dim;
  return {
      {"enc1.w", {ch[0], 2, 3, 3}},     {"enc1.b", {ch[0]}},
      {"enc2.w", {ch[1], ch[0], 3, 3}}, {"enc2.b", {ch[1]}},
      {"enc3.w", {ch[2], ch[1], 3, 3}}, {"enc3.b", {ch[2]}},
      {"film3.w", {d, 2 * ch[2]}},      {"film3.b", {2 * ch[2]}},
      {"dec2.w", {ch[1], ch[2], 3, 3}}, {"dec2.b", {ch[1]}},
      {"film2.w", {d, 2 * ch[1]}},      {"film2.b", {2 * ch[1]}},
      {"dec1.w", {ch[0], ch[1], 3, 3}}, {"dec1.b", {ch[0]}},
      {"film1.w", {d, 2 * ch[0]}},      {"film1.b", {2 * ch[0]}},
      {"film0.w", {d, 2 * ch[0]}},      {"film0.b", {2 * ch[0]}},
      {"out.w", {1, ch[0], 3, 3}},      {"out.b", {1}},
  };
}

Checkpoint InitSed(const SedConfig& config, const AudioConfig& audio,
                   std::uint64_t seed) {
  if (config.class_ids.size() < 2) {
    throw Error(Errc::kTooFewClasses, "SED classifier needs >= 2 classes");
  }
  Checkpoint ckpt = InitFrom(SedParamShapes(config), seed);
  ckpt.model = "sed";
  ckpt.model_config = Json{{"audio", AudioJson(audio)},
                           {"sed",
                            {{"embed_dim", config.embed_dim},
                             {"channels", config.channels},
                             {"class_ids", config.class_ids}}}}
                          .dump();
  return ckpt;
}

Checkpoint InitUss(const UssConfig& config, const AudioConfig& audio,
                   std::uint64_t seed) {
  Checkpoint ckpt = InitFrom(UssParamShapes(config), seed);
  ckpt.model = "uss";
  ckpt.model_config =
      Json{{"audio", AudioJson(audio)},
           {"uss",
            {{"embed_dim", config.embed_dim}, {"channels", config.channels}}}}
          .dump();
  return ckpt;
}

void ParseSedCheckpoint(const Checkpoint& ckpt, SedConfig* config,
                        AudioConfig* audio) {
  const Json j = ParseConfigJson(ckpt, "sed");
  try {
    *audio = ParseAudio(j.at("audio"));
    config->embed_dim = j.at("sed").at("embed_dim").get<std::size_t>();
    config->channels =
        j.at("sed").at("channels").get<std::array<std::size_t, 3>>();
    config->class_ids = j.at("sed").at("class_ids").get<std::vector<int>>();
  } catch (const Json::exception& e) {
    throw Error(Errc::kCorruptFile,
                std::string("malformed SED config: ") + e.what());
  }
}

void ParseUssCheckpoint(const Checkpoint& ckpt, UssConfig* config,
                        AudioConfig* audio) {
  const Json j = ParseConfigJson(ckpt, "uss");
  try {
    *audio = ParseAudio(j.at("audio"));
    config->embed_dim = j.at("uss").at("embed_dim").get<std::size_t>();
    config->channels =
        j.at("uss").at("channels").get<std::array<std::size_t, 3>>();
  } catch (const Json::exception& e) {
    throw Error(Errc::kCorruptFile,
                std::string("malformed USS config: ") + e.what());
  }
}

grad::Tensor<float> SedFeatures(const dsp::Waveform& x,
                                const AudioConfig& audio) {
  if (x.size() != audio.clip_length) {
    throw Error(Errc::kLengthMismatch,
                "SED input has " + std::to_string(x.size()) +
                    " samples, expected " + std::to_string(audio.clip_length));
  }
  const dsp::MelSpec mel = dsp::MelSpectrogram(
      x, dsp::MelConfig{audio.n_fft, audio.hop, audio.n_mels,
                        audio.sample_rate});
  double mean = 0.0, sq = 0.0;
  for (float v : mel.values) mean += v;
  mean /= static_cast<double>(mel.values.size());
  for (float v : mel.values) sq += (v - mean) * (v - mean);
  const double inv_std =
      1.0 / (std::sqrt(sq / static_cast<double>(mel.values.size())) + 1e-5);
  grad::Tensor<float> t({2, mel.frames, mel.n_mels});
  const std::size_t plane = mel.frames * mel.n_mels;
  for (std::size_t i = 0; i < plane; ++i) {
    t[i] = static_cast<float>((mel.values[i] - mean) * inv_std);
    t[plane + i] = static_cast<float>(i % mel.n_mels) /
                   static_cast<float>(mel.n_mels - 1);
  }
  return t;
}

UssInput PrepareUssInput(const dsp::Waveform& y, const AudioConfig& audio) {
  if (y.size() != audio.clip_length) {
    throw Error(Errc::kLengthMismatch,
                "mixture has " + std::to_string(y.size()) +
                    " samples, expected " + std::to_string(audio.clip_length));
  }
  dsp::Spectrogram<float> s = dsp::Stft(y, audio.n_fft, audio.hop);
  UssInput in{grad::Tensor<float>({2, s.frames, s.bins}),
              grad::Tensor<float>({s.frames, s.bins}, std::move(s.real)),
              grad::Tensor<float>({s.frames, s.bins}, std::move(s.imag))};
  const std::size_t plane = s.frames * s.bins;
  for (std::size_t i = 0; i < plane; ++i) {
    const float re = in.real[i], im = in.imag[i];
    in.features[i] = std::log1p(std::sqrt(re * re + im * im));
    in.features[plane + i] =
        static_cast<float>(i % s.bins) / static_cast<float>(s.bins - 1);
  }
  return in;
}

template <typename T>
SedNet<T>::SedNet(const SedConfig& config, const AudioConfig& audio) {
  (void)audio;
  grad::Graph<T>& g = graph;
  input = g.Leaf("input");
  NodeId h = input;
  for (int l = 1; l <= 3; ++l) {
    const std::string p = "conv" + std::to_string(l);
    const NodeId w = Param(g, params, p + ".w");
    const NodeId b = Param(g, params, p + ".b");
    h = g.Relu(g.BiasAdd(g.Conv2d(h, w, 2, 1), b));
  }
  const NodeId pooled = g.Reshape(g.MeanTF(h), {1, config.channels[2]});
  const NodeId pw = Param(g, params, "proj.w");
  const NodeId pb = Param(g, params, "proj.b");
  embedding = g.BiasAdd(g.MatMul(pooled, pw), pb);
  const NodeId hw = Param(g, params, "head.w");
  const NodeId hb = Param(g, params, "head.b");
  logits = g.BiasAdd(g.MatMul(embedding, hw), hb);
  label = g.Leaf("label");
  loss = g.SoftmaxCrossEntropy(logits, label);
  g.SetOutput(loss);
}

template <typename T>
UssNet<T>::UssNet(const UssConfig& config, const AudioConfig& audio) {
  grad::Graph<T>& g = graph;
  const std::size_t f1 = audio.frames(), b1 = audio.bins();
  const std::size_t f2 = Half(f1), b2 = Half(b1);
  features = g.Leaf("features");
  real = g.Leaf("real");
  imag = g.Leaf("imag");
  prompt = g.Leaf("prompt");
  target = g.Leaf("target");
  auto conv = [&](NodeId x, const std::string& name, int stride) {
    const NodeId w = Param(g, params, name + ".w");
    const NodeId b = Param(g, params, name + ".b");
    return g.BiasAdd(g.Conv2d(x, w, stride, 1), b);
  };
  auto film = [&](NodeId x, const std::string& name) {
    const NodeId w = Param(g, params, name + ".w");
    const NodeId b = Param(g, params, name + ".b");
    return g.Film(x, g.BiasAdd(g.MatMul(prompt, w), b));
  };
  const NodeId e1 = g.Silu(conv(features, "enc1", 1));
  const NodeId e2 = g.Silu(conv(e1, "enc2", 2));
  const NodeId e3 = g.Silu(conv(e2, "enc3", 2));
  const NodeId z3 = g.Silu(film(e3, "film3"));
  const NodeId d2 = g.Silu(film(conv(z3, "dec2", 1), "film2"));
  const NodeId u2 = g.Add(g.Upsample2x(d2, f2, b2), e2);
  const NodeId d1 = g.Silu(film(conv(u2, "dec1", 1), "film1"));
  const NodeId u1 = g.Add(g.Upsample2x(d1, f1, b1), e1);
  const NodeId h0 = g.Silu(film(u1, "film0"));
  mask = g.Reshape(g.Sigmoid(conv(h0, "out", 1)), {f1, b1});
  const NodeId er = g.Mul(mask, real);
  const NodeId ei = g.Mul(mask, imag);
  estimate = g.Custom({er, ei}, std::make_shared<dsp::IstftOp<T>>(
                                    audio.n_fft, audio.hop, audio.clip_length));
  loss = g.L1Loss(estimate, target);
  g.SetOutput(loss);
  (void)config;
}

template struct SedNet<float>;
template struct SedNet<double>;
template struct UssNet<float>;
template struct UssNet<double>;

namespace {

SedConfig SedConfigOf(const Checkpoint& ckpt, AudioConfig* audio) {
  SedConfig c;
  ParseSedCheckpoint(ckpt, &c, audio);
  return c;
}

UssConfig UssConfigOf(const Checkpoint& ckpt, AudioConfig* audio) {
  UssConfig c;
  ParseUssCheckpoint(ckpt, &c, audio);
  return c;
}

void CheckShapes(const Checkpoint& ckpt, const ParamShapes& shapes) {
  for (const auto& [name, shape] : shapes) {
    if (!ckpt.Has(name) || ckpt.Get(name).shape() != shape) {
      throw Error(Errc::kCorruptFile, ckpt.model + " checkpoint tensor '" +
                                          name + "' missing or misshapen");
    }
  }
}

}  // namespace

SedModel::SedModel(Checkpoint ckpt)
    : ckpt_(std::move(ckpt)),
      config_(SedConfigOf(ckpt_, &audio_)),
      net_(config_, audio_),
      label_({1, config_.class_ids.size()}) {
  CheckShapes(ckpt_, SedParamShapes(config_));
}

const grad::Tensor<float>& SedModel::Run(const grad::Tensor<float>& features,
                                         int class_id) {
  std::fill(label_.data().begin(), label_.data().end(), 0.0f);
  for (std::size_t i = 0; i < config_.class_ids.size(); ++i) {
    if (config_.class_ids[i] == class_id) label_[i] = 1.0f;
  }
  grad::Bindings<float> b;
  BindParams<float>(
      net_.params,
      [&](const std::string& n) -> const grad::Tensor<float>& {
        return ckpt_.Get(n);
      },
      b);
  b.Bind(net_.input, features);
  b.Bind(net_.label, label_);
  return net_.graph.Evaluate(b);
}

std::vector<float> SedModel::Embed(const dsp::Waveform& x) {
  return EmbedFeatures(SedFeatures(x, audio_));
}

std::vector<float> SedModel::EmbedFeatures(
    const grad::Tensor<float>& features) {
  Run(features, config_.class_ids.front());
  return net_.graph.value(net_.embedding).values();
}

int SedModel::Classify(const grad::Tensor<float>& features) {
  Run(features, config_.class_ids.front());
  const grad::Tensor<float>& z = net_.graph.value(net_.logits);
  std::size_t best = 0;
  for (std::size_t i = 1; i < z.size(); ++i) {
    if (z[i] > z[best]) best = i;
  }
  return config_.class_ids[best];
}

float SedModel::Loss(const grad::Tensor<float>& features, int class_id,
                     bool backward, float scale) {
  const float loss = Run(features, class_id)[0];
  if (backward) {
    AccumulateParams(net_.params,
                     net_.graph.Backpropagate(grad::Tensor<float>({1}, {1.0f})),
                     ckpt_, scale);
  }
  return loss;
}

void SedModel::SetParamsTrainable(bool trainable) {
  for (const auto& [name, id] : net_.params) {
    net_.graph.SetTrainable(id, trainable);
    ckpt_.Mutable(name).set_requires_grad(trainable);
  }
}

UssModel::UssModel(Checkpoint ckpt)
    : ckpt_(std::move(ckpt)),
      config_(UssConfigOf(ckpt_, &audio_)),
      net_(config_, audio_),
      zero_target_({audio_.clip_length}) {
  CheckShapes(ckpt_, UssParamShapes(config_));
}

void UssModel::CheckPrompt(std::size_t size) const {
  if (size != config_.embed_dim) {
    throw Error(Errc::kDimensionMismatch,
                "prompt has " + std::to_string(size) + " values, expected " +
                    std::to_string(config_.embed_dim));
  }
}

dsp::Waveform UssModel::Separate(const dsp::Waveform& y,
                                 std::span<const float> prompt) {
  CheckPrompt(prompt.size());
  const UssInput in = PrepareUssInput(y, audio_);
  const grad::Tensor<float> p({1, prompt.size()},
                              std::vector<float>(prompt.begin(), prompt.end()));
  Forward(in, p, zero_target_);
  dsp::Waveform out;
  out.sample_rate = y.sample_rate;
  out.samples = net_.graph.value(net_.estimate).values();
  return out;
}

std::vector<float> UssModel::LastMask() const {
  return net_.graph.value(net_.mask).values();
}

float UssModel::Forward(const UssInput& input,
                        const grad::Tensor<float>& prompt,
                        const grad::Tensor<float>& target) {
  CheckPrompt(prompt.size());
  if (target.size() != audio_.clip_length) {
    throw Error(Errc::kLengthMismatch, "target length differs from clip");
  }
  grad::Bindings<float> b;
  BindParams<float>(
      net_.params,
      [&](const std::string& n) -> const grad::Tensor<float>& {
        return ckpt_.Get(n);
      },
      b);
  b.Bind(net_.features, input.features);
  b.Bind(net_.real, input.real);
  b.Bind(net_.imag, input.imag);
  b.Bind(net_.prompt, prompt);
  b.Bind(net_.target, target);
  return net_.graph.Evaluate(b)[0];
}

void UssModel::Backward(float scale, std::vector<float>* prompt_grad) {
  const std::map<NodeId, grad::Tensor<float>> grads =
      net_.graph.Backpropagate(grad::Tensor<float>({1}, {1.0f}));
  AccumulateParams(net_.params, grads, ckpt_, scale);
  if (prompt_grad != nullptr) {
    auto it = grads.find(net_.prompt);
    if (it == grads.end()) {
      throw Error(Errc::kInvalidArgument, "prompt is not trainable");
    }
    prompt_grad->resize(it->second.size(), 0.0f);
    for (std::size_t i = 0; i < it->second.size(); ++i) {
      (*prompt_grad)[i] += scale * it->second[i];
    }
  }
}

void UssModel::SetParamsTrainable(bool trainable) {
  params_trainable_ = trainable;
  for (const auto& [name, id] : net_.params) {
    net_.graph.SetTrainable(id, trainable);
    ckpt_.Mutable(name).set_requires_grad(trainable);
  }
}

void UssModel::SetPromptTrainable(bool trainable) {
  prompt_trainable_ = trainable;
  net_.graph.SetTrainable(net_.prompt, trainable);
}

}  // namespace aptsep::models
