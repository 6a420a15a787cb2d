// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef APTSEP_MODELS_MODELS_H_
#define APTSEP_MODELS_MODELS_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aptsep/dsp/waveform.h"
#include "aptsep/grad/graph.h"
#include "aptsep/models/checkpoint.h"

namespace aptsep::models {

struct AudioConfig {
  int sample_rate = 8000;
  std::size_t clip_length = 8000;
  std::size_t n_fft = 256;
  std::size_t hop = 64;
  std::size_t n_mels = 32;

  std::size_t frames() const { return 1 + clip_length / hop; }
  std::size_t bins() const { return n_fft / 2 + 1; }
};

struct SedConfig {
  std::size_t embed_dim = 64;
  std::array<std::size_t, 3> channels{16, 32, 64};
  std::vector<int> class_ids;  // classifier rows, in order
};

struct UssConfig {
  std::size_t embed_dim = 64;
  std::array<std::size_t, 3> channels{8, 16, 32};
};

using ParamShapes = std::vector<std::pair<std::string, grad::Shape>>;
ParamShapes SedParamShapes(const SedConfig& config);
ParamShapes UssParamShapes(const UssConfig& config);

// Seeded uniform He fan-in initialization; FiLM generators start at the
// identity modulation (scale 1, shift 0) with a damped weight range.
Checkpoint InitSed(const SedConfig& config, const AudioConfig& audio,
                   std::uint64_t seed);
Checkpoint InitUss(const UssConfig& config, const AudioConfig& audio,
                   std::uint64_t seed);

void ParseSedCheckpoint(const Checkpoint& ckpt, SedConfig* config,
                        AudioConfig* audio);
void ParseUssCheckpoint(const Checkpoint& ckpt, UssConfig* config,
                        AudioConfig* audio);

// [2, frames, n_mels]: per-utterance standardized log-mel and a mel-index
// coordinate plane.
grad::Tensor<float> SedFeatures(const dsp::Waveform& x,
                                const AudioConfig& audio);

// Mixture STFT planes [frames, bins] and separator features [2, frames,
// bins]: log1p magnitude and a frequency coordinate plane.
struct UssInput {
  grad::Tensor<float> features;
  grad::Tensor<float> real;
  grad::Tensor<float> imag;
};
UssInput PrepareUssInput(const dsp::Waveform& y, const AudioConfig& audio);

template <typename T>
struct SedNet {
  SedNet(const SedConfig& config, const AudioConfig& audio);

  grad::Graph<T> graph;
  std::vector<std::pair<std::string, grad::NodeId>> params;
  grad::NodeId input = 0;
  grad::NodeId label = 0;
  grad::NodeId embedding = 0;
  grad::NodeId logits = 0;
  grad::NodeId loss = 0;
};

template <typename T>
struct UssNet {
  UssNet(const UssConfig& config, const AudioConfig& audio);

  grad::Graph<T> graph;
  std::vector<std::pair<std::string, grad::NodeId>> params;
  grad::NodeId features = 0;
  grad::NodeId real = 0;
  grad::NodeId imag = 0;
  grad::NodeId prompt = 0;  // [1, D]
  grad::NodeId target = 0;
  grad::NodeId mask = 0;
  grad::NodeId estimate = 0;
  grad::NodeId loss = 0;
};

template <typename T, typename Lookup>
void BindParams(const std::vector<std::pair<std::string, grad::NodeId>>& params,
                Lookup&& lookup, grad::Bindings<T>& bindings) {
  for (const auto& [name, id] : params) bindings.Bind(id, lookup(name));
}

class SedModel {
 public:
  explicit SedModel(Checkpoint ckpt);

  const Checkpoint& checkpoint() const { return ckpt_; }
  Checkpoint& mutable_checkpoint() { return ckpt_; }
  const SedConfig& config() const { return config_; }
  const AudioConfig& audio() const { return audio_; }
  std::size_t embed_dim() const { return config_.embed_dim; }

  // Throws kLengthMismatch unless length(x) equals the clip length.
  std::vector<float> Embed(const dsp::Waveform& x);
  std::vector<float> EmbedFeatures(const grad::Tensor<float>& features);
  // Predicted class id.
  int Classify(const grad::Tensor<float>& features);

  // Cross-entropy for the classifier row of `class_id`; with `backward`,
  // accumulates scale * dloss/dparam into every parameter that has
  // requires_grad set.
  float Loss(const grad::Tensor<float>& features, int class_id, bool backward,
             float scale);
  void SetParamsTrainable(bool trainable);

 private:
  const grad::Tensor<float>& Run(const grad::Tensor<float>& features,
                                 int class_id);

  Checkpoint ckpt_;
  SedConfig config_;
  AudioConfig audio_;
  SedNet<float> net_;
  grad::Tensor<float> label_;
};

class UssModel {
 public:
  explicit UssModel(Checkpoint ckpt);

  const Checkpoint& checkpoint() const { return ckpt_; }
  Checkpoint& mutable_checkpoint() { return ckpt_; }
  const UssConfig& config() const { return config_; }
  const AudioConfig& audio() const { return audio_; }
  std::size_t embed_dim() const { return config_.embed_dim; }

  // Throws kLengthMismatch / kDimensionMismatch.
  dsp::Waveform Separate(const dsp::Waveform& y, std::span<const float> prompt);
  // Mask of the most recent forward pass, [frames, bins].
  std::vector<float> LastMask() const;

  // mean |separate(y, prompt) - target|.
  float Forward(const UssInput& input, const grad::Tensor<float>& prompt,
                const grad::Tensor<float>& target);
  // After Forward: accumulates scale * dloss/dparam into parameters with
  // requires_grad set, and scale * dloss/dprompt into prompt_grad when
  // non-null.
  void Backward(float scale, std::vector<float>* prompt_grad);

  void SetParamsTrainable(bool trainable);
  void SetPromptTrainable(bool trainable);

 private:
  void CheckPrompt(std::size_t size) const;

  Checkpoint ckpt_;
  UssConfig config_;
  AudioConfig audio_;
  UssNet<float> net_;
  grad::Tensor<float> zero_target_;
  bool params_trainable_ = false;
  bool prompt_trainable_ = false;
};

}  // namespace aptsep::models

#endif  // APTSEP_MODELS_MODELS_H_
