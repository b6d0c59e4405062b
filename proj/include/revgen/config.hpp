// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0
//
// One JSON document drives every subcommand. Unknown keys, wrong types and
// out-of-range values are rejected against the published schema
// (schema/config.schema.json mirrors the checks implemented here).

#pragma once

#include <string>

#include "revgen/encoder.hpp"
#include "revgen/flow.hpp"
#include "revgen/sampler.hpp"

namespace revgen {

struct RunConfig {
  uint64_t seed = 0;

  struct Dataset {
    int n_objects = 64;
    int n_views = 16;
    int image_size = 64;
    int resolution = 16;
  } dataset;

  EncoderConfig encoder;
  EncoderTrainConfig encoder_train;
  int lora_rank = 0;        // 0 trains the base weights
  double lora_alpha = 128;
  double lora_dropout = 0;

  FlowConfig flow;
  FlowTrainConfig ss_train;
  FlowTrainConfig slat_train;
  SLATCodecConfig codec;
  CodecTrainConfig codec_train;

  SamplerConfig sampler;

  struct Paths {
    std::string dataset_dir = "data/toy";
    std::string eval_dataset_dir = "data/toy_eval";
    std::string encoder_ckpt = "ckpts/encoder";
    std::string ss_ckpt = "ckpts/ss";
    std::string slat_ckpt = "ckpts/slat";
  } paths;

  // JSON round-trip; to_json emits every field so runs are self-describing.
  std::string to_json() const;
  static RunConfig from_json_text(const std::string& text);
  static RunConfig load(const std::string& path);  // empty path -> defaults
  void save(const std::string& path) const;
};

// Root directory for run records: $REVGEN_RUNS or "runs".
std::string runs_root();

}  // namespace revgen
