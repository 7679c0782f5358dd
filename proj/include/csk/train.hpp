#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csk/conv.hpp"
#include "csk/kernel.hpp"

namespace csk {

// Stack of steerable convolutions with activations between them.
struct CsCnnConfig {
  Signature sig{2, 0};
  std::vector<int> kernel_grid{5, 5};
  std::vector<int> channels{1, 1};  // c_0 -> c_1 -> ... -> c_L, one conv per arrow
  int depth = 2;
  int width = 8;
  HeadMode head = HeadMode::blade;
  bool mask = true;
  bool bias = false;      // per-output-channel constant on the scalar grade
  bool residual = false;  // adds the input to the output, needs c_0 == c_L
  Padding padding = Padding::circular;
  std::uint64_t seed = 0;
};

void validate(const CsCnnConfig& config);
KernelConfig layer_kernel_config(const CsCnnConfig& config, std::size_t layer);

struct CsCnn {
  CsCnnConfig config;
  std::vector<KernelParams> kernels;
  std::vector<std::vector<double>> biases;  // empty vectors when bias is off
};

CsCnn init_cscnn(const CsCnnConfig& config);
std::vector<Layer> build_layers(const CsCnn& model);
MultivectorField cscnn_forward(const CsCnn& model, const MultivectorField& f);

// Tensors named "<layer>.<kernel tensor>" and "<layer>.bias".
std::vector<ParamRef> param_refs(CsCnn& model);

struct Sample {
  MultivectorField input;
  MultivectorField target;
};

// Mean squared error over every coefficient of every sample.
double loss_value(const CsCnn& model, std::span<const Sample> batch);

struct LossGradient {
  double loss = 0.0;
  // Aligned with param_refs(model); empty for frozen tensors.
  std::vector<std::vector<double>> grads;
};

LossGradient loss_and_gradient(CsCnn& model, std::span<const Sample> batch);

// Per-coefficient standard normal noise, blurred circularly by a separable
// Gaussian of width `smoothness` cells whose taps satisfy sum w^2 = 1.
MultivectorField synth_field(const Signature& sig, const std::vector<int>& sizes, int channels,
                             double smoothness, Rng& rng);

// Central difference (f0(x + e_i) - f0(x - e_i)) / 2 of the scalar grade,
// written into the e_i coefficient; periodic.
MultivectorField gradient_target(const MultivectorField& f);

enum class TaskKind { teacher_student, gradient_operator };
TaskKind parse_task_kind(const std::string& text);
std::string to_string(TaskKind kind);

struct ToyTask {
  TaskKind kind = TaskKind::teacher_student;
  Signature sig{2, 0};
  std::vector<int> sizes{16, 16};
  int train_size = 16;
  int test_size = 4;
  double smoothness = 1.0;
  std::uint64_t seed = 0;
  // teacher_student only: teacher architecture (seed replaced by an independent one)
  CsCnnConfig teacher;
};

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

Dataset make_dataset(const ToyTask& task);

struct TrainOptions {
  int steps = 500;
  double lr = 0.05;
  bool cosine = true;
  int batch = 4;
  int eval_every = 50;
  double min_width = 0.05;  // shell widths are clamped to at least this after each step
};

struct TrainRecord {
  int step = 0;
  double loss = 0.0;                // batch loss at this step (before the update)
  double equivariance_error = -1;  // negative when not measured
};

struct TrainReport {
  std::vector<TrainRecord> records;
  double initial_test_loss = 0.0;
  double final_test_loss = 0.0;
  double initial_relative_mse = 0.0;  // test MSE / test target variance
  double final_relative_mse = 0.0;
  double max_equivariance_error = 0.0;
  bool diverged = false;
  CsCnn model;
};

TrainReport train_loop(const ToyTask& task, const CsCnnConfig& model_config,
                       const TrainOptions& options);

double relative_mse(const CsCnn& model, std::span<const Sample> samples);

// Task, student architecture and optimizer settings for one training run.
struct TrainSetup {
  ToyTask task;
  CsCnnConfig model;
  TrainOptions options;
};

// Tuned defaults, widths clamped at 0.3 in both. teacher_student: 1-layer
// 5x5 teacher (c = 2, network width 8), student of network width 16, lr 1.0,
// 500 steps. gradient_operator: 3x3 kernels, depth 3, lr 0.5, 6000 steps.
TrainSetup train_preset(TaskKind kind, std::uint64_t seed);

nlohmann::json to_json(const CsCnnConfig& config);
CsCnnConfig cscnn_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainRecord& r);
nlohmann::json cscnn_manifest(const CsCnn& model);

// {"version": 1, "task": {...}, "model": {...}, "train": {...}}; keys missing
// from j keep their value in `base`, unknown keys throw.
nlohmann::json to_json(const TrainSetup& setup);
TrainSetup train_setup_from_json(const nlohmann::json& j, const TrainSetup& base);

}  // namespace csk
