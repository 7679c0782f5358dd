#include <doctest.h>

#include <cmath>

#include "csk/train.hpp"
#include "csk/verify.hpp"

using namespace csk;

namespace {

CsCnnConfig tiny_model(const Signature& sig) {
  CsCnnConfig c;
  c.sig = sig;
  c.kernel_grid = std::vector<int>(sig.dim(), 3);
  c.channels = {1, 2, 1};
  c.depth = 2;
  c.width = 3;
  c.seed = 4;
  return c;
}

std::vector<Sample> tiny_batch(const Signature& sig, std::vector<int> sizes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Sample> b;
  for (int s = 0; s < 2; ++s) {
    b.push_back({synth_field(sig, sizes, 1, 1.0, rng), synth_field(sig, sizes, 1, 1.0, rng)});
  }
  return b;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("raw noise has unit variance and zero mean") {
    Rng rng(1);
    const MultivectorField f = synth_field(Signature(2, 0), {64, 64}, 1, 0.0, rng);
    for (BladeMask a = 0; a < 4; ++a) {
      double mean = 0.0, sq = 0.0;
      const double n = static_cast<double>(f.points());
      for (std::size_t p = 0; p < f.points(); ++p) {
        mean += f.at(0, p, a);
        sq += f.at(0, p, a) * f.at(0, p, a);
      }
      mean /= n;
      const double var = sq / n - mean * mean;
      CHECK(std::abs(var - 1.0) < 0.1);
      CHECK(std::abs(mean) < 3.0 * std::sqrt(var / n));
    }
  }

  TEST_CASE("smoothed noise keeps unit variance and is seeded") {
    Rng a(2), b(2);
    const MultivectorField f = synth_field(Signature(1, 1), {64, 64}, 2, 2.0, a);
    const MultivectorField g = synth_field(Signature(1, 1), {64, 64}, 2, 2.0, b);
    CHECK(f.data == g.data);
    double sq = 0.0;
    for (double v : f.data) sq += v * v;
    CHECK(std::abs(sq / f.data.size() - 1.0) < 0.25);
    // neighbouring cells correlate after blurring
    double corr = 0.0;
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) corr += f.at(0, y * 64 + x, 0) * f.at(0, y * 64 + (x + 1) % 64, 0);
    }
    CHECK(corr / 4096.0 > 0.5);
    Rng c(1);
    CHECK_THROWS_AS(synth_field(Signature(2, 0), {8, 8}, 1, -1.0, c), Error);
  }

  TEST_CASE("gradient target is the periodic central difference") {
    const Signature sig(2, 0);
    MultivectorField f = make_field(sig, 1, {4, 5});
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 5; ++x) f.at(0, y * 5 + x, 0) = y * y + 10.0 * x;
      f.at(0, y * 5, 3) = 7.0;  // non-scalar input is ignored
    }
    const MultivectorField g = gradient_target(f);
    CHECK(g.at(0, 1 * 5 + 2, 1) == doctest::Approx(0.5 * (4.0 - 0.0)));
    CHECK(g.at(0, 1 * 5 + 2, 2) == doctest::Approx(10.0));
    CHECK(g.at(0, 0, 1) == doctest::Approx(0.5 * (1.0 - 9.0)));  // wraps
    CHECK(g.at(0, 0, 2) == doctest::Approx(0.5 * (10.0 - 40.0)));
    CHECK(g.at(0, 7, 0) == 0.0);
    CHECK(g.at(0, 7, 3) == 0.0);
  }

  TEST_CASE("loss of the autodiff graph equals the forward loss") {
    for (const Signature& sig : {Signature(2, 0), Signature(1, 2)}) {
      CsCnnConfig cfg = tiny_model(sig);
      cfg.bias = true;
      cfg.residual = true;
      CsCnn m = init_cscnn(cfg);
      const auto batch = tiny_batch(sig, std::vector<int>(sig.dim(), sig.dim() == 2 ? 6 : 4), 3);
      const LossGradient lg = loss_and_gradient(m, batch);
      CHECK(lg.loss == doctest::Approx(loss_value(m, batch)).epsilon(1e-12));
      CHECK(lg.grads.size() == param_refs(m).size());
    }
  }

  TEST_CASE("reverse-mode gradients match finite differences") {
    CsCnnConfig cfg = tiny_model(Signature(1, 1));
    cfg.bias = true;
    CsCnn m = init_cscnn(cfg);
    const auto batch = tiny_batch(cfg.sig, {5, 5}, 5);
    for (const GradientCheck& g : gradient_check(m, batch)) {
      CAPTURE(g.tensor);
      CHECK(g.max_rel < 1e-5);
      CHECK(g.max_abs < 1e-8);
    }
  }

  TEST_CASE("frozen head under fixed_one has no gradient") {
    CsCnnConfig cfg = tiny_model(Signature(2, 0));
    cfg.head = HeadMode::fixed_one;
    CsCnn m = init_cscnn(cfg);
    const auto batch = tiny_batch(cfg.sig, {5, 5}, 6);
    const LossGradient lg = loss_and_gradient(m, batch);
    const auto refs = param_refs(m);
    for (std::size_t r = 0; r < refs.size(); ++r) {
      if (!refs[r].trainable) CHECK(lg.grads[r].empty());
    }
  }

  TEST_CASE("loss is non-increasing for small steps on a single layer") {
    ToyTask task;
    task.kind = TaskKind::teacher_student;
    task.sizes = {8, 8};
    task.train_size = 4;
    task.test_size = 1;
    task.seed = 3;
    task.teacher.channels = {1, 1};
    task.teacher.kernel_grid = {3, 3};
    CsCnnConfig student = task.teacher;
    student.seed = 9;
    TrainOptions o;
    o.steps = 15;
    o.lr = 1e-3;
    o.cosine = false;
    o.batch = 4;  // full batch, same data every step
    o.eval_every = 0;
    const TrainReport r = train_loop(task, student, o);
    for (std::size_t i = 1; i < r.records.size(); ++i) CHECK(r.records[i].loss <= r.records[i - 1].loss);
    CHECK(r.records.back().loss < r.records.front().loss);
  }

  TEST_CASE("zero steps reproduce the initial evaluation") {
    TrainSetup s = train_preset(TaskKind::teacher_student, 2);
    s.options.steps = 0;
    const TrainReport r = train_loop(s.task, s.model, s.options);
    CHECK(r.records.size() == 1);
    CHECK(r.final_test_loss == r.initial_test_loss);
    CHECK(r.final_relative_mse == r.initial_relative_mse);
    const CsCnn init = init_cscnn(s.model);
    CHECK(cscnn_manifest(init) == cscnn_manifest(r.model));
  }

  TEST_CASE("short training run is deterministic and stays equivariant") {
    TrainSetup s = train_preset(TaskKind::teacher_student, 5);
    s.task.sizes = {8, 8};
    s.task.train_size = 4;
    s.options.steps = 6;
    s.options.eval_every = 2;
    const TrainReport a = train_loop(s.task, s.model, s.options);
    const TrainReport b = train_loop(s.task, s.model, s.options);
    REQUIRE(a.records.size() == 7);
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      CHECK(a.records[i].loss == b.records[i].loss);
      const bool checkpoint = i % 2 == 0 || i == 3;
      CHECK((a.records[i].equivariance_error >= 0.0) == checkpoint);
    }
    CHECK(a.max_equivariance_error < 1e-6);
    CHECK(cscnn_manifest(a.model) == cscnn_manifest(b.model));
    CHECK(to_json(a.records[1]).at("equivariance_error").is_null());
  }

  TEST_CASE("divergence is reported, not raised") {
    TrainSetup s = train_preset(TaskKind::teacher_student, 1);
    s.task.sizes = {8, 8};
    s.options.lr = 1e6;
    s.options.steps = 10;
    TrainReport r;
    CHECK_NOTHROW(r = train_loop(s.task, s.model, s.options));
    CHECK(r.diverged);
    CHECK(std::isnan(r.final_test_loss));
  }

  TEST_CASE("datasets") {
    TrainSetup s = train_preset(TaskKind::gradient_operator, 3);
    s.task.sizes = {8, 8};
    const Dataset d = make_dataset(s.task);
    CHECK(d.train.size() == 16);
    CHECK(d.test.size() == 4);
    for (std::size_t p = 0; p < d.train[0].input.points(); ++p) {
      for (BladeMask a = 1; a < 4; ++a) CHECK(d.train[0].input.at(0, p, a) == 0.0);
    }
    CHECK(d.train[0].target.data == gradient_target(d.train[0].input).data);
    TrainSetup t = train_preset(TaskKind::teacher_student, 3);
    t.task.sizes = {8, 8};
    const Dataset e = make_dataset(t.task);
    CHECK(e.train[0].input.channels == 2);
    CHECK(e.train[0].target.channels == 2);
    CHECK(make_dataset(t.task).train[3].target.data == e.train[3].target.data);
  }

  TEST_CASE("config json round trips and rejects unknown keys") {
    CsCnnConfig c = tiny_model(Signature(1, 2));
    c.head = HeadMode::grade;
    c.padding = Padding::zero;
    const CsCnnConfig back = cscnn_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    auto j = to_json(c);
    j["colour"] = "red";
    CHECK_THROWS_AS(cscnn_config_from_json(j), Error);

    const TrainSetup base = train_preset(TaskKind::gradient_operator, 7);
    const TrainSetup same = train_setup_from_json(to_json(base), train_preset(TaskKind::teacher_student, 0));
    CHECK(to_json(same) == to_json(base));
    const TrainSetup over = train_setup_from_json({{"version", 1}, {"train", {{"lr", 0.125}}}}, base);
    CHECK(over.options.lr == 0.125);
    CHECK(over.options.steps == base.options.steps);
    CHECK_THROWS_AS(train_setup_from_json({{"train", {{"lr", 0.1}}}}, base), Error);
    CHECK_THROWS_AS(train_setup_from_json({{"version", 1}, {"optimizer", "adam"}}, base), Error);
    CHECK_THROWS_AS(train_setup_from_json({{"version", 1}, {"train", {{"momentum", 0.9}}}}, base), Error);
    CHECK(parse_task_kind("gradient_operator") == TaskKind::gradient_operator);
    CHECK_THROWS_AS(parse_task_kind("regression"), Error);
  }

  TEST_CASE("model validation") {
    CsCnnConfig c = tiny_model(Signature(2, 0));
    c.channels = {1};
    CHECK_THROWS_AS(validate(c), Error);
    c = tiny_model(Signature(2, 0));
    c.residual = true;
    c.channels = {1, 2};
    CHECK_THROWS_AS(validate(c), Error);
  }
}
