#include <omp.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "csk/io.hpp"
#include "csk/train.hpp"
#include "csk/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string sig;
  std::string grid;
  std::string channels;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string head;
  std::string config;
  std::optional<int> steps;
  std::optional<double> lr;
};

std::vector<int> parse_ints(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      throw UsageError("expected comma-separated integers: '" + text + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("empty integer list");
  return out;
}

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object() || !j.contains("version") || j.at("version") != 1) {
    throw UsageError("config needs \"version\": 1");
  }
  return j;
}

fs::path out_dir(const Flags& f) {
  const fs::path dir = f.out.empty() ? fs::path(".") : fs::path(f.out);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw csk::Error("cannot write '" + path.string() + "'");
  out << text;
}

void cap_threads() {
  const char* env = std::getenv("CSK_THREADS");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) throw UsageError("CSK_THREADS must be a positive integer");
  omp_set_num_threads(static_cast<int>(std::min<long>(n, omp_get_max_threads())));
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--sig", f.sig, "signature p,q");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--out", f.out, "output directory");
}

void add_model(CLI::App* cmd, Flags& f) {
  cmd->add_option("--grid", f.grid, "kernel sampling grid X1,..,Xd");
  cmd->add_option("--channels", f.channels, "cin,cout");
  cmd->add_option("--head-weights", f.head, "blade, grade or fixed_one");
  cmd->add_option("--config", f.config, "JSON config file");
}

csk::HeadMode parse_public_head(const std::string& text) {
  if (text != "blade" && text != "grade" && text != "fixed_one") {
    throw UsageError("--head-weights must be blade, grade or fixed_one");
  }
  return csk::parse_head_mode(text);
}

// cayley ---------------------------------------------------------------------

// Blades by grade, then lexicographically by axis indices: 1, e1, e2, e3, e12, e13, ...
std::vector<csk::BladeMask> display_order(const csk::Signature& sig) {
  std::vector<csk::BladeMask> order;
  for (csk::BladeMask a = 0; a < sig.algebra_dim(); ++a) order.push_back(a);
  auto axes = [](csk::BladeMask a) {
    std::vector<int> v;
    for (int i = 0; a >> i; ++i) {
      if ((a >> i) & 1u) v.push_back(i);
    }
    return v;
  };
  std::sort(order.begin(), order.end(), [&](csk::BladeMask a, csk::BladeMask b) {
    if (csk::blade_grade(a) != csk::blade_grade(b)) return csk::blade_grade(a) < csk::blade_grade(b);
    return axes(a) < axes(b);
  });
  return order;
}

std::string cayley_csv(const csk::Signature& sig) {
  const auto table = csk::cayley_table(sig);
  const auto order = display_order(sig);
  std::ostringstream os;
  os << "A,B";
  for (csk::BladeMask c : order) os << ',' << csk::blade_name(c);
  os << '\n';
  for (csk::BladeMask a : order) {
    for (csk::BladeMask b : order) {
      os << csk::blade_name(a) << ',' << csk::blade_name(b);
      for (csk::BladeMask c : order) os << ',' << (*table)(c, a, b);
      os << '\n';
    }
  }
  return os.str();
}

int cmd_cayley(const Flags& f) {
  if (f.sig.empty()) throw UsageError("cayley needs --sig p,q");
  const csk::Signature sig = csk::parse_signature(f.sig);
  const std::string csv = cayley_csv(sig);
  if (f.out.empty()) {
    std::cout << csv;
  } else {
    const fs::path path = out_dir(f) / ("cayley_" + std::to_string(sig.p) + "_" +
                                        std::to_string(sig.q) + ".csv");
    write_text(path, csv);
    std::cout << path.string() << '\n';
  }
  return 0;
}

// kernel-gen -----------------------------------------------------------------

// Keys of `user` must already exist in `base`.
void merge_known(json& base, const json& user, const std::string& what) {
  if (!user.is_object()) throw UsageError(what + " must be an object");
  for (const auto& [key, value] : user.items()) {
    if (!base.contains(key)) throw UsageError("unknown " + what + " key '" + key + "'");
    base[key] = value;
  }
}

csk::KernelConfig kernel_config(const Flags& f) {
  csk::KernelConfig c;
  c.grid = {5, 5};
  const json cfg = read_config(f.config);
  json merged = csk::to_json(c);
  for (const auto& [key, value] : cfg.items()) {
    if (key == "version") continue;
    if (key != "kernel") throw UsageError("unknown config key '" + key + "'");
    merge_known(merged, value, "kernel");
  }
  if (!f.sig.empty()) {
    const csk::Signature sig = csk::parse_signature(f.sig);
    merged["signature"] = {sig.p, sig.q};
    if (merged["grid"].size() != static_cast<std::size_t>(sig.dim())) {
      merged["grid"] = std::vector<int>(sig.dim(), 5);
    }
  }
  if (!f.grid.empty()) merged["grid"] = parse_ints(f.grid);
  if (!f.channels.empty()) merged["channels"] = parse_ints(f.channels);
  if (!f.head.empty()) merged["head_weights"] = csk::to_string(parse_public_head(f.head));
  if (f.seed) merged["seed"] = *f.seed;
  if (merged["channels"].size() != 2) throw UsageError("--channels needs cin,cout");
  try {
    return csk::kernel_config_from_json(merged);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

int cmd_kernel_gen(const Flags& f) {
  const csk::KernelConfig config = kernel_config(f);
  const csk::KernelParams params = csk::init_kernel(config);
  const csk::SteerableKernel k = csk::generate_kernel(params);
  const fs::path dir = out_dir(f);

  csk::write_blob(dir / "kernel.bin", k);
  csk::write_npy(dir / "kernel.npy", k);
  csk::write_csv(dir / "kernel.csv", k);
  write_text(dir / "manifest.json", csk::kernel_manifest(params).dump(2) + "\n");
  fs::create_directories(dir / "pgm");
  const std::size_t images = csk::write_pgm_blocks(dir / "pgm", k);

  // steerability self-check at off-grid points
  csk::Rng rng(config.seed + 7);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  const csk::KernelFn fn = [&](std::span<const double> v) { return csk::evaluate_kernel_at(params, v); };
  double worst = 0.0;
  constexpr int kElements = 20, kPoints = 5;
  for (int s = 0; s < kElements; ++s) {
    const csk::GroupElement g = csk::sample_group_element(config.sig, rng);
    std::vector<std::vector<double>> pts(kPoints, std::vector<double>(config.sig.dim()));
    for (auto& p : pts) {
      for (double& x : p) x = coord(rng);
    }
    worst = std::max(worst, csk::steerability_error(fn, g, config.c_in, config.c_out, pts));
  }
  constexpr double kTol = 1e-9;
  const bool pass = worst < kTol;
  const json summary{{"kernel", (dir / "kernel.bin").string()},
                     {"shape", {k.rows(), k.cols(), k.sizes}},
                     {"images", images},
                     {"self_check", {{"samples", kElements * kPoints},
                                     {"max_err", worst},
                                     {"tolerance", kTol},
                                     {"pass", pass}}}};
  std::cout << summary.dump() << '\n';
  return pass ? 0 : kExitFail;
}

// verify ---------------------------------------------------------------------

int cmd_verify(const Flags& f, std::string suite) {
  if (suite.empty()) throw UsageError("verify needs a suite name");
  std::vector<std::string> suites;
  if (suite == "all") {
    suites = csk::kSuites;
  } else if (std::find(csk::kSuites.begin(), csk::kSuites.end(), suite) != csk::kSuites.end()) {
    suites = {suite};
  } else {
    throw UsageError("unknown suite '" + suite + "'");
  }
  const csk::Signature sig = f.sig.empty() ? csk::Signature(2, 0) : csk::parse_signature(f.sig);
  const std::uint64_t seed = f.seed.value_or(0);

  json reports = json::array();
  bool pass = true;
  for (const auto& s : suites) {
    for (const auto& r : csk::run_suite(s, sig, seed)) {
      json j = csk::to_json(r);
      j["suite"] = s;
      reports.push_back(j);
      pass = pass && r.pass;
    }
  }
  std::cout << reports.dump(2) << '\n';
  if (!f.out.empty()) write_text(out_dir(f) / "verify.json", reports.dump(2) + "\n");
  return pass ? 0 : kExitFail;
}

// spectrum -------------------------------------------------------------------

int cmd_spectrum(const Flags& f) {
  if (!f.sig.empty() && !(csk::parse_signature(f.sig) == csk::Signature(2, 0))) {
    throw UsageError("spectrum is defined for signature 2,0 only");
  }
  Flags g = f;
  g.sig = "2,0";
  if (g.grid.empty()) g.grid = "9,9";
  const csk::KernelParams params = csk::init_kernel(kernel_config(g));
  const csk::SteerableKernel k = csk::generate_kernel(params);
  json pairs = json::array();
  for (int gi = 0; gi <= 2; ++gi) {
    for (int go = 0; go <= 2; ++go) {
      const auto spec = csk::angular_spectrum(k, gi, go);
      std::vector<double> fractions;
      for (int m = 0; m <= 4; ++m) fractions.push_back(csk::energy_fraction(spec, m));
      pairs.push_back({{"grade_in", gi},
                       {"grade_out", go},
                       {"fraction_m0_to_m4", fractions},
                       {"dominant", csk::dominant_frequency(spec)}});
    }
  }
  std::cout << pairs.dump(2) << '\n';
  if (!f.out.empty()) write_text(out_dir(f) / "spectrum.json", pairs.dump(2) + "\n");
  return 0;
}

// train ----------------------------------------------------------------------

csk::TrainSetup train_setup(const Flags& f, const std::string& task) {
  csk::TaskKind kind;
  try {
    kind = csk::parse_task_kind(task);
  } catch (const csk::Error& e) {
    throw UsageError(e.what());
  }
  csk::TrainSetup s = csk::train_preset(kind, f.seed.value_or(0));
  try {
    if (!f.config.empty()) s = csk::train_setup_from_json(read_config(f.config), s);
    if (f.seed) {
      s.task.seed = *f.seed;
      s.model.seed = *f.seed + 1;
    }
    if (!f.sig.empty()) {
      s.task.sig = csk::parse_signature(f.sig);
      s.model.sig = s.task.sig;
      s.task.teacher.sig = s.task.sig;
      const auto d = static_cast<std::size_t>(s.task.sig.dim());
      if (s.task.sizes.size() != d) s.task.sizes.assign(d, d == 2 ? 16 : 8);
      if (s.model.kernel_grid.size() != d) s.model.kernel_grid.assign(d, s.model.kernel_grid[0]);
      if (s.task.teacher.kernel_grid.size() != d) {
        s.task.teacher.kernel_grid.assign(d, s.task.teacher.kernel_grid[0]);
      }
    }
    if (!f.grid.empty()) s.model.kernel_grid = parse_ints(f.grid);
    if (!f.channels.empty()) {
      const auto c = parse_ints(f.channels);
      if (c.size() != 2) throw UsageError("--channels needs cin,cout");
      s.model.channels = c;
      if (kind == csk::TaskKind::teacher_student) s.task.teacher.channels = c;
    }
    if (!f.head.empty()) s.model.head = parse_public_head(f.head);
    if (f.steps) s.options.steps = *f.steps;
    if (f.lr) s.options.lr = *f.lr;
    csk::validate(s.model);
    csk::validate(s.task.teacher);
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  return s;
}

int cmd_train(const Flags& f, const std::string& task) {
  const csk::TrainSetup s = train_setup(f, task);
  const csk::TrainReport r = csk::train_loop(s.task, s.model, s.options);
  const fs::path dir = out_dir(f);

  std::string lines;
  for (const auto& rec : r.records) lines += csk::to_json(rec).dump() + "\n";
  write_text(dir / "report.jsonl", lines);
  write_text(dir / "model.json", csk::cscnn_manifest(r.model).dump(2) + "\n");
  write_text(dir / "config.json", csk::to_json(s).dump(2) + "\n");

  const json summary{{"task", csk::to_string(s.task.kind)},
                     {"steps", s.options.steps},
                     {"initial_test_loss", r.initial_test_loss},
                     {"final_test_loss", r.final_test_loss},
                     {"initial_relative_mse", r.initial_relative_mse},
                     {"final_relative_mse", r.final_relative_mse},
                     {"max_equivariance_error", r.max_equivariance_error},
                     {"diverged", r.diverged}};
  std::cout << summary.dump() << '\n';
  return r.diverged ? kExitFail : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clifford-steerable kernels and convolutions"};
  app.require_subcommand(1);
  Flags f;
  std::string suite_pos, suite_opt, task = "teacher_student";

  auto* cayley = app.add_subcommand("cayley", "dump the Cayley table as CSV");
  add_common(cayley, f);

  auto* kgen = app.add_subcommand("kernel-gen", "generate a steerable kernel and export it");
  add_common(kgen, f);
  add_model(kgen, f);

  auto* verify = app.add_subcommand("verify", "run a verification suite");
  add_common(verify, f);
  verify->add_option("name", suite_pos, "suite name or 'all'");
  verify->add_option("--suite", suite_opt, "suite name or 'all'");

  auto* spectrum = app.add_subcommand("spectrum", "angular spectrum of a generated (2,0) kernel");
  add_common(spectrum, f);
  add_model(spectrum, f);

  auto* train = app.add_subcommand("train", "train a CS-CNN on a toy task");
  add_common(train, f);
  add_model(train, f);
  train->add_option("--task", task, "teacher_student or gradient_operator");
  train->add_option("--steps", f.steps, "gradient steps");
  train->add_option("--lr", f.lr, "learning rate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    cap_threads();
    if (*cayley) return cmd_cayley(f);
    if (*kgen) return cmd_kernel_gen(f);
    if (*verify) return cmd_verify(f, suite_opt.empty() ? suite_pos : suite_opt);
    if (*spectrum) return cmd_spectrum(f);
    if (*train) return cmd_train(f, task);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const csk::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFail;
  }
  return kExitUsage;
}
