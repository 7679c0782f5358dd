#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "csk/algebra.hpp"
#include "oracle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "csk_cli_test";

int run(const std::string& args, const std::string& stdout_name = "stdout.txt",
        const std::string& env = "") {
  fs::create_directories(kRoot);
  const std::string cmd = env + " " + CSK_BIN + " " + args + " > " + (kRoot / stdout_name).string() +
                          " 2> " + (kRoot / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

csk::BladeMask mask_of(const std::string& name) {
  if (name == "1") return 0;
  csk::BladeMask m = 0;
  for (std::size_t i = 1; i < name.size(); ++i) m |= csk::BladeMask{1} << (name[i] - '1');
  return m;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("cayley csv re-parses to the in-memory table") {
    for (const std::string sig : {"1,2", "1,0", "2,2"}) {
      REQUIRE(run("cayley --sig " + sig) == 0);
      const csk::Signature s = csk::parse_signature(sig);
      const csk::CayleyTable table(s);
      std::ifstream in(kRoot / "stdout.txt");
      std::string line;
      std::getline(in, line);
      const auto header = split(line, ',');
      const std::size_t n = s.algebra_dim();
      REQUIRE(header.size() == n + 2);
      if (sig == "1,2") {
        CHECK(line == "A,B,1,e1,e2,e3,e12,e13,e23,e123");
      }
      std::size_t rows = 0;
      while (std::getline(in, line)) {
        const auto cells = split(line, ',');
        REQUIRE(cells.size() == n + 2);
        const csk::BladeMask a = mask_of(cells[0]), b = mask_of(cells[1]);
        for (std::size_t c = 0; c < n; ++c) {
          CHECK(std::stod(cells[c + 2]) == table(mask_of(header[c + 2]), a, b));
        }
        ++rows;
      }
      CHECK(rows == n * n);
    }
    CHECK(run("cayley --sig 0,0") == 2);
    CHECK(run("cayley") == 2);
  }

  TEST_CASE("kernel-gen writes artifacts reproducibly") {
    const fs::path a = kRoot / "kg_a", b = kRoot / "kg_b";
    fs::remove_all(a);
    fs::remove_all(b);
    REQUIRE(run("kernel-gen --sig 2,0 --grid 5,5 --channels 2,3 --seed 4 --out " + a.string()) == 0);
    REQUIRE(run("kernel-gen --sig 2,0 --grid 5,5 --channels 2,3 --seed 4 --out " + b.string()) == 0);
    const json summary = json::parse(slurp(kRoot / "stdout.txt"));
    CHECK(summary.at("self_check").at("pass") == true);
    CHECK(summary.at("self_check").at("max_err").get<double>() < 1e-9);
    CHECK(summary.at("images") == 2 * 3 * 16);
    std::size_t pgm = 0;
    for (const auto& e : fs::directory_iterator(a / "pgm")) pgm += e.path().extension() == ".pgm";
    CHECK(pgm == 96);
    for (const char* f : {"kernel.bin", "kernel.npy", "kernel.csv", "manifest.json"}) {
      CHECK(fs::exists(a / f));
      CHECK(slurp(a / f) == slurp(b / f));
    }
    REQUIRE(run("kernel-gen --sig 1,2 --grid 3,3,3 --head-weights grade --out " + a.string()) == 0);
    CHECK(json::parse(slurp(kRoot / "stdout.txt")).at("images") == 64);
    CHECK(run("kernel-gen --sig 2,0 --grid 4,4 --out " + a.string()) == 2);
    CHECK(run("kernel-gen --head-weights unstructured --out " + a.string()) == 2);
  }

  TEST_CASE("kernel-gen config file, flags override") {
    const fs::path dir = kRoot / "kg_cfg";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "cfg.json") << R"({"version": 1, "kernel": {"signature": [1, 1], "grid": [3, 3], "width": 4, "seed": 2}})";
    REQUIRE(run("kernel-gen --config " + (dir / "cfg.json").string() + " --seed 9 --out " + dir.string()) == 0);
    const json m = json::parse(slurp(dir / "manifest.json"));
    CHECK(m.at("config").at("signature") == json::array({1, 1}));
    CHECK(m.at("config").at("width") == 4);
    CHECK(m.at("config").at("seed") == 9);
    std::ofstream(dir / "bad.json") << R"({"version": 1, "kernel": {"colour": 3}})";
    CHECK(run("kernel-gen --config " + (dir / "bad.json").string() + " --out " + dir.string()) == 2);
    std::ofstream(dir / "nover.json") << R"({"kernel": {"width": 3}})";
    CHECK(run("kernel-gen --config " + (dir / "nover.json").string() + " --out " + dir.string()) == 2);
  }

  TEST_CASE("verify suites and exit codes") {
    CHECK(run("verify steerability --sig 1,1") == 0);
    const json r = json::parse(slurp(kRoot / "stdout.txt"));
    REQUIRE(r.is_array());
    for (const auto& c : r) CHECK(c.at("pass") == true);
    CHECK(run("verify --suite equivariance --sig 2,0") == 0);
    CHECK(run("verify algebra --sig 1,2 --out " + (kRoot / "v").string()) == 0);
    CHECK(fs::exists(kRoot / "v" / "verify.json"));
    CHECK(run("verify nonsense") == 2);
    CHECK(run("verify") == 2);
  }

  TEST_CASE("train writes report and manifest deterministically") {
    const fs::path a = kRoot / "tr_a", b = kRoot / "tr_b";
    fs::remove_all(a);
    fs::remove_all(b);
    REQUIRE(run("train --steps 12 --seed 3 --out " + a.string()) == 0);
    REQUIRE(run("train --steps 12 --seed 3 --out " + b.string(), "stdout.txt", "CSK_THREADS=1") == 0);
    CHECK(slurp(a / "report.jsonl") == slurp(b / "report.jsonl"));
    CHECK(slurp(a / "model.json") == slurp(b / "model.json"));
    std::ifstream in(a / "report.jsonl");
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      const json rec = json::parse(line);
      CHECK(rec.at("step") == n);
      ++n;
    }
    CHECK(n == 13);
    const json m = json::parse(slurp(a / "model.json"));
    CHECK(m.at("version") == 1);
    CHECK(m.at("layers").size() == 1);
  }

  TEST_CASE("train with zero steps is a no-op") {
    const fs::path dir = kRoot / "tr_zero";
    fs::remove_all(dir);
    REQUIRE(run("train --task gradient_operator --steps 0 --out " + dir.string()) == 0);
    const json s = json::parse(slurp(kRoot / "stdout.txt"));
    CHECK(s.at("final_test_loss") == s.at("initial_test_loss"));
    CHECK(s.at("task") == "gradient_operator");
  }

  TEST_CASE("train usage errors") {
    const fs::path dir = kRoot / "tr_bad";
    fs::create_directories(dir);
    CHECK(run("train --task classification --out " + dir.string()) == 2);
    CHECK(run("train --head-weights weird --out " + dir.string()) == 2);
    CHECK(run("train --steps 1 --out " + dir.string(), "stdout.txt", "CSK_THREADS=zero") == 2);
    std::ofstream(dir / "cfg.json") << R"({"version": 1, "train": {"optimizer": "adam"}})";
    CHECK(run("train --config " + (dir / "cfg.json").string() + " --out " + dir.string()) == 2);
    std::ofstream(dir / "cfg2.json") << R"({"version": 1, "train": {"steps": 2, "lr": 0.01}})";
    CHECK(run("train --config " + (dir / "cfg2.json").string() + " --lr 0.02 --out " + dir.string()) == 0);
    const json cfg = json::parse(slurp(dir / "config.json"));
    CHECK(cfg.at("train").at("steps") == 2);
    CHECK(cfg.at("train").at("lr") == 0.02);
    CHECK(run("bogus") == 2);
  }
}
