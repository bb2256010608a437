#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "wassreg/measures.hpp"
#include "wassreg/ot.hpp"
#include "wassreg/rng.hpp"
#include "wassreg/train.hpp"

namespace fs = std::filesystem;
using namespace wassreg;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr folded into the captured output.
Outcome run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + WASSREG_CLI_PATH + " " + args + " 2>&1";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) o.out += buf.data();
  const int status = pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("wassreg_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

double field(const std::string& out, const std::string& key) {
  const auto pos = out.find(key + "=");
  REQUIRE(pos != std::string::npos);
  return std::stod(out.substr(pos + key.size() + 1));
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("gen gauss writes the requested pairs") {
    TempDir dir("gen");
    const auto r = run("gen gauss --n 50 --k 200 --sigma 0.05 --seed 7 -o " + (dir / "d.wrd"));
    CHECK(r.code == 0);
    CHECK(r.out.find("n=50 k=200 d=2 seed=7") != std::string::npos);
    const auto data = load_dataset(dir / "d.wrd", DatasetFormat::binary);
    CHECK(data.size() == 50);
    CHECK(data[0].source.size() == 200);
  }

  TEST_CASE("gen gmm is deterministic per seed and flags override the config") {
    TempDir dir("gmm");
    write(dir / "gmm.json", R"({"n": 6, "k": 20, "seed": 3})");
    REQUIRE(run("gen gmm --config " + (dir / "gmm.json") + " -o " + (dir / "a.wrd")).code == 0);
    REQUIRE(run("gen gmm --config " + (dir / "gmm.json") + " -o " + (dir / "b.wrd")).code == 0);
    CHECK(slurp(dir / "a.wrd") == slurp(dir / "b.wrd"));
    REQUIRE(run("gen gmm --config " + (dir / "gmm.json") + " --seed 4 -o " + (dir / "c.wrd")).code == 0);
    CHECK(slurp(dir / "a.wrd") != slurp(dir / "c.wrd"));
    REQUIRE(run("gen gmm --config " + (dir / "gmm.json") + " --n 4 -o " + (dir / "d.json")).code == 0);
    CHECK(load_dataset(dir / "d.json", DatasetFormat::json).size() == 4);
  }

  TEST_CASE("WASSREG_SEED supplies the default seed") {
    TempDir dir("seed");
    REQUIRE(run("gen gauss --n 3 --k 10 -o " + (dir / "a.wrd"), "WASSREG_SEED=11").code == 0);
    REQUIRE(run("gen gauss --n 3 --k 10 --seed 11 -o " + (dir / "b.wrd")).code == 0);
    REQUIRE(run("gen gauss --n 3 --k 10 -o " + (dir / "c.wrd")).code == 0);
    CHECK(slurp(dir / "a.wrd") == slurp(dir / "b.wrd"));
    CHECK(slurp(dir / "a.wrd") != slurp(dir / "c.wrd"));
    CHECK(run("gen gauss --n 3 -o " + (dir / "e.wrd"), "WASSREG_SEED=abc").code == 3);
  }

  TEST_CASE("usage errors exit with 2") {
    TempDir dir("usage");
    CHECK(run("").code == 2);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("gen gauss --k 20 -o " + (dir / "d.wrd")).code == 2);
    REQUIRE(run("gen gauss --n 12 --k 10 -o " + (dir / "d.wrd")).code == 0);
    const auto again = run("gen gauss --n 12 --k 10 -o " + (dir / "d.wrd"));
    CHECK(again.code == 2);
    CHECK(again.out.find("--force") != std::string::npos);
    CHECK(run("gen gauss --n 12 --k 10 --force -o " + (dir / "d.wrd")).code == 0);
    CHECK(run("fit --data " + (dir / "d.wrd") + " --ref-index 0 --map spline -o " + (dir / "m.json")).code == 2);
    CHECK(run("fit --data " + (dir / "d.wrd") + " -o " + (dir / "m.json")).code == 2);
    CHECK(run("fit --data " + (dir / "d.wrd") + " --ref-index 99 -o " + (dir / "m.json")).code == 2);
    CHECK(run("eval --data " + (dir / "d.wrd")).code == 2);
    CHECK(run("predict --models " + (dir / "none") + " --data " + (dir / "d.wrd") + " -o " + (dir / "p.wrd")).code ==
          2);
    CHECK(run("--help").code == 0);
  }

  TEST_CASE("invalid inputs exit with 3") {
    TempDir dir("invalid");
    write(dir / "bad.json", R"({"n": 5, "colour": "red"})");
    CHECK(run("gen gmm --config " + (dir / "bad.json") + " -o " + (dir / "d.wrd")).code == 3);
    write(dir / "broken.json", "{\"n\": ");
    const auto r = run("gen gmm --config " + (dir / "broken.json") + " -o " + (dir / "d.wrd"));
    CHECK(r.code == 3);
    CHECK(r.out.find("parse error") != std::string::npos);
    CHECK(run("gen gauss --n 5 --sigma -1 -o " + (dir / "d.wrd")).code == 3);
    write(dir / "junk.wrd", "not a dataset");
    CHECK(run("fit --data " + (dir / "junk.wrd") + " --ref-index 0 -o " + (dir / "m.json")).code == 3);
  }

  TEST_CASE("fit recovers a translation pair") {
    TempDir dir("translate");
    Rng rng(5);
    Matrix p(30, 2);
    for (auto& v : p.storage()) v = rng.normal();
    const auto mu = make_uniform_measure(std::move(p));
    const double t[2] = {0.1, -0.08};
    RegressionDataset data(2);
    data.add(mu, translate(mu, t));
    save_dataset(data, dir / "t.json", DatasetFormat::json);
    // The exact map reaches zero loss.
    CHECK(ot::sinkhorn_divergence(translate(mu, t), data[0].target, ot::SinkhornConfig{}).value == 0.0);

    const auto r = run("fit --data " + (dir / "t.json") + " --ref-index 0 --map affine --epochs 200 --lr 1e-3 -o " +
                       (dir / "m.json"));
    REQUIRE(r.code == 0);
    CHECK(field(r.out, "final_loss") <= 1e-3);
    CHECK(field(r.out, "pairs_used") == 1);
    const auto model = train::load_model(dir / "m.json");
    CHECK(model.loss_history.size() == 200);
  }

  TEST_CASE("multi-reference fit, predict, eval and plot") {
    TempDir dir("pipeline");
    REQUIRE(run("gen gmm --n 10 --k 16 --seed 2 -o " + (dir / "train.wrd")).code == 0);
    REQUIRE(run("gen gmm --n 3 --k 16 --seed 9 -o " + (dir / "test.wrd")).code == 0);

    const auto fit = run("fit --data " + (dir / "train.wrd") + " --refs 3 --epochs 2 -o " + (dir / "models"));
    REQUIRE(fit.code == 0);
    for (int i = 0; i < 3; ++i) CHECK(fs::exists(dir / ("models/model_" + std::to_string(i) + ".json")));
    CHECK(!fs::exists(dir / "models/model_3.json"));

    const auto pred = run("predict --models " + (dir / "models") + " --data " + (dir / "test.wrd") + " -o " +
                          (dir / "pred.wrd"));
    REQUIRE(pred.code == 0);
    const auto preds = load_dataset(dir / "pred.wrd", DatasetFormat::binary);
    CHECK(preds.size() == 3);

    const auto ev = run("eval --models " + (dir / "models") + " --data " + (dir / "test.wrd") + " --train " +
                        (dir / "train.wrd") + " --plot " + (dir / "plots"));
    REQUIRE(ev.code == 0);
    CHECK(ev.out.rfind("d,n,k,reps,abs_err_mean,abs_err_std,r2w_mean\n2,10,16,3,", 0) == 0);
    std::size_t svgs = 0;
    for (const auto& e : fs::directory_iterator(dir / "plots")) svgs += e.path().extension() == ".svg";
    CHECK(svgs == 3);

    REQUIRE(run("plot --data " + (dir / "test.wrd") + " --pred " + (dir / "pred.wrd") + " --pair 1 -o " +
                (dir / "one.svg"))
                .code == 0);
    CHECK(slurp(dir / "one.svg").rfind("<svg", 0) == 0);

    // Same flags, same bytes.
    REQUIRE(run("fit --data " + (dir / "train.wrd") + " --refs 3 --epochs 2 -o " + (dir / "models2")).code == 0);
    CHECK(slurp(dir / "models/model_1.json") == slurp(dir / "models2/model_1.json"));
  }

  TEST_CASE("regime prints the csv row") {
    TempDir dir("regime");
    write(dir / "r.json", R"({"n": 6, "k": 12, "reps": 2, "master": {"n": 8, "k": 12, "seed": 1},
                              "rule": {"neighbors": 3}, "train": {"epochs": 2}, "barycenter_iters": 3})");
    const auto r = run("regime --config " + (dir / "r.json") + " --jobs 2 --plot " + (dir / "plots") + " -o " +
                       (dir / "out.csv"));
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("d,n,k,reps,abs_err_mean,abs_err_std,r2w_mean\n2,6,12,2,", 0) == 0);
    CHECK(slurp(dir / "out.csv") == r.out);
    CHECK(fs::exists(dir / "plots/rep_0.svg"));
    CHECK(fs::exists(dir / "plots/rep_1.svg"));
  }
}
