#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ack/cli.hpp"
#include "ack/complexity.hpp"
#include "ack/dataset.hpp"
#include "ack/explore.hpp"
#include "json.hpp"
#include "support/idx.hpp"
#include "support/spaces.hpp"

namespace fs = std::filesystem;
using namespace ack;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("ack_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

void write(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::set<std::string> listing(const fs::path& dir) {
  std::set<std::string> names;
  for (const auto& e : fs::recursive_directory_iterator(dir)) names.insert(fs::relative(e.path(), dir).string());
  return names;
}

// First `n` samples of the shipped MNIST subset, rewritten as IDX files.
void mnist_head(const TempDir& dir, std::size_t n) {
  const std::string root = std::string(ACK_SOURCE_DIR) + "/data/mnist-subset/";
  const auto im = read_file(root + "train-images.idx");
  const auto lb = read_file(root + "train-labels.idx");
  auto out_im = idx::images(static_cast<std::uint32_t>(n), 28, 28);
  std::copy_n(im.begin() + 16, n * 784, out_im.begin() + 16);
  write(dir / "images.idx", std::string(out_im.begin(), out_im.end()));
  const std::vector<std::uint8_t> labels(lb.begin() + 8, lb.begin() + 8 + static_cast<std::ptrdiff_t>(n));
  const auto out_lb = idx::labels(labels);
  write(dir / "labels.idx", std::string(out_lb.begin(), out_lb.end()));
}

const char* kSmallSpec = "input 1 28 28\nconv c4 k3 s2 p1\nres{\n  vac dm2 e1:2 e2:2 um4\n}res\nconv c8 k3 s2 p1\ngap\nfc 10\nsoftmax\n";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("train writes a model and one metrics row per epoch") {
    TempDir dir("train");
    mnist_head(dir, 1000);
    const std::string spec = std::string(ACK_SOURCE_DIR) + "/specs/attendnet-micro-a.dsl";
    const Run r = cli({"train", "--spec", spec, "--data", dir / "images.idx", "--labels", dir / "labels.idx",
                       "--epochs", "2", "--seed", "42", "--out", dir / "run"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(fs::exists(dir / "run/model.ackm"));
    std::istringstream csv(slurp(dir / "run/metrics.csv"));
    std::string line;
    std::size_t rows = 0;
    std::getline(csv, line);
    CHECK(line == "epoch,learning_rate,train_loss,train_top1");
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 2);
    const auto manifest = nlohmann::json::parse(slurp(dir / "run/manifest.json"));
    CHECK(manifest["command"] == "train");
    CHECK(manifest["seed"] == 42);
    CHECK(manifest["status"] == "ok");
  }

  TEST_CASE("identical invocations give identical files, and nothing outside --out") {
    TempDir dir("repeat");
    mnist_head(dir, 64);
    write(dir / "net.dsl", kSmallSpec);
    const auto before = listing(dir.path);
    auto run = [&](const std::string& out) {
      return cli({"train", "--spec", dir / "net.dsl", "--data", dir / "images.idx", "--labels", dir / "labels.idx",
                  "--test-data", dir / "images.idx", "--test-labels", dir / "labels.idx", "--epochs", "2", "--batch",
                  "16", "--seed", "3", "--out", dir / out});
    };
    REQUIRE(run("a").code == 0);
    REQUIRE(run("b").code == 0);
    CHECK(slurp(dir / "a/model.ackm") == slurp(dir / "b/model.ackm"));
    CHECK(slurp(dir / "a/metrics.csv") == slurp(dir / "b/metrics.csv"));
    auto after = listing(dir.path);
    for (const auto& name : before) after.erase(name);
    for (const auto& name : after) CHECK((name.rfind("a", 0) == 0 || name.rfind("b", 0) == 0));
    CHECK(listing(dir.path / "a") == std::set<std::string>{"manifest.json", "metrics.csv", "model.ackm"});
  }

  TEST_CASE("eval and quantize") {
    TempDir dir("evalq");
    mnist_head(dir, 64);
    write(dir / "net.dsl", kSmallSpec);
    REQUIRE(cli({"train", "--spec", dir / "net.dsl", "--data", dir / "images.idx", "--labels", dir / "labels.idx",
                 "--out", dir / "run"})
                .code == 0);
    const Run e = cli({"eval", "--model", dir / "run/model.ackm", "--data", dir / "images.idx", "--labels",
                       dir / "labels.idx"});
    CHECK(e.code == 0);
    CHECK(e.out.find("samples,top1,mean_loss") != std::string::npos);
    const Run q = cli({"quantize", "--model", dir / "run/model.ackm", "--mode", "per-channel", "--out", dir / "q"});
    CHECK(q.code == 0);
    CHECK(fs::exists(dir / "q/model.ackm"));
    CHECK(cli({"eval", "--model", dir / "q/model.ackm", "--data", dir / "images.idx", "--labels", dir / "labels.idx"})
              .code == 0);
    CHECK(cli({"quantize", "--model", dir / "run/model.ackm", "--mode", "bogus", "--out", dir / "q2"}).code == 2);
  }

  TEST_CASE("bad description exits 2 and names the line") {
    TempDir dir("bad");
    mnist_head(dir, 8);
    write(dir / "bad.dsl", "input 1 28 28\nconv c4 k3\nconv c4 k3 wat:1\ngap\nfc 10\nsoftmax\n");
    const Run r = cli({"train", "--spec", dir / "bad.dsl", "--data", dir / "images.idx", "--labels", dir / "labels.idx",
                       "--out", dir / "run"});
    CHECK(r.code == 2);
    CHECK(r.err.find("line 3") != std::string::npos);
    CHECK(cli({"train", "--spec", dir / "bad.dsl"}).code == 2);
    CHECK(cli({"nonsense"}).code == 2);
    CHECK(cli({"eval", "--model", dir / "missing.ackm", "--data", dir / "images.idx", "--labels", dir / "labels.idx"})
              .code == 2);
  }

  TEST_CASE("divergence exits 3") {
    TempDir dir("diverge");
    mnist_head(dir, 16);
    write(dir / "net.dsl", kSmallSpec);
    const Run r = cli({"train", "--spec", dir / "net.dsl", "--data", dir / "images.idx", "--labels", dir / "labels.idx",
                       "--lr", "1e300", "--epochs", "3", "--out", dir / "run"});
    CHECK(r.code == 3);
    CHECK(r.err.find("diverged") != std::string::npos);
  }

  TEST_CASE("count delegates to the complexity report") {
    const std::string spec = std::string(ACK_SOURCE_DIR) + "/specs/attendnet-micro-a.dsl";
    const Run r = cli({"count", "--spec", spec, "--bits", "8", "--csv-only"});
    REQUIRE(r.code == 0);
    const NetworkSpec s = parse_dsl_file(spec);
    CHECK(r.out == count_mult_adds(s, s.input_shape(), 8).csv());
    const Run t = cli({"count", "--spec", spec});
    CHECK(t.out.find(count_mult_adds(s, s.input_shape()).table()) != std::string::npos);
    CHECK(cli({"count", "--spec", spec, "--bits", "16"}).code == 2);
    CHECK(cli({"count", "--spec", spec, "--input-shape", "3x28x28"}).code == 2);
  }

  TEST_CASE("compare prints the published ratios") {
    const Run r = cli({"compare", "--csv", std::string(ACK_SOURCE_DIR) + "/data/table1.csv"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("MobileNet-V1,AttendNet-B,4.17,2.97,16.68") != std::string::npos);
    CHECK(r.out.find("16.68x") != std::string::npos);
  }

  TEST_CASE("search with cached metrics matches the exhaustive ranking") {
    TempDir dir("search");
    const SearchSpace space = spaces::eight();
    Rng rng(5);
    spaces::Metrics m = spaces::random_metrics(space, rng);
    // The CLI keys cached metrics by spec hash, so every seed shares one value.
    nlohmann::json j;
    j["stem"] = space.stem;
    j["slots"] = space.slots;
    j["classes"] = space.classes;
    j["seeds"] = std::vector<std::uint64_t>{0};
    for (std::uint64_t id = 0; id < space.size(); ++id) {
      const auto& v = m.table[{id, 0}];
      m.table[{id, 1}] = v;
      j["metrics"][spec_hash(space.realize(id).text)] = {{"top1", v.top1}, {"bits", v.bits}};
    }
    write(dir / "space.json", j.dump(2));
    const Run r = cli({"search", "--space", dir / "space.json", "--budget", "8", "--tau", "0.6", "--bits", "8",
                       "--seed", "1", "--out", dir / "out"});
    const auto expect = spaces::brute_force(space, m, IndicatorConfig{0.6, 8}, PerformanceFunction{});
    REQUIRE(r.code == (expect.empty() ? 4 : 0));
    std::istringstream csv(slurp(dir / "out/ranking.csv"));
    std::string line;
    std::getline(csv, line);
    std::vector<std::uint64_t> ids;
    while (std::getline(csv, line)) {
      const auto a = line.find(','), b = line.find(',', a + 1);
      ids.push_back(std::stoull(line.substr(a + 1, b - a - 1)));
    }
    CHECK(ids == expect);
    std::istringstream audit(slurp(dir / "out/audit.ndjson"));
    std::size_t records = 0;
    while (std::getline(audit, line)) {
      const auto rec = nlohmann::json::parse(line);
      CHECK(rec.contains("spec_hash"));
      ++records;
    }
    CHECK(records == 8);

    const Run none = cli({"search", "--space", dir / "space.json", "--budget", "8", "--tau", "0.99999", "--out",
                          dir / "none"});
    CHECK(none.code == 4);
    CHECK(none.out.find("no feasible candidate") != std::string::npos);
  }
}
