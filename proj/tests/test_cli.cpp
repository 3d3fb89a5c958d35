#include <doctest.h>

#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "ctsev/cli.hpp"
#include "ctsev/volume_io.hpp"
#include "support.hpp"

using namespace ctsev;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "ctsev");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Outcome o;
  o.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

// One small dataset plus a briefly trained bundle shared by the tests below.
struct Fixture {
  testing::TempDir root{"cli"};
  std::string data = (root.path() / "data").string();
  std::string bundle = (root.path() / "bundle").string();

  Fixture() {
    REQUIRE(run({"generate", "--out", data, "--cases", "16", "--severe", "0.25", "--positive", "0.5", "--seed",
                 "4", "--width", "32", "--height", "32", "--depth", "16"})
                .code == kExitOk);
    const Outcome t = run({"train", "--data", data, "--bundle", bundle, "--seed", "1", "--epochs", "1",
                           "--splits", "2"});
    REQUIRE(t.code == kExitOk);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"generate", "--seed", "1"}).code == kExitUsage);
  CHECK(run({"predict", "--bundle", "x"}).code == kExitUsage);
  CHECK(run({"bogus"}).code == kExitUsage);
  CHECK(run({"train", "--data", "d"}).code == kExitUsage);
  CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("generate is deterministic") {
  testing::TempDir a("gen-a");
  testing::TempDir b("gen-b");
  const std::vector<std::string> common{"--cases", "6", "--seed", "3", "--width", "16", "--height", "16",
                                        "--depth", "16"};
  auto args_a = common;
  args_a.insert(args_a.begin(), {"generate", "--out", a.path().string()});
  auto args_b = common;
  args_b.insert(args_b.begin(), {"generate", "--out", b.path().string()});
  const Outcome o = run(args_a);
  CHECK(o.code == kExitOk);
  CHECK(o.out.find("generated 6 cases") != std::string::npos);
  CHECK(run(args_b).code == kExitOk);
  CHECK(read_text_file(a.path() / "labels.csv") == read_text_file(b.path() / "labels.csv"));
  CHECK(read_file_bytes(a.path() / "manifest.json") == read_file_bytes(b.path() / "manifest.json"));
}

TEST_CASE("train writes the bundle and logs") {
  Fixture& f = fixture();
  const auto dir = std::filesystem::path(f.bundle);
  CHECK(std::filesystem::exists(dir / "bundle.json"));
  CHECK(std::filesystem::exists(dir / "split2" / "variantA.ckpt"));
  CHECK(std::filesystem::exists(dir / "training_log.csv"));
  CHECK(std::filesystem::exists(dir / "run_config.json"));
}

TEST_CASE("predict and evaluate") {
  Fixture& f = fixture();
  const std::string p1 = (f.root.path() / "p1.csv").string();
  const std::string p2 = (f.root.path() / "p2.csv").string();
  const std::string p3 = (f.root.path() / "p3.csv").string();
  CHECK(run({"predict", "--bundle", f.bundle, "--data", f.data, "--out", p1}).code == kExitOk);
  CHECK(run({"predict", "--bundle", f.bundle, "--data", f.data, "--out", p2}).code == kExitOk);
  CHECK(run({"predict", "--bundle", f.bundle, "--data", f.data, "--out", p3, "--no-tta"}).code == kExitOk);
  const std::string csv = read_text_file(p1);
  CHECK(csv == read_text_file(p2));
  CHECK(csv != read_text_file(p3));
  CHECK(read_predictions(csv).size() == 16);

  const Outcome e = run({"evaluate", "--pred", p1, "--labels", f.data + "/labels.csv"});
  CHECK(e.code == kExitOk);
  CHECK(e.out.rfind("AUC_severity=", 0) == 0);
  CHECK(e.out.find(" AUC_covid=") != std::string::npos);
  CHECK(run({"evaluate", "--pred", p1, "--labels", f.data + "/missing.csv"}).code == kExitUsage);
}

TEST_CASE("failures and partial results") {
  Fixture& f = fixture();
  const std::string out = (f.root.path() / "x.csv").string();
  CHECK(run({"predict", "--bundle", f.data, "--data", f.data, "--out", out}).code == kExitFailure);

  testing::TempDir broken("cli-broken");
  const auto files = std::filesystem::directory_iterator(f.data);
  int copied = 0;
  for (const auto& entry : files) {
    if (entry.path().extension() == ".mha" && copied < 3) {
      std::filesystem::copy_file(entry.path(), broken.path() / entry.path().filename());
      ++copied;
    }
  }
  write_text_file(broken.path() / "zzz.mha", "not a volume");
  const Outcome o = run({"predict", "--bundle", f.bundle, "--data", broken.path().string(), "--out", out});
  CHECK(o.code == kExitPartial);
  CHECK(o.err.find("zzz") != std::string::npos);
  CHECK(read_predictions(read_text_file(out)).size() == 3);

  CHECK(run({"train", "--data", (f.root.path() / "nowhere").string(), "--bundle", out + ".d", "--seed", "1"}).code ==
        kExitFailure);
}

TEST_CASE("installed binary maps exit codes") {
  const std::string cli = CTSEV_CLI_PATH;
  const auto status = [&](const std::string& args) {
    const int raw = std::system((cli + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(status("--help") == 0);
  CHECK(status("generate") == 2);
  CHECK(status("predict --bundle /nonexistent --data /nonexistent --out /tmp/ctsev-none.csv") == 1);
}
