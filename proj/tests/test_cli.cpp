#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "brainalign/cli.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

// Runs the CLI binary through the shell; stderr is folded into `out`.
Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" BRAINALIGN_CLI_PATH "\" " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_spec(const fs::path& p, const std::string& body) { std::ofstream(p) << body; }

const char* kSmallSpec = R"({"n_stimuli": 60, "n_repetitions": 2, "n_layers": 3, "snr": 3.0, "seed": 7})";

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run("--help").code == 0);
  CHECK(run("align --help").code == 0);
  CHECK(run("").code == 1);
  CHECK(run("frobnicate").code == 1);
  CHECK(run("align --manifest x --no-such-flag").code == 1);
  CHECK(run("synth --dtype f2").code == 1);
}

TEST_CASE("synth then layer-time recovers the planted cell") {
  TempDir tmp("brainalign_cli_lt");
  write_spec(tmp.path / "spec.json", kSmallSpec);
  const Run s = run("synth --spec " + (tmp.path / "spec.json").string() + " --n-subjects 2 --out " +
                    (tmp.path / "data").string());
  REQUIRE(s.code == 0);
  const fs::path manifest = tmp.path / "data" / "manifest.json";
  REQUIRE(fs::exists(manifest));
  CHECK(run("validate --manifest " + manifest.string()).code == 0);

  const Run lt = run("layer-time --manifest " + manifest.string() + " -q --out " + (tmp.path / "o").string());
  REQUIRE(lt.code == 0);
  const fs::path result = tmp.path / "o" / "layer_time_synth-model.json";
  REQUIRE(fs::exists(result));
  const auto j = nlohmann::json::parse(slurp(result));
  CHECK(j.at("argmax").at("layer").get<int>() == 2);
  CHECK(j.at("argmax").at("window_ms").at(0).get<double>() == 100.0);
}

TEST_CASE("align writes alignment_<model> in every requested format and leaves inputs alone") {
  TempDir tmp("brainalign_cli_align");
  write_spec(tmp.path / "spec.json", kSmallSpec);
  REQUIRE(run("synth --spec " + (tmp.path / "spec.json").string() + " --out " + (tmp.path / "data").string()).code == 0);
  std::map<fs::path, std::string> before;
  for (const auto& e : fs::directory_iterator(tmp.path / "data")) before[e.path()] = slurp(e.path());

  const fs::path manifest = tmp.path / "data" / "manifest.json";
  const Run a = run("align --manifest " + manifest.string() +
                    " --n-perm 5 --layer 2 --format json --format csv -q --out " + (tmp.path / "o").string());
  REQUIRE(a.code == 0);
  CHECK(fs::exists(tmp.path / "o" / "alignment_synth-model.json"));
  CHECK(fs::exists(tmp.path / "o" / "alignment_synth-model.csv"));
  CHECK(a.out.find("alignment_synth-model.json") != std::string::npos);

  for (const auto& [p, bytes] : before) CHECK(slurp(p) == bytes);

  // The default output directory comes from the environment.
  const Run env = run("align --manifest " + manifest.string() + " --n-perm 0 -q",
                      std::string(brainalign::kOutDirEnv) + "=" + (tmp.path / "env").string());
  REQUIRE(env.code == 0);
  CHECK(fs::exists(tmp.path / "env" / "alignment_synth-model.json"));
}

TEST_CASE("validate reports every issue with a nonzero exit") {
  TempDir tmp("brainalign_cli_validate");
  REQUIRE(run("synth --out " + tmp.path.string()).code == 0);
  fs::remove(tmp.path / "montage.csv");
  fs::remove(tmp.path / "sub-01_eeg.npy");
  const Run v = run("validate --manifest " + (tmp.path / "manifest.json").string());
  CHECK(v.code == 1);
  CHECK(v.out.find("MISSING_FILE") != std::string::npos);
  CHECK(v.out.find("sub-01_eeg.npy") != std::string::npos);
  CHECK(v.out.find("montage.csv") != std::string::npos);
}

TEST_CASE("json errors and exit codes") {
  TempDir tmp("brainalign_cli_errors");
  const Run missing = run("align --json-errors --manifest " + (tmp.path / "absent.json").string());
  CHECK(missing.code == 2);
  const auto j = nlohmann::json::parse(missing.out);
  CHECK(j.at("error").at("kind") == "io");
  CHECK(j.at("error").contains("code"));
  CHECK(j.at("error").contains("message"));

  write_spec(tmp.path / "bad.json", R"({"n_stimuli": 10, "bogus": 1})");
  const Run bad = run("synth --json-errors --spec " + (tmp.path / "bad.json").string() + " --out " + tmp.path.string());
  CHECK(bad.code == 1);
  CHECK(bad.out.find("UNKNOWN_KEY") != std::string::npos);

  write_spec(tmp.path / "spec.json", kSmallSpec);
  REQUIRE(run("synth --spec " + (tmp.path / "spec.json").string() + " --out " + (tmp.path / "d").string()).code == 0);
  const Run model = run("align --manifest " + (tmp.path / "d" / "manifest.json").string() + " --model nope -q");
  CHECK(model.code == 1);
  const Run k = run("align --manifest " + (tmp.path / "d" / "manifest.json").string() + " --k-folds 1 -q");
  CHECK(k.code == 1);
}

TEST_CASE("in-process entry point") {
  CHECK(brainalign::run_cli(std::vector<std::string>{"--help"}) == 0);
  CHECK(brainalign::run_cli(std::vector<std::string>{"validate"}) == 1);
}
