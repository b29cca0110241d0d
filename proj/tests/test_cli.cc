#include <cstdlib>
#include <string>

#include <sys/wait.h>

#include <doctest.h>

#include "helpers.h"

using pfslda::testing::read_file;
using pfslda::testing::TempDir;

namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

Run run(const std::string& args, const TempDir& dir) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(PFSLDA_CLI_PATH) + " " + args + " > " + out.string() +
                          " 2> " + err.string();
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

std::string directory_digest(const fs::path& dir) {
  std::string all;
  for (const auto& name : {"vocab.txt", "docs.txt", "targets.txt", "truth.txt", "train_docs.txt",
                           "val_docs.txt", "test_docs.txt", "train_targets.txt"}) {
    all += name;
    all += read_file(dir / name);
  }
  return all;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("simulate is deterministic") {
  TempDir dir;
  const std::string a = (dir / "a").string();
  const std::string b = (dir / "b").string();
  REQUIRE(run("simulate --out " + a + " --seed 7 --docs 40 --datasets 1", dir).status == 0);
  REQUIRE(run("simulate --out " + b + " --seed 7 --docs 40 --datasets 1", dir).status == 0);
  CHECK(directory_digest(a) == directory_digest(b));
  CHECK(read_file(fs::path(a) / "docs.txt").size() > 0);

  REQUIRE(run("simulate --out " + (dir / "many").string() + " --docs 10 --datasets 2", dir).status == 0);
  CHECK(fs::exists(dir / "many" / "dataset_0" / "truth.txt"));
  CHECK(fs::exists(dir / "many" / "dataset_1" / "truth.txt"));
}

TEST_CASE("train, eval, select, predict and filter pipeline") {
  TempDir dir;
  const std::string d = (dir / "data").string();
  REQUIRE(run("simulate --out " + d + " --seed 3 --docs 150 --doc-len 200 --datasets 1", dir).status == 0);
  const std::string common = " --vocab " + d + "/vocab.txt";
  const std::string model = (dir / "model.txt").string();

  Run t = run("train --corpus " + d + "/train_docs.txt --targets " + d + "/train_targets.txt" + common +
                  " --epochs 3 --batch-size 20 --seed 1 --out " + model + " --trace " +
                  (dir / "trace.csv").string(),
              dir);
  REQUIRE_MESSAGE(t.status == 0, t.err);
  CHECK(read_file(dir / "trace.csv").rfind("step,elbo,val_metric", 0) == 0);

  Run e = run("eval --model " + model + " --corpus " + d + "/test_docs.txt --targets " + d +
                  "/test_targets.txt" + common + " --metrics precision,recall,rmse,coherence --threshold 0.99 --top-n 10",
              dir);
  REQUIRE_MESSAGE(e.status == 0, e.err);
  CHECK(e.out.find("precision ") != std::string::npos);
  CHECK(e.out.find("recall ") != std::string::npos);
  CHECK(e.out.find("rmse ") != std::string::npos);
  CHECK(e.out.find("coherence_mean ") != std::string::npos);

  Run s = run("select --model " + model + " --threshold 0.4 --out " + (dir / "sel.txt").string(), dir);
  CHECK(s.status == 0);

  Run p = run("predict --model " + model + " --corpus " + d + "/test_docs.txt" + common + " --out " +
                  (dir / "pred.txt").string(),
              dir);
  CHECK(p.status == 0);
  CHECK(read_file(dir / "pred.txt").size() > 0);

  const std::string filtered = (dir / "filtered").string();
  Run f = run("filter --corpus " + d + "/train_docs.txt --targets " + d + "/train_targets.txt" + common +
                  " --by correlation --n 30 --out " + filtered,
              dir);
  REQUIRE_MESSAGE(f.status == 0, f.err);
  CHECK(f.out.find("kept 30 of 100") != std::string::npos);
  Run base = run("train --corpus " + filtered + "/docs.txt --targets " + filtered + "/targets.txt --vocab " +
                     filtered + "/vocab.txt --channel off --epochs 2 --out " + (dir / "base.txt").string(),
                 dir);
  CHECK_MESSAGE(base.status == 0, base.err);
}

TEST_CASE("identical training runs give identical checkpoints") {
  TempDir dir;
  const std::string d = (dir / "data").string();
  REQUIRE(run("simulate --out " + d + " --docs 60 --doc-len 80 --datasets 1", dir).status == 0);
  const std::string args = "train --corpus " + d + "/docs.txt --targets " + d + "/targets.txt --vocab " + d +
                           "/vocab.txt --epochs 2 --batch-size 10 --seed 5 --out ";
  REQUIRE(run(args + (dir / "m1.txt").string(), dir).status == 0);
  REQUIRE(run(args + (dir / "m2.txt").string(), dir).status == 0);
  CHECK(read_file(dir / "m1.txt") == read_file(dir / "m2.txt"));
}

TEST_CASE("verify subcommand") {
  TempDir dir;
  Run v = run("verify --seed 1 --samples 20000", dir);
  CHECK(v.status == 0);
  CHECK(v.out.find("FAIL") == std::string::npos);
  CHECK(v.out.find("gradient_max_relative_error") != std::string::npos);
}

TEST_CASE("errors exit nonzero with a message") {
  TempDir dir;
  pfslda::testing::write_file(dir / "vocab.txt", "a\nb\n");
  pfslda::testing::write_file(dir / "docs.txt", "0:1 7:2\n");
  pfslda::testing::write_file(dir / "targets.txt", "1.0\n");
  Run r = run("train --corpus " + (dir / "docs.txt").string() + " --targets " + (dir / "targets.txt").string() +
                  " --vocab " + (dir / "vocab.txt").string() + " --out " + (dir / "m.txt").string(),
              dir);
  CHECK(r.status != 0);
  CHECK(r.err.find("error:") != std::string::npos);

  CHECK(run("train --corpus missing.txt", dir).status != 0);
  CHECK(run("bogus", dir).status != 0);
  CHECK(run("", dir).status != 0);
}

}  // TEST_SUITE
