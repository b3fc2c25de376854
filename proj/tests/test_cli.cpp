#include "doctest.h"

#include <sstream>
#include <string>
#include <vector>

#include "egd/cli.hpp"
#include "egd/io.hpp"
#include "egd/mixture.hpp"
#include "test_support.hpp"

using namespace egd;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "egd");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

double stdout_value(const std::string& out, const std::string& key) {
  std::istringstream in(out);
  std::string k;
  std::string v;
  while (in >> k >> v) {
    if (k == key) return std::stod(v);
  }
  FAIL("key not found: " << key);
  return 0.0;
}

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path) {
  std::istringstream in(testing::read_file(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

Matrix scatter_of(const std::string& model_path) {
  return io::read_model(model_path).model.components.at(0).scatter.matrix();
}

}  // namespace

TEST_CASE("sample command") {
  testing::TempDir dir;
  const auto a = dir.file("a.csv");
  const auto b = dir.file("b.csv");
  Result r = run({"sample", "--dim", "2", "--a", "1", "--b", "2", "--n", "1000", "--seed", "7", "--out", a});
  REQUIRE(r.code == 0);
  CHECK(r.err.find("seed=7") != std::string::npos);
  const Matrix m = io::read_matrix(a);
  CHECK(m.rows() == 1000);
  CHECK(m.cols() == 2);
  run({"sample", "--dim", "2", "--a", "1", "--b", "2", "--n", "1000", "--seed", "7", "--out", b});
  CHECK(testing::read_file(a) == testing::read_file(b));

  CHECK(run({"sample", "--dim", "2", "--a", "1", "--b", "2", "--n", "0", "--out", a}).code == 2);
  CHECK(run({"sample", "--dim", "2", "--a", "1", "--n", "5", "--out", a}).code == 2);
  io::write_model(dir.file("m.json"),
                  MixtureModel({EgdParams(ScatterMatrix::identity(2), 1.0, 2.0)}, Vector::Ones(1)), {});
  CHECK(run({"sample", "--model", dir.file("m.json"), "--dim", "2", "--n", "5", "--out", a}).code == 2);
  CHECK(run({"sample", "--model", dir.file("m.json"), "--n", "5", "--out", dir.file("c.bin")}).code == 0);
  CHECK(io::read_matrix(dir.file("c.bin")).rows() == 5);
  CHECK(run({"sample", "--bogus"}).code == 2);
  CHECK(run({}).code == 2);
}

TEST_CASE("fit command") {
  testing::TempDir dir;
  const auto data = dir.file("x.bin");
  REQUIRE(run({"sample", "--dim", "4", "--a", "0.5", "--b", "8", "--n", "2000", "--seed", "3",
               "--out", data}).code == 0);

  SUBCASE("Gaussian closed form") {
    REQUIRE(run({"fit", "--data", data, "--a", "2", "--b", "2", "--out", dir.file("g.json")}).code == 0);
    const Dataset d(io::read_matrix(data));
    CHECK(relative_frobenius(scatter_of(dir.file("g.json")), d.second_moment()) <= 1e-8);
  }
  SUBCASE("fixed point agrees with Kent-Tyler and traces are monotone") {
    const Result fp = run({"fit", "--data", data, "--a", "0.5", "--b", "8", "--tol", "1e-12",
                           "--out", dir.file("fp.json"), "--trace", dir.file("fp.csv")});
    const Result kt = run({"fit", "--data", data, "--a", "0.5", "--b", "8", "--tol", "1e-12",
                           "--algo", "kent-tyler", "--out", dir.file("kt.json")});
    REQUIRE(fp.code == 0);
    REQUIRE(kt.code == 0);
    CHECK(relative_frobenius(scatter_of(dir.file("fp.json")), scatter_of(dir.file("kt.json"))) <= 1e-4);
    const auto rows = read_csv_rows(dir.file("fp.csv"));
    REQUIRE(rows.size() >= 3);
    CHECK(rows[0].size() == 7);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      CHECK(std::stoi(rows[i][0]) == static_cast<int>(i - 1));
      CHECK(rows[i].size() == 7);
      if (i >= 2) CHECK(std::stod(rows[i][1]) >= std::stod(rows[i - 1][1]) - 1e-12);
    }
  }
  SUBCASE("alpha rule, init file and weights options") {
    Matrix init = Matrix::Identity(4, 4) * 3.0;
    io::write_matrix(dir.file("init.csv"), init, io::MatrixFormat::csv);
    io::write_matrix(dir.file("w.csv"), Vector::Constant(2000, 0.5), io::MatrixFormat::csv);
    const Result r = run({"fit", "--data", data, "--a", "0.5", "--b", "8", "--alpha-rule", "trace",
                          "--init", dir.file("init.csv"), "--weights", dir.file("w.csv"),
                          "--tol", "1e-12", "--out", dir.file("t.json")});
    CHECK(r.code == 0);
    CHECK(run({"fit", "--data", data, "--a", "0.5", "--b", "8", "--alpha-rule", "nope",
               "--out", dir.file("t.json")}).code == 2);
  }
  SUBCASE("exit codes") {
    const Result cap = run({"fit", "--data", data, "--a", "0.5", "--b", "8", "--max-iter", "1",
                            "--init", "identity", "--out", dir.file("cap.json")});
    CHECK(cap.code == 3);
    CHECK(io::read_model(dir.file("cap.json")).fit_info["converged"] == false);
    CHECK(run({"fit", "--data", data, "--a", "2", "--b", "2", "--algo", "kent-tyler",
               "--out", dir.file("k.json")}).code == 2);
    CHECK(run({"fit", "--data", data, "--a", "-1", "--b", "2", "--out", dir.file("k.json")}).code == 2);

    Matrix flat = io::read_matrix(data);
    flat.col(3) = flat.col(0) + flat.col(1);
    io::write_matrix(dir.file("flat.csv"), flat, io::MatrixFormat::csv);
    const Result rank = run({"fit", "--data", dir.file("flat.csv"), "--a", "1", "--b", "2",
                             "--out", dir.file("f.json")});
    CHECK(rank.code == 4);
    CHECK(rank.err.find("data does not span R^q") != std::string::npos);
    CHECK(run({"fit", "--data", dir.file("none.csv"), "--a", "1", "--b", "2",
               "--out", dir.file("f.json")}).code == 4);
  }
}

TEST_CASE("eval command") {
  testing::TempDir dir;
  const auto data = dir.file("x.csv");
  REQUIRE(run({"sample", "--dim", "3", "--a", "0.7", "--b", "4", "--n", "1500", "--seed", "5",
               "--out", data}).code == 0);
  const Result fit = run({"fit", "--data", data, "--a", "0.7", "--b", "4", "--out", dir.file("m.json")});
  REQUIRE(fit.code == 0);
  const Result ev = run({"eval", "--data", data, "--model", dir.file("m.json"), "--mi-rate",
                         "--splits", "10", "--seed", "1"});
  REQUIRE(ev.code == 0);
  CHECK(std::abs(stdout_value(ev.out, "avg_loglik") - stdout_value(fit.out, "avg_loglik")) <= 1e-12);
  const auto mi_pos = ev.out.find("mi_rate_bits_per_pixel ");
  REQUIRE(mi_pos != std::string::npos);
  const std::string mi = ev.out.substr(mi_pos + 23, ev.out.find('\n', mi_pos) - mi_pos - 23);
  CHECK(mi.size() - mi.find('.') - 1 == 4);
  CHECK(ev.out.find("split_mi_rate_std ") != std::string::npos);

  // A worse model attains lower likelihood and lower MI rate.
  io::write_model(dir.file("bad.json"),
                  MixtureModel({EgdParams(ScatterMatrix::identity(3), 2.0, 1.0)}, Vector::Ones(1)), {});
  const Result worse = run({"eval", "--data", data, "--model", dir.file("bad.json"), "--mi-rate"});
  CHECK(stdout_value(worse.out, "avg_loglik") < stdout_value(ev.out, "avg_loglik"));
  CHECK(stdout_value(worse.out, "mi_rate_bits_per_pixel") < stdout_value(ev.out, "mi_rate_bits_per_pixel"));

  io::write_model(dir.file("q2.json"),
                  MixtureModel({EgdParams(ScatterMatrix::identity(2), 1.0, 2.0)}, Vector::Ones(1)), {});
  CHECK(run({"eval", "--data", data, "--model", dir.file("q2.json")}).code == 4);
}

TEST_CASE("fit-mixture command") {
  testing::TempDir dir;
  const auto data = dir.file("x.bin");
  REQUIRE(run({"sample", "--dim", "3", "--a", "1", "--b", "3", "--n", "1200", "--seed", "8",
               "--out", data}).code == 0);
  const std::vector<std::string> args = {"fit-mixture", "--data", data, "--k", "2", "--seed", "4",
                                         "--rounds", "20", "--no-timing", "--out"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> a = args;
    a.insert(a.end(), extra.begin(), extra.end());
    return run(a);
  };
  const Result r1 = with({dir.file("m1.json"), "--trace", dir.file("t1.csv")});
  const Result r2 = with({dir.file("m2.json"), "--trace", dir.file("t2.csv")});
  CHECK((r1.code == 0 || r1.code == 3));
  CHECK(testing::read_file(dir.file("m1.json")) == testing::read_file(dir.file("m2.json")));
  CHECK(testing::read_file(dir.file("t1.csv")) == testing::read_file(dir.file("t2.csv")));
  const auto rows = read_csv_rows(dir.file("t1.csv"));
  for (std::size_t i = 2; i < rows.size(); ++i) {
    CHECK(std::stod(rows[i][1]) >= std::stod(rows[i - 1][1]) - 1e-9);
  }
  const io::ModelFile mf = io::read_model(dir.file("m1.json"));
  CHECK(mf.fit_info["seed"] == 4);
  CHECK(run({"fit-mixture", "--data", data, "--k", "500", "--out", dir.file("m3.json")}).code == 4);
}

TEST_CASE("bench command") {
  testing::TempDir dir;
  const std::vector<std::string> base = {"bench", "--dim", "4", "--a", "0.5", "--n", "300",
                                         "--trials", "2", "--seed", "9", "--no-timing"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return run(a);
  };
  const Result r1 = with({"--out-dir", dir.file("b1")});
  const Result r2 = with({"--out-dir", dir.file("b2")});
  REQUIRE(r1.code == 0);
  CHECK(stdout_value(r1.out, "max_loglik_spread") <= 1e-5);
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir.file("b1"))) {
    ++files;
    const auto other = std::filesystem::path(dir.file("b2")) / entry.path().filename();
    CHECK(testing::read_file(entry.path()) == testing::read_file(other));
  }
  CHECK(files == 2 * 3 * 2 + 2);
  const auto summary = read_csv_rows(dir.file("b1") + "/summary.csv");
  CHECK(summary.size() == 7);
  CHECK(summary[0][0] == "algo");

  CHECK(with({"--out-dir", dir.file("b3"), "--algos", "fp-eigen,newton"}).code == 2);
  CHECK(run({"bench", "--dim", "4", "--a", "3", "--n", "100", "--algos", "kent-tyler",
             "--out-dir", dir.file("b4")}).code == 2);
}

TEST_CASE("preprocess command") {
  testing::TempDir dir;
  Matrix raw = (testing::normal_matrix(50, 4, 1).array().abs() + 0.5).matrix();
  io::write_matrix(dir.file("raw.csv"), raw, io::MatrixFormat::csv);
  REQUIRE(run({"preprocess", "--data", dir.file("raw.csv"), "--noise-fraction", "0", "--out",
               dir.file("p0.csv")}).code == 0);
  CHECK((io::read_matrix(dir.file("p0.csv")) - raw.array().log().matrix()).norm() == 0.0);
  run({"preprocess", "--data", dir.file("raw.csv"), "--noise-fraction", "0.002", "--seed", "3",
       "--out", dir.file("p1.bin")});
  run({"preprocess", "--data", dir.file("raw.csv"), "--noise-fraction", "0.002", "--seed", "3",
       "--out", dir.file("p2.bin")});
  CHECK(testing::read_file(dir.file("p1.bin")) == testing::read_file(dir.file("p2.bin")));
  raw(3, 2) = -1.0;
  io::write_matrix(dir.file("neg.csv"), raw, io::MatrixFormat::csv);
  const Result bad = run({"preprocess", "--data", dir.file("neg.csv"), "--noise-fraction", "0",
                          "--out", dir.file("p3.csv")});
  CHECK(bad.code == 4);
  CHECK(bad.err.find("row 3, column 2") != std::string::npos);
}

TEST_CASE("help exits cleanly") {
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"fit", "--help"}).code == 0);
}
