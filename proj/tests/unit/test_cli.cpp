#include <doctest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "command_plan.hpp"
#include "helpers.hpp"
#include "reclink/audit.hpp"
#include "reclink/error.hpp"
#include "reclink/tabular.hpp"
#include "run.hpp"

using namespace reclink;
using namespace reclink::cli;

namespace {

const std::filesystem::path kData = RECLINK_DATA_DIR;

EnvLookup fake_env(std::map<std::string, std::string> vars = {}) {
  return [vars](std::string_view name) -> std::optional<std::string> {
    auto it = vars.find(std::string(name));
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

std::string error_of(const std::vector<std::string>& args, const EnvLookup& env = fake_env()) {
  try {
    parse_and_validate(args, env);
  } catch (const UserError& e) {
    return e.what();
  }
  return {};
}

struct Ran {
  int code;
  std::string out;
  std::string log;
};

Ran run_cli(const std::vector<std::string>& args, const EnvLookup& env = fake_env()) {
  std::ostringstream out, log;
  const int code = main_entry(args, out, log, env);
  return {code, out.str(), log.str()};
}

std::string small(const char* name) { return (kData / "small" / name).string(); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("merge defaults") {
    const auto p = parse_and_validate({"merge", "--left", "a.csv", "--right", "b.csv", "--on", "name", "--model", "builtin:"},
                                      fake_env());
    CHECK(p.subcommand == Subcommand::kMerge);
    CHECK(p.merge.merge_type == MergeType::kManyToOne);
    CHECK(p.merge.k == 1);
    CHECK_FALSE(p.merge.threshold.has_value());
    REQUIRE(p.provider.has_value());
    CHECK(std::holds_alternative<BuiltinProviderSpec>(*p.provider));
    CHECK_FALSE(p.out.has_value());
  }

  TEST_CASE("rejections name the flag") {
    CHECK(error_of({"merge", "--model", "builtin:", "--left", "a", "--right", "b", "--on", "n", "--merge-type", "1:1",
                    "--k", "3"})
              .find("--merge-type") != std::string::npos);
    CHECK(error_of({"merge", "--model", "builtin:", "--left", "a", "--right", "b", "--on", "n", "--left-on", "x"})
              .find("--on") != std::string::npos);
    CHECK(error_of({"merge", "--model", "builtin:", "--left", "a", "--right", "b", "--on", "n", "--bogus"})
              .find("--bogus") != std::string::npos);
    CHECK(error_of({"merge", "--model", "builtin:", "--right", "b", "--on", "n"}).find("--left") != std::string::npos);
    CHECK(error_of({"merge", "--model", "builtin:", "--left", "a", "--right", "b", "--on", "n", "--k", "0"})
              .find("--k") != std::string::npos);
    CHECK(error_of({"dedup", "--model", "builtin:", "--input", "a", "--on", "n", "--cluster-threshold", "2"})
              .find("--cluster-threshold") != std::string::npos);
    CHECK_FALSE(error_of({"frobnicate"}).empty());
  }

  TEST_CASE("a remote model needs its key variable at parse time") {
    const std::vector<std::string> args{"merge", "--left", "a", "--right", "b", "--on", "n",
                                        "--model", "remote:m@http://127.0.0.1:1/v1"};
    CHECK(error_of(args).find("RECLINK_API_KEY") != std::string::npos);
    const auto p = parse_and_validate(args, fake_env({{"RECLINK_API_KEY", "k"}}));
    CHECK(p.api_key == "k");
    CHECK(std::get<RemoteProviderSpec>(*p.provider).model == "m");
  }

  TEST_CASE("model spec parsing") {
    CHECK(std::get<BuiltinProviderSpec>(parse_model_spec("builtin:")).model_path.empty());
    CHECK(std::get<BuiltinProviderSpec>(parse_model_spec("builtin:x.bin")).model_path == "x.bin");
    const auto r = std::get<RemoteProviderSpec>(parse_model_spec("remote:text-embed@https://h/v1"));
    CHECK(r.endpoint == "https://h/v1");
    CHECK_THROWS_AS(parse_model_spec("local:x"), UserError);
    CHECK_THROWS_AS(parse_model_spec("remote:nourl"), UserError);
  }

  TEST_CASE("parsing is pure in argv and env") {
    const std::vector<std::string> args{"dedup", "--model", "builtin:", "--input", "in.csv", "--on", "name,city",
                                        "--cluster-algorithm", "dbscan", "--min-samples", "3"};
    const auto a = parse_and_validate(args, fake_env());
    const auto b = parse_and_validate(args, fake_env());
    CHECK(a.on == b.on);
    CHECK(a.cluster.algorithm == ClusterAlgorithm::kDbscan);
    CHECK(a.cluster.min_samples == 3);
    CHECK(a.on.names == std::vector<std::string>{"name", "city"});
  }

  TEST_CASE("help exits zero") {
    const auto r = run_cli({"merge", "--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("--left") != std::string::npos);
  }

  TEST_CASE("identity merge scores one") {
    testing::TempDir dir;
    const auto r = run_cli({"merge", "--model", "builtin:", "--left", small("identity_left.csv"), "--right",
                            small("identity_right.csv"), "--on", "name", "--out",
                            (dir / "out.csv").string(), "--audit-out", (dir / "a.jsonl").string()});
    REQUIRE(r.code == 0);
    const auto t = load_table(dir / "out.csv");
    REQUIRE(t.num_rows() == 2);
    const auto score = t.column_index("score");
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(std::stod(t.cell(i, score)) == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(t.cell(i, t.column_index("name")) == t.cell(i, t.column_index("right_name")));
    }
    CHECK(load_link_audit(dir / "a.jsonl").matches.size() == 2);
  }

  TEST_CASE("dedup reports survivors") {
    testing::TempDir dir;
    const auto r = run_cli({"dedup", "--model", "builtin:", "--input", small("duplicates.csv"), "--on", "name",
                            "--out", (dir / "d.csv").string()});
    REQUIRE(r.code == 0);
    CHECK(r.log.find("survivors") != std::string::npos);
    CHECK(load_table(dir / "d.csv").num_rows() < 8);
  }

  TEST_CASE("a failing command leaves no output") {
    testing::TempDir dir;
    const auto r = run_cli({"merge", "--model", "builtin:", "--left", small("identity_left.csv"), "--right",
                            small("identity_right.csv"), "--on", "nope", "--out",
                            (dir / "out.csv").string()});
    CHECK(r.code == 1);
    CHECK_FALSE(std::filesystem::exists(dir / "out.csv"));
  }

  TEST_CASE("training twice gives identical reports and models") {
    testing::TempDir dir;
    auto args = [&](const std::string& tag) {
      return std::vector<std::string>{
          "train", "--input", (kData / "firm_alias" / "train.csv").string(), "--val",
          (kData / "firm_alias" / "validation.csv").string(), "--cluster-id-col", "cluster_id",
          "--on", "text", "--epochs", "2", "--max-lr", "1e-3", "--hash-buckets", "2048",
          "--embed-dim", "32", "--seed", "4", "--out", (dir / (tag + ".bin")).string(),
          "--report-out", (dir / (tag + ".jsonl")).string()};
    };
    REQUIRE(run_cli(args("a")).code == 0);
    REQUIRE(run_cli(args("b")).code == 0);
    const auto ra = read_text_file(dir / "a.jsonl");
    const auto rb = read_text_file(dir / "b.jsonl");
    CHECK(std::count(ra.begin(), ra.end(), '\n') == 2);
    CHECK(ra.find("a.bin") != std::string::npos);
    CHECK(rb.find("b.bin") != std::string::npos);
    CHECK(read_text_file(dir / "a.bin") == read_text_file(dir / "b.bin"));
  }

  TEST_CASE("tune-threshold from a score column") {
    testing::TempDir dir;
    write_text_file(dir / "s.csv", "score,label\n0.9,1\n0.8,1\n0.3,0\n0.1,0\n");
    const auto r = run_cli({"tune-threshold", "--score-col", "score", "--input", (dir / "s.csv").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("0.55") != std::string::npos);
  }
}
