// Regenerates the committed data/ fixtures.
#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "reclink/tabular.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using namespace reclink;

namespace {

Table planted_table(const fixtures::PlantedPartition& p) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < p.texts.size(); ++i) {
    rows.push_back({std::to_string(i), std::to_string(p.truth[i]), p.texts[i]});
  }
  return Table({"row_id", "entity_id", "name"}, std::move(rows));
}

void write(const Table& t, const fs::path& path) {
  write_table(t, path);
  std::cerr << "wrote " << path.string() << " (" << t.num_rows() << " rows)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Writes the synthetic benchmark and example tables"};
  std::string out_dir = "data";
  app.add_option("--out-dir", out_dir, "Destination directory");
  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path root(out_dir);
    fs::create_directories(root / "firm_alias");
    fs::create_directories(root / "planted");
    fs::create_directories(root / "small");

    const auto bench = fixtures::make_alias_benchmark();
    write(fixtures::cluster_rows_table(bench.train), root / "firm_alias" / "train.csv");
    write(fixtures::cluster_rows_table(bench.validation), root / "firm_alias" / "validation.csv");
    write(fixtures::keys_table(bench.test), root / "firm_alias" / "test_keys.csv");
    write(fixtures::queries_table(bench.test), root / "firm_alias" / "test_queries.csv");
    write(fixtures::gold_table(bench.test), root / "firm_alias" / "test_gold.csv");

    write(planted_table(fixtures::make_planted_partition(50, 3, 11)), root / "planted" / "tune.csv");
    write(planted_table(fixtures::make_planted_partition(50, 3, 12)), root / "planted" / "test.csv");

    write(Table({"id", "name"}, {{"1", "Acme Corporation"}, {"2", "Globex Holdings"}}),
          root / "small" / "identity_left.csv");
    write(Table({"id", "name"}, {{"a", "Globex Holdings"}, {"b", "Acme Corporation"}}),
          root / "small" / "identity_right.csv");
    write(Table({"id", "name", "city"},
                {{"1", "Acme Corporation", "Osaka"},
                 {"2", "Acme Corporation.", "Osaka"},
                 {"3", "ACME CORPORATION", "Osaka"},
                 {"4", "Globex Holdings Ltd", "Kobe"},
                 {"5", "Globex Holdings Ltd", "Kobe"},
                 {"6", "Initech Systems", "Nagoya"},
                 {"7", "Umbrella Pharmaceuticals", "Sendai"},
                 {"8", "Umbrella Pharmaceutical", "Sendai"}}),
          root / "small" / "duplicates.csv");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
