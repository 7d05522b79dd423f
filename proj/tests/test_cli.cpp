#include <gtest/gtest.h>

#include <sstream>

#include "cli_app.hpp"
#include "test_support.hpp"

using icahoc::cli::run_cli;
namespace t = icahoc::testing;
namespace fs = std::filesystem;

namespace {

const std::string kData = ICAHOC_DATA_DIR;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> dirs(const t::TempDir& dir) {
  return {"--cache-dir", dir.file("cache"), "--out", dir.file("out")};
}

// Directory flags go first so a caller's own --out takes precedence.
Run stage(const t::TempDir& dir, std::vector<std::string> args) {
  const auto d = dirs(dir);
  args.insert(args.begin() + 1, d.begin(), d.end());
  return cli(args);
}

void prepare(const t::TempDir& dir, std::uint64_t seed = 1) {
  ASSERT_EQ(stage(dir, {"ingest", "--embeddings", kData + "/demo.vec", "--frequencies", kData + "/demo.freq.tsv"}).code, 0);
  ASSERT_EQ(stage(dir, {"whiten"}).code, 0);
  ASSERT_EQ(stage(dir, {"ica", "--seed", std::to_string(seed)}).code, 0);
}

} // namespace

TEST(Cli, IcaIsByteDeterministic) {
  t::TempDir a, b;
  prepare(a, 5);
  prepare(b, 5);
  EXPECT_EQ(t::read_file(a.file("cache/ica.bin")), t::read_file(b.file("cache/ica.bin")));
  EXPECT_EQ(t::read_file(a.file("cache/ica.prov.json")), t::read_file(b.file("cache/ica.prov.json")));
}

TEST(Cli, MissingUpstreamArtifactNamesProducer) {
  t::TempDir dir;
  const auto r = stage(dir, {"mst"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("run 'hoc' first"), std::string::npos) << r.err;
  prepare(dir);
  ASSERT_EQ(stage(dir, {"hoc"}).code, 0);
  const auto r2 = stage(dir, {"mst"});
  EXPECT_EQ(r2.code, 2);
  EXPECT_NE(r2.err.find("run 'intrusion' first"), std::string::npos) << r2.err;
}

TEST(Cli, ScatterExportSchema) {
  t::TempDir dir;
  prepare(dir);
  ASSERT_EQ(stage(dir, {"export-scatter-data", "--axes", "10,2"}).code, 0);
  std::istringstream csv(t::read_file(dir.file("out/scatter_10_2.csv")));
  std::string line;
  std::size_t comments = 0, rows = 0;
  std::getline(csv, line);
  EXPECT_EQ(line.rfind("# tool: icahoc", 0), 0u);
  while (line.rfind("#", 0) == 0) {
    ++comments;
    std::getline(csv, line);
  }
  EXPECT_EQ(line, "word,s_10,s_2,contribution");
  while (std::getline(csv, line)) {
    ++rows;
    double s10 = 0.0, s2 = 0.0, contribution = 0.0;
    auto fields = icahoc::cli::split_commas(line);
    ASSERT_EQ(fields.size(), 4u);
    s10 = std::stod(fields[1]);
    s2 = std::stod(fields[2]);
    contribution = std::stod(fields[3]);
    EXPECT_GE(contribution, 0.0);
    EXPECT_LE(s10 * s10 + s2 * s2, 1.0 + 1e-9);  // coordinates come from unit rows
  }
  EXPECT_EQ(rows, 500u);
  EXPECT_GT(comments, 4u);
  EXPECT_EQ(stage(dir, {"export-scatter-data", "--axes", "1"}).code, 1);
  EXPECT_EQ(stage(dir, {"export-scatter-data", "--axes", "1,99"}).code, 2);
}

TEST(Cli, ExitCodes) {
  t::TempDir dir;
  EXPECT_EQ(cli({}).code, 1);
  EXPECT_EQ(cli({"bogus"}).code, 1);
  EXPECT_EQ(cli({"hoc", "--nope"}).code, 1);
  EXPECT_EQ(cli({"--help"}).code, 0);
  EXPECT_EQ(stage(dir, {"ingest", "--embeddings", dir.file("absent.vec")}).code, 2);
  prepare(dir);
  // constant gold scores leave the rank correlation undefined
  const auto flat = dir.write("flat.tsv", "river000 river001 1\nstone000 stone001 1\nmusic000 music001 1\n");
  const auto r = stage(dir, {"eval-sim", "--datasets", flat});
  EXPECT_EQ(r.code, 3) << r.err;
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  t::TempDir dir;
  prepare(dir);
  const auto cfg = dir.write("run.cfg", "seed = 9\nbins = 7\n\n[hoc-hist]\nlo = 0.5\n");
  ASSERT_EQ(stage(dir, {"ica", "--config", cfg}).code, 0);
  EXPECT_NE(t::read_file(dir.file("cache/ica.prov.json")).find("\"seed\": 9"), std::string::npos);
  ASSERT_EQ(stage(dir, {"ica", "--config", cfg, "--seed", "4"}).code, 0);
  EXPECT_NE(t::read_file(dir.file("cache/ica.prov.json")).find("\"seed\": 4"), std::string::npos);

  ASSERT_EQ(stage(dir, {"hoc"}).code, 0);
  ASSERT_EQ(stage(dir, {"hoc-hist", "--config", cfg, "--hi", "2.25"}).code, 0);
  const auto hist = t::read_file(dir.file("out/hoc_hist.csv"));
  EXPECT_NE(hist.find("\n0.5,0.75,"), std::string::npos) << hist;
  EXPECT_NE(hist.find(",2.25,"), std::string::npos) << hist;
  EXPECT_EQ(std::count(hist.begin(), hist.end(), '\n') - std::count(hist.begin(), hist.end(), '#'), 8);

  const auto bad = dir.write("bad.cfg", "[hoc-hist]\nnot_an_option = 1\n");
  EXPECT_EQ(stage(dir, {"hoc-hist", "--config", bad}).code, 1);
  EXPECT_EQ(stage(dir, {"hoc-hist", "--config", dir.file("none.cfg")}).code, 1);
}

TEST(Cli, ConfigHashIgnoresDirectoriesButNotSettings) {
  t::TempDir a, b;
  prepare(a);
  prepare(b);
  ASSERT_EQ(stage(a, {"hoc"}).code, 0);
  ASSERT_EQ(stage(b, {"hoc"}).code, 0);
  ASSERT_EQ(stage(a, {"hoc-hist"}).code, 0);
  ASSERT_EQ(stage(b, {"hoc-hist"}).code, 0);
  ASSERT_EQ(stage(b, {"hoc-hist", "--out", b.file("out2"), "--bins", "9"}).code, 0);
  const auto first_lines = [](const std::string& text) { return text.substr(0, text.find("# content")); };
  EXPECT_EQ(first_lines(t::read_file(a.file("out/hoc_hist.csv"))), first_lines(t::read_file(b.file("out/hoc_hist.csv"))));
  EXPECT_NE(first_lines(t::read_file(b.file("out/hoc_hist.csv"))), first_lines(t::read_file(b.file("out2/hoc_hist.csv"))));
}

TEST(Cli, ListParsing) {
  using icahoc::cli::parse_list;
  EXPECT_EQ(parse_list("0,3,5-8", "x"), (std::vector<std::size_t>{0, 3, 5, 6, 7, 8}));
  EXPECT_THROW(parse_list("4-2", "x"), CLI::ValidationError);
  EXPECT_THROW(parse_list("a", "x"), CLI::ValidationError);
  EXPECT_THROW(parse_list(",", "x"), CLI::ValidationError);
}

TEST(Cli, EveryOutputCarriesProvenance) {
  t::TempDir dir;
  prepare(dir);
  const std::vector<std::vector<std::string>> steps{
      {"hoc"}, {"top-words"}, {"contributors"}, {"freq-corr"}, {"hoc-hist"}, {"intrusion", "--min-freq", "50"},
      {"mst"}, {"cluster", "--clusters", "3"}, {"subtree", "--root", "0"},
      {"eval-sim", "--datasets", kData + "/demo.sim.tsv"},
      {"reduce-bench", "--datasets", kData + "/demo.sim.tsv", "--dims", "2,5", "--seeds", "0-1"},
      {"judge-build", "--components", "6", "--ks", "1,2"}, {"judge-mock", "--mode", "coin"}, {"judge-aggregate"},
      {"export-heatmap-data"}, {"export-scatter-data", "--axes", "0,1"}};
  for (const auto& s : steps) {
    const auto r = stage(dir, s);
    ASSERT_EQ(r.code, 0) << s[0] << ": " << r.err;
  }
  std::size_t files = 0;
  for (const auto& root : {"out", "cache"})
    for (const auto& entry : fs::directory_iterator(dir.file(root))) {
      const auto name = entry.path().filename().string();
      if (entry.path().extension() == ".bin") {
        EXPECT_TRUE(fs::exists(entry.path().parent_path() / (entry.path().stem().string() + ".prov.json"))) << name;
        continue;
      }
      const auto text = t::read_file(entry.path().string());
      const bool ok = text.rfind("# tool: icahoc", 0) == 0 || text.rfind("// tool: icahoc", 0) == 0 ||
                      text.rfind("{\"provenance\"", 0) == 0 || text.find("\"tool\": \"icahoc\"") != std::string::npos;
      EXPECT_TRUE(ok) << name;
      ++files;
    }
  EXPECT_GE(files, 20u);
  const auto agg = t::read_file(dir.file("out/judge_aggregate.csv"));
  EXPECT_NE(agg.find("\n1,12,"), std::string::npos) << agg;
}
