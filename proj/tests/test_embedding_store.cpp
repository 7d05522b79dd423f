#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "icahoc/embedding_store.hpp"
#include "test_support.hpp"

using namespace icahoc;
using icahoc::testing::TempDir;

namespace {

EmbeddingMatrix parse(const std::string& text) {
  std::istringstream in(text);
  return load_word2vec_text(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

} // namespace

TEST(EmbeddingStore, ParsesMinimalFile) {
  const auto m = parse("2 3\ncat 1 0 0\ndog 0 1 0\n");
  ASSERT_EQ(m.rows(), 2u);
  ASSERT_EQ(m.cols(), 3u);
  EXPECT_EQ(m.vocab, (std::vector<std::string>{"cat", "dog"}));
  EXPECT_EQ(m.vectors(0, 0), 1.0);
  EXPECT_EQ(m.vectors(1, 1), 1.0);
  EXPECT_EQ(m.counts, (std::vector<std::uint64_t>{0, 0}));
}

TEST(EmbeddingStore, ParsesScientificNotationAndTrailingSpace) {
  const auto m = parse("1 2\nx 1.5e-3 -2E+2 \n");
  EXPECT_DOUBLE_EQ(m.vectors(0, 0), 1.5e-3);
  EXPECT_DOUBLE_EQ(m.vectors(0, 1), -200.0);
}

TEST(EmbeddingStore, RejectsRowCountMismatch) {
  EXPECT_NE(error_of("3 3\ncat 1 0 0\ndog 0 1 0\n").find("row count mismatch"), std::string::npos);
  EXPECT_NE(error_of("1 3\ncat 1 0 0\ndog 0 1 0\n").find("row count mismatch"), std::string::npos);
}

TEST(EmbeddingStore, RejectsDuplicateWord) {
  EXPECT_EQ(error_of("2 3\ncat 1 0 0\ncat 1 0 0\n"), "duplicate word: cat");
}

TEST(EmbeddingStore, RejectsWrongArityAndNonFinite) {
  EXPECT_NE(error_of("1 3\ncat 1 0\n").find("expected 3 values"), std::string::npos);
  EXPECT_NE(error_of("1 2\ncat 1 inf\n").find("non-finite"), std::string::npos);
  EXPECT_NE(error_of("1 2\ncat 1 nan\n").find("non-finite"), std::string::npos);
  EXPECT_NE(error_of("1 2\ncat 1 abc\n").find("bad number"), std::string::npos);
}

TEST(EmbeddingStore, WordsMatchByExactBytes) {
  const auto m = parse("2 1\nCat 1\ncat 2\n");
  EXPECT_EQ(m.rows(), 2u);
}

TEST(Frequencies, ParsesCounts) {
  std::istringstream in("the\t1061396\n");
  const auto t = load_frequencies(in);
  EXPECT_EQ(t.counts.at("the"), 1061396u);
  EXPECT_EQ(t.duplicate_warnings, 0u);
}

TEST(Frequencies, RejectsNegativeAndNonInteger) {
  std::istringstream neg("cat\t-5\n");
  try {
    load_frequencies(neg);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("negative count"), std::string::npos);
  }
  std::istringstream frac("cat\t2.5\n");
  EXPECT_THROW(load_frequencies(frac), DataError);
}

TEST(Frequencies, LaterDuplicateWinsWithWarning) {
  std::istringstream in("a\t3\na\t7\n");
  const auto t = load_frequencies(in);
  EXPECT_EQ(t.counts.at("a"), 7u);
  EXPECT_EQ(t.duplicate_warnings, 1u);
}

TEST(Frequencies, MissingEntriesDefaultToZeroUnlessStrict) {
  auto m = parse("2 1\ncat 1\ndog 2\n");
  FrequencyTable t;
  t.counts["cat"] = 5;
  EXPECT_EQ(attach_frequencies(m, t), 1u);
  EXPECT_EQ(m.counts, (std::vector<std::uint64_t>{5, 0}));
  EXPECT_THROW(attach_frequencies(m, t, true), DataError);
}

TEST(NormalizeRows, ThreeFourFive) {
  Eigen::MatrixXd x(1, 2);
  x << 3, 4;
  const auto y = normalize_rows(x);
  EXPECT_NEAR(y(0, 0), 0.6, 1e-12);
  EXPECT_NEAR(y(0, 1), 0.8, 1e-12);
}

TEST(NormalizeRows, ZeroRowNamesWord) {
  auto m = parse("2 2\nok 1 1\nzero 0 0\n");
  try {
    normalize_rows(m);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("zero"), std::string::npos);
  }
}

TEST(NormalizeRows, UnitRowUnchangedAndIdempotent) {
  Eigen::MatrixXd x(1, 2);
  x << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
  EXPECT_LT((normalize_rows(x) - x).cwiseAbs().maxCoeff(), 1e-12);

  icahoc::testing::TestRng rng(3);
  const auto g = icahoc::testing::gaussian_matrix(200, 7, rng);
  const auto once = normalize_rows(g);
  const auto twice = normalize_rows(once);
  EXPECT_LT((once - twice).cwiseAbs().maxCoeff(), 1e-12);
  for (Eigen::Index r = 0; r < once.rows(); ++r) EXPECT_NEAR(once.row(r).norm(), 1.0, 1e-12);
}

TEST(Cache, RoundTripIsBitExact) {
  icahoc::testing::TestRng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    EmbeddingMatrix m;
    const auto n = 1 + trial * 13;
    m.vectors = icahoc::testing::gaussian_matrix(n, 4, rng);
    m.vectors(0, 0) = -0.0;
    m.vectors(0, 1) = 1e-310;  // subnormal
    for (int t = 0; t < n; ++t) {
      m.vocab.push_back("w\xC3\xA9" + std::to_string(t));
      m.counts.push_back(static_cast<std::uint64_t>(rng()));
    }
    std::stringstream buf;
    save_cache(m, buf);
    const auto back = load_cache(buf);
    EXPECT_EQ(back.vocab, m.vocab);
    EXPECT_EQ(back.counts, m.counts);
    ASSERT_EQ(back.vectors.rows(), m.vectors.rows());
    EXPECT_EQ(std::memcmp(back.vectors.data(), m.vectors.data(), sizeof(double) * m.vectors.size()), 0);
  }
}

TEST(Cache, FileRoundTripFromText) {
  TempDir dir;
  const auto txt = dir.write("e.txt", "3 2\na 0.1 0.2\nb -1e-5 3\nc 7 8\n");
  auto m = load_word2vec_text(txt);
  std::istringstream freq("a\t5\nb\t6\nc\t7\n");
  attach_frequencies(m, load_frequencies(freq));
  save_cache(m, dir.file("e.bin"));
  EXPECT_EQ(load_cache(dir.file("e.bin")), m);
}

TEST(Cache, TruncatedFileIsReported) {
  EmbeddingMatrix m;
  m.vectors = Eigen::MatrixXd::Ones(3, 3);
  m.vocab = {"a", "b", "c"};
  m.counts = {1, 2, 3};
  std::stringstream buf;
  save_cache(m, buf);
  const auto bytes = buf.str();
  for (std::size_t cut : {std::size_t{4}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    std::istringstream in(bytes.substr(0, cut));
    try {
      load_cache(in);
      FAIL() << "cut at " << cut;
    } catch (const DataError& e) {
      EXPECT_NE(std::string(e.what()).find("unexpected end of cache"), std::string::npos) << e.what();
    }
  }
}

TEST(Cache, VersionMismatchIsExplicit) {
  EmbeddingMatrix m;
  m.vectors = Eigen::MatrixXd::Ones(1, 1);
  m.vocab = {"a"};
  m.counts = {1};
  std::stringstream buf;
  save_cache(m, buf);
  auto bytes = buf.str();
  bytes[kEmbeddingCacheMagic.size()] = 2;
  std::istringstream in(bytes);
  try {
    load_cache(in);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("version 2"), std::string::npos) << e.what();
  }
  bytes[0] = 'X';
  std::istringstream bad(bytes);
  EXPECT_THROW(load_cache(bad), DataError);
}
