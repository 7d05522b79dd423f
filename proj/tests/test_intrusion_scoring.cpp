#include <gtest/gtest.h>

#include "icahoc/intrusion_scoring.hpp"
#include "test_support.hpp"

using namespace icahoc;
namespace t = icahoc::testing;

TEST(ConsistencyScore, ThreeWordHandExample) {
  // a and b are 2 apart; intruder c is 4 from a and 6 from b
  Eigen::MatrixXd top(2, 2), intr(1, 2);
  top << 0, 0, 1.2, -1.6;
  intr << -2.4, 3.2;
  const auto r = consistency_score(top, intr);
  EXPECT_NEAR(r.intra, 2.0, 1e-12);
  EXPECT_NEAR(r.inter, 5.0, 1e-12);
  EXPECT_NEAR(r.score, 2.5, 1e-12);
}

TEST(ConsistencyScore, ConstantDistances) {
  // three top points on an equilateral triangle of side 1, intruders at
  // distance 10 from each vertex along the normal through the centroid
  const double h = std::sqrt(3.0) / 2.0;
  Eigen::MatrixXd top(3, 3);
  top << 0, 0, 0, 1, 0, 0, 0.5, h, 0;
  const Eigen::RowVector3d centroid(0.5, h / 3.0, 0.0);
  const double rc = (top.row(0) - centroid).norm();
  const double z = std::sqrt(100.0 - rc * rc);
  Eigen::MatrixXd intr(2, 3);
  intr.row(0) = centroid + Eigen::RowVector3d(0, 0, z);
  intr.row(1) = centroid - Eigen::RowVector3d(0, 0, z);
  EXPECT_NEAR(consistency_score(top, intr).score, 10.0, 1e-12);
}

TEST(ConsistencyScore, IntrudersOnTopOfTopWords) {
  Eigen::MatrixXd top(3, 1);
  top << 0, 1, 3;
  // intra over ordered pairs: (1 + 3 + 2) * 2 / 6 = 2
  // intruder at 0: (0+1+3)/3; at 1: (1+0+2)/3; at 3: (3+2+0)/3 -> mean 4/3
  const auto r = consistency_score(top, top);
  EXPECT_NEAR(r.intra, 2.0, 1e-12);
  EXPECT_NEAR(r.inter, 4.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.score, 2.0 / 3.0, 1e-12);
}

TEST(ConsistencyScore, ScaleInvariant) {
  t::TestRng rng(1);
  const auto top = t::gaussian_matrix(5, 4, rng);
  const auto intr = t::gaussian_matrix(20, 4, rng);
  const double base = consistency_score(top, intr).score;
  for (double c : {0.1, 10.0}) EXPECT_NEAR(consistency_score(c * top, c * intr).score, base, 1e-12);
}

TEST(ConsistencyScore, DuplicateTopWordsRejected) {
  Eigen::MatrixXd top = Eigen::MatrixXd::Ones(2, 3);
  EXPECT_THROW(consistency_score(top, Eigen::MatrixXd::Zero(1, 3)), DataError);
}

TEST(IntruderPool, HandQuantiles) {
  Eigen::MatrixXd s(4, 2);
  s << 10, 0,
        9, 1,
        1, 9,
        0, 10;
  EXPECT_EQ(intruder_pool(s, 0, 0.5, 0.5), (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(intruder_pool(s, 1, 0.5, 0.5), (std::vector<std::size_t>{0, 1}));
}

TEST(IntruderPool, WordTopEverywhereNeverPooled) {
  Eigen::MatrixXd s(6, 3);
  s << 9, 9, 9,
       5, 0, 1,
       0, 5, 2,
       1, 2, 5,
       2, 1, 0,
       3, 3, 3;
  for (std::size_t a = 0; a < 3; ++a) {
    const auto pool = intruder_pool(s, a, 0.5, 0.34);
    EXPECT_EQ(std::count(pool.begin(), pool.end(), 0u), 0);
  }
}

TEST(IntruderPool, ZeroHighQuantileIsEmpty) {
  Eigen::MatrixXd s(4, 2);
  s << 10, 0, 9, 1, 1, 9, 0, 10;
  try {
    intruder_pool(s, 0, 0.5, 0.0);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("larger quantiles"), std::string::npos);
  }
  EXPECT_THROW(intruder_pool(Eigen::MatrixXd::Ones(4, 1), 0), DataError);
}

TEST(IntruderPool, TiesShareTheBetterRank) {
  Eigen::MatrixXd s(4, 2);
  s << 5, 0,
       5, 0,
       0, 7,
       0, 1;
  // rows 2 and 3 tie at rank 3 on axis 0: 3/4 > 0.5 so both are bottom
  EXPECT_EQ(intruder_pool(s, 0, 0.5, 0.25), (std::vector<std::size_t>{2}));
  // rows 0 and 1 share rank 1 on axis 0 (1/4 <= 0.25), both top there
  EXPECT_EQ(intruder_pool(s, 1, 0.5, 0.25), (std::vector<std::size_t>{0, 1}));
}

namespace {

struct Fixture {
  Eigen::MatrixXd s;
  std::vector<std::string> vocab;
  std::vector<std::uint64_t> counts;
};

Fixture random_fixture(std::size_t n, std::size_t d, std::uint64_t seed) {
  t::TestRng rng(seed);
  Fixture f;
  f.s = t::independent_sources(n, d, rng, false);
  for (std::size_t i = 0; i < n; ++i) {
    f.vocab.push_back("w" + std::to_string(i));
    f.counts.push_back(50 + rng() % 1000);
  }
  return f;
}

} // namespace

TEST(ScoreAxis, SeededAndDeterministic) {
  const auto f = random_fixture(2000, 4, 7);
  IntrusionConfig cfg;
  const auto a = score_axis(f.s, f.vocab, f.counts, 1, cfg, 42);
  const auto b = score_axis(f.s, f.vocab, f.counts, 1, cfg, 42);
  const auto c = score_axis(f.s, f.vocab, f.counts, 1, cfg, 43);
  EXPECT_EQ(a.intruder_rows, b.intruder_rows);
  EXPECT_EQ(a.score, b.score);
  EXPECT_NE(a.intruder_rows, c.intruder_rows);
  EXPECT_EQ(a.intruder_sample.size(), cfg.intruders);
  EXPECT_EQ(a.top_words.size(), cfg.top_k);
  EXPECT_NEAR(a.score, a.inter / a.intra, 1e-12);
  EXPECT_GT(a.intra, 0.0);
}

TEST(ScoreAxis, TopWordsRespectFrequencyAndIntrudersComeFromPool) {
  const auto f = random_fixture(1500, 3, 8);
  IntrusionConfig cfg;
  cfg.min_freq = 500;
  const auto score = score_axis(f.s, f.vocab, f.counts, 0, cfg, 1);
  for (const auto& w : score.top_words) EXPECT_GE(f.counts[std::stoul(w.substr(1))], 500u);
  const auto pool = intruder_pool(f.s, 0, cfg.low_q, cfg.high_q);
  for (auto r : score.intruder_rows) EXPECT_TRUE(std::binary_search(pool.begin(), pool.end(), r));
}

TEST(ScoreAxis, FilteredPool) {
  const auto f = random_fixture(1500, 3, 9);
  IntrusionConfig cfg;
  cfg.filter_pool = true;
  const auto score = score_axis(f.s, f.vocab, f.counts, 2, cfg, 5);
  for (auto r : score.intruder_rows) EXPECT_GE(f.counts[r], cfg.min_freq);
}

TEST(ScoreAxis, ErrorsNameTheAxis) {
  Eigen::MatrixXd s(6, 2);
  s << 3, 0,
       3, 0,
       0, 3,
       0, 2,
       1, 1,
       -1, -1;
  const std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f"};
  IntrusionConfig cfg;
  cfg.top_k = 2;
  cfg.min_freq = 0;
  cfg.high_q = 0.34;
  try {
    score_axis(s, vocab, std::vector<std::uint64_t>(6, 1), 0, cfg, 0);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("axis 0:", 0), 0u) << e.what();
  }
}

TEST(ScoreAllAxes, PerAxisSeedOffsets) {
  const auto f = random_fixture(1000, 3, 10);
  IntrusionConfig cfg;
  const auto all = score_all_axes(f.s, f.vocab, f.counts, cfg, 100);
  ASSERT_EQ(all.size(), 3u);
  for (std::size_t a = 0; a < 3; ++a) {
    EXPECT_EQ(all[a].seed, 100 + a);
    EXPECT_EQ(all[a].score, score_axis(f.s, f.vocab, f.counts, a, cfg, 100 + a).score);
  }
}

TEST(SigmaOrder, SortsDescendingWithStableTies) {
  auto make = [](std::vector<double> v) {
    std::vector<ConsistencyScore> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      ConsistencyScore c;
      c.axis = i;
      c.score = v[i];
      out.push_back(c);
    }
    return out;
  };
  EXPECT_EQ(sigma_order(make({1.2, 3.0, 2.0})).sigma, (std::vector<std::size_t>{1, 2, 0}));
  EXPECT_EQ(sigma_order(make({1.0, 1.0, 1.0})).sigma, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(sigma_order(make({2.0, 5.0, 5.0})).sigma, (std::vector<std::size_t>{1, 2, 0}));
}
