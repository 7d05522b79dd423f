// Writes the bundled demo corpus: 500 words in 5 topics, 20 dimensions.
// Each topic owns 4 latent axes that share one amplitude per word, so the
// axes inside a topic are uncorrelated but dependent.
//
//   make_demo_data <out-dir>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <numeric>
#include <set>
#include <string>

#include <Eigen/Dense>

#include "icahoc/random.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_demo_data <out-dir>\n";
    return 1;
  }
  const std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);

  constexpr int kWords = 500, kTopics = 5, kAxesPerTopic = 4, kDim = kTopics * kAxesPerTopic;
  const char* topics[kTopics] = {"river", "stone", "music", "trade", "cloud"};
  icahoc::Rng rng(20240601);
  std::exponential_distribution<double> expo(1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);

  Eigen::MatrixXd latent = Eigen::MatrixXd::Zero(kWords, kDim);
  std::vector<std::string> words;
  std::vector<int> topic_of;
  for (int w = 0; w < kWords; ++w) {
    const int t = w % kTopics;
    const double amp = std::exp(0.6 * normal(rng));
    for (int c = 0; c < kDim; ++c) {
      const bool own = c / kAxesPerTopic == t;
      latent(w, c) = (own ? amp * expo(rng) : 0.15 * expo(rng)) - (own ? 0.0 : 0.15);
    }
    char name[32];
    std::snprintf(name, sizeof name, "%s%03d", topics[t], w / kTopics);
    words.emplace_back(name);
    topic_of.push_back(t);
  }
  Eigen::MatrixXd mix(kDim, kDim);
  for (int r = 0; r < kDim; ++r)
    for (int c = 0; c < kDim; ++c) mix(r, c) = unif(rng);
  const Eigen::MatrixXd x = latent * mix;

  std::ofstream vec(dir / "demo.vec");
  vec << kWords << ' ' << kDim << '\n';
  for (int w = 0; w < kWords; ++w) {
    vec << words[w];
    for (int c = 0; c < kDim; ++c) {
      char buf[32];
      std::snprintf(buf, sizeof buf, " %.6f", x(w, c));
      vec << buf;
    }
    vec << '\n';
  }

  // Zipf-like counts over a random rank order.
  std::vector<int> rank(kWords);
  std::iota(rank.begin(), rank.end(), 1);
  icahoc::shuffle_in_place(rank, rng);
  std::ofstream freq(dir / "demo.freq.tsv");
  for (int w = 0; w < kWords; ++w) freq << words[w] << '\t' << static_cast<long>(50000.0 / rank[w]) << '\n';

  std::ofstream clusters(dir / "demo.clusters.tsv");
  for (int w = 0; w < kWords; ++w) clusters << words[w] << '\t' << topic_of[w] << '\n';

  // Gold similarity from the latent rows plus rater noise.
  std::ofstream sim(dir / "demo.sim.tsv");
  sim << "word1\tword2\tscore\n";
  std::set<std::pair<int, int>> seen;
  std::uniform_int_distribution<int> pick(0, kWords - 1);
  while (seen.size() < 300) {
    int a = pick(rng), b = pick(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (!seen.emplace(a, b).second) continue;
    const auto la = latent.row(a), lb = latent.row(b);
    const double cos = la.dot(lb) / (la.norm() * lb.norm());
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 10.0 * (cos + 0.1 * normal(rng)));
    sim << words[a] << '\t' << words[b] << '\t' << buf << '\n';
  }
  return 0;
}
